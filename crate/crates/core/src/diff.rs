//! Finite-difference operators with homogeneous Neumann boundaries.
//!
//! `grad` uses forward differences and sets the component normal to the last
//! row/column to zero. `div` is defined as `-grad^T`: backward differences
//! with the boundary terms truncated, so `<grad u, p> = -<u, div p>` holds
//! exactly (up to round-off). The x component runs along a row (index `j`),
//! the y component down a column (index `i`).

use crate::field::{ScalarField, TensorField, VecField};

/// Forward-difference gradient.
pub fn grad(u: &ScalarField) -> VecField {
    let (h, w) = (u.height(), u.width());
    let mut out = VecField::zeros(u.shape());
    for i in 0..h {
        for j in 0..w {
            let c = u.get(i, j);
            let dx = if j + 1 < w { u.get(i, j + 1) - c } else { 0.0 };
            let dy = if i + 1 < h { u.get(i + 1, j) - c } else { 0.0 };
            out[(i, j)] = [dx, dy];
        }
    }
    out
}

/// Backward-difference divergence, the negative adjoint of [`grad`].
pub fn div(p: &VecField) -> ScalarField {
    let mut out = ScalarField::zeros(p.shape());
    div_pair_into(p.as_slice(), 2, 0, &mut out);
    out
}

/// Gradient of each component of `n`: `(dx n1, dy n1, dx n2, dy n2)`.
pub fn jacobian(n: &VecField) -> TensorField {
    let (h, w) = (n.height(), n.width());
    let mut out = TensorField::zeros(n.shape());
    for i in 0..h {
        for j in 0..w {
            let c = n[(i, j)];
            let [dx1, dx2] = if j + 1 < w {
                let r = n[(i, j + 1)];
                [r[0] - c[0], r[1] - c[1]]
            } else {
                [0.0, 0.0]
            };
            let [dy1, dy2] = if i + 1 < h {
                let d = n[(i + 1, j)];
                [d[0] - c[0], d[1] - c[1]]
            } else {
                [0.0, 0.0]
            };
            out[(i, j)] = [dx1, dy1, dx2, dy2];
        }
    }
    out
}

/// Negative adjoint of [`jacobian`]: component `k` of the result is the
/// divergence of the `k`-th pair of `p`'s components.
pub fn div_tensor(p: &TensorField) -> VecField {
    let shape = p.shape();
    let mut first = ScalarField::zeros(shape);
    let mut second = ScalarField::zeros(shape);
    div_pair_into(p.as_slice(), 4, 0, &mut first);
    div_pair_into(p.as_slice(), 4, 2, &mut second);
    let mut out = VecField::zeros(shape);
    for ((o, a), b) in out.cells_mut().zip(first.as_slice()).zip(second.as_slice()) {
        *o = [*a, *b];
    }
    out
}

/// Neumann 5-point Laplacian, literally `div(grad(u))`.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    div(&grad(u))
}

/// Divergence of the component pair `(base, base + 1)` of cell-major data
/// with `stride` components per cell.
fn div_pair_into(data: &[f64], stride: usize, base: usize, out: &mut ScalarField) {
    let (h, w) = (out.height(), out.width());
    let at = |i: usize, j: usize, c: usize| data[(i * w + j) * stride + base + c];
    for i in 0..h {
        for j in 0..w {
            let px = if j + 1 < w { at(i, j, 0) } else { 0.0 };
            let px_left = if j > 0 { at(i, j - 1, 0) } else { 0.0 };
            let py = if i + 1 < h { at(i, j, 1) } else { 0.0 };
            let py_up = if i > 0 { at(i - 1, j, 1) } else { 0.0 };
            out.set(i, j, (px - px_left) + (py - py_up));
        }
    }
}
