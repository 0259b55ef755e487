//! Orthogonal projection onto discrete gradient fields.
//!
//! `project(n) = grad(L^+ div n)` where `L = div . grad` is the Neumann
//! Laplacian and `L^+` its pseudoinverse on zero-mean fields. `L` is
//! diagonalised by the orthonormal DCT-II basis with eigenvalues
//! `2 cos(pi k / H) + 2 cos(pi l / W) - 4`, so the solve is a forward
//! transform, a division per mode with the constant mode dropped, and an
//! inverse transform. The transforms are applied as dense separable
//! matrix products, which is plenty at the grid sizes this crate targets.

use std::f64::consts::PI;

use crate::diff::{div, grad};
use crate::error::{Error, Result};
use crate::field::{norm_l2, ScalarField, Shape, VecField};

/// Relative tolerance on the mean of a Poisson right-hand side.
pub const ZERO_MEAN_TOL: f64 = 1e-8;

/// Precomputed cosine bases and inverse Laplacian eigenvalues for one grid.
#[derive(Clone, Debug)]
pub struct PoissonPlan {
    shape: Shape,
    // row-major k x i: basis_h[k * h + i] = s_k cos(pi k (i + 1/2) / h)
    basis_h: Vec<f64>,
    basis_w: Vec<f64>,
    inv_eig: Vec<f64>,
}

impl PoissonPlan {
    pub fn new(shape: Shape) -> Self {
        assert!(shape.cells() > 0, "empty grid");
        let (h, w) = (shape.height, shape.width);
        let mut inv_eig = vec![0.0; h * w];
        for k in 0..h {
            for l in 0..w {
                let lambda = Self::eigenvalue_of(shape, k, l);
                if k != 0 || l != 0 {
                    inv_eig[k * w + l] = 1.0 / lambda;
                }
            }
        }
        Self {
            shape,
            basis_h: dct_basis(h),
            basis_w: dct_basis(w),
            inv_eig,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Laplacian eigenvalue of cosine mode `(k, l)`.
    pub fn eigenvalue(&self, k: usize, l: usize) -> f64 {
        Self::eigenvalue_of(self.shape, k, l)
    }

    fn eigenvalue_of(shape: Shape, k: usize, l: usize) -> f64 {
        2.0 * (PI * k as f64 / shape.height as f64).cos()
            + 2.0 * (PI * l as f64 / shape.width as f64).cos()
            - 4.0
    }

    /// Orthonormal 2-D DCT-II coefficients of `u`, row-major over `(k, l)`.
    pub fn forward(&self, u: &ScalarField) -> Vec<f64> {
        let (h, w) = (self.shape.height, self.shape.width);
        let x = u.as_slice();
        let mut tmp = vec![0.0; h * w];
        for i in 0..h {
            let row = &x[i * w..(i + 1) * w];
            for l in 0..w {
                let b = &self.basis_w[l * w..(l + 1) * w];
                tmp[i * w + l] = row.iter().zip(b).map(|(a, c)| a * c).sum();
            }
        }
        let mut out = vec![0.0; h * w];
        for k in 0..h {
            let b = &self.basis_h[k * h..(k + 1) * h];
            let dst = &mut out[k * w..(k + 1) * w];
            for (i, c) in b.iter().enumerate() {
                let src = &tmp[i * w..(i + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        out
    }

    /// Inverse of [`PoissonPlan::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> ScalarField {
        let (h, w) = (self.shape.height, self.shape.width);
        assert_eq!(coeffs.len(), h * w);
        let mut tmp = vec![0.0; h * w];
        for k in 0..h {
            let b = &self.basis_h[k * h..(k + 1) * h];
            let src = &coeffs[k * w..(k + 1) * w];
            for (i, c) in b.iter().enumerate() {
                let dst = &mut tmp[i * w..(i + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        let mut out = vec![0.0; h * w];
        for i in 0..h {
            let src = &tmp[i * w..(i + 1) * w];
            let dst = &mut out[i * w..(i + 1) * w];
            for (l, s) in src.iter().enumerate() {
                let b = &self.basis_w[l * w..(l + 1) * w];
                for (d, c) in dst.iter_mut().zip(b) {
                    *d += s * c;
                }
            }
        }
        ScalarField::from_vec(self.shape, out).expect("transform preserves shape")
    }

    fn check_shape(&self, found: Shape) -> Result<()> {
        if found != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                found,
            });
        }
        Ok(())
    }
}

/// Zero-mean solution `w` of `laplacian(w) = rhs - mean(rhs)`.
///
/// `rhs` must already be zero-mean to within `ZERO_MEAN_TOL * ||rhs||`; in
/// practice it is always an output of `div`.
pub fn poisson_pinv(plan: &PoissonPlan, rhs: &ScalarField) -> Result<ScalarField> {
    plan.check_shape(rhs.shape())?;
    let mean = rhs.mean();
    let norm = norm_l2(rhs);
    if mean.abs() > ZERO_MEAN_TOL * norm {
        return Err(Error::NonZeroMean { mean, norm });
    }
    let mut coeffs = plan.forward(rhs);
    for (c, inv) in coeffs.iter_mut().zip(&plan.inv_eig) {
        *c *= inv;
    }
    Ok(plan.inverse(&coeffs))
}

/// Orthogonal projection of `n` onto gradient fields.
pub fn project(plan: &PoissonPlan, n: &VecField) -> Result<VecField> {
    plan.check_shape(n.shape())?;
    Ok(grad(&poisson_pinv(plan, &div(n))?))
}

fn dct_basis(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let s = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for i in 0..n {
            b[k * n + i] = s * (PI * k as f64 * (i as f64 + 0.5) / nf).cos();
        }
    }
    b
}
