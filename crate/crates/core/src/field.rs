//! Dense 2-D fields on an `H x W` grid.
//!
//! Three kinds share one layout: `C` real components per cell, stored
//! cell-major (all components of cell `(i, j)` are contiguous) with cells in
//! row-major order. Grid spacing is 1 throughout.
//!
//! - [`ScalarField`]: one component (images, Poisson right-hand sides).
//! - [`VecField`]: two components, `x` (along a row) then `y` (down a column).
//! - [`TensorField`]: four components `(dx n1, dy n1, dx n2, dy n2)`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Grid dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// A field with `C` real components per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<const C: usize> {
    shape: Shape,
    data: Vec<f64>,
}

pub type ScalarField = Field<1>;
pub type VecField = Field<2>;
pub type TensorField = Field<4>;

impl<const C: usize> Field<C> {
    /// Zero field. Panics on an empty grid.
    pub fn zeros(shape: Shape) -> Self {
        assert!(
            shape.height >= 1 && shape.width >= 1,
            "field dimensions must be positive, got {shape}"
        );
        Self {
            shape,
            data: vec![0.0; shape.cells() * C],
        }
    }

    /// Wraps cell-major component data.
    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.height == 0 || shape.width == 0 {
            return Err(Error::EmptyShape);
        }
        if data.len() != shape.cells() * C {
            return Err(Error::Length {
                expected: shape.cells() * C,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { shape, data })
    }

    /// Builds a field by evaluating `f(i, j)` for every cell.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize) -> [f64; C]) -> Self {
        let mut out = Self::zeros(shape);
        for i in 0..shape.height {
            for j in 0..shape.width {
                out[(i, j)] = f(i, j);
            }
        }
        out
    }

    /// Every cell holds `value`.
    pub fn constant(shape: Shape, value: [f64; C]) -> Self {
        Self::from_fn(shape, |_, _| value)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Iterator over per-cell component arrays in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = &[f64; C]> {
        self.data
            .chunks_exact(C)
            .map(|c| c.try_into().expect("chunk length is C"))
    }

    pub fn cells_mut(&mut self) -> impl Iterator<Item = &mut [f64; C]> {
        self.data
            .chunks_exact_mut(C)
            .map(|c| c.try_into().expect("chunk length is C"))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape<const D: usize>(&self, other: &Field<D>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                found: other.shape,
            });
        }
        Ok(())
    }

    /// Component-wise `self + k * other`.
    pub fn add_scaled(&self, k: f64, other: &Self) -> Self {
        assert_eq!(self.shape, other.shape, "shape mismatch in add_scaled");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + k * b)
            .collect();
        Self {
            shape: self.shape,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape, other.shape, "shape mismatch in sub");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            shape: self.shape,
            data,
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| k * v)
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest per-cell Euclidean magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.cells().map(magnitude).fold(0.0, f64::max)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest per-cell Euclidean magnitude of `self - other`.
    pub fn max_cell_distance(&self, other: &Self) -> f64 {
        assert_eq!(
            self.shape, other.shape,
            "shape mismatch in max_cell_distance"
        );
        self.cells()
            .zip(other.cells())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

impl ScalarField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let w = self.shape.width;
        self.data[i * w + j] = v;
    }

    pub fn from_scalar_fn(shape: Shape, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_fn(shape, |i, j| [f(i, j)])
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

impl<const C: usize> Index<(usize, usize)> for Field<C> {
    type Output = [f64; C];

    fn index(&self, (i, j): (usize, usize)) -> &[f64; C] {
        let k = (i * self.shape.width + j) * C;
        (&self.data[k..k + C])
            .try_into()
            .expect("slice length is C")
    }
}

impl<const C: usize> IndexMut<(usize, usize)> for Field<C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut [f64; C] {
        let k = (i * self.shape.width + j) * C;
        (&mut self.data[k..k + C])
            .try_into()
            .expect("slice length is C")
    }
}

fn magnitude<const C: usize>(c: &[f64; C]) -> f64 {
    c.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `sum over cells and components of a * b`.
pub fn inner<const C: usize>(a: &Field<C>, b: &Field<C>) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// Euclidean (L2) norm over all cells and components.
pub fn norm_l2<const C: usize>(a: &Field<C>) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Isotropic L1 norm: sum over cells of the per-cell Euclidean magnitude.
///
/// For a vector field this is `|v|` summed; for the Jacobian tensor all
/// four components are coupled in one magnitude.
pub fn sum_pointwise_euclid<const C: usize>(a: &Field<C>) -> f64 {
    a.cells().map(magnitude).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random<const C: usize>(shape: Shape, seed: u64) -> Field<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(shape, |_, _| {
            std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn inner_of_zero_is_zero() {
        let s = Shape::new(4, 4);
        let a = random::<2>(s, 1);
        assert_eq!(inner(&VecField::zeros(s), &a).unwrap(), 0.0);
    }

    #[test]
    fn inner_counts_cells() {
        let s = Shape::new(2, 2);
        let ones = ScalarField::constant(s, [1.0]);
        assert_eq!(inner(&ones, &ones).unwrap(), 4.0);
    }

    #[test]
    fn inner_matches_hand_sum() {
        let s = Shape::new(4, 4);
        let a = random::<4>(s, 2);
        let b = random::<4>(s, 3);
        let mut expected = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for c in 0..4 {
                    expected += a[(i, j)][c] * b[(i, j)][c];
                }
            }
        }
        let got = inner(&a, &b).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn inner_rejects_shape_mismatch() {
        let a = ScalarField::zeros(Shape::new(2, 3));
        let b = ScalarField::zeros(Shape::new(3, 2));
        assert!(matches!(inner(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm_l2(&ScalarField::zeros(Shape::new(3, 3))), 0.0);
        let twos = ScalarField::constant(Shape::new(3, 3), [2.0]);
        assert_eq!(norm_l2(&twos), 6.0);

        let a = random::<1>(Shape::new(5, 5), 4);
        let oracle = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm_l2(&a) - oracle).abs() <= 1e-14 * oracle);
    }

    #[test]
    fn pointwise_euclid_examples() {
        let s = Shape::new(2, 2);
        assert_eq!(sum_pointwise_euclid(&VecField::zeros(s)), 0.0);
        assert_eq!(
            sum_pointwise_euclid(&VecField::constant(s, [3.0, 4.0])),
            20.0
        );

        let t = random::<4>(Shape::new(4, 4), 5);
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let c = t[(i, j)];
                oracle += (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]).sqrt();
            }
        }
        assert!((sum_pointwise_euclid(&t) - oracle).abs() <= 1e-13 * oracle);
    }

    #[test]
    fn from_vec_validates() {
        let s = Shape::new(2, 2);
        assert!(VecField::from_vec(s, vec![0.0; 7]).is_err());
        assert!(ScalarField::from_vec(s, vec![0.0, 1.0, f64::NAN, 2.0]).is_err());
        assert!(ScalarField::from_vec(Shape::new(0, 2), vec![]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_field(h: usize, w: usize) -> impl Strategy<Value = VecField> {
            proptest::collection::vec(-10.0f64..10.0, h * w * 2)
                .prop_map(move |d| VecField::from_vec(Shape::new(h, w), d).unwrap())
        }

        proptest! {
            #[test]
            fn inner_symmetric_bilinear(a in vec_field(3, 4), b in vec_field(3, 4), c in vec_field(3, 4), k in -5.0f64..5.0) {
                let ab = inner(&a, &b).unwrap();
                let ba = inner(&b, &a).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
                let lhs = inner(&a.add_scaled(k, &c), &b).unwrap();
                let rhs = ab + k * inner(&c, &b).unwrap();
                let scale = norm_l2(&a) * norm_l2(&b) + k.abs() * norm_l2(&c) * norm_l2(&b);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
            }

            #[test]
            fn norm_squared_is_self_inner(a in vec_field(4, 3)) {
                let n = norm_l2(&a);
                let ii = inner(&a, &a).unwrap();
                prop_assert!((n * n - ii).abs() <= 1e-12 * ii.max(1e-300));
            }

            #[test]
            fn pointwise_euclid_triangle(a in vec_field(3, 3), b in vec_field(3, 3)) {
                let s = a.add_scaled(1.0, &b);
                prop_assert!(sum_pointwise_euclid(&s) <= sum_pointwise_euclid(&a) + sum_pointwise_euclid(&b) + 1e-12);
            }
        }
    }
}
