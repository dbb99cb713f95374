use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{BflError, Result};
use crate::lattice::grid::Grid;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Values that can live on lattice nodes: real scalars and 3-vectors.
pub trait NodeValue:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const DIM: usize;

    fn zero() -> Self;
    fn dot(&self, other: &Self) -> f64;
    fn component(&self, k: usize) -> f64;
    fn with_component(self, k: usize, value: f64) -> Self;
    fn all_finite(&self) -> bool;

    #[inline]
    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl NodeValue for f64 {
    const DIM: usize = 1;

    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn dot(&self, other: &Self) -> f64 {
        self * other
    }
    #[inline]
    fn component(&self, _k: usize) -> f64 {
        *self
    }
    #[inline]
    fn with_component(self, _k: usize, value: f64) -> Self {
        value
    }
    #[inline]
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl NodeValue for Vec3 {
    const DIM: usize = 3;

    #[inline]
    fn zero() -> Self {
        Vec3::zeros()
    }
    #[inline]
    fn dot(&self, other: &Self) -> f64 {
        nalgebra::Matrix::dot(self, other)
    }
    #[inline]
    fn component(&self, k: usize) -> f64 {
        self[k]
    }
    #[inline]
    fn with_component(mut self, k: usize, value: f64) -> Self {
        self[k] = value;
        self
    }
    #[inline]
    fn all_finite(&self) -> bool {
        self.iter().all(|c| c.is_finite())
    }
}

/// How a window field is continued past its last stored node on either side.
///
/// Periodic grids ignore the extension. Differencing a field changes the
/// natural continuation of the result (see [`Extension::derivative`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Extension {
    /// `v_{-1} = v_0`, `v_{M+1} = v_M`.
    #[default]
    Constant,
    /// Affine continuation through the two end nodes.
    Linear,
    /// Ghost values are zero.
    Zero,
}

impl Extension {
    pub fn derivative(self) -> Self {
        match self {
            Extension::Constant => Extension::Zero,
            Extension::Linear => Extension::Constant,
            Extension::Zero => Extension::Zero,
        }
    }

    /// Continuation of a pointwise product of two fields.
    pub fn combine(self, other: Self) -> Self {
        match (self, other) {
            (a, b) if a == b => a,
            (Extension::Zero, _) | (_, Extension::Zero) => Extension::Zero,
            _ => Extension::Linear,
        }
    }
}

/// A sequence of node values aligned to a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<T>,
    ext: Extension,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vec3>;

impl<T: NodeValue> Field<T> {
    /// Validated constructor: length must match the grid and all entries must be finite.
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BflError::Alignment(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.all_finite()) {
            return Err(BflError::NonFinite { node });
        }
        Ok(Self {
            grid,
            values,
            ext: Extension::default(),
        })
    }

    /// Builds a field from `f(i, x_i)`. The caller is responsible for finiteness.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, f64) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(i, grid.x(i))).collect();
        Self {
            grid,
            values,
            ext: Extension::default(),
        }
    }

    pub fn constant(grid: Grid, value: T) -> Self {
        Self::from_fn(grid, |_, _| value)
    }

    pub(crate) fn raw(grid: Grid, values: Vec<T>, ext: Extension) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, ext }
    }

    pub fn with_extension(mut self, ext: Extension) -> Self {
        self.ext = ext;
        self
    }

    #[inline]
    pub fn extension(&self) -> Extension {
        self.ext
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> T {
        self.values[i]
    }

    /// Value at any lattice index: cyclic on periodic grids, ghost values
    /// from the extension outside a window.
    #[inline]
    pub fn at(&self, i: isize) -> T {
        let n = self.values.len() as isize;
        if self.grid.is_periodic() {
            return self.values[i.rem_euclid(n) as usize];
        }
        if (0..n).contains(&i) {
            return self.values[i as usize];
        }
        match self.ext {
            Extension::Zero => T::zero(),
            Extension::Constant => {
                if i < 0 {
                    self.values[0]
                } else {
                    self.values[(n - 1) as usize]
                }
            }
            Extension::Linear => {
                if i < 0 {
                    let (v0, v1) = (self.values[0], self.values[1]);
                    v0 + (v1 - v0) * (i as f64)
                } else {
                    let (a, b) = (self.values[(n - 2) as usize], self.values[(n - 1) as usize]);
                    b + (b - a) * ((i - n + 1) as f64)
                }
            }
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    pub fn map<U: NodeValue>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field::raw(self.grid, self.values.iter().map(|&v| f(v)).collect(), self.ext)
    }

    pub fn zip_with<U: NodeValue, V: NodeValue>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<Field<V>> {
        self.grid.ensure_same(other.grid())?;
        let values = self
            .values
            .iter()
            .zip(other.values())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Field::raw(self.grid, values, self.ext.combine(other.ext)))
    }

    /// `self + a * other`, keeping the continuation of `self`.
    pub fn axpy(&self, a: f64, other: &Field<T>) -> Result<Field<T>> {
        self.grid.ensure_same(other.grid())?;
        let values = self
            .values
            .iter()
            .zip(other.values())
            .map(|(&x, &y)| x + y * a)
            .collect();
        Ok(Field::raw(self.grid, values, self.ext))
    }

    pub fn scaled(&self, a: f64) -> Field<T> {
        Field::raw(self.grid, self.values.iter().map(|&v| v * a).collect(), self.ext)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.axpy(-1.0, other)
    }

    /// Pointwise product with a scalar field.
    pub fn weighted(&self, g: &ScalarField) -> Result<Field<T>> {
        self.zip_with(g, |v, w| v * w)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.all_finite())
    }
}

impl ScalarField {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl VectorField {
    pub fn cross(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_with(other, |a, b| a.cross(&b))
    }

    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a.dot(&b))
    }

    pub fn norms(&self) -> ScalarField {
        self.map(|v| v.norm())
    }

    /// Largest deviation of `|v_i|` from one.
    pub fn unit_defect(&self) -> f64 {
        self.values.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn normalized(&self) -> VectorField {
        self.map(|v| v / v.norm())
    }
}

/// A vector field whose entries are unit vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitField(VectorField);

impl UnitField {
    pub const DEFAULT_TOL: f64 = 1e-12;

    pub fn new(field: VectorField) -> Result<Self> {
        Self::with_tolerance(field, Self::DEFAULT_TOL)
    }

    pub fn with_tolerance(field: VectorField, tol: f64) -> Result<Self> {
        if let Some(node) = field.first_non_finite() {
            return Err(BflError::NonFinite { node });
        }
        if let Some((node, v)) = field
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| (v.norm() - 1.0).abs() > tol)
        {
            return Err(BflError::Precondition(format!(
                "node {node} has |u| = {} (tolerance {tol})",
                v.norm()
            )));
        }
        Ok(Self(field))
    }

    /// Normalizes every entry; fails on zero vectors.
    pub fn normalize(field: VectorField) -> Result<Self> {
        if let Some(node) = field.values().iter().position(|v| !(v.norm() > 0.0)) {
            return Err(BflError::Precondition(format!("cannot normalize zero vector at node {node}")));
        }
        Ok(Self(field.normalized()))
    }

    pub fn as_field(&self) -> &VectorField {
        &self.0
    }

    pub fn into_field(self) -> VectorField {
        self.0
    }
}

impl std::ops::Deref for UnitField {
    type Target = VectorField;

    fn deref(&self) -> &VectorField {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window() -> Grid {
        Grid::window(0.0, 4, 1.0).unwrap()
    }

    #[test]
    fn ghost_values_follow_extension() {
        let f = Field::new(window(), vec![1.0, 2.0, 4.0, 7.0, 11.0]).unwrap();
        assert_eq!(f.at(-1), 1.0);
        assert_eq!(f.at(5), 11.0);
        let lin = f.clone().with_extension(Extension::Linear);
        assert_eq!(lin.at(-1), 0.0);
        assert_eq!(lin.at(-2), -1.0);
        assert_eq!(lin.at(5), 15.0);
        let zero = f.with_extension(Extension::Zero);
        assert_eq!(zero.at(-1), 0.0);
        assert_eq!(zero.at(6), 0.0);
    }

    #[test]
    fn periodic_indexing_wraps() {
        let g = Grid::periodic(1.0, 4).unwrap();
        let f = Field::new(g, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.at(-1), 3.0);
        assert_eq!(f.at(4), 0.0);
        assert_eq!(f.at(9), 1.0);
    }

    #[test]
    fn constructor_validates() {
        assert!(matches!(
            Field::new(window(), vec![0.0; 4]),
            Err(BflError::Alignment(_))
        ));
        assert!(matches!(
            Field::new(window(), vec![0.0, 1.0, f64::NAN, 0.0, 0.0]),
            Err(BflError::NonFinite { node: 2 })
        ));
    }

    #[test]
    fn unit_field_tolerance() {
        let g = Grid::periodic(1.0, 3).unwrap();
        let ok = Field::constant(g, Vec3::new(0.0, 0.6, 0.8));
        assert!(UnitField::new(ok).is_ok());
        let bad = Field::constant(g, Vec3::new(0.0, 0.6, 0.81));
        assert!(UnitField::new(bad.clone()).is_err());
        let fixed = UnitField::normalize(bad).unwrap();
        assert!(fixed.unit_defect() < 1e-15);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Field::constant(Grid::periodic(1.0, 4).unwrap(), 1.0);
        let b = Field::constant(Grid::periodic(1.0, 5).unwrap(), 1.0);
        assert!(a.axpy(1.0, &b).is_err());
    }
}
