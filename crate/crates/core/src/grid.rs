//! Uniform space and time grids, the field containers living on them, and
//! the trapezoid quadrature used for every L² norm in the crate.
//!
//! Fields are stored time-major: row `n` of a [`SpaceTimeField`] is the
//! spatial slice at `t_n`.

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equidistant nodes on `[x_min, x_max]`, both boundary nodes included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    n: usize,
    x_min: f64,
    x_max: f64,
}

impl SpaceGrid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::config(format!(
                "space grid needs at least 3 nodes, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::config(format!(
                "space grid endpoints must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self { n, x_min, x_max })
    }

    /// `n` nodes on the unit interval.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 0.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n, |i| self.node(i))
    }

    /// Number of interior (non-boundary) nodes.
    pub fn interior_len(&self) -> usize {
        self.n - 2
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.h()
        } else {
            self.h()
        }
    }
}

/// Equidistant time levels `t_n = n·dt` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n: usize,
    t_final: f64,
}

impl TimeGrid {
    pub fn new(n: usize, t_final: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!(
                "time grid needs at least 2 nodes, got {n}"
            )));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        Ok(Self { n, t_final })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.n - 1) as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Index of the last time level.
    pub fn last(&self) -> usize {
        self.n - 1
    }

    pub fn weight(&self, n: usize) -> f64 {
        if n == 0 || n + 1 == self.n {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }
}

/// A function of `x` sampled on a [`SpaceGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    grid: SpaceGrid,
    values: Array1<f64>,
}

impl SpatialField {
    pub fn zeros(grid: SpaceGrid) -> Self {
        Self {
            grid,
            values: Array1::zeros(grid.len()),
        }
    }

    pub fn from_fn(grid: SpaceGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            grid,
            values: Array1::from_shape_fn(grid.len(), |i| f(grid.node(i))),
        }
    }

    pub fn constant(grid: SpaceGrid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn from_values(grid: SpaceGrid, values: Array1<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(format!(
                "spatial field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "spatial field contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> SpaceGrid {
        self.grid
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array1<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: &self.values * c,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_grid(&self, other: &SpatialField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::shape("spatial fields live on different grids"));
        }
        Ok(())
    }

    pub fn sub(&self, other: &SpatialField) -> Result<SpatialField> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: &self.values - &other.values,
        })
    }

    pub fn add(&self, other: &SpatialField) -> Result<SpatialField> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: &self.values + &other.values,
        })
    }
}

/// A function of `(t, x)` on the tensor grid, time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    space: SpaceGrid,
    time: TimeGrid,
    values: Array2<f64>,
}

impl SpaceTimeField {
    pub fn zeros(space: SpaceGrid, time: TimeGrid) -> Self {
        Self {
            space,
            time,
            values: Array2::zeros((time.len(), space.len())),
        }
    }

    pub fn from_fn(space: SpaceGrid, time: TimeGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self {
            space,
            time,
            values: Array2::from_shape_fn((time.len(), space.len()), |(n, i)| {
                f(time.node(n), space.node(i))
            }),
        }
    }

    pub fn from_values(space: SpaceGrid, time: TimeGrid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (time.len(), space.len()) {
            return Err(Error::shape(format!(
                "space-time field has shape {:?}, grids require ({}, {})",
                values.dim(),
                time.len(),
                space.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "space-time field contains non-finite values".into(),
            ));
        }
        Ok(Self {
            space,
            time,
            values,
        })
    }

    /// Repeats a spatial profile at every time level.
    pub fn constant_in_time(time: TimeGrid, profile: &SpatialField) -> Self {
        let space = profile.grid();
        let mut values = Array2::zeros((time.len(), space.len()));
        for mut row in values.rows_mut() {
            row.assign(profile.values());
        }
        Self {
            space,
            time,
            values,
        }
    }

    pub fn space(&self) -> SpaceGrid {
        self.space
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn row(&self, n: usize) -> ArrayView1<'_, f64> {
        self.values.row(n)
    }

    pub fn row_mut(&mut self, n: usize) -> ArrayViewMut1<'_, f64> {
        self.values.row_mut(n)
    }

    /// Copy of the slice at time level `n`.
    pub fn slice_at(&self, n: usize) -> SpatialField {
        SpatialField {
            grid: self.space,
            values: self.values.row(n).to_owned(),
        }
    }

    /// Copy of the slice at `t = T`.
    pub fn terminal(&self) -> SpatialField {
        self.slice_at(self.time.last())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grids(&self, other: &SpaceTimeField) -> bool {
        self.space == other.space && self.time == other.time
    }

    pub fn check_same_grids(&self, other: &SpaceTimeField) -> Result<()> {
        if !self.same_grids(other) {
            return Err(Error::shape("space-time fields live on different grids"));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            space: self.space,
            time: self.time,
            values: &self.values * c,
        }
    }

    pub fn add(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_same_grids(other)?;
        Ok(Self {
            values: &self.values + &other.values,
            ..*self
        })
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_same_grids(other)?;
        Ok(Self {
            values: &self.values - &other.values,
            ..*self
        })
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &SpaceTimeField) -> Result<()> {
        self.check_same_grids(other)?;
        Zip::from(&mut self.values)
            .and(&other.values)
            .for_each(|a, &b| *a += c * b);
        Ok(())
    }
}

/// `∫₀ᵀ f(t, ·) dt` by the composite trapezoid rule over the time levels.
pub fn trapezoid_time_integral(f: &SpaceTimeField) -> SpatialField {
    let time = f.time();
    let mut out = Array1::zeros(f.space().len());
    for (n, row) in f.values().rows().into_iter().enumerate() {
        out.scaled_add(time.weight(n), &row);
    }
    SpatialField {
        grid: f.space(),
        values: out,
    }
}

pub fn inner_space(f: &SpatialField, g: &SpatialField) -> Result<f64> {
    f.check_same_grid(g)?;
    let grid = f.grid();
    Ok(f.values()
        .iter()
        .zip(g.values())
        .enumerate()
        .map(|(i, (a, b))| grid.weight(i) * a * b)
        .sum())
}

pub fn inner_spacetime(f: &SpaceTimeField, g: &SpaceTimeField) -> Result<f64> {
    f.check_same_grids(g)?;
    let (space, time) = (f.space(), f.time());
    let mut total = 0.0;
    for n in 0..time.len() {
        let (a, b) = (f.row(n), g.row(n));
        let row: f64 = (0..space.len())
            .map(|i| space.weight(i) * a[i] * b[i])
            .sum();
        total += time.weight(n) * row;
    }
    Ok(total)
}

pub fn norm_l2_space(g: &SpatialField) -> f64 {
    inner_space(g, g).unwrap_or(0.0).max(0.0).sqrt()
}

pub fn norm_l2_spacetime(f: &SpaceTimeField) -> f64 {
    inner_spacetime(f, f).unwrap_or(0.0).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn paper_grids() -> (SpaceGrid, TimeGrid) {
        (
            SpaceGrid::unit(101).unwrap(),
            TimeGrid::new(51, 0.1).unwrap(),
        )
    }

    #[test]
    fn grid_validation() {
        assert!(SpaceGrid::unit(2).is_err());
        assert!(SpaceGrid::new(5, 1.0, 1.0).is_err());
        assert!(TimeGrid::new(1, 0.1).is_err());
        assert!(TimeGrid::new(5, 0.0).is_err());
        let (s, t) = paper_grids();
        assert_abs_diff_eq!(s.h(), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(t.dt(), 0.002, epsilon = 1e-15);
    }

    #[test]
    fn trapezoid_constant_and_linear() {
        let (s, t) = paper_grids();
        let one = SpaceTimeField::from_fn(s, t, |_, _| 1.0);
        let lin = SpaceTimeField::from_fn(s, t, |tt, _| tt);
        let i1 = trapezoid_time_integral(&one);
        let i2 = trapezoid_time_integral(&lin);
        for i in 0..s.len() {
            assert_abs_diff_eq!(i1.values()[i], 0.1, epsilon = 1e-14);
            assert_abs_diff_eq!(i2.values()[i], 0.005, epsilon = 1e-15);
        }
    }

    #[test]
    fn trapezoid_quadratic_within_error_bound() {
        let (s, t) = paper_grids();
        let sq = SpaceTimeField::from_fn(s, t, |tt, _| tt * tt);
        let exact = 0.1f64.powi(3) / 3.0;
        // composite trapezoid error: T·dt²·max|f''|/12
        let bound = 0.1 * t.dt().powi(2) * 2.0 / 12.0;
        let got = trapezoid_time_integral(&sq);
        for &v in got.values() {
            assert!((v - exact).abs() <= bound * (1.0 + 1e-9));
            assert!((v - exact).abs() > 0.0);
        }
    }

    #[test]
    fn l2_norms() {
        let (s, t) = paper_grids();
        assert_eq!(norm_l2_space(&SpatialField::zeros(s)), 0.0);
        assert_eq!(norm_l2_spacetime(&SpaceTimeField::zeros(s, t)), 0.0);
        assert_abs_diff_eq!(
            norm_l2_space(&SpatialField::constant(s, 1.0)),
            1.0,
            epsilon = 1e-14
        );
        let sine = SpatialField::from_fn(s, |x| (std::f64::consts::PI * x).sin());
        assert!((norm_l2_space(&sine) - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (s, t) = paper_grids();
        let other = SpaceGrid::unit(11).unwrap();
        let a = SpaceTimeField::zeros(s, t);
        let b = SpaceTimeField::zeros(other, t);
        assert!(matches!(inner_spacetime(&a, &b), Err(Error::Shape(_))));
        assert!(SpatialField::from_values(s, Array1::zeros(7)).is_err());
    }

    proptest! {
        #[test]
        fn norm_is_homogeneous(c in -50.0f64..50.0, k in 1usize..4) {
            let (s, t) = paper_grids();
            let f = SpaceTimeField::from_fn(s, t, |tt, x| (k as f64 * x).sin() + tt);
            let lhs = norm_l2_spacetime(&f.scaled(c));
            let rhs = c.abs() * norm_l2_spacetime(&f);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn time_integral_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (s, t) = paper_grids();
            let f = SpaceTimeField::from_fn(s, t, |tt, x| (tt * 30.0).cos() * x);
            let g = SpaceTimeField::from_fn(s, t, |tt, x| tt * tt - x);
            let mut comb = f.scaled(a);
            comb.axpy(b, &g).unwrap();
            let lhs = trapezoid_time_integral(&comb);
            let fi = trapezoid_time_integral(&f);
            let gi = trapezoid_time_integral(&g);
            for i in 0..s.len() {
                let rhs = a * fi.values()[i] + b * gi.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() < 1e-13);
            }
        }
    }
}
