//! The unknown reaction law, sampled on a grid over the range of the state.
//!
//! A [`ReactionCurve`] is evaluated at arbitrary states by clamped linear
//! interpolation. [`SobolevRiesz`] realizes the `H^s` Riesz map used to turn
//! raw L² sensitivities into parameter-space gradients.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::SpaceTimeField;

/// Equidistant nodes on `[u_min, u_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeGrid {
    n: usize,
    u_min: f64,
    u_max: f64,
}

impl RangeGrid {
    pub fn new(n: usize, u_min: f64, u_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!(
                "range grid needs at least 2 nodes, got {n}"
            )));
        }
        if !(u_min.is_finite() && u_max.is_finite() && u_min < u_max) {
            return Err(Error::config(format!(
                "range grid endpoints must satisfy u_min < u_max, got [{u_min}, {u_max}]"
            )));
        }
        Ok(Self { n, u_min, u_max })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn h(&self) -> f64 {
        self.width() / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            return self.u_max;
        }
        self.u_min + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n, |i| self.node(i))
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    /// Interpolation cell and fractional position of `u`, after clamping
    /// to `[u_min, u_max]`.
    #[inline]
    pub fn locate(&self, u: f64) -> (usize, f64) {
        let t = ((u - self.u_min) / self.h()).clamp(0.0, (self.n - 1) as f64);
        let i = (t.floor() as usize).min(self.n - 2);
        (i, t - i as f64)
    }
}

/// Closed-form reaction laws used to manufacture ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinReaction {
    /// `4u(1 − u)`
    Fisher,
    /// `2u / (1 + u + 4u²)`
    LaneEmden,
    /// `4u(1 − u)·exp(−2(1 − u))`
    Zfk,
    /// `u(1 − u)(u − ½)`
    AllenCahn,
    /// `−u|u|²`
    GinzburgLandau,
}

impl BuiltinReaction {
    pub const ALL: [BuiltinReaction; 5] = [
        BuiltinReaction::Fisher,
        BuiltinReaction::LaneEmden,
        BuiltinReaction::Zfk,
        BuiltinReaction::AllenCahn,
        BuiltinReaction::GinzburgLandau,
    ];

    pub fn eval(self, u: f64) -> f64 {
        match self {
            BuiltinReaction::Fisher => 4.0 * u * (1.0 - u),
            BuiltinReaction::LaneEmden => 2.0 * u / (1.0 + u + 4.0 * u * u),
            BuiltinReaction::Zfk => 4.0 * u * (1.0 - u) * (-2.0 * (1.0 - u)).exp(),
            BuiltinReaction::AllenCahn => u * (1.0 - u) * (u - 0.5),
            BuiltinReaction::GinzburgLandau => -u * u.abs() * u.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinReaction::Fisher => "fisher",
            BuiltinReaction::LaneEmden => "lane_emden",
            BuiltinReaction::Zfk => "zfk",
            BuiltinReaction::AllenCahn => "allen_cahn",
            BuiltinReaction::GinzburgLandau => "ginzburg_landau",
        }
    }
}

impl fmt::Display for BuiltinReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinReaction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinReaction::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown reaction '{s}' (expected one of fisher, lane_emden, zfk, allen_cahn, ginzburg_landau)"
                ))
            })
    }
}

/// Samples of a reaction law on a [`RangeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReactionCurve {
    grid: RangeGrid,
    samples: Array1<f64>,
}

impl ReactionCurve {
    pub fn new(grid: RangeGrid, samples: Array1<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::shape(format!(
                "curve has {} samples for a range grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "reaction curve contains non-finite samples".into(),
            ));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: RangeGrid) -> Self {
        Self {
            grid,
            samples: Array1::zeros(grid.len()),
        }
    }

    pub fn from_fn(grid: RangeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            samples: Array1::from_shape_fn(grid.len(), |i| f(grid.node(i))),
        }
    }

    pub fn builtin(law: BuiltinReaction, grid: RangeGrid) -> Self {
        Self::from_fn(grid, |u| law.eval(u))
    }

    pub fn grid(&self) -> RangeGrid {
        self.grid
    }

    pub fn samples(&self) -> &Array1<f64> {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut Array1<f64> {
        &mut self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    /// Clamped linear interpolation at a single state value.
    #[inline]
    pub fn value_at(&self, u: f64) -> f64 {
        let (i, frac) = self.grid.locate(u);
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Pointwise `Π(u(t, x))`.
    pub fn evaluate(&self, u: &SpaceTimeField) -> SpaceTimeField {
        let values = u.values().mapv(|v| self.value_at(v));
        SpaceTimeField::from_values(u.space(), u.time(), values).expect("shape preserved")
    }

    /// Central differences at interior nodes, second-order one-sided
    /// differences at the two endpoints. Needs at least three nodes; with
    /// two, both ends get the single chord slope.
    pub fn derivative_curve(&self) -> ReactionCurve {
        let n = self.grid.len();
        let h = self.grid.h();
        let f = &self.samples;
        let mut d = Array1::zeros(n);
        if n == 2 {
            let slope = (f[1] - f[0]) / h;
            d.fill(slope);
        } else {
            d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
            d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
            for i in 1..n - 1 {
                d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
            }
        }
        ReactionCurve {
            grid: self.grid,
            samples: d,
        }
    }

    pub fn check_same_grid(&self, other: &ReactionCurve) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::shape(
                "reaction curves live on different range grids",
            ));
        }
        Ok(())
    }

    pub fn sub(&self, other: &ReactionCurve) -> Result<ReactionCurve> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            samples: &self.samples - &other.samples,
        })
    }

    pub fn add(&self, other: &ReactionCurve) -> Result<ReactionCurve> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            samples: &self.samples + &other.samples,
        })
    }

    pub fn scaled(&self, c: f64) -> ReactionCurve {
        Self {
            grid: self.grid,
            samples: &self.samples * c,
        }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &ReactionCurve) -> Result<()> {
        self.check_same_grid(other)?;
        self.samples.scaled_add(c, &other.samples);
        Ok(())
    }

    /// Trapezoid L² norm over the range grid.
    pub fn norm_l2(&self) -> f64 {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.weight(i) * v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Serialize, Deserialize)]
struct CurvePoint {
    u: f64,
    value: f64,
}

impl Serialize for ReactionCurve {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let points: Vec<CurvePoint> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &value)| CurvePoint {
                u: self.grid.node(i),
                value,
            })
            .collect();
        points.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ReactionCurve {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let points = Vec::<CurvePoint>::deserialize(deserializer)?;
        if points.len() < 2 {
            return Err(D::Error::custom(
                "a reaction curve needs at least two points",
            ));
        }
        let (u_min, u_max) = (points[0].u, points[points.len() - 1].u);
        let grid = RangeGrid::new(points.len(), u_min, u_max).map_err(D::Error::custom)?;
        let tol = 1e-9 * grid.width();
        for (i, p) in points.iter().enumerate() {
            if (p.u - grid.node(i)).abs() > tol {
                return Err(D::Error::custom(format!(
                    "curve points must be equidistant; point {i} is at u = {}",
                    p.u
                )));
            }
        }
        let samples = points.iter().map(|p| p.value).collect();
        ReactionCurve::new(grid, samples).map_err(D::Error::custom)
    }
}

/// Sobolev exponent of the parameter space `H^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SobolevSpec {
    s: f64,
}

impl SobolevSpec {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 1.0) {
            return Err(Error::config(format!(
                "Sobolev exponent must exceed 1, got {s}"
            )));
        }
        Ok(Self { s })
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }
}

impl Default for SobolevSpec {
    fn default() -> Self {
        Self { s: 1.5 }
    }
}

impl TryFrom<f64> for SobolevSpec {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<SobolevSpec> for f64 {
    fn from(spec: SobolevSpec) -> f64 {
        spec.s
    }
}

/// Fourier multiplier `(1 + ω²)^(−s)` on the mirror-periodic extension of
/// a [`RangeGrid`].
///
/// The curve is extended evenly about both endpoints, which makes it
/// periodic with period `2(u_max − u_min)` without introducing a jump; its
/// discrete Fourier modes are then the cosines `cos(ω_k (u − u_min))` with
/// `ω_k = πk / (u_max − u_min)`, `k = 0..n`. The map is self-adjoint for the
/// trapezoid-weighted inner product on the range grid.
#[derive(Clone, Debug)]
pub struct SobolevRiesz {
    grid: RangeGrid,
    s: f64,
    // basis[[k, i]] = cos(ω_k (u_i − u_min))
    basis: Array2<f64>,
    // ∑_i w_i basis[[k, i]]²
    norms: Array1<f64>,
    multipliers: Array1<f64>,
}

impl SobolevRiesz {
    /// Any `s ≥ 0` is accepted here; `s = 0` is the identity.
    pub fn new(grid: RangeGrid, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::config(format!(
                "Sobolev exponent must be nonnegative, got {s}"
            )));
        }
        let n = grid.len();
        let basis = Array2::from_shape_fn((n, n), |(k, i)| {
            (PI * (k * i) as f64 / (n - 1) as f64).cos()
        });
        let norms = Array1::from_shape_fn(n, |k| {
            if k == 0 || k == n - 1 {
                grid.width()
            } else {
                0.5 * grid.width()
            }
        });
        let multipliers = Array1::from_shape_fn(n, |k| {
            let w = PI * k as f64 / grid.width();
            (1.0 + w * w).powf(-s)
        });
        Ok(Self {
            grid,
            s,
            basis,
            norms,
            multipliers,
        })
    }

    pub fn from_spec(grid: RangeGrid, spec: SobolevSpec) -> Self {
        Self::new(grid, spec.exponent()).expect("validated exponent")
    }

    pub fn grid(&self) -> RangeGrid {
        self.grid
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn frequency(&self, k: usize) -> f64 {
        PI * k as f64 / self.grid.width()
    }

    pub fn multipliers(&self) -> &Array1<f64> {
        &self.multipliers
    }

    /// Cosine-mode normalizations `∑_i w_i cos²(ω_k (u_i − u_min))`.
    pub fn mode_norms(&self) -> &Array1<f64> {
        &self.norms
    }

    /// Cosine coefficients `a_k` with `f = ∑ a_k cos(ω_k (u − u_min))` at the nodes.
    pub fn coefficients(&self, f: &Array1<f64>) -> Array1<f64> {
        let weighted = Array1::from_shape_fn(f.len(), |i| self.grid.weight(i) * f[i]);
        self.basis.dot(&weighted) / &self.norms
    }

    /// Node values of `∑ a_k cos(ω_k (u − u_min))`.
    pub fn synthesize(&self, coeffs: &Array1<f64>) -> Array1<f64> {
        self.basis.t().dot(coeffs)
    }

    pub fn apply(&self, raw: &ReactionCurve) -> Result<ReactionCurve> {
        self.check(raw)?;
        let coeffs = self.coefficients(raw.samples()) * &self.multipliers;
        ReactionCurve::new(self.grid, self.synthesize(&coeffs))
    }

    /// The `H^s` inner product `∑_k ‖c_k‖² (1 + ω_k²)^s a_k(ξ) a_k(η)`.
    pub fn inner(&self, xi: &ReactionCurve, eta: &ReactionCurve) -> Result<f64> {
        self.check(xi)?;
        self.check(eta)?;
        let a = self.coefficients(xi.samples());
        let b = self.coefficients(eta.samples());
        Ok((0..a.len())
            .map(|k| self.norms[k] * a[k] * b[k] / self.multipliers[k])
            .sum())
    }

    pub fn norm(&self, xi: &ReactionCurve) -> Result<f64> {
        Ok(self.inner(xi, xi)?.max(0.0).sqrt())
    }

    fn check(&self, c: &ReactionCurve) -> Result<()> {
        if c.grid() != self.grid {
            return Err(Error::shape("curve grid differs from the Riesz map grid"));
        }
        Ok(())
    }
}

/// `sobolev_riesz(raw, spec)`.
pub fn sobolev_riesz(raw: &ReactionCurve, spec: SobolevSpec) -> Result<ReactionCurve> {
    SobolevRiesz::from_spec(raw.grid(), spec).apply(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SpaceGrid, TimeGrid};
    use proptest::prelude::*;

    fn range() -> RangeGrid {
        RangeGrid::new(50, -1.0, 1.0).unwrap()
    }

    fn node_of(grid: RangeGrid, u: f64) -> usize {
        ((u - grid.u_min()) / grid.h()).round() as usize
    }

    #[test]
    fn builtin_values() {
        assert_eq!(BuiltinReaction::Fisher.eval(0.0), 0.0);
        assert_eq!(BuiltinReaction::Fisher.eval(0.5), 1.0);
        assert!((BuiltinReaction::LaneEmden.eval(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(BuiltinReaction::Zfk.eval(1.0), 0.0);
        assert_eq!(BuiltinReaction::AllenCahn.eval(0.5), 0.0);
        assert_eq!(BuiltinReaction::GinzburgLandau.eval(-2.0), 8.0);
        // curve samples at exact grid nodes
        let g = RangeGrid::new(21, -1.0, 1.0).unwrap();
        let fisher = ReactionCurve::builtin(BuiltinReaction::Fisher, g);
        assert_eq!(fisher.samples()[node_of(g, 0.0)], 0.0);
        assert!((fisher.samples()[node_of(g, 0.5)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn builtin_names_round_trip() {
        for law in BuiltinReaction::ALL {
            assert_eq!(law.name().parse::<BuiltinReaction>().unwrap(), law);
        }
        assert!(matches!(
            "arrhenius".parse::<BuiltinReaction>(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn evaluate_identity_zero_and_clamp() {
        let g = range();
        let id = ReactionCurve::from_fn(g, |u| u);
        let s = SpaceGrid::unit(11).unwrap();
        let t = TimeGrid::new(6, 0.1).unwrap();
        let u = SpaceTimeField::from_fn(s, t, |tt, x| (7.0 * x + 3.0 * tt).sin() * 0.9);
        let out = id.evaluate(&u);
        for (a, b) in out.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let zero = ReactionCurve::zeros(g).evaluate(&u);
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert_eq!(id.value_at(5.0), 1.0);
        assert_eq!(id.value_at(-5.0), -1.0);
    }

    #[test]
    fn evaluate_fisher_within_interpolation_bound() {
        let g = range();
        let fisher = ReactionCurve::builtin(BuiltinReaction::Fisher, g);
        let exact = 4.0 * 0.37 * 0.63;
        let bound = g.h() * g.h() * 8.0 / 8.0;
        let got = fisher.value_at(0.37);
        assert!((got - exact).abs() <= bound);
    }

    #[test]
    fn derivative_curves() {
        let g = range();
        let id = ReactionCurve::from_fn(g, |u| u).derivative_curve();
        assert!(id.samples().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let c = ReactionCurve::from_fn(g, |_| 3.0).derivative_curve();
        assert!(c.samples().iter().all(|v| v.abs() < 1e-12));
        let fisher = ReactionCurve::builtin(BuiltinReaction::Fisher, g).derivative_curve();
        for i in 0..g.len() {
            let u = g.node(i);
            // one-sided second-order differences are also exact for quadratics
            assert!((fisher.samples()[i] - (4.0 - 8.0 * u)).abs() < 1e-11);
        }
    }

    #[test]
    fn riesz_identity_constant_and_single_mode() {
        let g = range();
        let raw = ReactionCurve::from_fn(g, |u| (3.0 * u).sin() + u * u);
        let id = SobolevRiesz::new(g, 0.0).unwrap().apply(&raw).unwrap();
        for (a, b) in id.samples().iter().zip(raw.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
        let spec = SobolevSpec::default();
        let c = sobolev_riesz(&ReactionCurve::from_fn(g, |_| 2.5), spec).unwrap();
        assert!(c.samples().iter().all(|v| (v - 2.5).abs() < 1e-12));

        let w1 = 2.0 * PI / g.width();
        let mode = ReactionCurve::from_fn(g, |u| (w1 * (u - g.u_min())).cos());
        let out = sobolev_riesz(&mode, spec).unwrap();
        let scale = (1.0 + w1 * w1).powf(-1.5);
        for (a, b) in out.samples().iter().zip(mode.samples()) {
            assert!((a - scale * b).abs() < 1e-10);
        }
    }

    #[test]
    fn riesz_and_inner_product_are_consistent() {
        let g = range();
        let r = SobolevRiesz::new(g, 1.5).unwrap();
        let xi = ReactionCurve::from_fn(g, |u| (2.0 * u).cos() - u);
        let eta = ReactionCurve::from_fn(g, |u| u * u * u + 0.3);
        // <S eta, xi>_X equals the trapezoid L² pairing of eta and xi
        let lhs = r.inner(&r.apply(&eta).unwrap(), &xi).unwrap();
        let rhs: f64 = (0..g.len())
            .map(|i| g.weight(i) * eta.samples()[i] * xi.samples()[i])
            .sum();
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        assert!(SobolevSpec::new(1.0).is_err());
        assert!(SobolevSpec::new(1.01).is_ok());
    }

    #[test]
    fn curve_json_round_trip() {
        let g = RangeGrid::new(5, -1.0, 1.0).unwrap();
        let c = ReactionCurve::builtin(BuiltinReaction::LaneEmden, g);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.starts_with("[{\"u\":-1.0,\"value\":"));
        let back: ReactionCurve = serde_json::from_str(&json).unwrap();
        assert_eq!(back.grid(), g);
        for (a, b) in back.samples().iter().zip(c.samples()) {
            assert!((a - b).abs() < 1e-15);
        }
        let bad = r#"[{"u":0.0,"value":1.0},{"u":0.1,"value":1.0},{"u":0.5,"value":1.0}]"#;
        assert!(serde_json::from_str::<ReactionCurve>(bad).is_err());
    }

    fn trapezoid_dot(g: RangeGrid, a: &ReactionCurve, b: &ReactionCurve) -> f64 {
        (0..g.len())
            .map(|i| g.weight(i) * a.samples()[i] * b.samples()[i])
            .sum()
    }

    proptest! {
        #[test]
        fn riesz_is_linear_self_adjoint_contraction(
            a in proptest::collection::vec(-1.0f64..1.0, 50),
            b in proptest::collection::vec(-1.0f64..1.0, 50),
            s in 0.0f64..3.0,
            c in -4.0f64..4.0,
        ) {
            let g = range();
            let r = SobolevRiesz::new(g, s).unwrap();
            let x = ReactionCurve::new(g, Array1::from(a)).unwrap();
            let y = ReactionCurve::new(g, Array1::from(b)).unwrap();
            let sx = r.apply(&x).unwrap();
            let sy = r.apply(&y).unwrap();
            let mut comb = x.scaled(c);
            comb.axpy(1.0, &y).unwrap();
            let lin = r.apply(&comb).unwrap();
            for i in 0..g.len() {
                let expect = c * sx.samples()[i] + sy.samples()[i];
                prop_assert!((lin.samples()[i] - expect).abs() < 1e-11);
            }
            let lhs = trapezoid_dot(g, &sx, &y);
            let rhs = trapezoid_dot(g, &x, &sy);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            prop_assert!(sx.norm_l2() <= x.norm_l2() * (1.0 + 1e-12) + 1e-15);
            prop_assert!(r.multipliers().iter().all(|&m| m <= 1.0 && m > 0.0));
        }

        #[test]
        fn evaluate_is_monotone_in_curve(
            a in proptest::collection::vec(-1.0f64..1.0, 50),
            bump in proptest::collection::vec(0.0f64..1.0, 50),
            u in -1.5f64..1.5,
        ) {
            let g = range();
            let lo = ReactionCurve::new(g, Array1::from(a.clone())).unwrap();
            let hi_samples: Vec<f64> = a.iter().zip(&bump).map(|(x, d)| x + d).collect();
            let hi = ReactionCurve::new(g, Array1::from(hi_samples)).unwrap();
            prop_assert!(hi.value_at(u) >= lo.value_at(u));
        }
    }
}
