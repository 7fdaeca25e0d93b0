//! The reaction-diffusion model `u̇ − ∇·(a∇u) + bu + Π(u) = φ`, `u(0) = u0`,
//! with zero Dirichlet boundaries: its residual map, observation operators,
//! and solvers used to manufacture data.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    norm_l2_space, norm_l2_spacetime, SpaceGrid, SpaceTimeField, SpatialField, TimeGrid,
};
use crate::ops::{DirichletLaplacian, TriDiagLu};
use crate::reaction::ReactionCurve;

/// Coefficients, source, initial state and grids of the forward model.
#[derive(Clone, Debug)]
pub struct PdeProblem {
    space: SpaceGrid,
    time: TimeGrid,
    a: SpatialField,
    b: SpatialField,
    phi: SpaceTimeField,
    u0: SpatialField,
    lap: DirichletLaplacian,
}

impl PdeProblem {
    pub fn new(
        a: SpatialField,
        b: SpatialField,
        phi: SpaceTimeField,
        u0: SpatialField,
    ) -> Result<Self> {
        let space = u0.grid();
        let time = phi.time();
        if a.grid() != space || b.grid() != space || phi.space() != space {
            return Err(Error::shape(
                "problem coefficients live on different space grids",
            ));
        }
        if a.values().iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::config("diffusivity a must be strictly positive"));
        }
        if !(b.is_finite() && phi.is_finite() && u0.is_finite()) {
            return Err(Error::config("problem data must be finite"));
        }
        let last = space.len() - 1;
        if u0.values()[0].abs() > 1e-12 || u0.values()[last].abs() > 1e-12 {
            return Err(Error::config(
                "initial condition u0 must vanish on the boundary",
            ));
        }
        let lap = DirichletLaplacian::new(space)?;
        Ok(Self {
            space,
            time,
            a,
            b,
            phi,
            u0,
            lap,
        })
    }

    /// `a ≡ 1`, `b ≡ 0` with the given source and initial state.
    pub fn heat(phi: SpaceTimeField, u0: SpatialField) -> Result<Self> {
        let space = u0.grid();
        Self::new(
            SpatialField::constant(space, 1.0),
            SpatialField::zeros(space),
            phi,
            u0,
        )
    }

    pub fn space(&self) -> SpaceGrid {
        self.space
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn a(&self) -> &SpatialField {
        &self.a
    }

    pub fn b(&self) -> &SpatialField {
        &self.b
    }

    pub fn phi(&self) -> &SpaceTimeField {
        &self.phi
    }

    pub fn u0(&self) -> &SpatialField {
        &self.u0
    }

    pub fn laplacian(&self) -> &DirichletLaplacian {
        &self.lap
    }

    /// Same problem with a different source.
    pub fn with_phi(&self, phi: SpaceTimeField) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), phi, self.u0.clone())
    }

    /// Same problem with a different initial state.
    pub fn with_u0(&self, u0: SpatialField) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.phi.clone(), u0)
    }

    pub fn zero_state(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.space, self.time)
    }

    pub(crate) fn check_state(&self, u: &SpaceTimeField) -> Result<()> {
        if u.space() != self.space || u.time() != self.time {
            return Err(Error::shape(
                "state field grids differ from the problem grids",
            ));
        }
        Ok(())
    }

    /// `out = −∇·(a∇g) + b g` on interior nodes, i.e. `a·(−Δ_h g) + b g`.
    pub(crate) fn elliptic_apply(&self, g: &[f64], out: &mut [f64]) {
        self.lap.apply_slice(g, out);
        let (a, b) = (self.a.values(), self.b.values());
        let n = self.space.len();
        for i in 1..n - 1 {
            out[i] = -a[i] * out[i] + b[i] * g[i];
        }
    }

    /// Tridiagonal bands of `I + dt·(a·(−Δ_h) + diag(b + extra))` on interior nodes.
    pub(crate) fn implicit_bands(
        &self,
        dt: f64,
        extra: Option<&[f64]>,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.space.len();
        let m = n - 2;
        let inv_h2 = 1.0 / (self.space.h() * self.space.h());
        let (a, b) = (self.a.values(), self.b.values());
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            let e = extra.map_or(0.0, |e| e[i]);
            diag[k] = 1.0 + dt * (2.0 * a[i] * inv_h2 + b[i] + e);
            sub[k] = -dt * a[i] * inv_h2;
            sup[k] = -dt * a[i] * inv_h2;
        }
        (sub, diag, sup)
    }
}

/// The two components of the residual map: the PDE defect at time levels
/// `1..n_t` (row 0 is unused and kept at zero) and the initial-condition defect.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualPair {
    pub pde: SpaceTimeField,
    pub init: SpatialField,
}

impl ResidualPair {
    pub fn zeros(space: SpaceGrid, time: TimeGrid) -> Self {
        Self {
            pde: SpaceTimeField::zeros(space, time),
            init: SpatialField::zeros(space),
        }
    }

    /// `(Σ_{n≥1} dt·h·|r_n|² + h·|r_0|²)^{1/2}` over interior nodes.
    pub fn norm_l2(&self) -> f64 {
        let space = self.pde.space();
        let time = self.pde.time();
        let (h, dt) = (space.h(), time.dt());
        let n = space.len();
        let pde: f64 = (1..time.len())
            .map(|k| {
                self.pde
                    .row(k)
                    .iter()
                    .take(n - 1)
                    .skip(1)
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum();
        let init: f64 = self
            .init
            .values()
            .iter()
            .take(n - 1)
            .skip(1)
            .map(|v| v * v)
            .sum();
        (dt * h * pde + h * init).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            pde: self.pde.scaled(c),
            init: self.init.scaled(c),
        }
    }

    pub fn sub(&self, other: &ResidualPair) -> Result<ResidualPair> {
        Ok(Self {
            pde: self.pde.sub(&other.pde)?,
            init: self.init.sub(&other.init)?,
        })
    }
}

/// `F(Π, u)`: PDE defect `D_t u − a·Δ_h u + b·u + Π(u) − φ` at levels `n ≥ 1`
/// and initial defect `u(0) − u0`.
pub fn pde_residual(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
) -> Result<ResidualPair> {
    problem.check_state(u)?;
    let (space, time) = (problem.space(), problem.time());
    let n = space.len();
    let inv_dt = 1.0 / time.dt();
    let mut pde = Array2::zeros((time.len(), n));
    let mut ell = vec![0.0; n];
    let uv = u.values();
    let phi = problem.phi().values();
    for k in 1..time.len() {
        let cur = uv.row(k);
        let prev = uv.row(k - 1);
        problem.elliptic_apply(cur.as_slice().expect("contiguous"), &mut ell);
        let mut out = pde.row_mut(k);
        for i in 1..n - 1 {
            out[i] = (cur[i] - prev[i]) * inv_dt + ell[i] + curve.value_at(cur[i]) - phi[[k, i]];
        }
    }
    let mut init = SpatialField::zeros(space);
    for i in 1..n - 1 {
        init.values_mut()[i] = uv[[0, i]] - problem.u0().values()[i];
    }
    Ok(ResidualPair {
        pde: SpaceTimeField::from_values(space, time, pde)?,
        init,
    })
}

/// Semi-implicit Euler, implicit in diffusion and explicit in `b·u` and `Π(u)`:
/// `(I − dt·a·Δ_h) u^{n+1} = u^n + dt·(φ^{n+1} − b·u^n − Π(u^n))`.
pub fn reference_solve(problem: &PdeProblem, curve: &ReactionCurve) -> Result<SpaceTimeField> {
    let (space, time) = (problem.space(), problem.time());
    let n = space.len();
    let dt = time.dt();
    // the b term is explicit, so the implicit operator only carries a·(−Δ_h)
    let inv_h2 = 1.0 / (space.h() * space.h());
    let a = problem.a().values();
    let m = n - 2;
    let sub: Vec<f64> = (0..m).map(|k| -dt * a[k + 1] * inv_h2).collect();
    let diag: Vec<f64> = (0..m).map(|k| 1.0 + 2.0 * dt * a[k + 1] * inv_h2).collect();
    let lu = TriDiagLu::factor(&sub, &diag, &sub)?;

    let b = problem.b().values();
    let phi = problem.phi().values();
    let mut u = Array2::zeros((time.len(), n));
    u.row_mut(0).assign(problem.u0().values());
    let mut rhs = vec![0.0; m];
    for k in 0..time.len() - 1 {
        for (j, r) in rhs.iter_mut().enumerate() {
            let i = j + 1;
            let prev = u[[k, i]];
            *r = prev + dt * (phi[[k + 1, i]] - b[i] * prev - curve.value_at(prev));
        }
        lu.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "reference solver produced non-finite values at time level {}",
                k + 1
            )));
        }
        let mut row = u.row_mut(k + 1);
        row[0] = 0.0;
        row[n - 1] = 0.0;
        for (j, &r) in rhs.iter().enumerate() {
            row[j + 1] = r;
        }
    }
    SpaceTimeField::from_values(space, time, u)
}

/// The exact root of [`pde_residual`]: fully implicit Euler with a Newton
/// solve per time level. Used where a converged discrete state is needed
/// without running the lower-level iteration to machine precision.
pub fn implicit_solve(problem: &PdeProblem, curve: &ReactionCurve) -> Result<SpaceTimeField> {
    let (space, time) = (problem.space(), problem.time());
    let n = space.len();
    let dt = time.dt();
    let grid = curve.grid();
    let phi = problem.phi().values();
    let mut u = Array2::zeros((time.len(), n));
    u.row_mut(0).assign(problem.u0().values());
    u[[0, 0]] = 0.0;
    u[[0, n - 1]] = 0.0;
    let mut ell = vec![0.0; n];
    let mut slope = vec![0.0; n];
    let mut g = vec![0.0; n - 2];
    for k in 1..time.len() {
        let prev = u.row(k - 1).to_owned();
        let mut cur = prev.to_vec();
        let scale = 1.0 + prev.iter().fold(0.0f64, |m, v| m.max(v.abs())) / dt;
        let mut converged = false;
        for _ in 0..60 {
            problem.elliptic_apply(&cur, &mut ell);
            let mut gmax = 0.0f64;
            for i in 1..n - 1 {
                let (c, _) = grid.locate(cur[i]);
                slope[i] = (curve.samples()[c + 1] - curve.samples()[c]) / grid.h();
                let r = (cur[i] - prev[i]) / dt + ell[i] + curve.value_at(cur[i]) - phi[[k, i]];
                g[i - 1] = -r * dt;
                gmax = gmax.max(r.abs());
            }
            if gmax <= 1e-13 * scale {
                converged = true;
                break;
            }
            let (sub, diag, sup) = problem.implicit_bands(dt, Some(&slope));
            let lu = TriDiagLu::factor(&sub, &diag, &sup)?;
            lu.solve_in_place(&mut g);
            for i in 1..n - 1 {
                cur[i] += g[i - 1];
            }
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "implicit solve diverged at time level {k}"
                )));
            }
        }
        if !converged {
            return Err(Error::Divergence(format!(
                "Newton iteration did not converge at time level {k}"
            )));
        }
        u.row_mut(k).assign(&ndarray::ArrayView1::from(&cur));
    }
    SpaceTimeField::from_values(space, time, u)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// The whole space-time state.
    #[default]
    Full,
    /// The state at `t = T`.
    Terminal,
}

impl std::fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObservationMode::Full => "full",
            ObservationMode::Terminal => "terminal",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservationData {
    Full(SpaceTimeField),
    Terminal(SpatialField),
}

impl ObservationData {
    pub fn mode(&self) -> ObservationMode {
        match self {
            ObservationData::Full(_) => ObservationMode::Full,
            ObservationData::Terminal(_) => ObservationMode::Terminal,
        }
    }

    /// L² norm (trapezoid in space, and in time for full data).
    pub fn norm(&self) -> f64 {
        match self {
            ObservationData::Full(f) => norm_l2_spacetime(f),
            ObservationData::Terminal(g) => norm_l2_space(g),
        }
    }

    pub fn sub(&self, other: &ObservationData) -> Result<ObservationData> {
        match (self, other) {
            (ObservationData::Full(a), ObservationData::Full(b)) => {
                Ok(ObservationData::Full(a.sub(b)?))
            }
            (ObservationData::Terminal(a), ObservationData::Terminal(b)) => {
                Ok(ObservationData::Terminal(a.sub(b)?))
            }
            _ => Err(Error::shape("observation modes differ")),
        }
    }

    pub fn scaled(&self, c: f64) -> ObservationData {
        match self {
            ObservationData::Full(f) => ObservationData::Full(f.scaled(c)),
            ObservationData::Terminal(g) => ObservationData::Terminal(g.scaled(c)),
        }
    }

    /// `L u` for the mode of `self`.
    pub fn observe_like(&self, u: &SpaceTimeField) -> ObservationData {
        match self {
            ObservationData::Full(_) => ObservationData::Full(u.clone()),
            ObservationData::Terminal(_) => ObservationData::Terminal(u.terminal()),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            ObservationData::Full(f) => {
                out.push_str("t,x,value\n");
                for k in 0..f.time().len() {
                    let t = f.time().node(k);
                    for i in 0..f.space().len() {
                        let _ = writeln!(out, "{},{},{}", t, f.space().node(i), f.values()[[k, i]]);
                    }
                }
            }
            ObservationData::Terminal(g) => {
                out.push_str("x,value\n");
                for i in 0..g.grid().len() {
                    let _ = writeln!(out, "{},{}", g.grid().node(i), g.values()[i]);
                }
            }
        }
        out
    }
}

/// Observed data `y^δ` together with its noise level `δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub data: ObservationData,
    pub noise_level: f64,
}

impl Observation {
    pub fn mode(&self) -> ObservationMode {
        self.data.mode()
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    /// `L u − y^δ`.
    pub fn residual(&self, u: &SpaceTimeField) -> Result<ObservationData> {
        self.data.observe_like(u).sub(&self.data)
    }

    /// `‖L u − y^δ‖`.
    pub fn misfit(&self, u: &SpaceTimeField) -> Result<f64> {
        Ok(self.residual(u)?.norm())
    }
}

/// Noise-free observation `L u`.
pub fn observe(u: &SpaceTimeField, mode: ObservationMode) -> Observation {
    let data = match mode {
        ObservationMode::Full => ObservationData::Full(u.clone()),
        ObservationMode::Terminal => ObservationData::Terminal(u.terminal()),
    };
    Observation {
        data,
        noise_level: 0.0,
    }
}

/// Adds seeded Gaussian noise on interior nodes, rescaled so that
/// `‖y^δ − y‖ = δ‖y‖` holds exactly.
pub fn add_noise(obs: &Observation, delta: f64, seed: u64) -> Result<Observation> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::config(format!(
            "noise level must be nonnegative, got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(Observation {
            data: obs.data.clone(),
            noise_level: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let noise = match &obs.data {
        ObservationData::Full(f) => {
            let n = f.space().len();
            let mut e = SpaceTimeField::zeros(f.space(), f.time());
            for k in 0..f.time().len() {
                for i in 1..n - 1 {
                    e.values_mut()[[k, i]] = draw();
                }
            }
            ObservationData::Full(e)
        }
        ObservationData::Terminal(g) => {
            let n = g.grid().len();
            let mut e = SpatialField::zeros(g.grid());
            for i in 1..n - 1 {
                e.values_mut()[i] = draw();
            }
            ObservationData::Terminal(e)
        }
    };
    let target = delta * obs.data.norm();
    let raw = noise.norm();
    let scale = if raw > 0.0 { target / raw } else { 0.0 };
    let noisy = match (&obs.data, noise.scaled(scale)) {
        (ObservationData::Full(y), ObservationData::Full(e)) => ObservationData::Full(y.add(&e)?),
        (ObservationData::Terminal(y), ObservationData::Terminal(e)) => {
            ObservationData::Terminal(y.add(&e)?)
        }
        _ => unreachable!("noise drawn in the observation's mode"),
    };
    Ok(Observation {
        data: noisy,
        noise_level: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::{BuiltinReaction, RangeGrid};
    use std::f64::consts::PI;

    fn grids(nx: usize, nt: usize) -> (SpaceGrid, TimeGrid) {
        (
            SpaceGrid::unit(nx).unwrap(),
            TimeGrid::new(nt, 0.1).unwrap(),
        )
    }

    fn range() -> RangeGrid {
        RangeGrid::new(50, -1.0, 1.0).unwrap()
    }

    fn sine_problem(nx: usize, nt: usize) -> PdeProblem {
        let (s, t) = grids(nx, nt);
        PdeProblem::heat(
            SpaceTimeField::zeros(s, t),
            SpatialField::from_fn(s, |x| (PI * x).sin()),
        )
        .unwrap()
    }

    #[test]
    fn problem_validation() {
        let (s, t) = grids(11, 5);
        let phi = SpaceTimeField::zeros(s, t);
        let u0 = SpatialField::from_fn(s, |x| x); // nonzero at x = 1
        assert!(PdeProblem::heat(phi.clone(), u0).is_err());
        let bad_a = SpatialField::constant(s, 0.0);
        assert!(
            PdeProblem::new(bad_a, SpatialField::zeros(s), phi, SpatialField::zeros(s)).is_err()
        );
    }

    #[test]
    fn zero_everything_gives_zero_residual_and_state() {
        let (s, t) = grids(21, 11);
        let p = PdeProblem::heat(SpaceTimeField::zeros(s, t), SpatialField::zeros(s)).unwrap();
        // odd node count so that u = 0 is a node and Π(0) = 0 exactly
        let fisher = ReactionCurve::builtin(
            BuiltinReaction::Fisher,
            RangeGrid::new(51, -1.0, 1.0).unwrap(),
        );
        let r = pde_residual(&p, &fisher, &p.zero_state()).unwrap();
        assert_eq!(r.norm_l2(), 0.0);
        let u = reference_solve(&p, &fisher).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_is_affine_in_phi_and_u0() {
        let p = sine_problem(31, 11);
        let curve = ReactionCurve::builtin(BuiltinReaction::Zfk, range());
        let u =
            SpaceTimeField::from_fn(p.space(), p.time(), |t, x| (1.0 - t) * (PI * x).sin() * 0.7);
        let base = pde_residual(&p, &curve, &u).unwrap();
        let doubled = p
            .with_phi(
                p.phi()
                    .add(&SpaceTimeField::from_fn(p.space(), p.time(), |t, x| t + x))
                    .unwrap(),
            )
            .unwrap();
        let r2 = pde_residual(&doubled, &curve, &u).unwrap();
        let diff = base.sub(&r2).unwrap();
        let n = p.space().len();
        for k in 1..p.time().len() {
            for i in 1..n - 1 {
                let expect = p.time().node(k) + p.space().node(i);
                assert!((diff.pde.values()[[k, i]] - expect).abs() < 1e-12);
            }
        }
        assert_eq!(diff.init.values().iter().map(|v| v.abs()).sum::<f64>(), 0.0);
    }

    #[test]
    fn heat_kernel_decay() {
        let p = sine_problem(101, 51);
        let u = reference_solve(&p, &ReactionCurve::zeros(range())).unwrap();
        let exact =
            SpatialField::from_fn(p.space(), |x| (-PI * PI * 0.1f64).exp() * (PI * x).sin());
        let rel = norm_l2_space(&u.terminal().sub(&exact).unwrap()) / norm_l2_space(&exact);
        assert!(rel < 0.02, "relative error {rel}");
    }

    fn manufactured_error(nx: usize, nt: usize) -> f64 {
        let (s, t) = grids(nx, nt);
        let fisher = BuiltinReaction::Fisher;
        let exact = |tt: f64, x: f64| (-tt).exp() * (PI * x).sin();
        let phi = SpaceTimeField::from_fn(s, t, |tt, x| {
            (PI * PI - 1.0) * exact(tt, x) + fisher.eval(exact(tt, x))
        });
        let p = PdeProblem::heat(phi, SpatialField::from_fn(s, |x| exact(0.0, x))).unwrap();
        // the range grid is fine enough that interpolation error is negligible
        let curve = ReactionCurve::builtin(fisher, RangeGrid::new(4001, -1.0, 1.0).unwrap());
        let u = reference_solve(&p, &curve).unwrap();
        let truth = SpaceTimeField::from_fn(s, t, exact);
        norm_l2_spacetime(&u.sub(&truth).unwrap())
    }

    #[test]
    fn manufactured_solution_converges_first_order() {
        // h² and dt both halve between the two grids
        let coarse = manufactured_error(71, 26);
        let fine = manufactured_error(100, 51);
        let ratio = coarse / fine;
        assert!((1.7..=2.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn residual_of_reference_solution_is_first_order() {
        let res = |nx: usize, nt: usize| {
            let p = sine_problem(nx, nt);
            let curve = ReactionCurve::builtin(BuiltinReaction::Fisher, range());
            let u = reference_solve(&p, &curve).unwrap();
            pde_residual(&p, &curve, &u).unwrap().norm_l2()
        };
        let r1 = res(71, 26);
        let r2 = res(100, 51);
        assert!(r1 < 0.1);
        let ratio = r1 / r2;
        assert!((1.6..=2.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn implicit_solve_is_a_root() {
        let p = sine_problem(51, 21);
        let curve = ReactionCurve::builtin(BuiltinReaction::LaneEmden, range());
        let u = implicit_solve(&p, &curve).unwrap();
        assert!(pde_residual(&p, &curve, &u).unwrap().norm_l2() < 1e-11);
    }

    #[test]
    fn noise_has_exact_relative_level() {
        let p = sine_problem(41, 21);
        let u = reference_solve(
            &p,
            &ReactionCurve::builtin(BuiltinReaction::Fisher, range()),
        )
        .unwrap();
        for mode in [ObservationMode::Full, ObservationMode::Terminal] {
            let y = observe(&u, mode);
            assert_eq!(add_noise(&y, 0.0, 3).unwrap().data, y.data);
            for (delta, seed) in [(0.01, 1u64), (0.04, 7), (0.3, 123)] {
                let noisy = add_noise(&y, delta, seed).unwrap();
                let rel = noisy.data.sub(&y.data).unwrap().norm() / y.norm();
                assert!((rel - delta).abs() < 1e-12);
                assert_eq!(noisy.noise_level, delta);
                assert_eq!(add_noise(&y, delta, seed).unwrap(), noisy);
            }
            assert!(matches!(add_noise(&y, -0.1, 0), Err(Error::Config(_))));
        }
        let zero = observe(&p.zero_state(), ObservationMode::Terminal);
        assert!(
            matches!(&zero.data, ObservationData::Terminal(g) if g.values().iter().all(|&v| v == 0.0))
        );
    }

    #[test]
    fn observation_csv_headers() {
        let p = sine_problem(5, 3);
        let y = observe(&p.zero_state(), ObservationMode::Full)
            .data
            .to_csv();
        assert!(y.starts_with("t,x,value\n"));
        assert_eq!(y.lines().count(), 1 + 15);
        let y = observe(&p.zero_state(), ObservationMode::Terminal)
            .data
            .to_csv();
        assert!(y.starts_with("x,value\n"));
    }
}
