//! The lower level: Landweber iteration on the PDE residual `F(Π, ·)` for a
//! fixed reaction curve, with the exact discrete adjoint of its linearization.
//!
//! Geometry. Residuals `r = (r_pde, r_init)` are measured in the dual norm
//! `‖r‖²_Y = Σ_{n≥1} dt·h⟨r_n, A⁻¹r_n⟩ + h|r_init|²`, where `A = −Δ_h`.
//! States are measured in one of two norms (see [`LowerMetric`]); the
//! adjoint is then `M_X⁻¹ Jᵀ M_Y`, the transpose of the discrete Jacobian
//! `J` between those two Gram matrices. It is exact to round-off by
//! construction rather than a discretized continuous adjoint.

use std::cell::Cell;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{pde_residual, PdeProblem, ResidualPair};
use crate::grid::{SpaceGrid, SpaceTimeField, SpatialField, TimeGrid};
use crate::ops::DirichletBiLaplacian;
use crate::reaction::ReactionCurve;
use crate::stopping::{lower_should_stop, StoppingRule};

/// Norm on the state space used to turn `Jᵀ` into a gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerMetric {
    /// `‖u‖²_U = Σ_n w_n·h⟨u_n, A u_n⟩` (no time derivative). The adjoint is a
    /// spatial elliptic solve per time level, but `J` is badly conditioned in
    /// this pairing (the time derivative is unbounded), so Landweber crawls.
    Elliptic,
    /// `‖u‖²_V = ‖u‖²_U + Σ_{n≥1} dt·h⟨D_t u_n, A⁻¹ D_t u_n⟩`. The adjoint is a
    /// bi-Laplacian wave equation; `J` is then close to an isometry.
    #[default]
    Wave,
}

impl std::fmt::Display for LowerMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LowerMetric::Elliptic => "elliptic",
            LowerMetric::Wave => "wave",
        })
    }
}

/// Precomputed Gram operator of a [`LowerMetric`] on fixed grids.
#[derive(Clone, Debug)]
pub struct StateMetric {
    kind: LowerMetric,
    space: SpaceGrid,
    time: TimeGrid,
    problem_lap: crate::ops::DirichletLaplacian,
    // Wave only: generalized eigenvectors of (K, W), columns W-orthonormal,
    // and one shifted bi-Laplacian per time mode.
    modes: Option<Array2<f64>>,
    solvers: Vec<DirichletBiLaplacian>,
}

impl StateMetric {
    pub fn new(space: SpaceGrid, time: TimeGrid, kind: LowerMetric) -> Result<Self> {
        let problem_lap = crate::ops::DirichletLaplacian::new(space)?;
        let (modes, solvers) = match kind {
            LowerMetric::Elliptic => (None, Vec::new()),
            LowerMetric::Wave => {
                let nt = time.len();
                let dt = time.dt();
                // K = dt·DᵀD for the backward difference D, W = trapezoid weights
                let w: Vec<f64> = (0..nt).map(|n| time.weight(n)).collect();
                let mut k = DMatrix::<f64>::zeros(nt, nt);
                for n in 1..nt {
                    k[(n, n)] += 1.0 / dt;
                    k[(n - 1, n - 1)] += 1.0 / dt;
                    k[(n, n - 1)] -= 1.0 / dt;
                    k[(n - 1, n)] -= 1.0 / dt;
                }
                let scaled =
                    DMatrix::<f64>::from_fn(nt, nt, |i, j| k[(i, j)] / (w[i] * w[j]).sqrt());
                let eig = SymmetricEigen::new(scaled);
                let q = Array2::from_shape_fn((nt, nt), |(i, j)| {
                    eig.eigenvectors[(i, j)] / w[i].sqrt()
                });
                let solvers = eig
                    .eigenvalues
                    .iter()
                    .map(|&lam: &f64| DirichletBiLaplacian::with_shift(space, lam.max(0.0)))
                    .collect::<Result<Vec<_>>>()?;
                (Some(q), solvers)
            }
        };
        Ok(Self {
            kind,
            space,
            time,
            problem_lap,
            modes,
            solvers,
        })
    }

    pub fn for_problem(problem: &PdeProblem, kind: LowerMetric) -> Result<Self> {
        Self::new(problem.space(), problem.time(), kind)
    }

    pub fn kind(&self) -> LowerMetric {
        self.kind
    }

    fn check(&self, f: &SpaceTimeField) -> Result<()> {
        if f.space() != self.space || f.time() != self.time {
            return Err(Error::shape("field grids differ from the metric grids"));
        }
        Ok(())
    }

    /// `A g` for `A = −Δ_h`, interior rows only.
    fn stiff(&self, g: &[f64], out: &mut [f64]) {
        self.problem_lap.apply_slice(g, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    /// `A⁻¹ g` in place.
    fn stiff_inv(&self, g: &mut [f64]) {
        g[0] = 0.0;
        let n = g.len();
        g[n - 1] = 0.0;
        self.problem_lap.solve_slice(g);
        g.iter_mut().for_each(|v| *v = -*v);
    }

    /// The state inner product `⟨f, g⟩_X`.
    pub fn inner(&self, f: &SpaceTimeField, g: &SpaceTimeField) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        let (nx, nt) = (self.space.len(), self.time.len());
        let (h, dt) = (self.space.h(), self.time.dt());
        let (fv, gv) = (f.values(), g.values());
        let mut ag = vec![0.0; nx];
        let mut total = 0.0;
        for n in 0..nt {
            self.stiff(gv.row(n).as_slice().expect("contiguous"), &mut ag);
            let dot: f64 = (1..nx - 1).map(|i| fv[[n, i]] * ag[i]).sum();
            total += self.time.weight(n) * h * dot;
        }
        if self.kind == LowerMetric::Wave {
            let mut dg = vec![0.0; nx];
            for n in 1..nt {
                for i in 0..nx {
                    dg[i] = (gv[[n, i]] - gv[[n - 1, i]]) / dt;
                }
                self.stiff_inv(&mut dg);
                let dot: f64 = (1..nx - 1)
                    .map(|i| (fv[[n, i]] - fv[[n - 1, i]]) / dt * dg[i])
                    .sum();
                total += dt * h * dot;
            }
        }
        Ok(total)
    }

    pub fn norm(&self, f: &SpaceTimeField) -> Result<f64> {
        Ok(self.inner(f, f)?.max(0.0).sqrt())
    }

    /// Solves `M z = rhs` for the Gram matrix `M` of the metric, where `rhs`
    /// is a Euclidean covector (interior entries only are read).
    pub fn riesz(&self, rhs: &Array2<f64>) -> Array2<f64> {
        let (nx, nt) = (self.space.len(), self.time.len());
        let h = self.space.h();
        match &self.modes {
            None => {
                let mut z = rhs.clone();
                for n in 0..nt {
                    let mut row = z.row_mut(n);
                    let slice = row.as_slice_mut().expect("contiguous");
                    self.stiff_inv(slice);
                    let c = 1.0 / (self.time.weight(n) * h);
                    slice.iter_mut().for_each(|v| *v *= c);
                }
                z
            }
            Some(q) => {
                // (W⊗A + K⊗A⁻¹)·h z = rhs  ⇔  (A² + λ_q) ẑ_q = [Qᵀ A rhs / h]_q, z = Q ẑ
                let mut arhs = Array2::zeros((nt, nx));
                let mut buf = vec![0.0; nx];
                for n in 0..nt {
                    let mut src = rhs.row(n).to_vec();
                    src[0] = 0.0;
                    src[nx - 1] = 0.0;
                    self.stiff(&src, &mut buf);
                    for i in 0..nx {
                        arhs[[n, i]] = buf[i] / h;
                    }
                }
                let mut hat = q.t().dot(&arhs);
                for (m, solver) in self.solvers.iter().enumerate() {
                    let mut row = hat.row_mut(m);
                    solver.solve_slice(row.as_slice_mut().expect("contiguous"));
                }
                q.dot(&hat)
            }
        }
    }
}

/// Dual inner product on residual pairs, `⟨r, s⟩_Y`.
pub fn residual_inner(problem: &PdeProblem, r: &ResidualPair, s: &ResidualPair) -> f64 {
    let (nx, nt) = (problem.space().len(), problem.time().len());
    let (h, dt) = (problem.space().h(), problem.time().dt());
    let mut buf = vec![0.0; nx];
    let mut total = 0.0;
    for n in 1..nt {
        buf.copy_from_slice(s.pde.row(n).as_slice().expect("contiguous"));
        neg_solve(problem, &mut buf);
        total += dt
            * h
            * (1..nx - 1)
                .map(|i| r.pde.values()[[n, i]] * buf[i])
                .sum::<f64>();
    }
    let (ri, si) = (r.init.values(), s.init.values());
    total + h * (1..nx - 1).map(|i| ri[i] * si[i]).sum::<f64>()
}

/// `‖r‖_Y`, the residual norm the lower level decreases.
pub fn residual_norm(problem: &PdeProblem, r: &ResidualPair) -> f64 {
    residual_inner(problem, r, r).max(0.0).sqrt()
}

// A⁻¹ = (−Δ_h)⁻¹ in place, boundary entries ignored.
fn neg_solve(problem: &PdeProblem, g: &mut [f64]) {
    let n = g.len();
    g[0] = 0.0;
    g[n - 1] = 0.0;
    problem.laplacian().solve_slice(g);
    g.iter_mut().for_each(|v| *v = -*v);
}

/// `J = F_u(Π, u)` frozen at a state: `Π′(u)` sampled once.
#[derive(Clone, Debug)]
pub struct Linearization<'a> {
    problem: &'a PdeProblem,
    dpi: Array2<f64>,
}

impl<'a> Linearization<'a> {
    pub fn new(problem: &'a PdeProblem, curve: &ReactionCurve, u: &SpaceTimeField) -> Result<Self> {
        problem.check_state(u)?;
        let d = curve.derivative_curve();
        Ok(Self {
            problem,
            dpi: u.values().mapv(|v| d.value_at(v)),
        })
    }

    /// Uses an explicit multiplier field in place of `Π′(u)`.
    pub fn with_multiplier(problem: &'a PdeProblem, dpi: Array2<f64>) -> Result<Self> {
        let shape = (problem.time().len(), problem.space().len());
        if dpi.dim() != shape {
            return Err(Error::shape("multiplier field has the wrong shape"));
        }
        Ok(Self { problem, dpi })
    }

    pub fn multiplier(&self) -> &Array2<f64> {
        &self.dpi
    }

    /// `J h`.
    pub fn apply(&self, hf: &SpaceTimeField) -> Result<ResidualPair> {
        self.problem.check_state(hf)?;
        let p = self.problem;
        let (space, time) = (p.space(), p.time());
        let nx = space.len();
        let inv_dt = 1.0 / time.dt();
        let hv = hf.values();
        let mut pde = Array2::zeros((time.len(), nx));
        let mut ell = vec![0.0; nx];
        for n in 1..time.len() {
            p.elliptic_apply(hv.row(n).as_slice().expect("contiguous"), &mut ell);
            for i in 1..nx - 1 {
                pde[[n, i]] =
                    (hv[[n, i]] - hv[[n - 1, i]]) * inv_dt + ell[i] + self.dpi[[n, i]] * hv[[n, i]];
            }
        }
        let mut init = SpatialField::zeros(space);
        for i in 1..nx - 1 {
            init.values_mut()[i] = hv[[0, i]];
        }
        Ok(ResidualPair {
            pde: SpaceTimeField::from_values(space, time, pde)?,
            init,
        })
    }

    /// Euclidean transpose `Jᵀ(s, g)` of [`Linearization::apply`].
    fn transpose(&self, s: &Array2<f64>, g: &Array1<f64>) -> Array2<f64> {
        let p = self.problem;
        let (nx, nt) = (p.space().len(), p.time().len());
        let inv_dt = 1.0 / p.time().dt();
        let (a, b) = (p.a().values(), p.b().values());
        let mut out = Array2::zeros((nt, nx));
        let mut weighted = vec![0.0; nx];
        let mut lap = vec![0.0; nx];
        for n in 0..nt {
            if n >= 1 {
                for i in 0..nx {
                    weighted[i] = a[i] * s[[n, i]];
                }
                p.laplacian().apply_slice(&weighted, &mut lap);
                for i in 1..nx - 1 {
                    out[[n, i]] +=
                        s[[n, i]] * inv_dt - lap[i] + (b[i] + self.dpi[[n, i]]) * s[[n, i]];
                }
            }
            if n + 1 < nt {
                for i in 1..nx - 1 {
                    out[[n, i]] -= s[[n + 1, i]] * inv_dt;
                }
            }
        }
        for i in 1..nx - 1 {
            out[[0, i]] += g[i];
        }
        out
    }

    /// `J*` between `Y` and the metric's state space: the unique `z` with
    /// `⟨J h, r⟩_Y = ⟨h, z⟩_X` for all `h`.
    pub fn adjoint(&self, metric: &StateMetric, r: &ResidualPair) -> Result<SpaceTimeField> {
        let p = self.problem;
        if r.pde.space() != p.space() || r.pde.time() != p.time() || r.init.grid() != p.space() {
            return Err(Error::shape(
                "residual pair grids differ from the problem grids",
            ));
        }
        let (nx, nt) = (p.space().len(), p.time().len());
        let (h, dt) = (p.space().h(), p.time().dt());
        let mut s = Array2::zeros((nt, nx));
        let mut buf = vec![0.0; nx];
        for n in 1..nt {
            buf.copy_from_slice(r.pde.row(n).as_slice().expect("contiguous"));
            neg_solve(p, &mut buf);
            for i in 1..nx - 1 {
                s[[n, i]] = dt * h * buf[i];
            }
        }
        let mut g = Array1::zeros(nx);
        for i in 1..nx - 1 {
            g[i] = h * r.init.values()[i];
        }
        let covector = self.transpose(&s, &g);
        SpaceTimeField::from_values(p.space(), p.time(), metric.riesz(&covector))
    }
}

/// `F_u(Π, u) h`.
pub fn linearized_apply(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    h: &SpaceTimeField,
) -> Result<ResidualPair> {
    Linearization::new(problem, curve, u)?.apply(h)
}

/// `F_u(Π, u)* pair` in the given state metric.
pub fn lower_adjoint(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    pair: &ResidualPair,
    metric: &StateMetric,
) -> Result<SpaceTimeField> {
    Linearization::new(problem, curve, u)?.adjoint(metric, pair)
}

/// Estimates `‖J‖²` (largest eigenvalue of `J*J`) by power iteration from
/// a seeded random start.
pub fn estimate_norm_sq(
    lin: &Linearization<'_>,
    metric: &StateMetric,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    let p = lin.problem;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = p.space().len();
    let mut v = SpaceTimeField::from_fn(p.space(), p.time(), |_, _| rng.random_range(-1.0..1.0));
    for n in 0..p.time().len() {
        v.values_mut()[[n, 0]] = 0.0;
        v.values_mut()[[n, nx - 1]] = 0.0;
    }
    let mut estimate = 0.0f64;
    for _ in 0..iterations.max(1) {
        let vn = metric.norm(&v)?;
        if vn == 0.0 {
            break;
        }
        v = v.scaled(1.0 / vn);
        let jv = lin.apply(&v)?;
        estimate = estimate.max(residual_inner(p, &jv, &jv));
        v = lin.adjoint(metric, &jv)?;
    }
    Ok(estimate)
}

/// Step-size control shared by both levels: `ω = safety / ‖J‖²_est`, where
/// the norm comes from `power_iterations` power steps and is refreshed when
/// a step is rejected; a rejected step is halved at most `max_backtracks`
/// times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepPolicy {
    pub safety: f64,
    pub power_iterations: usize,
    pub max_backtracks: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            safety: 0.9,
            power_iterations: 12,
            max_backtracks: 30,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety < 2.0) {
            return Err(Error::config(format!(
                "step.safety must lie in (0, 2), got {}",
                self.safety
            )));
        }
        if self.power_iterations == 0 {
            return Err(Error::config("step.power_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Everything the lower loop needs besides the problem and the curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerSettings {
    pub rule: StoppingRule,
    pub step: StepPolicy,
    pub metric: LowerMetric,
    /// Iterations performed even if the rule already holds at the start.
    pub min_iterations: usize,
    /// Hard budget independent of the rule.
    pub max_iterations: usize,
}

impl Default for LowerSettings {
    fn default() -> Self {
        Self {
            rule: StoppingRule::ResidualThreshold { tol: 1e-4 },
            step: StepPolicy::default(),
            metric: LowerMetric::Wave,
            min_iterations: 0,
            max_iterations: 20_000,
        }
    }
}

impl LowerSettings {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate(crate::stopping::Level::Lower)?;
        self.step.validate()?;
        if self.max_iterations == 0 || self.min_iterations > self.max_iterations {
            return Err(Error::config(
                "lower iteration budget must satisfy 0 ≤ min ≤ max, max ≥ 1",
            ));
        }
        Ok(())
    }
}

/// Upper-level context a lower rule may depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerContext {
    pub j: usize,
    /// Misfit of the previous upper step (or of the initial state at `j = 0`).
    pub misfit: f64,
}

impl Default for LowerContext {
    fn default() -> Self {
        Self {
            j: 0,
            misfit: f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerStop {
    /// The stopping rule fired.
    Rule,
    /// `max_iterations` reached.
    Budget,
    /// The residual reached the round-off floor and cannot decrease further.
    Floor,
}

#[derive(Clone, Debug)]
pub struct LowerState {
    pub u: SpaceTimeField,
    pub residual_norm: f64,
    pub iterations_used: usize,
    /// Residual norms `‖F(u_k)‖_Y` for `k = 0..=iterations_used`.
    pub history: Vec<f64>,
    pub stop: LowerStop,
    /// Step size in force at the end of the run.
    pub step: f64,
}

/// Reusable lower-level solver for one problem. The metric setup is cached,
/// and so is the step size: a run starts with the step the previous run
/// ended with, and only estimates `‖J‖²` afresh on its first run or after a
/// rejected step.
#[derive(Clone, Debug)]
pub struct LowerSolver<'a> {
    problem: &'a PdeProblem,
    metric: StateMetric,
    settings: LowerSettings,
    floor_scale: f64,
    step: Cell<Option<f64>>,
}

const POWER_SEED: u64 = 0x5eed_1e7e;

impl<'a> LowerSolver<'a> {
    pub fn new(problem: &'a PdeProblem, settings: LowerSettings) -> Result<Self> {
        settings.validate()?;
        let metric = StateMetric::for_problem(problem, settings.metric)?;
        // residual of the zero state without reaction: the size of the data
        let zero = ReactionCurve::zeros(crate::reaction::RangeGrid::new(2, -1.0, 1.0)?);
        let floor_scale = residual_norm(
            problem,
            &pde_residual(problem, &zero, &problem.zero_state())?,
        );
        Ok(Self {
            problem,
            metric,
            settings,
            floor_scale,
            step: Cell::new(None),
        })
    }

    pub fn problem(&self) -> &PdeProblem {
        self.problem
    }

    pub fn metric(&self) -> &StateMetric {
        &self.metric
    }

    pub fn settings(&self) -> &LowerSettings {
        &self.settings
    }

    pub fn with_rule(&self, rule: StoppingRule) -> Result<Self> {
        rule.validate(crate::stopping::Level::Lower)?;
        let mut out = self.clone();
        out.settings.rule = rule;
        out.step.set(None);
        Ok(out)
    }

    pub fn residual_norm(&self, curve: &ReactionCurve, u: &SpaceTimeField) -> Result<f64> {
        Ok(residual_norm(
            self.problem,
            &pde_residual(self.problem, curve, u)?,
        ))
    }

    /// Landweber `u ← u − ω F_u*(F(u))` from `u_init` until the rule fires.
    /// Each accepted step strictly decreases `‖F‖_Y`; rejected steps refresh
    /// the norm estimate once and then halve `ω`.
    pub fn run(
        &self,
        curve: &ReactionCurve,
        u_init: &SpaceTimeField,
        ctx: LowerContext,
    ) -> Result<LowerState> {
        let p = self.problem;
        p.check_state(u_init)?;
        let s = &self.settings;
        let mut u = u_init.clone();
        zero_boundary(&mut u);
        let mut r = pde_residual(p, curve, &u)?;
        let mut res = residual_norm(p, &r);
        let floor = 1e-12 * self.floor_scale.max(res);
        let mut history = vec![res];
        let mut omega: Option<f64> = self.step.get();
        let mut k = 0;
        let stop = loop {
            if k >= s.min_iterations && lower_should_stop(&s.rule, k, res, ctx.j, ctx.misfit) {
                break LowerStop::Rule;
            }
            if k >= s.max_iterations {
                break LowerStop::Budget;
            }
            if res <= floor {
                break LowerStop::Floor;
            }
            let lin = Linearization::new(p, curve, &u)?;
            let w = match omega {
                Some(w) => w,
                None => {
                    s.step.safety
                        / estimate_norm_sq(&lin, &self.metric, s.step.power_iterations, POWER_SEED)?
                }
            };
            let grad = lin.adjoint(&self.metric, &r)?;
            let mut w = w;
            let mut refreshed = false;
            let mut halvings = 0;
            let accepted = loop {
                let mut trial = u.clone();
                trial.axpy(-w, &grad)?;
                let tr = pde_residual(p, curve, &trial)?;
                let tres = residual_norm(p, &tr);
                if tres.is_finite() && tres < res {
                    break Some((trial, tr, tres));
                }
                if !refreshed {
                    refreshed = true;
                    let fresh = s.step.safety
                        / estimate_norm_sq(
                            &lin,
                            &self.metric,
                            s.step.power_iterations,
                            POWER_SEED,
                        )?;
                    w = fresh.min(0.5 * w);
                } else {
                    w *= 0.5;
                }
                halvings += 1;
                if halvings > s.step.max_backtracks {
                    break None;
                }
            };
            match accepted {
                Some((trial, tr, tres)) => {
                    u = trial;
                    r = tr;
                    res = tres;
                    omega = Some(w);
                    k += 1;
                    history.push(res);
                }
                None if res <= 1e-9 * self.floor_scale.max(history[0]) => break LowerStop::Floor,
                None => {
                    return Err(Error::Stagnation {
                        iteration: k,
                        residual: res,
                        step: w,
                    })
                }
            }
        };
        self.step.set(omega);
        Ok(LowerState {
            u,
            residual_norm: res,
            iterations_used: k,
            history,
            stop,
            step: omega.unwrap_or(0.0),
        })
    }
}

fn zero_boundary(u: &mut SpaceTimeField) {
    let nx = u.space().len();
    let v = u.values_mut();
    for n in 0..v.nrows() {
        v[[n, 0]] = 0.0;
        v[[n, nx - 1]] = 0.0;
    }
}

/// One-shot lower run: builds a [`LowerSolver`] with the default metric.
pub fn lower_run(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u_init: &SpaceTimeField,
    rule: StoppingRule,
    step: StepPolicy,
) -> Result<LowerState> {
    let settings = LowerSettings {
        rule,
        step,
        ..LowerSettings::default()
    };
    LowerSolver::new(problem, settings)?.run(curve, u_init, LowerContext::default())
}
