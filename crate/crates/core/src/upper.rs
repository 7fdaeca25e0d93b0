//! The upper level: Landweber on the reaction curve, with the gradient
//! assembled from a backward-in-time adjoint state and a Sobolev-smoothed
//! Fourier integral over the range of the state.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{Observation, ObservationData, ObservationMode, PdeProblem};
use crate::grid::{norm_l2_spacetime, SpaceTimeField};
use crate::lower::{LowerContext, LowerSettings, LowerSolver, LowerState, StepPolicy};
use crate::ops::TriDiagLu;
use crate::reaction::{RangeGrid, ReactionCurve, SobolevRiesz, SobolevSpec};
use crate::stopping::{upper_should_stop, Level, StoppingRule};

/// `(I + dt·B_n)` for `B_n = a·(−Δ_h) + b + m_n`, as tridiagonal bands,
/// optionally transposed.
fn step_bands(
    problem: &PdeProblem,
    mult: &[f64],
    transpose: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (sub, diag, sup) = problem.implicit_bands(problem.time().dt(), Some(mult));
    if !transpose {
        return (sub, diag, sup);
    }
    let m = diag.len();
    let mut sub_t = vec![0.0; m];
    let mut sup_t = vec![0.0; m];
    for k in 0..m {
        if k >= 1 {
            sub_t[k] = sup[k - 1];
        }
        if k + 1 < m {
            sup_t[k] = sub[k + 1];
        }
    }
    (sub_t, diag, sup_t)
}

fn multiplier(curve: &ReactionCurve, u: &SpaceTimeField) -> Array2<f64> {
    let d = curve.derivative_curve();
    u.values().mapv(|v| d.value_at(v))
}

/// Backward linearized (adjoint) equation
/// `−ż − ∇·(a∇z) + bz + Π′(u)z = v`, `z(T) = 0` for full data, and the
/// source-free version with `z(T) = v` for terminal data.
///
/// Discretely this is the exact transpose of [`linearized_state`] under
/// the observation inner product: `(I + dt·B_nᵀ) z_n = z_{n+1} + c_n v_n`
/// with `c_n` the trapezoid time weight (full) or `c_N = 1` (terminal).
pub fn adjoint_state(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    v: &ObservationData,
) -> Result<SpaceTimeField> {
    problem.check_state(u)?;
    let (space, time) = (problem.space(), problem.time());
    match v {
        ObservationData::Full(f) if f.space() != space || f.time() != time => {
            return Err(Error::shape(
                "full-data residual grids differ from the problem grids",
            ))
        }
        ObservationData::Terminal(g) if g.grid() != space => {
            return Err(Error::shape(
                "terminal residual grid differs from the problem grid",
            ))
        }
        _ => {}
    }
    let (nx, nt) = (space.len(), time.len());
    let mult = multiplier(curve, u);
    let mut z = Array2::zeros((nt, nx));
    let mut next = vec![0.0; nx - 2];
    for n in (0..nt).rev() {
        let mut rhs = next.clone();
        match v {
            ObservationData::Full(f) => {
                let c = time.weight(n);
                for (k, r) in rhs.iter_mut().enumerate() {
                    *r += c * f.values()[[n, k + 1]];
                }
            }
            ObservationData::Terminal(g) if n + 1 == nt => {
                for (k, r) in rhs.iter_mut().enumerate() {
                    *r += g.values()[k + 1];
                }
            }
            ObservationData::Terminal(_) => {}
        }
        let row = mult.row(n);
        let (sub, diag, sup) = step_bands(problem, row.as_slice().expect("contiguous"), true);
        TriDiagLu::factor(&sub, &diag, &sup)?.solve_in_place(&mut rhs);
        for (k, &r) in rhs.iter().enumerate() {
            z[[n, k + 1]] = r;
        }
        next = rhs;
    }
    SpaceTimeField::from_values(space, time, z)
}

/// Linearized state `p = S′(Π)ξ`: `ṗ − ∇·(a∇p) + bp + Π′(u)p = −ξ(u)`,
/// `p(0) = 0`, by implicit Euler with `Π′` frozen at `u`.
pub fn linearized_state(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    xi: &ReactionCurve,
) -> Result<SpaceTimeField> {
    problem.check_state(u)?;
    curve.check_same_grid(xi)?;
    let (space, time) = (problem.space(), problem.time());
    let (nx, nt) = (space.len(), time.len());
    let dt = time.dt();
    let mult = multiplier(curve, u);
    let mut p = Array2::zeros((nt, nx));
    let mut prev = vec![0.0; nx - 2];
    for n in 1..nt {
        let mut rhs: Vec<f64> = (0..nx - 2)
            .map(|k| prev[k] - dt * xi.value_at(u.values()[[n, k + 1]]))
            .collect();
        let row = mult.row(n);
        let (sub, diag, sup) = step_bands(problem, row.as_slice().expect("contiguous"), false);
        TriDiagLu::factor(&sub, &diag, &sup)?.solve_in_place(&mut rhs);
        for (k, &r) in rhs.iter().enumerate() {
            p[[n, k + 1]] = r;
        }
        prev = rhs;
    }
    SpaceTimeField::from_values(space, time, p)
}

/// Quadrature weight of level `n` in the parameter integral: the implicit
/// scheme couples `ξ(u_n)` to step `n ≥ 1` with weight `dt`.
fn level_weight(time: crate::grid::TimeGrid, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        time.dt()
    }
}

/// `−∫∫ ξ(u) z` as a function of `ξ`, turned into an `H^s` gradient on the
/// range grid through the Fourier route: with cosine modes `c_k` of the
/// mirror extension, `ĝ_k = ∫∫ c_k(u) z` and the result is
/// `−Σ_k (1+ω_k²)^{−s} ĝ_k / ‖c_k‖² · c_k`. Values of `u` outside the grid
/// are clamped, matching how the curve itself is evaluated. The usual
/// `1/√(2π)` of the continuous transform is absorbed in the mode norms.
pub fn adjoint_integral(
    u: &SpaceTimeField,
    z: &SpaceTimeField,
    spec: SobolevSpec,
    grid: RangeGrid,
) -> Result<ReactionCurve> {
    adjoint_integral_with(u, z, &SobolevRiesz::from_spec(grid, spec))
}

pub fn adjoint_integral_with(
    u: &SpaceTimeField,
    z: &SpaceTimeField,
    riesz: &SobolevRiesz,
) -> Result<ReactionCurve> {
    u.check_same_grids(z)?;
    let grid = riesz.grid();
    let nr = grid.len();
    let (space, time) = (u.space(), u.time());
    let h = space.h();
    let scale = std::f64::consts::PI / grid.width();
    let mut g_hat = vec![0.0; nr];
    for n in 1..time.len() {
        let wt = level_weight(time, n) * h;
        for i in 1..space.len() - 1 {
            let zv = z.values()[[n, i]];
            if zv == 0.0 {
                continue;
            }
            let w = wt * zv;
            let theta =
                scale * (u.values()[[n, i]].clamp(grid.u_min(), grid.u_max()) - grid.u_min());
            // cos(kθ) by the Chebyshev recurrence
            let c1 = theta.cos();
            let (mut prev, mut cur) = (1.0, c1);
            g_hat[0] += w;
            if nr > 1 {
                g_hat[1] += w * c1;
            }
            for g in g_hat.iter_mut().skip(2) {
                let nxt = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = nxt;
                *g += w * cur;
            }
        }
    }
    let coeffs = Array1::from_shape_fn(nr, |k| {
        -riesz.multipliers()[k] * g_hat[k] / riesz.mode_norms()[k]
    });
    ReactionCurve::new(grid, riesz.synthesize(&coeffs))
}

/// The same pairing differentiated exactly through the piecewise-linear
/// evaluation of the curve: the raw covector
/// `raw_i = −Σ_{n≥1} dt·h Σ_x z·φ_i(u)` (hat functions `φ_i`) mapped to `H^s`.
/// This is the true gradient of the discrete misfit; the Fourier route
/// differs from it only by interpolation error.
pub fn nodal_adjoint_integral(
    u: &SpaceTimeField,
    z: &SpaceTimeField,
    riesz: &SobolevRiesz,
) -> Result<ReactionCurve> {
    u.check_same_grids(z)?;
    let grid = riesz.grid();
    let (space, time) = (u.space(), u.time());
    let mut raw = Array1::<f64>::zeros(grid.len());
    for n in 1..time.len() {
        let wt = level_weight(time, n) * space.h();
        for i in 1..space.len() - 1 {
            let (c, frac) = grid.locate(u.values()[[n, i]]);
            let w = -wt * z.values()[[n, i]];
            raw[c] += w * (1.0 - frac);
            raw[c + 1] += w * frac;
        }
    }
    // ⟨g, ξ⟩_X = raw·ξ  ⇔  g = S(W⁻¹ raw)
    for (i, r) in raw.iter_mut().enumerate() {
        *r /= grid.weight(i);
    }
    riesz.apply(&ReactionCurve::new(grid, raw)?)
}

/// Gradient of `½‖L S̃(Π) − y^δ‖²` at the lower output.
pub fn upper_gradient(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    lower_out: &LowerState,
    obs: &Observation,
    riesz: &SobolevRiesz,
) -> Result<ReactionCurve> {
    let v = obs.residual(&lower_out.u)?;
    let z = adjoint_state(problem, curve, &lower_out.u, &v)?;
    adjoint_integral_with(&lower_out.u, &z, riesz)
}

/// Estimates `‖G′‖²` with `G′ξ = L·linearized_state(ξ)` in the `H^s` norm.
fn estimate_upper_norm_sq(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    mode: ObservationMode,
    riesz: &SobolevRiesz,
    iterations: usize,
) -> Result<f64> {
    let grid = curve.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd_ba11);
    let raw = Array1::from_shape_fn(grid.len(), |_| rng.random_range(-1.0..1.0));
    let mut xi = riesz.apply(&ReactionCurve::new(grid, raw)?)?;
    let mut estimate = 0.0f64;
    for _ in 0..iterations.max(1) {
        let norm = riesz.norm(&xi)?;
        if norm == 0.0 {
            break;
        }
        xi = xi.scaled(1.0 / norm);
        let p = linearized_state(problem, curve, u, &xi)?;
        let lp = match mode {
            ObservationMode::Full => ObservationData::Full(p),
            ObservationMode::Terminal => ObservationData::Terminal(p.terminal()),
        };
        estimate = estimate.max(lp.norm().powi(2));
        let z = adjoint_state(problem, curve, u, &lp)?;
        xi = adjoint_integral_with(u, &z, riesz)?;
    }
    Ok(estimate)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMode {
    /// Every lower run starts from the same warm-start field.
    Standard,
    /// Every lower run starts from the previous lower output.
    #[default]
    Sequential,
}

impl std::fmt::Display for InversionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InversionMode::Standard => "standard",
            InversionMode::Sequential => "sequential",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub mode: InversionMode,
    /// Must match the data; experiment configs set it from their own
    /// observation field, so it is not part of the JSON form.
    #[serde(skip)]
    pub observation_mode: ObservationMode,
    pub sobolev: SobolevSpec,
    pub lower: LowerSettings,
    pub upper_rule: StoppingRule,
    pub upper_step: StepPolicy,
    pub max_upper_iterations: usize,
    /// Reject upper steps that increase the misfit and retry with half the step.
    pub backtracking: bool,
    /// Keep the lower output at every `snapshot_every`-th upper step (0: none).
    pub snapshot_every: usize,
    /// Record wall-clock time in the run log; off keeps logs reproducible.
    pub timing: bool,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            mode: InversionMode::Sequential,
            observation_mode: ObservationMode::Full,
            sobolev: SobolevSpec::default(),
            lower: LowerSettings {
                min_iterations: 1,
                ..LowerSettings::default()
            },
            upper_rule: StoppingRule::FixedCount { k_max: 1000 },
            upper_step: StepPolicy::default(),
            max_upper_iterations: 100_000,
            backtracking: true,
            snapshot_every: 0,
            timing: false,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        self.lower.validate()?;
        self.upper_rule.validate(Level::Upper)?;
        self.upper_step.validate()?;
        if self.max_upper_iterations == 0 {
            return Err(Error::config("max_upper_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// One row of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub j: usize,
    pub kappa: usize,
    pub lower_residual: f64,
    pub misfit: f64,
    pub param_error: Option<f64>,
    pub state_error: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<RunRecord>,
}

pub const RUN_LOG_HEADER: &str = "j,kappa,lower_residual,misfit,param_error,state_error,wall_ms";

impl RunLog {
    pub fn push(&mut self, record: RunRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.j <= last.j {
                return Err(Error::Numeric(format!(
                    "run log index {} after {}",
                    record.j, last.j
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_kappa(&self) -> usize {
        self.records.iter().map(|r| r.kappa).sum()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(RUN_LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.j,
                r.kappa,
                r.lower_residual,
                r.misfit,
                opt(r.param_error),
                opt(r.state_error),
                r.wall_ms
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Known ground truth, used only for logging errors.
#[derive(Clone, Debug, Default)]
pub struct Truth {
    pub curve: Option<ReactionCurve>,
    pub state: Option<SpaceTimeField>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperStop {
    /// The upper stopping rule fired.
    Rule,
    /// `max_upper_iterations` reached.
    Budget,
    /// The gradient vanished.
    Stationary,
    /// No step size within the backtracking budget decreased the misfit.
    Stagnated,
    /// A lower run or the parameter update failed; see the returned error.
    Failed,
}

impl std::fmt::Display for UpperStop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(String::from));
        f.write_str(&s.unwrap_or_default())
    }
}

#[derive(Clone, Debug)]
pub struct InversionResult {
    pub curve: ReactionCurve,
    pub log: RunLog,
    pub stop: UpperStop,
    /// Lower output belonging to `curve`.
    pub state: SpaceTimeField,
    pub snapshots: Vec<(usize, SpaceTimeField)>,
    /// Lower iterations spent on rejected upper steps (not part of `Σκ`).
    pub rejected_lower_iterations: usize,
    pub rejected_steps: usize,
}

/// Upper loop with the warm start `u ≡ 0` and no known truth.
pub fn run_inversion(
    problem: &PdeProblem,
    curve_init: &ReactionCurve,
    obs: &Observation,
    cfg: &InversionConfig,
) -> Result<InversionResult> {
    let (result, err) = run_inversion_with(problem, curve_init, obs, cfg, &Truth::default(), None);
    match err {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

/// Full upper loop. On failure the partial result (everything up to the
/// last valid iterate) is returned next to the error.
pub fn run_inversion_with(
    problem: &PdeProblem,
    curve_init: &ReactionCurve,
    obs: &Observation,
    cfg: &InversionConfig,
    truth: &Truth,
    warm_start: Option<&SpaceTimeField>,
) -> (InversionResult, Option<Error>) {
    let mut result = InversionResult {
        curve: curve_init.clone(),
        log: RunLog::default(),
        stop: UpperStop::Failed,
        state: warm_start.cloned().unwrap_or_else(|| problem.zero_state()),
        snapshots: Vec::new(),
        rejected_lower_iterations: 0,
        rejected_steps: 0,
    };
    let err = upper_loop(problem, obs, cfg, truth, &mut result).err();
    if err.is_some() {
        result.stop = UpperStop::Failed;
    }
    (result, err)
}

fn upper_loop(
    problem: &PdeProblem,
    obs: &Observation,
    cfg: &InversionConfig,
    truth: &Truth,
    out: &mut InversionResult,
) -> Result<()> {
    cfg.validate()?;
    if obs.mode() != cfg.observation_mode {
        return Err(Error::config(format!(
            "observation is {} data but the config asks for {}",
            obs.mode(),
            cfg.observation_mode
        )));
    }
    if let Some(t) = &truth.curve {
        out.curve.check_same_grid(t)?;
    }
    problem.check_state(&out.state)?;
    let started = Instant::now();
    let solver = LowerSolver::new(problem, cfg.lower)?;
    let riesz = SobolevRiesz::from_spec(out.curve.grid(), cfg.sobolev);
    let warm = out.state.clone();
    let y_norm = obs.norm();

    let record = |j: usize, curve: &ReactionCurve, lower: &LowerState, misfit: f64| RunRecord {
        j,
        kappa: lower.iterations_used,
        lower_residual: lower.residual_norm,
        misfit,
        param_error: truth
            .curve
            .as_ref()
            .map(|t| curve.sub(t).map(|d| d.norm_l2()).unwrap_or(f64::NAN)),
        state_error: truth.state.as_ref().map(|t| {
            lower
                .u
                .sub(t)
                .map(|d| norm_l2_spacetime(&d))
                .unwrap_or(f64::NAN)
        }),
        wall_ms: if cfg.timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
    };
    let keep_snapshot = |j: usize, u: &SpaceTimeField, snaps: &mut Vec<(usize, SpaceTimeField)>| {
        if cfg.snapshot_every > 0 && j % cfg.snapshot_every == 0 {
            snaps.push((j, u.clone()));
        }
    };

    let initial_misfit = obs.misfit(&warm)?;
    let mut lower = solver
        .run(
            &out.curve,
            &warm,
            LowerContext {
                j: 0,
                misfit: initial_misfit,
            },
        )
        .map_err(|e| Error::Upper {
            j: 0,
            source: Box::new(e),
        })?;
    let mut misfit = obs.misfit(&lower.u)?;
    out.state = lower.u.clone();
    out.log.push(record(0, &out.curve, &lower, misfit))?;
    keep_snapshot(0, &lower.u, &mut out.snapshots);

    let mut omega: Option<f64> = None;
    let mut j = 0;
    loop {
        if upper_should_stop(&cfg.upper_rule, j, misfit, y_norm) {
            out.stop = UpperStop::Rule;
            break;
        }
        if j >= cfg.max_upper_iterations {
            out.stop = UpperStop::Budget;
            break;
        }
        let wrap = |e: Error| Error::Upper {
            j,
            source: Box::new(e),
        };
        let grad = upper_gradient(problem, &out.curve, &lower, obs, &riesz).map_err(wrap)?;
        if riesz.norm(&grad).map_err(wrap)? == 0.0 {
            out.stop = UpperStop::Stationary;
            break;
        }
        let estimate = |curve: &ReactionCurve, u: &SpaceTimeField| -> Result<f64> {
            let lam = estimate_upper_norm_sq(
                problem,
                curve,
                u,
                obs.mode(),
                &riesz,
                cfg.upper_step.power_iterations,
            )?;
            if !(lam > 0.0 && lam.is_finite()) {
                return Err(Error::Numeric(format!(
                    "upper operator norm estimate is {lam}"
                )));
            }
            Ok(cfg.upper_step.safety / lam)
        };
        let mut w = match omega {
            Some(w) => w,
            None => estimate(&out.curve, &lower.u).map_err(wrap)?,
        };
        let init = match cfg.mode {
            InversionMode::Sequential => lower.u.clone(),
            InversionMode::Standard => warm.clone(),
        };
        let mut refreshed = false;
        let mut halvings = 0;
        let accepted = loop {
            let mut cand = out.curve.clone();
            cand.axpy(-w, &grad).map_err(wrap)?;
            if !cand.is_finite() {
                return Err(wrap(Error::Divergence(
                    "reaction curve became non-finite".into(),
                )));
            }
            let ctx = LowerContext { j: j + 1, misfit };
            let cand_lower = solver.run(&cand, &init, ctx).map_err(|e| Error::Upper {
                j: j + 1,
                source: Box::new(e),
            })?;
            let cand_misfit = obs.misfit(&cand_lower.u)?;
            if !cand_misfit.is_finite() {
                return Err(wrap(Error::Divergence("misfit became non-finite".into())));
            }
            if !cfg.backtracking || cand_misfit < misfit {
                break Some((cand, cand_lower, cand_misfit));
            }
            out.rejected_steps += 1;
            out.rejected_lower_iterations += cand_lower.iterations_used;
            if !refreshed {
                refreshed = true;
                w = estimate(&out.curve, &lower.u).map_err(wrap)?.min(0.5 * w);
            } else {
                w *= 0.5;
            }
            halvings += 1;
            if halvings > cfg.upper_step.max_backtracks {
                break None;
            }
        };
        let Some((cand, cand_lower, cand_misfit)) = accepted else {
            out.stop = UpperStop::Stagnated;
            break;
        };
        omega = Some(w);
        j += 1;
        out.curve = cand;
        lower = cand_lower;
        misfit = cand_misfit;
        out.state = lower.u.clone();
        out.log.push(record(j, &out.curve, &lower, misfit))?;
        keep_snapshot(j, &lower.u, &mut out.snapshots);
    }
    Ok(())
}
