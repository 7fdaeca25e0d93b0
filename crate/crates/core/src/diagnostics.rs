//! Verification instruments: dot-product adjoint tests, finite-difference
//! gradient checks, tangential-cone ratios and convergence-slope fits.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{
    implicit_solve, observe, reference_solve, Observation, ObservationMode, PdeProblem,
    ResidualPair,
};
use crate::grid::{SpaceTimeField, SpatialField};
use crate::lower::{
    residual_inner, residual_norm, Linearization, LowerContext, LowerMetric, LowerSettings,
    LowerSolver, StateMetric,
};
use crate::ops::TriDiagLu;
use crate::reaction::{ReactionCurve, SobolevRiesz, SobolevSpec};
use crate::stopping::StoppingRule;
use crate::upper::upper_gradient;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub name: String,
    pub tolerance: f64,
    /// Largest sample value.
    pub worst: f64,
    pub pass: bool,
    pub samples: Vec<Sample>,
}

impl DiagnosticReport {
    fn new(
        name: &str,
        tolerance: f64,
        samples: Vec<Sample>,
        pass: impl FnOnce(f64, &[Sample]) -> bool,
    ) -> Self {
        let worst = samples
            .iter()
            .map(|s| s.value)
            .fold(f64::NEG_INFINITY, f64::max);
        let pass = !samples.is_empty()
            && samples.iter().all(|s| s.value.is_finite())
            && pass(worst, &samples);
        Self {
            name: name.to_string(),
            tolerance,
            worst,
            pass,
            samples,
        }
    }

    pub fn median(&self) -> f64 {
        median(self.samples.iter().map(|s| s.value).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub const ADJOINT_TOLERANCE: f64 = 1e-10;
pub const GRADIENT_TOLERANCE: f64 = 1e-2;

fn random_state(problem: &PdeProblem, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let nx = problem.space().len();
    let mut f = SpaceTimeField::from_fn(problem.space(), problem.time(), |_, _| {
        rng.random_range(-1.0..1.0)
    });
    let v = f.values_mut();
    for n in 0..v.nrows() {
        v[[n, 0]] = 0.0;
        v[[n, nx - 1]] = 0.0;
    }
    f
}

fn random_pair(problem: &PdeProblem, rng: &mut ChaCha8Rng) -> ResidualPair {
    let mut pde = random_state(problem, rng);
    pde.values_mut().row_mut(0).fill(0.0);
    let nx = problem.space().len();
    let mut init = SpatialField::zeros(problem.space());
    for i in 1..nx - 1 {
        init.values_mut()[i] = rng.random_range(-1.0..1.0);
    }
    ResidualPair { pde, init }
}

/// Dot-product test of the lower-level adjoint `F′*` at `(curve, u)` with
/// the default state metric. Trial 0 uses `h = 0`.
pub fn adjoint_test(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    trials: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    adjoint_test_with(problem, curve, u, trials, seed, LowerMetric::default(), 1.0)
}

/// [`adjoint_test`] with an explicit metric; the adjoint is multiplied by
/// `adjoint_scale` before the comparison (1 for the real test, anything
/// else injects a fault).
pub fn adjoint_test_with(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    trials: usize,
    seed: u64,
    metric: LowerMetric,
    adjoint_scale: f64,
) -> Result<DiagnosticReport> {
    if trials == 0 {
        return Err(Error::config("adjoint test needs at least one trial"));
    }
    let metric = StateMetric::for_problem(problem, metric)?;
    let lin = Linearization::new(problem, curve, u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(trials);
    for trial in 0..trials {
        let h = if trial == 0 {
            problem.zero_state()
        } else {
            random_state(problem, &mut rng)
        };
        let r = random_pair(problem, &mut rng);
        let jh = lin.apply(&h)?;
        let z = lin.adjoint(&metric, &r)?.scaled(adjoint_scale);
        let lhs = residual_inner(problem, &jh, &r);
        let rhs = metric.inner(&h, &z)?;
        let scale = residual_norm(problem, &jh) * residual_norm(problem, &r);
        let value = if scale == 0.0 {
            (lhs - rhs).abs()
        } else {
            (lhs - rhs).abs() / scale
        };
        samples.push(Sample {
            input: format!("trial {trial}"),
            value,
        });
    }
    Ok(DiagnosticReport::new(
        "adjoint",
        ADJOINT_TOLERANCE,
        samples,
        |worst, _| worst < ADJOINT_TOLERANCE,
    ))
}

/// Random smooth curve: the lowest `modes` cosine modes of the range grid
/// with uniform coefficients, normalized to unit `H^s` norm.
pub fn smooth_direction(
    riesz: &SobolevRiesz,
    modes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ReactionCurve> {
    let n = riesz.grid().len();
    let coeffs = Array1::from_shape_fn(n, |k| {
        if k < modes {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    let curve = ReactionCurve::new(riesz.grid(), riesz.synthesize(&coeffs))?;
    let norm = riesz.norm(&curve)?;
    if norm == 0.0 {
        return Err(Error::Numeric("drew a zero direction".into()));
    }
    Ok(curve.scaled(1.0 / norm))
}

const DIRECTION_MODES: usize = 6;

/// Misfit functional `J(Π) = ½‖L S̃(Π) − y‖²` with a tightly converged lower level.
struct Misfit<'a> {
    solver: LowerSolver<'a>,
    obs: &'a Observation,
}

impl<'a> Misfit<'a> {
    fn new(problem: &'a PdeProblem, obs: &'a Observation) -> Result<Self> {
        let settings = LowerSettings {
            rule: StoppingRule::ResidualThreshold { tol: 1e-10 },
            ..LowerSettings::default()
        };
        Ok(Self {
            solver: LowerSolver::new(problem, settings)?,
            obs,
        })
    }

    fn state(&self, curve: &ReactionCurve) -> Result<crate::lower::LowerState> {
        let start = implicit_solve(self.solver.problem(), curve)?;
        self.solver.run(curve, &start, LowerContext::default())
    }

    fn value(&self, curve: &ReactionCurve) -> Result<f64> {
        Ok(0.5 * self.obs.misfit(&self.state(curve)?.u)?.powi(2))
    }
}

/// Relative errors of central differences against `⟨∇J, ξ⟩_X`, one per `τ`,
/// for a single direction `ξ`.
pub fn directional_errors(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    obs: &Observation,
    xi: &ReactionCurve,
    taus: &[f64],
    sobolev: SobolevSpec,
) -> Result<Vec<f64>> {
    let riesz = SobolevRiesz::from_spec(curve.grid(), sobolev);
    let j = Misfit::new(problem, obs)?;
    let grad = upper_gradient(problem, curve, &j.state(curve)?, obs, &riesz)?;
    let analytic = riesz.inner(&grad, xi)?;
    Ok(central_differences(problem, curve, obs, xi, taus)?
        .into_iter()
        .map(|fd| relative_gap(fd, analytic))
        .collect())
}

fn relative_gap(fd: f64, analytic: f64) -> f64 {
    if analytic.abs().max(fd.abs()) < 1e-14 {
        0.0
    } else {
        (fd - analytic).abs() / analytic.abs().max(1e-300)
    }
}

/// `(J(Π + τξ) − J(Π − τξ)) / 2τ` for every `τ`.
pub fn central_differences(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    obs: &Observation,
    xi: &ReactionCurve,
    taus: &[f64],
) -> Result<Vec<f64>> {
    let j = Misfit::new(problem, obs)?;
    taus.iter()
        .map(|&tau| {
            let mut plus = curve.clone();
            plus.axpy(tau, xi)?;
            let mut minus = curve.clone();
            minus.axpy(-tau, xi)?;
            Ok((j.value(&plus)? - j.value(&minus)?) / (2.0 * tau))
        })
        .collect()
}

pub const DEFAULT_TAUS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

/// Finite-difference check of the upper gradient in `directions` random
/// smooth directions. Each sample is the error at that direction's best
/// `τ`; the check passes when their median is below 1%.
pub fn gradient_check(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    obs: &Observation,
    directions: usize,
    taus: &[f64],
    sobolev: SobolevSpec,
    seed: u64,
) -> Result<DiagnosticReport> {
    if directions == 0 || taus.is_empty() {
        return Err(Error::config(
            "gradient check needs at least one direction and one step",
        ));
    }
    if taus.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::config("gradient check steps must be positive"));
    }
    let riesz = SobolevRiesz::from_spec(curve.grid(), sobolev);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<ReactionCurve> = (0..directions)
        .map(|_| smooth_direction(&riesz, DIRECTION_MODES, &mut rng))
        .collect::<Result<_>>()?;
    let samples = dirs
        .par_iter()
        .enumerate()
        .map(|(d, xi)| {
            let errs = directional_errors(problem, curve, obs, xi, taus, sobolev)?;
            let (best, tau) =
                errs.iter()
                    .zip(taus)
                    .fold((f64::INFINITY, f64::NAN), |acc, (&e, &t)| {
                        if e < acc.0 {
                            (e, t)
                        } else {
                            acc
                        }
                    });
            Ok(Sample {
                input: format!("direction {d}, tau {tau:e}"),
                value: best,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticReport::new(
        "gradient",
        GRADIENT_TOLERANCE,
        samples,
        |_, s| median(s.iter().map(|x| x.value).collect()) < GRADIENT_TOLERANCE,
    ))
}

/// Derivative of [`reference_solve`] at `curve` in direction `xi`: the same
/// linearized equation as [`crate::upper::linearized_state`], stepped with
/// the semi-implicit scheme and with `Π′` taken as the slope of the
/// interpolation cell, so that it is the exact derivative of the discrete
/// reference map wherever that exists.
pub fn reference_linearized_state(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    u: &SpaceTimeField,
    xi: &ReactionCurve,
) -> Result<SpaceTimeField> {
    problem.check_state(u)?;
    curve.check_same_grid(xi)?;
    let (space, time) = (problem.space(), problem.time());
    let (n, dt) = (space.len(), time.dt());
    let inv_h2 = 1.0 / (space.h() * space.h());
    let a = problem.a().values();
    let b = problem.b().values();
    let m = n - 2;
    let sub: Vec<f64> = (0..m).map(|k| -dt * a[k + 1] * inv_h2).collect();
    let diag: Vec<f64> = (0..m).map(|k| 1.0 + 2.0 * dt * a[k + 1] * inv_h2).collect();
    let lu = TriDiagLu::factor(&sub, &diag, &sub)?;
    let grid = curve.grid();
    let f = curve.samples();
    let slope = |v: f64| {
        if v < grid.u_min() || v > grid.u_max() {
            return 0.0;
        }
        let (c, _) = grid.locate(v);
        (f[c + 1] - f[c]) / grid.h()
    };
    let mut p = SpaceTimeField::zeros(space, time);
    let mut rhs = vec![0.0; m];
    for k in 0..time.len() - 1 {
        for (j, r) in rhs.iter_mut().enumerate() {
            let i = j + 1;
            let (prev, uk) = (p.values()[[k, i]], u.values()[[k, i]]);
            *r = prev - dt * ((b[i] + slope(uk)) * prev + xi.value_at(uk));
        }
        lu.solve_in_place(&mut rhs);
        for (j, &r) in rhs.iter().enumerate() {
            p.values_mut()[[k + 1, j + 1]] = r;
        }
    }
    Ok(p)
}

/// Linearization ratio `‖S(Π) − S(Π†) − S′(Π)(Π − Π†)‖ / ‖S(Π) − S(Π†)‖`
/// in the observation norm, with both states from [`reference_solve`].
/// Zero when both norms fall below `1e-12`.
pub fn tcc_sample(
    problem: &PdeProblem,
    truth: &ReactionCurve,
    truth_state: &SpaceTimeField,
    candidate: &ReactionCurve,
    mode: ObservationMode,
) -> Result<f64> {
    let u = reference_solve(problem, candidate)?;
    let diff = u.sub(truth_state)?;
    let xi = candidate.sub(truth)?;
    let p = reference_linearized_state(problem, candidate, &u, &xi)?;
    let rem = diff.sub(&p)?;
    let (num, den) = (observe(&rem, mode).norm(), observe(&diff, mode).norm());
    if num < 1e-12 && den < 1e-12 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Tangential-cone ratios at `samples` random curves at `H^s` distance
/// `radius` from `truth`, full data and the default Sobolev exponent.
pub fn tcc_ratio(
    problem: &PdeProblem,
    truth: &ReactionCurve,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    tcc_ratio_with(
        problem,
        truth,
        radius,
        samples,
        seed,
        SobolevSpec::default(),
        ObservationMode::Full,
    )
}

pub fn tcc_ratio_with(
    problem: &PdeProblem,
    truth: &ReactionCurve,
    radius: f64,
    samples: usize,
    seed: u64,
    sobolev: SobolevSpec,
    mode: ObservationMode,
) -> Result<DiagnosticReport> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config(format!(
            "tcc radius must be positive, got {radius}"
        )));
    }
    if samples == 0 {
        return Err(Error::config("tcc needs at least one sample"));
    }
    let riesz = SobolevRiesz::from_spec(truth.grid(), sobolev);
    let truth_state = reference_solve(problem, truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<ReactionCurve> = (0..samples)
        .map(|_| {
            let d = smooth_direction(&riesz, DIRECTION_MODES, &mut rng)?;
            truth.add(&d.scaled(radius))
        })
        .collect::<Result<_>>()?;
    let out = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(Sample {
                input: format!("sample {i}, radius {radius}"),
                value: tcc_sample(problem, truth, &truth_state, c, mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticReport::new("tcc", 1.0, out, |worst, _| {
        worst < 1.0
    }))
}

/// Least-squares slope of `log history[k]` against `log k` for
/// `k ∈ [k_lo, k_hi]` (clipped to the history).
pub fn fit_rate_slope(history: &[f64], k_lo: usize, k_hi: usize) -> Result<f64> {
    if k_lo < 1 || k_hi <= k_lo {
        return Err(Error::config(format!(
            "rate window needs k_hi > k_lo ≥ 1, got [{k_lo}, {k_hi}]"
        )));
    }
    let pts: Vec<(f64, f64)> = (k_lo..=k_hi.min(history.len().saturating_sub(1)))
        .filter(|&k| history[k] > 0.0 && history[k].is_finite())
        .map(|k| ((k as f64).ln(), history[k].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::shape(format!(
            "rate fit needs at least 3 positive points in [{k_lo}, {k_hi}], got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    Ok(sxy / sxx)
}

pub const RATE_THRESHOLD: f64 = -0.25;

/// Runs `k_hi` lower iterations from zero and fits the residual slope on
/// `[k_lo, k_hi]`; passes when the slope is at most −¼.
pub fn rate_report(
    problem: &PdeProblem,
    curve: &ReactionCurve,
    metric: LowerMetric,
    k_lo: usize,
    k_hi: usize,
) -> Result<DiagnosticReport> {
    let settings = LowerSettings {
        rule: StoppingRule::FixedCount { k_max: k_hi },
        metric,
        max_iterations: k_hi.max(1),
        ..LowerSettings::default()
    };
    let solver = LowerSolver::new(problem, settings)?;
    let state = solver.run(curve, &problem.zero_state(), LowerContext::default())?;
    let slope = fit_rate_slope(&state.history, k_lo, k_hi)?;
    let sample = Sample {
        input: format!("slope over k in [{k_lo}, {k_hi}], {metric} metric"),
        value: slope,
    };
    Ok(DiagnosticReport::new(
        "rate",
        RATE_THRESHOLD,
        vec![sample],
        |worst, _| worst <= RATE_THRESHOLD,
    ))
}
