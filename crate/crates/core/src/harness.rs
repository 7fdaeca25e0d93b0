//! Experiment orchestration: JSON configs, truth and data generation,
//! inversion runs with their artifacts, and noise sweeps.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::median;
use crate::error::{Error, Result};
use crate::forward::{
    add_noise, implicit_solve, observe, reference_solve, Observation, ObservationData,
    ObservationMode, PdeProblem,
};
use crate::grid::{SpaceGrid, SpaceTimeField, SpatialField, TimeGrid};
use crate::reaction::{BuiltinReaction, RangeGrid, ReactionCurve};
use crate::stopping::StoppingRule;
use crate::upper::{
    run_inversion_with, InversionConfig, InversionMode, InversionResult, Truth, UpperStop,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Initial state and source, built for `Π = 0` from a sine profile
/// `f(x) = sin(mπx)` with constant `a` and `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// `u0 = f`, `φ = 0`: the profile decays.
    DecayingSine { mode: u32 },
    /// `u0 = f`, `φ = (a(mπ)² + b)·f`: without reaction the state stays at `f`.
    StationarySine { mode: u32 },
    /// `u0 = f`, `φ` chosen so that `cos(πt/T)·f` solves the problem without
    /// reaction; the state sweeps the whole range `[−1, 1]` in time.
    OscillatingSine { mode: u32 },
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::StationarySine { mode: 2 }
    }
}

impl Scenario {
    fn mode(&self) -> u32 {
        match *self {
            Scenario::DecayingSine { mode }
            | Scenario::StationarySine { mode }
            | Scenario::OscillatingSine { mode } => mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
    /// Constant diffusivity.
    pub a: f64,
    /// Constant linear absorption.
    pub b: f64,
    pub scenario: Scenario,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            nx: 101,
            nt: 51,
            t_final: 0.1,
            a: 1.0,
            b: 0.0,
            scenario: Scenario::default(),
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<PdeProblem> {
        let space = SpaceGrid::unit(self.nx)?;
        let time = TimeGrid::new(self.nt, self.t_final)?;
        let m = self.scenario.mode() as f64 * PI;
        let (a, b, tf) = (self.a, self.b, self.t_final);
        let stiffness = a * m * m + b;
        let u0 = SpatialField::from_fn(space, |x| (m * x).sin());
        let phi = match self.scenario {
            Scenario::DecayingSine { .. } => SpaceTimeField::zeros(space, time),
            Scenario::StationarySine { .. } => {
                SpaceTimeField::from_fn(space, time, |_, x| stiffness * (m * x).sin())
            }
            Scenario::OscillatingSine { .. } => SpaceTimeField::from_fn(space, time, |t, x| {
                let w = PI / tf;
                (-w * (w * t).sin() + stiffness * (w * t).cos()) * (m * x).sin()
            }),
        };
        let mut u0 = u0;
        // sin(mπ) is only zero up to round-off
        let last = self.nx - 1;
        u0.values_mut()[0] = 0.0;
        u0.values_mut()[last] = 0.0;
        PdeProblem::new(
            SpatialField::constant(space, a),
            SpatialField::constant(space, b),
            phi,
            u0,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 3 {
            return Err(Error::config("problem.nx must be at least 3"));
        }
        if self.nt < 2 {
            return Err(Error::config("problem.nt must be at least 2"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("problem.t_final must be positive"));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::config("problem.a must be positive"));
        }
        if !self.b.is_finite() {
            return Err(Error::config("problem.b must be finite"));
        }
        if self.scenario.mode() == 0 {
            return Err(Error::config("problem.scenario.mode must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeSpec {
    pub n: usize,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for RangeSpec {
    fn default() -> Self {
        Self {
            n: 50,
            u_min: -1.0,
            u_max: 1.0,
        }
    }
}

impl RangeSpec {
    pub fn build(&self) -> Result<RangeGrid> {
        RangeGrid::new(self.n, self.u_min, self.u_max)
    }
}

/// Which forward solver manufactures the truth state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSolver {
    /// Semi-implicit reference scheme.
    #[default]
    Reference,
    /// Exact root of the discrete residual used by the lower level; data
    /// then carry no scheme mismatch.
    Implicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub name: String,
    pub problem: ProblemSpec,
    pub range: RangeSpec,
    /// Ground-truth law, unless `reaction_file` is given.
    pub reaction: BuiltinReaction,
    /// Curve JSON (`[{u, value}, …]`) overriding `reaction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reaction_file: Option<PathBuf>,
    /// Starting curve of the inversion; zero when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_reaction_file: Option<PathBuf>,
    pub truth_solver: TruthSolver,
    pub observation: ObservationMode,
    /// Relative noise level `δ`.
    pub noise: f64,
    pub seed: u64,
    pub inversion: InversionConfig,
    /// Run both standard and sequential mode on the same data.
    pub compare_modes: bool,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            name: "experiment".into(),
            problem: ProblemSpec::default(),
            range: RangeSpec::default(),
            reaction: BuiltinReaction::Fisher,
            reaction_file: None,
            initial_reaction_file: None,
            truth_solver: TruthSolver::default(),
            observation: ObservationMode::Full,
            noise: 0.0,
            seed: 0,
            inversion: InversionConfig::default(),
            compare_modes: false,
            output: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema: unsupported version {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        self.problem.validate()?;
        self.range.build()?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config(format!(
                "noise: must be nonnegative, got {}",
                self.noise
            )));
        }
        self.inversion_config().validate()?;
        for path in [&self.reaction_file, &self.initial_reaction_file]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(Error::config(format!(
                    "curve file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// The inversion settings with the data mode filled in and a
    /// discrepancy rule bound to this config's noise level.
    pub fn inversion_config(&self) -> InversionConfig {
        let mut inv = self.inversion.clone();
        inv.observation_mode = self.observation;
        if let StoppingRule::Discrepancy { tau, .. } = inv.upper_rule {
            inv.upper_rule = StoppingRule::Discrepancy {
                tau,
                delta: self.noise,
            };
        }
        inv
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    fn resolve_paths(&mut self, base: &Path) {
        for path in [&mut self.reaction_file, &mut self.initial_reaction_file]
            .into_iter()
            .flatten()
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Parses and validates a config from JSON text; relative curve paths stay
/// relative to the working directory.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(format!("{path}: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file. Relative curve paths are taken relative to the
/// file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::config(format!("{}: {field}: {}", path.display(), e.into_inner()))
    })?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    cfg.validate()?;
    Ok(cfg)
}

/// Built-in experiment configs, also shipped as `configs/<name>.json`.
pub const CANNED: [(&str, &str); 5] = [
    (
        "fisher_full",
        include_str!("../../../configs/fisher_full.json"),
    ),
    (
        "lane_emden_full",
        include_str!("../../../configs/lane_emden_full.json"),
    ),
    (
        "zfk_terminal",
        include_str!("../../../configs/zfk_terminal.json"),
    ),
    (
        "zfk_terminal_seq_vs_std",
        include_str!("../../../configs/zfk_terminal_seq_vs_std.json"),
    ),
    (
        "fisher_trajectory",
        include_str!("../../../configs/fisher_trajectory.json"),
    ),
];

pub fn canned_config(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = CANNED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config(format!("no canned config named '{name}'")))?;
    parse_config_str(text)
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<InversionMode>,
    pub observation: Option<ObservationMode>,
    pub reaction: Option<BuiltinReaction>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.inversion.mode = m;
            cfg.compare_modes = false;
        }
        if let Some(d) = self.observation {
            cfg.observation = d;
        }
        if let Some(r) = self.reaction {
            cfg.reaction = r;
            cfg.reaction_file = None;
        }
    }
}

fn read_curve(path: &Path) -> Result<ReactionCurve> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("curve file {}: {e}", path.display())))
}

/// Problem, truth and (noisy) data of an experiment.
#[derive(Clone, Debug)]
pub struct Setup {
    pub problem: PdeProblem,
    pub truth: ReactionCurve,
    pub truth_state: SpaceTimeField,
    pub initial: ReactionCurve,
    pub observation: Observation,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup> {
    let problem = cfg.problem.build()?;
    let grid = cfg.range.build()?;
    let truth = match &cfg.reaction_file {
        Some(p) => read_curve(p)?,
        None => ReactionCurve::builtin(cfg.reaction, grid),
    };
    let initial = match &cfg.initial_reaction_file {
        Some(p) => read_curve(p)?,
        None => ReactionCurve::zeros(truth.grid()),
    };
    initial.check_same_grid(&truth)?;
    let truth_state = match cfg.truth_solver {
        TruthSolver::Reference => reference_solve(&problem, &truth)?,
        TruthSolver::Implicit => implicit_solve(&problem, &truth)?,
    };
    let observation = add_noise(&observe(&truth_state, cfg.observation), cfg.noise, cfg.seed)?;
    Ok(Setup {
        problem,
        truth,
        truth_state,
        initial,
        observation,
    })
}

/// Per-mode outcome of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: InversionMode,
    pub stop: UpperStop,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub j_stop: usize,
    pub total_kappa: usize,
    /// Largest `κ(j)` over the last quarter of the upper steps.
    pub kappa_max_last_quarter: usize,
    pub rejected_steps: usize,
    pub rejected_lower_iterations: usize,
    pub initial_param_error: Option<f64>,
    pub final_param_error: Option<f64>,
    pub initial_misfit: Option<f64>,
    pub final_misfit: Option<f64>,
    pub initial_state_error: Option<f64>,
    pub final_state_error: Option<f64>,
    /// `‖Π_final − Π†‖ / ‖Π_init − Π†‖`. Absent when not measurable.
    pub relative_param_error: Option<f64>,
    pub relative_misfit: Option<f64>,
    pub relative_state_error: Option<f64>,
    pub wall_ms: f64,
    pub run_log: PathBuf,
    pub reaction_final: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub noise_level: f64,
    pub observation_norm: f64,
    pub runs: Vec<ModeSummary>,
    pub wall_ms: f64,
    pub artifacts: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

impl RunSummary {
    pub fn run(&self, mode: InversionMode) -> Option<&ModeSummary> {
        self.runs.iter().find(|r| r.mode == mode)
    }
}

fn summarize(
    mode: InversionMode,
    res: &InversionResult,
    err: Option<&Error>,
    wall_ms: f64,
) -> ModeSummary {
    let recs = &res.log.records;
    let first = recs.first();
    let last = recs.last();
    let get = |r: Option<&crate::upper::RunRecord>,
               f: fn(&crate::upper::RunRecord) -> Option<f64>| {
        r.and_then(f).filter(|v| v.is_finite())
    };
    let pe = |r: &crate::upper::RunRecord| r.param_error;
    let se = |r: &crate::upper::RunRecord| r.state_error;
    let mi = |r: &crate::upper::RunRecord| Some(r.misfit);
    let q = recs.len() * 3 / 4;
    let kq = recs
        .get(q.max(1)..)
        .map(|r| r.iter().map(|x| x.kappa).max().unwrap_or(0))
        .unwrap_or(0);
    let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    ModeSummary {
        mode,
        stop: res.stop,
        error: err.map(|e| e.to_string()),
        j_stop: last.map(|r| r.j).unwrap_or(0),
        total_kappa: res.log.total_kappa(),
        kappa_max_last_quarter: kq,
        rejected_steps: res.rejected_steps,
        rejected_lower_iterations: res.rejected_lower_iterations,
        initial_param_error: get(first, pe),
        final_param_error: get(last, pe),
        initial_misfit: get(first, mi),
        final_misfit: get(last, mi),
        initial_state_error: get(first, se),
        final_state_error: get(last, se),
        relative_param_error: ratio(get(last, pe), get(first, pe)),
        relative_misfit: ratio(get(last, mi), get(first, mi)),
        relative_state_error: ratio(get(last, se), get(first, se)),
        wall_ms,
        run_log: PathBuf::new(),
        reaction_final: PathBuf::new(),
    }
}

fn write(path: PathBuf, contents: &str, artifacts: &mut Vec<PathBuf>) -> Result<PathBuf> {
    fs::write(&path, contents)?;
    artifacts.push(path.clone());
    Ok(path)
}

fn curve_json(c: &ReactionCurve) -> String {
    serde_json::to_string_pretty(c).expect("curves serialize")
}

/// Generates truth and data, runs the inversion (in both modes when
/// `compare_modes` is set) and writes every artifact under `cfg.output`.
/// If a run fails, its last valid iterate and log are still written before
/// the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let setup = prepare(cfg)?;
    let out = &cfg.output;
    fs::create_dir_all(out)?;
    let mut artifacts = Vec::new();
    let obs_name = match setup.observation.data {
        ObservationData::Full(_) => "observation_full.csv",
        ObservationData::Terminal(_) => "observation_terminal.csv",
    };
    write(
        out.join(obs_name),
        &setup.observation.data.to_csv(),
        &mut artifacts,
    )?;
    write(
        out.join("reaction_truth.json"),
        &curve_json(&setup.truth),
        &mut artifacts,
    )?;
    write(
        out.join("reaction_init.json"),
        &curve_json(&setup.initial),
        &mut artifacts,
    )?;

    let modes = if cfg.compare_modes {
        vec![InversionMode::Standard, InversionMode::Sequential]
    } else {
        vec![cfg.inversion.mode]
    };
    let truth = Truth {
        curve: Some(setup.truth.clone()),
        state: Some(setup.truth_state.clone()),
    };
    let mut runs = Vec::new();
    let mut failure = None;
    for &mode in &modes {
        let mut inv = cfg.inversion_config();
        inv.mode = mode;
        let t0 = Instant::now();
        let (res, err) = run_inversion_with(
            &setup.problem,
            &setup.initial,
            &setup.observation,
            &inv,
            &truth,
            None,
        );
        let wall = t0.elapsed().as_secs_f64() * 1e3;
        let suffix = if cfg.compare_modes {
            format!("_{mode}")
        } else {
            String::new()
        };
        let mut summary = summarize(mode, &res, err.as_ref(), wall);
        summary.run_log = write(
            out.join(format!("run_log{suffix}.csv")),
            &res.log.to_csv(),
            &mut artifacts,
        )?;
        summary.reaction_final = write(
            out.join(format!("reaction_final{suffix}.json")),
            &curve_json(&res.curve),
            &mut artifacts,
        )?;
        if !res.snapshots.is_empty() {
            let dir = out.join(format!("snapshots{suffix}"));
            fs::create_dir_all(&dir)?;
            for (j, u) in &res.snapshots {
                write(
                    dir.join(format!("state_j{j:05}.csv")),
                    &ObservationData::Full(u.clone()).to_csv(),
                    &mut artifacts,
                )?;
            }
        }
        log::info!(
            "{} [{mode}]: stop {} at j = {}, Σκ = {}, reaction error ×{:.3e}, misfit ×{:.3e}",
            cfg.name,
            summary.stop,
            summary.j_stop,
            summary.total_kappa,
            summary.relative_param_error.unwrap_or(f64::NAN),
            summary.relative_misfit.unwrap_or(f64::NAN)
        );
        runs.push(summary);
        if let Some(e) = err {
            failure = Some(e);
            break;
        }
    }
    let mut summary = RunSummary {
        name: cfg.name.clone(),
        noise_level: cfg.noise,
        observation_norm: setup.observation.norm(),
        runs,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        artifacts,
        config: cfg.clone(),
    };
    let summary_path = out.join("summary.json");
    summary.artifacts.push(summary_path.clone());
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

pub const SWEEP_HEADER: &str = "delta,j_stop,param_error,misfit";
pub const SWEEP_RUNS_HEADER: &str = "delta,seed,j_stop,param_error,misfit,stop";
const DEFAULT_TAU: f64 = 1.5;

/// One inversion of a noise sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub delta: f64,
    pub seed: u64,
    pub j_stop: usize,
    /// `‖Π − Π†‖` at the stopping index.
    pub param_error: f64,
    pub misfit: f64,
    pub stop: UpperStop,
}

/// Per-`δ` medians over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub j_stop: usize,
    pub param_error: f64,
    pub misfit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// Sorted by decreasing `δ`.
    pub rows: Vec<SweepRow>,
    pub runs: Vec<SweepRun>,
    /// Per seed: whether the error at stop does not increase as `δ` decreases.
    pub per_seed_nonincreasing: Vec<bool>,
    pub majority_nonincreasing: bool,
    pub artifacts: Vec<PathBuf>,
}

/// Discrepancy-stopped inversions for every `δ` and `seeds` consecutive
/// seeds starting at `cfg.seed`, on a worker pool of at most `threads`
/// threads (0: one per core). Writes `noise_sweep.csv` (medians) and
/// `noise_sweep_runs.csv` under `cfg.output`.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    deltas: &[f64],
    seeds: usize,
    threads: usize,
) -> Result<SweepSummary> {
    cfg.validate()?;
    if deltas.is_empty() || seeds == 0 {
        return Err(Error::config(
            "a sweep needs at least one noise level and one seed",
        ));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::config(format!(
            "sweep noise levels must be positive, got {d}"
        )));
    }
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let tau = match cfg.inversion.upper_rule {
        StoppingRule::Discrepancy { tau, .. } => tau,
        _ => DEFAULT_TAU,
    };
    let base = {
        let mut c = cfg.clone();
        c.noise = 0.0;
        prepare(&c)?
    };
    let clean = base.observation.clone();
    let jobs: Vec<(f64, u64)> = deltas
        .iter()
        .flat_map(|&d| (0..seeds as u64).map(move |s| (d, s)))
        .map(|(d, s)| (d, cfg.seed + s))
        .collect();
    let workers = if threads == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        threads
    }
    .min(jobs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<SweepRun> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(delta, seed)| -> Result<SweepRun> {
                let obs = add_noise(&clean, delta, seed)?;
                let mut inv = cfg.inversion_config();
                inv.upper_rule = StoppingRule::Discrepancy { tau, delta };
                let truth = Truth {
                    curve: Some(base.truth.clone()),
                    state: None,
                };
                let (res, err) =
                    run_inversion_with(&base.problem, &base.initial, &obs, &inv, &truth, None);
                if let Some(e) = err {
                    return Err(e);
                }
                let last = res.log.records.last().expect("at least the initial record");
                Ok(SweepRun {
                    delta,
                    seed,
                    j_stop: last.j,
                    param_error: last.param_error.unwrap_or(f64::NAN),
                    misfit: last.misfit,
                    stop: res.stop,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let rows: Vec<SweepRow> = deltas
        .iter()
        .map(|&delta| {
            let of: Vec<&SweepRun> = runs.iter().filter(|r| r.delta == delta).collect();
            let mut js: Vec<usize> = of.iter().map(|r| r.j_stop).collect();
            js.sort_unstable();
            SweepRow {
                delta,
                j_stop: js[(js.len() - 1) / 2],
                param_error: median(of.iter().map(|r| r.param_error).collect()),
                misfit: median(of.iter().map(|r| r.misfit).collect()),
            }
        })
        .collect();
    let per_seed_nonincreasing: Vec<bool> = (0..seeds as u64)
        .map(|s| {
            let errs: Vec<f64> = deltas
                .iter()
                .map(|&d| {
                    runs.iter()
                        .find(|r| r.delta == d && r.seed == cfg.seed + s)
                        .map(|r| r.param_error)
                        .unwrap_or(f64::NAN)
                })
                .collect();
            errs.windows(2).all(|w| w[1] <= w[0])
        })
        .collect();
    let majority_nonincreasing = 2 * per_seed_nonincreasing.iter().filter(|&&b| b).count() > seeds;

    fs::create_dir_all(&cfg.output)?;
    let mut artifacts = Vec::new();
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.delta, r.j_stop, r.param_error, r.misfit
        );
    }
    write(cfg.output.join("noise_sweep.csv"), &csv, &mut artifacts)?;
    let mut csv = format!("{SWEEP_RUNS_HEADER}\n");
    for r in &runs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.delta, r.seed, r.j_stop, r.param_error, r.misfit, r.stop
        );
    }
    write(
        cfg.output.join("noise_sweep_runs.csv"),
        &csv,
        &mut artifacts,
    )?;
    Ok(SweepSummary {
        rows,
        runs,
        per_seed_nonincreasing,
        majority_nonincreasing,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::implicit_solve;
    use crate::grid::norm_l2_spacetime;
    use crate::reaction::SobolevSpec;

    const TINY: &str = r#"{
        "name": "tiny",
        "problem": {"nx": 21, "nt": 11},
        "range": {"n": 20},
        "reaction": "fisher",
        "inversion": {
            "sobolev": 1.1,
            "lower": {"rule": {"rule": "residual_threshold", "tol": 1e-6}, "min_iterations": 1},
            "upper_rule": {"rule": "fixed_count", "k_max": 12},
            "snapshot_every": 4
        }
    }"#;

    fn tiny(dir: &Path) -> ExperimentConfig {
        let mut cfg = parse_config_str(TINY).unwrap();
        cfg.output = dir.to_path_buf();
        cfg
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(r#"{"reaction": "fisher"}"#).unwrap();
        assert_eq!(cfg.schema, SCHEMA_VERSION);
        assert_eq!(
            (cfg.problem.nx, cfg.problem.nt, cfg.problem.t_final),
            (101, 51, 0.1)
        );
        assert_eq!((cfg.problem.a, cfg.problem.b), (1.0, 0.0));
        assert_eq!(
            cfg.range,
            RangeSpec {
                n: 50,
                u_min: -1.0,
                u_max: 1.0
            }
        );
        assert_eq!(cfg.inversion.sobolev, SobolevSpec::default());
        assert_eq!(cfg.inversion.sobolev.exponent(), 1.5);
        assert_eq!(cfg.reaction, BuiltinReaction::Fisher);
        assert_eq!(cfg.noise, 0.0);
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let mut configs = vec![ExperimentConfig::default(), parse_config_str(TINY).unwrap()];
        configs.extend(CANNED.iter().map(|(n, _)| canned_config(n).unwrap()));
        for cfg in configs {
            assert_eq!(
                parse_config_str(&cfg.to_json()).unwrap(),
                cfg,
                "{}",
                cfg.name
            );
        }
    }

    #[test]
    fn canned_names_match_their_files() {
        for (name, _) in CANNED {
            let cfg = canned_config(name).unwrap();
            assert_eq!(cfg.name, name);
            assert_eq!(cfg.output, PathBuf::from(format!("out/{name}")));
        }
        assert!(canned_config("nope").unwrap_err().is_config());
    }

    fn config_error(text: &str) -> String {
        let err = parse_config_str(text).unwrap_err();
        assert!(err.is_config(), "{err}");
        err.to_string()
    }

    #[test]
    fn invalid_input_names_the_field() {
        let msg = config_error(r#"{"inversion": {"mode": "sideways"}}"#);
        assert!(msg.contains("inversion.mode"), "{msg}");
        let msg = config_error(r#"{"problem": {"nx": 11, "colour": 3}}"#);
        assert!(msg.contains("problem") && msg.contains("colour"), "{msg}");
        let msg = config_error(r#"{"reaction": "fisherr"}"#);
        assert!(msg.contains("reaction"), "{msg}");
        let msg = config_error(r#"{"observation": "partial"}"#);
        assert!(msg.contains("observation"), "{msg}");
        let msg = config_error(r#"{"noise": -0.1}"#);
        assert!(msg.contains("noise"), "{msg}");
        let msg = config_error(r#"{"schema": 7}"#);
        assert!(msg.contains("schema"), "{msg}");
        let msg =
            config_error(r#"{"inversion": {"upper_rule": {"rule": "posterior", "c_pos": 2}}}"#);
        assert!(msg.contains("posterior"), "{msg}");
        config_error(r#"{"reaction_file": "/definitely/not/here.json"}"#);
        config_error(r#"{"problem": {"scenario": {"kind": "stationary_sine", "mode": 0}}}"#);
    }

    #[test]
    fn relative_curve_paths_resolve_against_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let curve = ReactionCurve::builtin(
            BuiltinReaction::LaneEmden,
            RangeGrid::new(20, -1.0, 1.0).unwrap(),
        );
        fs::write(dir.path().join("truth.json"), curve_json(&curve)).unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"range": {"n": 20}, "reaction_file": "truth.json"}"#,
        )
        .unwrap();
        let cfg = parse_config(&path).unwrap();
        assert_eq!(
            cfg.reaction_file.as_deref(),
            Some(dir.path().join("truth.json").as_path())
        );
        assert!(parse_config(&dir.path().join("missing.json"))
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn scenarios_solve_the_reaction_free_problem() {
        let zero = ReactionCurve::zeros(RangeGrid::new(20, -1.0, 1.0).unwrap());
        let spec = ProblemSpec {
            nx: 201,
            nt: 201,
            scenario: Scenario::StationarySine { mode: 2 },
            ..ProblemSpec::default()
        };
        let p = spec.build().unwrap();
        let u = implicit_solve(&p, &zero).unwrap();
        let still = SpaceTimeField::constant_in_time(p.time(), p.u0());
        assert!(norm_l2_spacetime(&u.sub(&still).unwrap()) / norm_l2_spacetime(&still) < 1e-2);

        let spec = ProblemSpec {
            scenario: Scenario::OscillatingSine { mode: 1 },
            ..spec
        };
        let p = spec.build().unwrap();
        let u = implicit_solve(&p, &zero).unwrap();
        let exact = SpaceTimeField::from_fn(p.space(), p.time(), |t, x| {
            (PI * t / 0.1).cos() * (PI * x).sin()
        });
        assert!(norm_l2_spacetime(&u.sub(&exact).unwrap()) / norm_l2_spacetime(&exact) < 2e-2);
        assert!((u.terminal().values()[100] + 1.0).abs() < 2e-2);

        let p = ProblemSpec {
            scenario: Scenario::DecayingSine { mode: 1 },
            ..spec
        }
        .build()
        .unwrap();
        assert!(p.phi().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.runs.len(), 1);
        let r = &summary.runs[0];
        assert_eq!(r.stop, UpperStop::Rule);
        assert_eq!(r.j_stop, 12);
        assert!(r.final_misfit.unwrap() < r.initial_misfit.unwrap());
        assert!(r.relative_param_error.unwrap() < 1.0);
        for p in &summary.artifacts {
            assert!(p.exists(), "{}", p.display());
        }
        for name in [
            "run_log.csv",
            "reaction_init.json",
            "reaction_final.json",
            "reaction_truth.json",
            "summary.json",
            "observation_full.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let log = fs::read_to_string(dir.path().join("run_log.csv")).unwrap();
        assert_eq!(log.lines().next(), Some(crate::upper::RUN_LOG_HEADER));
        assert_eq!(log.lines().count(), 14);
        let snaps: Vec<_> = fs::read_dir(dir.path().join("snapshots"))
            .unwrap()
            .collect();
        assert_eq!(snaps.len(), 4);
        assert!(dir.path().join("snapshots/state_j00012.csv").exists());
        let echoed: RunSummary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(echoed.config, cfg);
        let final_curve: ReactionCurve = serde_json::from_str(
            &fs::read_to_string(dir.path().join("reaction_final.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(final_curve.grid().len(), 20);
    }

    #[test]
    fn repeated_runs_give_identical_logs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut cfg = tiny(a.path());
        cfg.noise = 0.02;
        cfg.seed = 5;
        run_experiment(&cfg).unwrap();
        cfg.output = b.path().to_path_buf();
        run_experiment(&cfg).unwrap();
        for name in [
            "run_log.csv",
            "observation_full.csv",
            "snapshots/state_j00008.csv",
            "reaction_final.json",
        ] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn paired_modes_write_paired_logs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(dir.path());
        cfg.compare_modes = true;
        cfg.observation = ObservationMode::Terminal;
        let summary = run_experiment(&cfg).unwrap();
        let (std, seq) = (
            summary.run(InversionMode::Standard).unwrap(),
            summary.run(InversionMode::Sequential).unwrap(),
        );
        assert!(seq.total_kappa < std.total_kappa);
        for name in [
            "run_log_standard.csv",
            "run_log_sequential.csv",
            "reaction_final_standard.json",
            "observation_terminal.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
    }

    #[test]
    fn unusable_start_keeps_the_last_iterate() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(dir.path());
        // every trial step overflows and is rejected
        let wild = ReactionCurve::from_fn(RangeGrid::new(20, -1.0, 1.0).unwrap(), |_| 1e300);
        let curve_path = dir.path().join("wild.json");
        fs::write(&curve_path, curve_json(&wild)).unwrap();
        cfg.initial_reaction_file = Some(curve_path);
        let summary = run_experiment(&cfg).unwrap();
        let r = &summary.runs[0];
        assert_eq!(r.stop, UpperStop::Stagnated);
        assert_eq!((r.j_stop, r.total_kappa), (0, 0));
        assert!(r.rejected_steps > 0);
        // the non-finite reaction error is reported as absent
        assert_eq!(r.final_param_error, None);
        let written: RunSummary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(written.runs[0].stop, UpperStop::Stagnated);
        let last: ReactionCurve = serde_json::from_str(
            &fs::read_to_string(dir.path().join("reaction_final.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(last, wild);
    }

    #[test]
    fn overrides_replace_fields() {
        let mut cfg = canned_config("zfk_terminal_seq_vs_std").unwrap();
        Overrides {
            output: Some("elsewhere".into()),
            seed: Some(9),
            mode: Some(InversionMode::Standard),
            observation: Some(ObservationMode::Full),
            reaction: Some(BuiltinReaction::AllenCahn),
        }
        .apply(&mut cfg);
        assert_eq!(cfg.output, PathBuf::from("elsewhere"));
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.inversion.mode, InversionMode::Standard);
        assert!(!cfg.compare_modes);
        assert_eq!(
            cfg.inversion_config().observation_mode,
            ObservationMode::Full
        );
        assert_eq!(cfg.reaction, BuiltinReaction::AllenCahn);
    }

    #[test]
    fn discrepancy_rule_follows_the_noise_level() {
        let mut cfg = canned_config("fisher_full").unwrap();
        cfg.noise = 0.03;
        assert_eq!(
            cfg.inversion_config().upper_rule,
            StoppingRule::Discrepancy {
                tau: 1.5,
                delta: 0.03
            }
        );
    }

    #[test]
    fn sweep_writes_medians_by_decreasing_noise() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(dir.path());
        cfg.inversion.upper_rule = StoppingRule::Discrepancy {
            tau: 1.5,
            delta: 0.0,
        };
        cfg.inversion.max_upper_iterations = 400;
        let s = run_sweep(&cfg, &[0.01, 0.04], 2, 2).unwrap();
        assert_eq!(
            s.rows.iter().map(|r| r.delta).collect::<Vec<_>>(),
            vec![0.04, 0.01]
        );
        assert_eq!(s.runs.len(), 4);
        assert!(s.rows[0].j_stop <= s.rows[1].j_stop);
        let csv = fs::read_to_string(dir.path().join("noise_sweep.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some(SWEEP_HEADER));
        assert_eq!(csv.lines().count(), 3);
        let runs = fs::read_to_string(dir.path().join("noise_sweep_runs.csv")).unwrap();
        assert_eq!(runs.lines().next(), Some(SWEEP_RUNS_HEADER));
        assert!(run_sweep(&cfg, &[], 2, 1).unwrap_err().is_config());
        assert!(run_sweep(&cfg, &[-0.1], 2, 1).unwrap_err().is_config());
    }
}
