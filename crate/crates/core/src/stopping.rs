//! Termination rules for both iteration levels.
//!
//! The lower level cannot observe its true state error `‖u − S(Π)‖`, so
//! every lower rule works with the PDE residual norm instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StoppingRule {
    /// Stop after exactly `k_max` iterations.
    FixedCount { k_max: usize },
    /// Lower: residual ≤ `tol`. Upper: misfit ≤ `tol`.
    ResidualThreshold { tol: f64 },
    /// Lower only: residual ≤ `delta / q^j`, tightening with the upper index.
    NoiseCoupled { delta: f64, q: f64 },
    /// Lower only: `c_pos · residual ≤` misfit of the previous upper step.
    Posterior { c_pos: f64 },
    /// Upper: misfit ≤ `tau · delta · ‖y‖`. Lower: residual ≤ `tau · delta`.
    Discrepancy { tau: f64, delta: f64 },
}

/// Which level a rule is meant for; some rules only make sense on one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Lower,
    Upper,
}

impl StoppingRule {
    pub fn validate(&self, level: Level) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        match *self {
            StoppingRule::FixedCount { k_max } => {
                if k_max < 1 {
                    return bad("fixed_count.k_max must be at least 1".into());
                }
            }
            StoppingRule::ResidualThreshold { tol } => {
                if !(tol > 0.0 && tol.is_finite()) {
                    return bad(format!(
                        "residual_threshold.tol must be positive, got {tol}"
                    ));
                }
            }
            StoppingRule::NoiseCoupled { delta, q } => {
                if level == Level::Upper {
                    return bad("noise_coupled is a lower-level rule".into());
                }
                if !(delta >= 0.0 && delta.is_finite()) {
                    return bad(format!(
                        "noise_coupled.delta must be nonnegative, got {delta}"
                    ));
                }
                if !(q >= 1.0 && q.is_finite()) {
                    return bad(format!("noise_coupled.q must be at least 1, got {q}"));
                }
            }
            StoppingRule::Posterior { c_pos } => {
                if level == Level::Upper {
                    return bad("posterior is a lower-level rule".into());
                }
                if !(c_pos > 0.0 && c_pos.is_finite()) {
                    return bad(format!("posterior.c_pos must be positive, got {c_pos}"));
                }
            }
            StoppingRule::Discrepancy { tau, delta } => {
                if !(tau > 1.0 && tau.is_finite()) {
                    return bad(format!("discrepancy.tau must exceed 1, got {tau}"));
                }
                if !(delta >= 0.0 && delta.is_finite()) {
                    return bad(format!(
                        "discrepancy.delta must be nonnegative, got {delta}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Lower-level residual threshold at upper index `j`, when the rule has one.
    pub fn lower_threshold(&self, j: usize, misfit: f64) -> Option<f64> {
        match *self {
            StoppingRule::FixedCount { .. } => None,
            StoppingRule::ResidualThreshold { tol } => Some(tol),
            StoppingRule::NoiseCoupled { delta, q } => {
                Some(delta / q.powi(j.min(i32::MAX as usize) as i32))
            }
            StoppingRule::Posterior { c_pos } => Some(misfit / c_pos),
            StoppingRule::Discrepancy { tau, delta } => Some(tau * delta),
        }
    }
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule::FixedCount { k_max: 1000 }
    }
}

/// Whether the lower iteration at step `k` of upper step `j` should stop.
/// `misfit` is the data misfit of the previous upper step (used by the
/// posterior rule only).
pub fn lower_should_stop(
    rule: &StoppingRule,
    k: usize,
    residual: f64,
    j: usize,
    misfit: f64,
) -> bool {
    match *rule {
        StoppingRule::FixedCount { k_max } => k >= k_max,
        _ => rule
            .lower_threshold(j, misfit)
            .is_some_and(|threshold| residual <= threshold),
    }
}

/// Whether the upper iteration should stop at index `j` with the given misfit.
pub fn upper_should_stop(rule: &StoppingRule, j: usize, misfit: f64, y_norm: f64) -> bool {
    match *rule {
        StoppingRule::FixedCount { k_max } => j >= k_max,
        StoppingRule::ResidualThreshold { tol } => misfit <= tol,
        // δ = 0 means exact data: the discrepancy principle never fires
        StoppingRule::Discrepancy { tau, delta } => delta > 0.0 && misfit <= tau * delta * y_norm,
        StoppingRule::NoiseCoupled { .. } | StoppingRule::Posterior { .. } => false,
    }
}
