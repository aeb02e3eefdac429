//! Independent acceptance checks on returned candidates.
//!
//! The verifier only ever sees the instance, the candidate allocation and the
//! acceptance criterion. Anything a solver reports about its own result is
//! ignored; feasibility and the common rate are recomputed from scratch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_se, min_rate, per_ap_load, Instance, PowerAllocation};

pub const DEFAULT_FEAS_TOL_REL: f64 = 1e-9;
pub const DEFAULT_RATE_TOL_REL: f64 = 1e-6;

/// Tolerances applied by the verifier. The target rate itself comes from each
/// instance, see [`AcceptanceCriterion::for_instance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierConfig {
    pub feas_tol_rel: f64,
    pub rate_tol_rel: f64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig { feas_tol_rel: DEFAULT_FEAS_TOL_REL, rate_tol_rel: DEFAULT_RATE_TOL_REL }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, tol) in [("feas_tol_rel", self.feas_tol_rel), ("rate_tol_rel", self.rate_tol_rel)] {
            if !(tol > 0.0 && tol <= 1e-2) {
                return Err(Error::usage(format!("{name} must lie in (0, 1e-2], got {tol}")));
            }
        }
        Ok(())
    }
}

/// The acceptance rule: per-AP feasibility plus a common-rate target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCriterion {
    pub gamma_target: f64,
    pub feas_tol_rel: f64,
    pub rate_tol_rel: f64,
}

impl AcceptanceCriterion {
    pub fn new(gamma_target: f64, feas_tol_rel: f64, rate_tol_rel: f64) -> Result<Self> {
        if !(gamma_target.is_finite() && gamma_target >= 0.0) {
            return Err(Error::usage("gamma_target must be finite and nonnegative"));
        }
        VerifierConfig { feas_tol_rel, rate_tol_rel }.validate()?;
        Ok(AcceptanceCriterion { gamma_target, feas_tol_rel, rate_tol_rel })
    }

    pub fn for_instance(inst: &Instance, cfg: &VerifierConfig) -> Self {
        AcceptanceCriterion {
            gamma_target: inst.gamma_target(),
            feas_tol_rel: cfg.feas_tol_rel,
            rate_tol_rel: cfg.rate_tol_rel,
        }
    }
}

/// One AP whose load exceeds its budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub ap: usize,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub feasible: bool,
    pub r_ver: f64,
    pub accepted: bool,
    pub margin: f64,
    pub violations: Vec<Violation>,
}

/// Per-AP budget check. Negative or non-finite coefficients make the candidate
/// infeasible without producing a budget violation entry.
pub fn check_feasible(inst: &Instance, alloc: &PowerAllocation, feas_tol_rel: f64) -> Result<(bool, Vec<Violation>)> {
    if alloc.eta.rows() != inst.n_aps() || alloc.eta.cols() != inst.n_users() {
        return Err(Error::usage(format!(
            "allocation is {}x{} but instance is {}x{}",
            alloc.eta.rows(),
            alloc.eta.cols(),
            inst.n_aps(),
            inst.n_users()
        )));
    }
    let well_formed = alloc.is_finite_nonneg();
    let violations: Vec<Violation> = per_ap_load(alloc)
        .into_iter()
        .zip(inst.p_max())
        .enumerate()
        .filter(|(_, (load, p))| *load > **p * (1.0 + feas_tol_rel))
        .map(|(ap, (load, p))| Violation { ap, excess: load - p })
        .collect();
    Ok((well_formed && violations.is_empty(), violations))
}

/// Recompute feasibility and the verified common rate of `alloc`, then apply
/// the acceptance rule `feasible && r_ver >= gamma * (1 - rate_tol_rel)`.
pub fn verify(inst: &Instance, alloc: &PowerAllocation, crit: &AcceptanceCriterion) -> Result<VerificationReport> {
    let (feasible, violations) = check_feasible(inst, alloc, crit.feas_tol_rel)?;
    if !alloc.is_finite_nonneg() {
        return Ok(VerificationReport {
            feasible: false,
            r_ver: 0.0,
            accepted: false,
            margin: -crit.gamma_target,
            violations,
        });
    }
    let r_ver = min_rate(&compute_se(inst, alloc)?)?;
    let meets_target = crit.gamma_target == 0.0 || r_ver >= crit.gamma_target * (1.0 - crit.rate_tol_rel);
    Ok(VerificationReport {
        feasible,
        r_ver,
        accepted: feasible && meets_target,
        margin: r_ver - crit.gamma_target,
        violations,
    })
}

/// Convenience wrapper holding one tolerance configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct Verifier {
    pub config: VerifierConfig,
}

impl Verifier {
    pub fn new(config: VerifierConfig) -> Self {
        Verifier { config }
    }

    pub fn verify(&self, inst: &Instance, alloc: &PowerAllocation) -> Result<VerificationReport> {
        verify(inst, alloc, &AcceptanceCriterion::for_instance(inst, &self.config))
    }
}
