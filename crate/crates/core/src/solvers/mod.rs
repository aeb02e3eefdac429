//! The trusted solver portfolio: a fast iterative fairness solver, a
//! bisection-based feasibility solver, and a one-shot distributed heuristic.
//!
//! Every solver is deterministic given `(instance, config)`. Work is counted
//! in `cost_units`, where one unit is one `(AP, user)` term of an SINR
//! evaluation or allocation rule, so the counts are comparable across solvers
//! and independent of the machine.

mod dist;
mod exact;
mod fast;
mod oracle;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Matrix, PowerAllocation};

pub use dist::solve_dist;
pub use exact::{feasibility_inner, solve_exact, InnerOutcome};
pub use fast::solve_fast;
pub use oracle::{oracle_grid_search, ORACLE_MAX_TERMS, ORACLE_MIN_RESOLUTION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverId {
    Fast,
    Exact,
    Dist,
}

impl SolverId {
    pub const ALL: [SolverId; 3] = [SolverId::Fast, SolverId::Exact, SolverId::Dist];

    pub fn name(self) -> &'static str {
        match self {
            SolverId::Fast => "fast",
            SolverId::Exact => "exact",
            SolverId::Dist => "dist",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(SolverId::Fast),
            "exact" => Ok(SolverId::Exact),
            "dist" => Ok(SolverId::Dist),
            other => Err(Error::usage(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub fast_iters: usize,
    pub fast_shift_frac: f64,
    pub exact_bisect_iters: usize,
    pub exact_inner_iters: usize,
    pub exact_tol_rel: f64,
    pub dist_alpha: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fast_iters: 20,
            fast_shift_frac: 0.1,
            exact_bisect_iters: 40,
            exact_inner_iters: 200,
            exact_tol_rel: 1e-4,
            dist_alpha: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fast_iters == 0 || self.exact_bisect_iters == 0 || self.exact_inner_iters == 0 {
            return Err(Error::usage("solver iteration counts must be positive"));
        }
        if !(self.fast_shift_frac > 0.0 && self.fast_shift_frac < 1.0) {
            return Err(Error::usage("fast_shift_frac must lie in (0, 1)"));
        }
        if !(self.exact_tol_rel > 0.0 && self.exact_tol_rel.is_finite()) {
            return Err(Error::usage("exact_tol_rel must be positive"));
        }
        if !(self.dist_alpha > 0.0 && self.dist_alpha.is_finite()) {
            return Err(Error::usage("dist_alpha must be positive"));
        }
        Ok(())
    }
}

/// What a solver hands back. `self_reported_rate` is informational; the
/// verifier never reads it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub solver: SolverId,
    pub candidate: PowerAllocation,
    pub cost_units: u64,
    pub wall_time_s: f64,
    pub converged: bool,
    pub self_reported_rate: f64,
}

/// Anything the orchestrator can ask for a candidate.
pub trait SolverPortfolio: Sync {
    fn solve(&self, solver: SolverId, inst: &Instance) -> SolverResult;
}

/// The three built-in solvers sharing one configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct Portfolio {
    pub config: SolverConfig,
}

impl Portfolio {
    pub fn new(config: SolverConfig) -> Self {
        Portfolio { config }
    }
}

impl SolverPortfolio for Portfolio {
    fn solve(&self, solver: SolverId, inst: &Instance) -> SolverResult {
        match solver {
            SolverId::Fast => solve_fast(inst, &self.config),
            SolverId::Exact => solve_exact(inst, &self.config),
            SolverId::Dist => solve_dist(inst, &self.config),
        }
    }
}

/// `eta[l][k] = P_l * w[l][k] / sum_k' w[l][k']`; rows with zero total weight stay silent.
pub(crate) fn proportional_split(inst: &Instance, weight: impl Fn(f64) -> f64) -> Matrix {
    let g = inst.gains();
    let mut eta = Matrix::zeros(inst.n_aps(), inst.n_users());
    for (l, &p) in inst.p_max().iter().enumerate() {
        let w: Vec<f64> = (0..inst.n_users()).map(|k| weight(g.get(l, k))).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            for (k, wk) in w.into_iter().enumerate() {
                eta.set(l, k, p * wk / total);
            }
        }
    }
    eta
}

/// Budget-saturating allocation proportional to squared gains.
pub(crate) fn channel_proportional(inst: &Instance) -> Matrix {
    proportional_split(inst, |g| g * g)
}

pub(crate) fn terms(inst: &Instance) -> u64 {
    (inst.n_aps() * inst.n_users()) as u64
}

pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub(crate) fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{per_ap_load, Split};

    #[test]
    fn solver_id_order_and_names() {
        assert!(SolverId::Fast < SolverId::Exact && SolverId::Exact < SolverId::Dist);
        for id in SolverId::ALL {
            assert_eq!(id.name().parse::<SolverId>().unwrap(), id);
        }
        assert!("bogus".parse::<SolverId>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { fast_shift_frac: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { exact_inner_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn channel_proportional_saturates_rows() {
        let inst = Instance::from_parts(
            "c",
            Split::Test,
            vec![vec![1.0, 2.0, 0.5], vec![0.0, 0.0, 0.0]],
            vec![0.2, 0.4],
            1.0,
            0.0,
        )
        .unwrap();
        let eta = channel_proportional(&inst);
        let load = per_ap_load(&PowerAllocation::new(eta.clone()));
        assert!((load[0] - 0.2).abs() < 1e-15);
        assert_eq!(load[1], 0.0);
        assert!((eta.get(0, 1) - 0.2 * 4.0 / 5.25).abs() < 1e-15);
    }

    #[test]
    fn result_json_fields() {
        let inst = Instance::from_parts("j", Split::Test, vec![vec![1.0, 2.0]], vec![1.0], 1.0, 0.0).unwrap();
        let r = Portfolio::default().solve(SolverId::Dist, &inst);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["solver"], "dist");
        assert_eq!(v["cost_units"], 2);
        assert_eq!(v["converged"], true);
        assert!(v["wall_time_s"].is_number());
        assert_eq!(v["candidate"][0].as_array().unwrap().len(), 2);
    }
}
