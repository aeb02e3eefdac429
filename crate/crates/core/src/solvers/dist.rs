use crate::model::{min_rate, se_from_sinr, sinr_unchecked, Instance, PowerAllocation, RateVector};

use super::{proportional_split, terms, SolverConfig, SolverId, SolverResult, Stopwatch};

/// One-shot local rule: every AP splits its budget in proportion to
/// `g^alpha` over the users, with no coordination between APs.
pub fn solve_dist(inst: &Instance, cfg: &SolverConfig) -> SolverResult {
    let clock = Stopwatch::start();
    let alpha = cfg.dist_alpha;
    let eta = proportional_split(inst, |g| if g > 0.0 { g.powf(alpha) } else { 0.0 });
    let wall_time_s = clock.seconds();
    // informational only, not charged to the solver
    let rate = min_rate(&RateVector(se_from_sinr(&sinr_unchecked(inst, &eta)))).unwrap_or(0.0);
    SolverResult {
        solver: SolverId::Dist,
        candidate: PowerAllocation::new(eta),
        cost_units: terms(inst),
        wall_time_s,
        converged: true,
        self_reported_rate: rate,
    }
}
