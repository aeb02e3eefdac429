use crate::model::{se_from_sinr, sinr_unchecked, Instance, Matrix, PowerAllocation};

use super::{channel_proportional, terms, SolverConfig, SolverId, SolverResult, Stopwatch};

/// Index of the extreme element; ties resolve to the lowest index.
fn arg_extreme(v: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if better(x, v[best]) {
            best = i;
        }
    }
    best
}

fn worst(se: &[f64]) -> f64 {
    se.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Low-complexity fairness iteration.
///
/// Starts from the channel-proportional, budget-saturating split and then, at
/// every AP, moves a fixed fraction of the best-served user's power to the
/// worst-served user. A step is kept only if it raises the common rate; the
/// first step that does not ends the run as converged. Row sums never change,
/// so the per-AP budgets hold by construction.
pub fn solve_fast(inst: &Instance, cfg: &SolverConfig) -> SolverResult {
    let clock = Stopwatch::start();
    let unit = terms(inst);
    let mut eta = channel_proportional(inst);
    let mut cost = unit;

    let mut se = se_from_sinr(&sinr_unchecked(inst, &eta));
    cost += unit;
    let mut common = worst(&se);
    let mut converged = false;

    for _ in 0..cfg.fast_iters {
        let k_min = arg_extreme(&se, |a, b| a < b);
        let k_max = arg_extreme(&se, |a, b| a > b);
        if k_min == k_max {
            converged = true;
            break;
        }
        let trial = shift(&eta, k_max, k_min, cfg.fast_shift_frac);
        let trial_se = se_from_sinr(&sinr_unchecked(inst, &trial));
        cost += unit;
        let trial_common = worst(&trial_se);
        if trial_common <= common {
            converged = true;
            break;
        }
        eta = trial;
        se = trial_se;
        common = trial_common;
    }

    SolverResult {
        solver: SolverId::Fast,
        candidate: PowerAllocation::new(eta),
        cost_units: cost,
        wall_time_s: clock.seconds(),
        converged,
        self_reported_rate: common,
    }
}

fn shift(eta: &Matrix, from: usize, to: usize, frac: f64) -> Matrix {
    let mut out = eta.clone();
    for l in 0..out.rows() {
        let row = out.row_mut(l);
        let delta = frac * row[from];
        row[from] -= delta;
        row[to] += delta;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_se, min_rate, per_ap_load, Split};

    fn inst(g: Vec<Vec<f64>>, p: Vec<f64>) -> Instance {
        Instance::from_parts("f", Split::Test, g, p, 1.0, 0.0).unwrap()
    }

    #[test]
    fn single_user_gets_full_budget() {
        let i = inst(vec![vec![0.5], vec![1.5]], vec![0.3, 0.7]);
        let r = solve_fast(&i, &SolverConfig::default());
        assert_eq!(r.candidate.eta.to_rows(), vec![vec![0.3], vec![0.7]]);
        assert!(r.converged);
    }

    #[test]
    fn symmetric_split_is_a_fixed_point() {
        let i = inst(vec![vec![1.0, 1.0]], vec![1.0]);
        let r = solve_fast(&i, &SolverConfig::default());
        assert_eq!(r.candidate.eta.to_rows(), vec![vec![0.5, 0.5]]);
        assert!(r.converged);
    }

    #[test]
    fn weak_user_gains_power_and_common_rate_rises() {
        // init is [0.2, 0.8]; the g=1 user is the bottleneck
        let i = inst(vec![vec![1.0, 2.0]], vec![1.0]);
        let init = channel_proportional(&i);
        assert!((init.get(0, 0) - 0.2).abs() < 1e-15);
        let init_rate = min_rate(&compute_se(&i, &PowerAllocation::new(init.clone())).unwrap()).unwrap();

        let r = solve_fast(&i, &SolverConfig::default());
        assert!(r.candidate.eta.get(0, 0) > init.get(0, 0));
        let rate = min_rate(&compute_se(&i, &r.candidate).unwrap()).unwrap();
        assert!(rate > init_rate);
        assert_eq!(rate, r.self_reported_rate);
        assert!((per_ap_load(&r.candidate)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_is_monotone_in_common_rate() {
        let i = inst(vec![vec![1.0, 2.0, 0.4], vec![0.3, 0.1, 1.2]], vec![1.0, 0.5]);
        let mut last = f64::NEG_INFINITY;
        for iters in 1..=20 {
            let cfg = SolverConfig { fast_iters: iters, ..Default::default() };
            let r = solve_fast(&i, &cfg);
            assert!(r.self_reported_rate >= last);
            last = r.self_reported_rate;
        }
    }

    #[test]
    fn tie_breaking_prefers_lowest_index() {
        assert_eq!(arg_extreme(&[1.0, 0.5, 0.5], |a, b| a < b), 1);
        assert_eq!(arg_extreme(&[2.0, 2.0, 1.0], |a, b| a > b), 0);
    }
}
