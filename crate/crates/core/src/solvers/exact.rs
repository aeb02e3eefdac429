use crate::model::{se_from_sinr, sinr_unchecked, Instance, Matrix, PowerAllocation};

use super::{channel_proportional, terms, SolverConfig, SolverId, SolverResult, Stopwatch};

const SINR_FLOOR: f64 = 1e-30;

/// Smoothing of the margin minimum, relative to the largest coherent term,
/// in the first continuation stage; each later stage is 10x tighter.
const MU_START: f64 = 1e-2;
const MU_STAGES: usize = 4;

/// A stage ends when its smoothed objective gains less than
/// `STALL_GAIN * scale` over `STALL_WINDOW` steps.
const STALL_WINDOW: usize = 20;
const STALL_GAIN: f64 = 1e-7;

/// Result of one common-SINR feasibility probe.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerOutcome {
    pub alloc: PowerAllocation,
    pub feasible: bool,
    pub cost_units: u64,
}

/// Search for an allocation reaching `target_sinr` at every user.
///
/// Phase one is scale-and-project: each round scales user `k`'s column by
/// `target / SINR_k` and then shrinks every over-budget AP row back onto its
/// budget. Column scaling cannot change how a user's power is spread over
/// the APs, so when phase one fails, phase two runs projected ascent on the
/// per-user SINR margins in amplitude space (see [`margin_ascent`]). The
/// probe succeeds once the worst SINR is within `exact_tol_rel` of the
/// target. The returned allocation always respects the per-AP budgets.
pub fn feasibility_inner(inst: &Instance, target_sinr: f64, cfg: &SolverConfig) -> InnerOutcome {
    let unit = terms(inst);
    let threshold = target_sinr * (1.0 - cfg.exact_tol_rel);
    let mut eta = channel_proportional(inst);
    let mut cost = unit;
    if target_sinr > single_user_bounds(inst).into_iter().fold(f64::INFINITY, f64::min) {
        // some user cannot reach the target even without interference
        return InnerOutcome { alloc: PowerAllocation::new(eta), feasible: false, cost_units: cost };
    }

    for _ in 0..cfg.exact_inner_iters {
        let sinr = sinr_unchecked(inst, &eta);
        cost += unit;
        if sinr.iter().all(|&s| s >= threshold) {
            return InnerOutcome { alloc: PowerAllocation::new(eta), feasible: true, cost_units: cost };
        }
        for (k, s) in sinr.iter().enumerate() {
            let d = target_sinr / s.max(SINR_FLOOR);
            for l in 0..eta.rows() {
                let v = eta.get(l, k) * d;
                eta.set(l, k, v);
            }
        }
        project_rows(&mut eta, inst.p_max());
        cost += unit;
    }

    let (eta, evals) = margin_ascent(inst, target_sinr, threshold, &eta, cfg.exact_inner_iters);
    cost += evals * unit;
    let sinr = sinr_unchecked(inst, &eta);
    cost += unit;
    let feasible = sinr.iter().all(|&s| s >= threshold);
    InnerOutcome { alloc: PowerAllocation::new(eta), feasible, cost_units: cost }
}

/// Smoothed worst margin at one point, with what the gradient needs.
#[derive(Clone)]
struct MarginEval {
    value: f64,
    weights: Vec<f64>,
    coherent: Vec<f64>,
    norm: Vec<f64>,
}

impl MarginEval {
    /// Gains are normalized by the noise amplitude (`h = g / sigma`), so
    /// `phi_k = sum_l h_lk x_lk - s * b_k` with
    /// `b_k = sqrt(1 + sum_l h_lk^2 sum_{j != k} x_lj^2)`, and
    /// `SINR_k >= s^2` exactly when `phi_k >= 0`. The value is the
    /// log-sum-exp soft minimum of the `phi_k` at temperature `mu`.
    fn at(h: &Matrix, x: &Matrix, s: f64, mu: f64) -> Self {
        let (n_aps, n_users) = (h.rows(), h.cols());
        let mut coherent = vec![0.0; n_users];
        let mut norm = vec![1.0; n_users];
        for l in 0..n_aps {
            let row = x.row(l);
            let energy: f64 = row.iter().map(|v| v * v).sum();
            for k in 0..n_users {
                let hk = h.get(l, k);
                coherent[k] += hk * row[k];
                norm[k] += hk * hk * (energy - row[k] * row[k]).max(0.0);
            }
        }
        norm.iter_mut().for_each(|v| *v = v.sqrt());
        let phi: Vec<f64> = coherent.iter().zip(&norm).map(|(a, b)| a - s * b).collect();
        let m = phi.iter().copied().fold(f64::INFINITY, f64::min);
        let mut weights: Vec<f64> = phi.iter().map(|p| (-(p - m) / mu).exp()).collect();
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= z);
        MarginEval { value: m - mu * z.ln(), weights, coherent, norm }
    }

    fn clears(&self, threshold: f64) -> bool {
        self.coherent.iter().zip(&self.norm).all(|(a, b)| *a >= 0.0 && (a / b).powi(2) >= threshold)
    }

    /// Gradient in `x`: `w_j h_lj - x_lj * s * sum_{k != j} w_k h_lk^2 / b_k`.
    fn gradient(&self, h: &Matrix, x: &Matrix, s: f64, out: &mut Matrix) {
        let w = &self.weights;
        for l in 0..x.rows() {
            let pull: Vec<f64> = (0..x.cols()).map(|k| w[k] * s * h.get(l, k).powi(2) / self.norm[k]).collect();
            let total: f64 = pull.iter().sum();
            for j in 0..x.cols() {
                out.set(l, j, w[j] * h.get(l, j) - x.get(l, j) * (total - pull[j]));
            }
        }
    }
}

/// Nonnegative orthant, then each AP row onto its amplitude ball `|x_l|^2 <= P_l`.
fn project_amplitudes(x: &mut Matrix, p_max: &[f64]) {
    for (l, &p) in p_max.iter().enumerate() {
        let row = x.row_mut(l);
        row.iter_mut().for_each(|v| *v = v.max(0.0));
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > p.sqrt() {
            let scale = p.sqrt() / norm;
            row.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Accelerated projected ascent on the smoothed worst SINR margin.
///
/// In amplitudes `x = sqrt(eta)` each margin is linear minus a norm, hence
/// concave, and the budget set is a product of convex sets, so the ascent
/// finds the best attainable worst margin up to the smoothing gap
/// `mu * ln K`. The smoothing is tightened over [`MU_STAGES`] stages of at
/// most `iters` steps each. Starts from `eta0` and stops once every SINR
/// clears `threshold`, or once a converged stage proves that no point can.
/// Returns the allocation and the number of margin evaluations.
fn margin_ascent(inst: &Instance, target: f64, threshold: f64, eta0: &Matrix, iters: usize) -> (Matrix, u64) {
    let sigma = inst.sigma2().sqrt();
    let g = inst.gains().matrix();
    let h = Matrix::from_fn(g.rows(), g.cols(), |l, k| g.get(l, k) / sigma);
    let s = target.sqrt();
    let p_max = inst.p_max();
    let radius = p_max.iter().copied().fold(0.0, f64::max).sqrt();
    let gap = (inst.n_users() as f64).ln();

    let mut x = Matrix::from_fn(eta0.rows(), eta0.cols(), |l, k| eta0.get(l, k).sqrt());
    let mut ex = MarginEval::at(&h, &x, s, 1.0);
    let mut evals = 1u64;
    let scale = ex.coherent.iter().copied().fold(1.0, f64::max);
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut trial = x.clone();
    let mut step = f64::NAN;

    'stages: for stage in 0..MU_STAGES {
        if ex.clears(threshold) {
            break;
        }
        let mu = MU_START * scale * 0.1f64.powi(stage as i32);
        ex = MarginEval::at(&h, &x, s, mu);
        evals += 1;
        let (mut y, mut ey) = (x.clone(), ex.clone());
        let mut momentum = 1.0f64;
        let mut checkpoint = ex.value;

        for it in 1..=iters {
            ey.gradient(&h, &y, s, &mut grad);
            let grad_max = grad.as_slice().iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if !(grad_max > 0.0) {
                continue 'stages;
            }
            if step.is_nan() {
                step = 0.1 * radius / grad_max;
            }
            // backtrack until the quadratic model under-estimates the ascent
            let et = loop {
                if step * grad_max <= 1e-12 * radius {
                    continue 'stages;
                }
                for ((t, v), d) in trial.as_mut_slice().iter_mut().zip(y.as_slice()).zip(grad.as_slice()) {
                    *t = v + step * d;
                }
                project_amplitudes(&mut trial, p_max);
                let et = MarginEval::at(&h, &trial, s, mu);
                evals += 1;
                let (mut lin, mut quad) = (0.0, 0.0);
                for ((t, v), d) in trial.as_slice().iter().zip(y.as_slice()).zip(grad.as_slice()) {
                    lin += d * (t - v);
                    quad += (t - v) * (t - v);
                }
                if et.value >= ey.value + lin - quad / (2.0 * step) {
                    break et;
                }
                step *= 0.5;
            };

            if et.value < ex.value {
                // momentum overshot: restart from the best point
                momentum = 1.0;
                y.as_mut_slice().copy_from_slice(x.as_slice());
                ey = ex.clone();
                continue;
            }
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            for ((yv, t), v) in y.as_mut_slice().iter_mut().zip(trial.as_slice()).zip(x.as_slice()) {
                *yv = t + beta * (t - v);
            }
            std::mem::swap(&mut x, &mut trial);
            ex = et;
            ey = MarginEval::at(&h, &y, s, mu);
            evals += 1;
            step *= 1.25;

            if ex.clears(threshold) {
                break 'stages;
            }
            if it % STALL_WINDOW == 0 {
                if ex.value - checkpoint <= STALL_GAIN * scale {
                    // converged for this smoothing: the worst margin can beat
                    // the smoothed value by at most mu * ln K
                    if ex.value + mu * gap < 0.0 {
                        break 'stages;
                    }
                    continue 'stages;
                }
                checkpoint = ex.value;
            }
        }
    }
    (Matrix::from_fn(x.rows(), x.cols(), |l, k| x.get(l, k).powi(2)), evals)
}

fn project_rows(eta: &mut Matrix, p_max: &[f64]) {
    for (l, &p) in p_max.iter().enumerate() {
        let row = eta.row_mut(l);
        let load: f64 = row.iter().sum();
        if load > p {
            let scale = p / load;
            row.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Interference-free upper bound on any common SINR: the best user served
/// coherently by every AP at full budget.
pub(crate) fn sinr_upper_bound(inst: &Instance) -> f64 {
    single_user_bounds(inst).into_iter().fold(0.0, f64::max)
}

/// Each user's SINR with every AP at full budget and no interference.
fn single_user_bounds(inst: &Instance) -> Vec<f64> {
    let g = inst.gains();
    (0..inst.n_users())
        .map(|k| {
            let amp: f64 = inst.p_max().iter().enumerate().map(|(l, p)| p.sqrt() * g.get(l, k)).sum();
            amp * amp / inst.sigma2()
        })
        .collect()
}

/// Bisection on the common SINR target over `[0, t_hi]`, keeping the
/// allocation of the highest feasible probe. The instance's own rate target
/// plays no part: this solver maximizes and leaves acceptance to the verifier.
pub fn solve_exact(inst: &Instance, cfg: &SolverConfig) -> SolverResult {
    let clock = Stopwatch::start();
    let mut lo = 0.0;
    let mut hi = sinr_upper_bound(inst);
    let mut best: Option<PowerAllocation> = None;
    let mut cost = 0u64;

    for _ in 0..cfg.exact_bisect_iters {
        let mid = 0.5 * (lo + hi);
        let probe = feasibility_inner(inst, mid, cfg);
        cost += probe.cost_units;
        if probe.feasible {
            lo = mid;
            best = Some(probe.alloc);
        } else {
            hi = mid;
        }
    }

    let converged = best.is_some();
    let candidate = best.unwrap_or_else(|| PowerAllocation::zeros(inst.n_aps(), inst.n_users()));
    let rate = se_from_sinr(&sinr_unchecked(inst, &candidate.eta)).into_iter().fold(f64::INFINITY, f64::min);
    SolverResult {
        solver: SolverId::Exact,
        candidate,
        cost_units: cost,
        wall_time_s: clock.seconds(),
        converged,
        self_reported_rate: rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_sinr, per_ap_load, Split};

    fn inst(g: Vec<Vec<f64>>, p: Vec<f64>, gamma: f64) -> Instance {
        Instance::from_parts("e", Split::Test, g, p, 1.0, gamma).unwrap()
    }

    #[test]
    fn zero_target_is_feasible_immediately() {
        let i = inst(vec![vec![1.0, 2.0]], vec![1.0], 0.0);
        let out = feasibility_inner(&i, 0.0, &SolverConfig::default());
        assert!(out.feasible);
        assert_eq!(out.cost_units, 2 * 2);
    }

    #[test]
    fn target_above_bound_is_infeasible() {
        let i = inst(vec![vec![1.0, 2.0]], vec![1.0], 0.0);
        let out = feasibility_inner(&i, sinr_upper_bound(&i) * 1.01, &SolverConfig::default());
        assert!(!out.feasible);
        assert!(per_ap_load(&out.alloc)[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn symmetric_pair_reaches_ninety_percent_of_optimum() {
        // optimum common SINR for g=[[1,1]], P=1, sigma2=1 is 1/3 (equal split)
        let i = inst(vec![vec![1.0, 1.0]], vec![1.0], 0.0);
        let out = feasibility_inner(&i, 0.9 / 3.0, &SolverConfig::default());
        assert!(out.feasible);
        let sinr = compute_sinr(&i, &out.alloc).unwrap();
        assert!(sinr.iter().all(|&s| s >= 0.9 / 3.0 * (1.0 - 1e-4)));
    }

    #[test]
    fn exact_ignores_gamma_target() {
        let a = solve_exact(&inst(vec![vec![1.0, 2.0], vec![0.5, 0.1]], vec![1.0, 2.0], 0.0), &SolverConfig::default());
        let b = solve_exact(&inst(vec![vec![1.0, 2.0], vec![0.5, 0.1]], vec![1.0, 2.0], 7.5), &SolverConfig::default());
        assert_eq!(a.candidate, b.candidate);
        assert_eq!(a.cost_units, b.cost_units);
    }

    #[test]
    fn single_user_saturates_budget() {
        let i = inst(vec![vec![1.0], vec![0.4]], vec![1.0, 2.0], 0.0);
        let r = solve_exact(&i, &SolverConfig::default());
        assert!(r.converged);
        let load = per_ap_load(&r.candidate);
        assert!((load[0] - 1.0).abs() / 1.0 < 1e-3, "{load:?}");
        assert!((load[1] - 2.0).abs() / 2.0 < 1e-3, "{load:?}");
    }

    #[test]
    fn upper_bound_is_coherent_single_user_snr() {
        let i = inst(vec![vec![1.0, 2.0], vec![1.0, 0.0]], vec![1.0, 4.0], 0.0);
        // user 0: (1*1 + 2*1)^2 = 9; user 1: (1*2 + 0)^2 = 4
        assert_eq!(sinr_upper_bound(&i), 9.0);
    }
}
