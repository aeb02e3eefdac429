use crate::error::{Error, Result};
use crate::model::{sinr_unchecked, Instance, Matrix, PowerAllocation};

/// Largest `L * K` the grid oracle accepts.
pub const ORACLE_MAX_TERMS: usize = 6;
pub const ORACLE_MIN_RESOLUTION: usize = 8;

/// All ways to write `resolution` as an ordered sum of `parts` nonnegative integers.
fn compositions(resolution: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for n in 0..=left {
            prefix.push(n);
            rec(left - n, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(resolution, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// Exhaustive max-min search over budget-saturating per-AP splits on a
/// simplex grid: AP `l` gives user `k` the power `P_l * n_k / resolution`
/// with `sum_k n_k = resolution`. Returns the best allocation found and its
/// common rate. Only for tiny instances (`L * K <= 6`).
pub fn oracle_grid_search(inst: &Instance, resolution: usize) -> Result<(PowerAllocation, f64)> {
    let (n_aps, n_users) = (inst.n_aps(), inst.n_users());
    if n_aps * n_users > ORACLE_MAX_TERMS {
        return Err(Error::usage(format!("grid oracle limited to L*K <= {ORACLE_MAX_TERMS}, got {}", n_aps * n_users)));
    }
    if resolution < ORACLE_MIN_RESOLUTION {
        return Err(Error::usage(format!("grid oracle needs resolution >= {ORACLE_MIN_RESOLUTION}")));
    }

    let splits = compositions(resolution, n_users);
    let res = resolution as f64;
    let mut choice = vec![0usize; n_aps];
    let mut eta = Matrix::zeros(n_aps, n_users);
    let mut best_sinr = f64::NEG_INFINITY;
    let mut best = eta.clone();

    loop {
        for (l, &c) in choice.iter().enumerate() {
            let p = inst.p_max()[l];
            for (k, &n) in splits[c].iter().enumerate() {
                eta.set(l, k, p * n as f64 / res);
            }
        }
        let worst = sinr_unchecked(inst, &eta).into_iter().fold(f64::INFINITY, f64::min);
        if worst > best_sinr {
            best_sinr = worst;
            best.clone_from(&eta);
        }

        // odometer over per-AP split choices
        let mut l = 0;
        loop {
            if l == n_aps {
                return Ok((PowerAllocation::new(best), (1.0 + best_sinr).log2()));
            }
            choice[l] += 1;
            if choice[l] < splits.len() {
                break;
            }
            choice[l] = 0;
            l += 1;
        }
    }
}
