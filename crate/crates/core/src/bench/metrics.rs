use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Split;
use crate::orchestrator::OrchestrationOutcome;
use crate::router::RouterKind;

/// Outcomes of every compared method, keyed by method.
pub type MethodOutcomes = BTreeMap<RouterKind, Vec<OrchestrationOutcome>>;

/// Selection regret per `(instance_id, method)`.
pub type Regrets = BTreeMap<(String, RouterKind), f64>;

/// One line of a results table. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub group: String,
    pub accepted_rate: f64,
    pub feasible_rate: f64,
    pub avg_ver_rate: f64,
    pub avg_wall_time_s: f64,
    pub avg_cost_units: f64,
    pub avg_regret: f64,
    pub fallback_rate: f64,
    pub avg_attempts: f64,
    pub n_instances: usize,
}

fn instance_ids(outcomes: &[OrchestrationOutcome]) -> BTreeSet<&str> {
    outcomes.iter().map(|o| o.instance_id.as_str()).collect()
}

/// Check that every method covers the same instances exactly once.
pub(crate) fn check_coverage(all: &MethodOutcomes) -> Result<()> {
    let mut reference: Option<(RouterKind, BTreeSet<&str>)> = None;
    for (method, outs) in all {
        let ids = instance_ids(outs);
        if ids.len() != outs.len() {
            return Err(Error::Coverage(format!("{method} has duplicate instance outcomes")));
        }
        match &reference {
            None => reference = Some((*method, ids)),
            Some((m0, ids0)) => {
                if *ids0 != ids {
                    let missing: Vec<_> = ids0.symmetric_difference(&ids).take(3).collect();
                    return Err(Error::Coverage(format!(
                        "{m0} and {method} cover different instances, e.g. {missing:?}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Value a method is credited with on an instance: the verified rate of the
/// candidate it returns (0 when it returns none).
fn value(o: &OrchestrationOutcome) -> f64 {
    o.returned_r_ver
}

/// `regret(i, m) = max_m' v(i, m') - v(i, m)` over the compared methods.
pub fn compute_regret(all: &MethodOutcomes) -> Result<Regrets> {
    check_coverage(all)?;
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for o in all.values().flatten() {
        let v = best.entry(o.instance_id.as_str()).or_insert(f64::NEG_INFINITY);
        *v = v.max(value(o));
    }
    let mut out = Regrets::new();
    for (method, outs) in all {
        for o in outs {
            out.insert((o.instance_id.clone(), *method), best[o.instance_id.as_str()] - value(o));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Group {
    Overall,
    Split(Split),
    InDistribution,
    OutOfDistribution,
}

impl Group {
    fn name(self) -> String {
        match self {
            Group::Overall => "overall".into(),
            Group::Split(s) => s.name().into(),
            Group::InDistribution => "ID".into(),
            Group::OutOfDistribution => "OOD".into(),
        }
    }

    fn contains(self, split: Split) -> bool {
        match self {
            Group::Overall => true,
            Group::Split(s) => s == split,
            Group::InDistribution => split.is_in_distribution(),
            Group::OutOfDistribution => !split.is_in_distribution(),
        }
    }

    fn all() -> Vec<Group> {
        let mut g = vec![Group::Overall];
        g.extend(Split::ALL.map(Group::Split));
        g.push(Group::InDistribution);
        g.push(Group::OutOfDistribution);
        g
    }
}

fn row(method: RouterKind, group: Group, outs: &[&OrchestrationOutcome], regrets: &Regrets) -> Result<MetricsRow> {
    let n = outs.len() as f64;
    let mean = |f: &dyn Fn(&OrchestrationOutcome) -> f64| outs.iter().map(|o| f(o)).sum::<f64>() / n;
    let regret_of = |o: &OrchestrationOutcome| -> Result<f64> {
        regrets
            .get(&(o.instance_id.clone(), method))
            .copied()
            .ok_or_else(|| Error::Coverage(format!("no regret for {method} on {}", o.instance_id)))
    };
    let mut regret_sum = 0.0;
    for o in outs {
        regret_sum += regret_of(o)?;
    }
    Ok(MetricsRow {
        method: method.label().to_string(),
        group: group.name(),
        accepted_rate: mean(&|o| o.resolved as u8 as f64),
        feasible_rate: mean(&|o| o.returned_feasible as u8 as f64),
        avg_ver_rate: mean(&value),
        avg_wall_time_s: mean(&|o| o.total_wall_time_s),
        avg_cost_units: mean(&|o| o.total_cost_units as f64),
        avg_regret: regret_sum / n,
        fallback_rate: mean(&|o| (o.n_attempts() >= 2) as u8 as f64),
        avg_attempts: mean(&|o| o.n_attempts() as f64),
        n_instances: outs.len(),
    })
}

/// Rows for every method and every non-empty group: overall, each split,
/// ID (train + test) and OOD (stress + shifted).
pub fn aggregate_metrics(all: &MethodOutcomes, regrets: &Regrets) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for (method, outs) in all {
        for group in Group::all() {
            let members: Vec<&OrchestrationOutcome> = outs.iter().filter(|o| group.contains(o.split)).collect();
            if !members.is_empty() {
                rows.push(row(*method, group, &members, regrets)?);
            }
        }
    }
    Ok(rows)
}
