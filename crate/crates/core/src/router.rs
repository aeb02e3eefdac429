//! Instance descriptors and the routing policies that turn them into solver
//! plans: three fixed policies, a threshold rule, and a nearest-neighbour
//! router over an oracle-labelled memory of train instances.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::Instance;
use crate::orchestrator::BudgetPolicy;
use crate::solvers::{SolverId, SolverPortfolio};
use crate::verifier::{verify, AcceptanceCriterion, VerifierConfig};

/// Floor used for log-gain statistics when an instance has no positive gain.
pub const LOG_GAIN_FLOOR: f64 = -30.0;

/// Compact summary of an instance's difficulty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Descriptor {
    pub L: usize,
    pub K: usize,
    pub load_ratio: f64,
    pub gamma_target: f64,
    pub budget_mean: f64,
    pub budget_min: f64,
    pub gain_log_mean: f64,
    pub gain_log_std: f64,
    pub gain_log_min: f64,
    pub gain_log_max: f64,
    pub imbalance: f64,
}

impl Descriptor {
    pub const N_FEATURES: usize = 11;

    pub fn features(&self) -> [f64; Self::N_FEATURES] {
        [
            self.L as f64,
            self.K as f64,
            self.load_ratio,
            self.gamma_target,
            self.budget_mean,
            self.budget_min,
            self.gain_log_mean,
            self.gain_log_std,
            self.gain_log_min,
            self.gain_log_max,
            self.imbalance,
        ]
    }
}

/// Sample Gini coefficient `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`; zero for
/// an all-zero vector.
pub fn gini(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.is_empty() || mean <= 0.0 {
        return 0.0;
    }
    let abs_diff: f64 = x.iter().map(|a| x.iter().map(|b| (a - b).abs()).sum::<f64>()).sum();
    (abs_diff / (2.0 * n * n * mean)).clamp(0.0, 1.0)
}

pub fn extract_descriptor(inst: &Instance) -> Descriptor {
    let (n_aps, n_users) = (inst.n_aps(), inst.n_users());
    let g = inst.gains();
    let p = inst.p_max();

    let logs: Vec<f64> = g.matrix().as_slice().iter().filter(|v| **v > 0.0).map(|v| v.log10()).collect();
    let (log_mean, log_std, log_min, log_max) = if logs.is_empty() {
        (LOG_GAIN_FLOOR, 0.0, LOG_GAIN_FLOOR, LOG_GAIN_FLOOR)
    } else {
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (mean, var.sqrt(), min, max)
    };

    let user_totals: Vec<f64> = (0..n_users).map(|k| (0..n_aps).map(|l| g.get(l, k)).sum()).collect();

    Descriptor {
        L: n_aps,
        K: n_users,
        load_ratio: n_users as f64 / n_aps as f64,
        gamma_target: inst.gamma_target(),
        budget_mean: p.iter().sum::<f64>() / n_aps as f64,
        budget_min: p.iter().copied().fold(f64::INFINITY, f64::min),
        gain_log_mean: log_mean,
        gain_log_std: log_std,
        gain_log_min: log_min,
        gain_log_max: log_max,
        imbalance: gini(&user_totals),
    }
}

/// First solver, ordered fallbacks, budget and acceptance rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverPlan {
    pub first: SolverId,
    pub fallback: Vec<SolverId>,
    pub budget: BudgetPolicy,
    pub criterion: AcceptanceCriterion,
}

impl SolverPlan {
    pub fn new(
        first: SolverId,
        fallback: Vec<SolverId>,
        budget: BudgetPolicy,
        criterion: AcceptanceCriterion,
    ) -> Result<Self> {
        let plan = SolverPlan { first, fallback, budget, criterion };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let chain = self.chain();
        for (i, s) in chain.iter().enumerate() {
            if chain[..i].contains(s) {
                return Err(Error::usage(format!("solver {s} appears twice in the plan")));
            }
        }
        self.budget.validate()
    }

    /// `[first; fallback]`.
    pub fn chain(&self) -> Vec<SolverId> {
        std::iter::once(self.first).chain(self.fallback.iter().copied()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouterKind {
    AlwaysFast,
    AlwaysExact,
    AlwaysDist,
    Rule,
    Agent,
}

impl RouterKind {
    pub const ALL: [RouterKind; 5] =
        [RouterKind::AlwaysFast, RouterKind::AlwaysExact, RouterKind::AlwaysDist, RouterKind::Rule, RouterKind::Agent];

    /// Identifier used in file names and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            RouterKind::AlwaysFast => "always-fast",
            RouterKind::AlwaysExact => "always-exact",
            RouterKind::AlwaysDist => "always-dist",
            RouterKind::Rule => "rule",
            RouterKind::Agent => "agent",
        }
    }

    /// Name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            RouterKind::AlwaysFast => "Always-Fast",
            RouterKind::AlwaysExact => "Always-Exact",
            RouterKind::AlwaysDist => "Always-Dist",
            RouterKind::Rule => "Rule-Router",
            RouterKind::Agent => "Agent-Router",
        }
    }

    pub fn fixed_solver(self) -> Option<SolverId> {
        match self {
            RouterKind::AlwaysFast => Some(SolverId::Fast),
            RouterKind::AlwaysExact => Some(SolverId::Exact),
            RouterKind::AlwaysDist => Some(SolverId::Dist),
            RouterKind::Rule | RouterKind::Agent => None,
        }
    }
}

impl fmt::Display for RouterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for RouterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        RouterKind::ALL
            .into_iter()
            .find(|k| k.slug() == s || k.label().to_ascii_lowercase() == s)
            .ok_or_else(|| Error::usage(format!("unknown method '{s}'")))
    }
}

/// Fixed policies commit to one solver and never fall back.
pub fn route_fixed(kind: RouterKind, criterion: AcceptanceCriterion) -> Result<SolverPlan> {
    let solver = kind.fixed_solver().ok_or_else(|| Error::usage(format!("{kind} is not a fixed policy")))?;
    SolverPlan::new(solver, Vec::new(), BudgetPolicy::default(), criterion)
}

/// Thresholds and fallback orders of the rule router.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub theta_gamma: f64,
    pub theta_load: f64,
    pub theta_imb: f64,
    #[serde(default = "RuleConfig::default_hard_fallback")]
    pub hard_fallback: Vec<SolverId>,
    #[serde(default = "RuleConfig::default_easy_fallback")]
    pub easy_fallback: Vec<SolverId>,
}

/// Quantile used to derive rule thresholds from the train split.
pub const RULE_QUANTILE: f64 = 0.6;

impl RuleConfig {
    fn default_hard_fallback() -> Vec<SolverId> {
        vec![SolverId::Fast, SolverId::Dist]
    }

    fn default_easy_fallback() -> Vec<SolverId> {
        vec![SolverId::Exact, SolverId::Dist]
    }

    pub fn with_thresholds(theta_gamma: f64, theta_load: f64, theta_imb: f64) -> Self {
        RuleConfig {
            theta_gamma,
            theta_load,
            theta_imb,
            hard_fallback: Self::default_hard_fallback(),
            easy_fallback: Self::default_easy_fallback(),
        }
    }

    /// Thresholds at the 60th percentile of each feature over the train split.
    pub fn from_train(train: &[Instance]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::usage("rule thresholds need at least one train instance"));
        }
        let desc: Vec<Descriptor> = train.iter().map(extract_descriptor).collect();
        let q = |f: fn(&Descriptor) -> f64| quantile(&desc.iter().map(f).collect::<Vec<_>>(), RULE_QUANTILE);
        Ok(RuleConfig::with_thresholds(q(|d| d.gamma_target), q(|d| d.load_ratio), q(|d| d.imbalance)))
    }
}

/// Linear-interpolation quantile (position `q * (n - 1)` in sorted order).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Hard-looking instances (high target, high load or high imbalance) go to
/// the exact solver first; everything else starts with the fast solver.
pub fn route_rule(desc: &Descriptor, cfg: &RuleConfig, criterion: AcceptanceCriterion) -> Result<SolverPlan> {
    let hard =
        desc.gamma_target > cfg.theta_gamma || desc.load_ratio > cfg.theta_load || desc.imbalance > cfg.theta_imb;
    let (first, fallback) =
        if hard { (SolverId::Exact, cfg.hard_fallback.clone()) } else { (SolverId::Fast, cfg.easy_fallback.clone()) };
    SolverPlan::new(first, fallback, BudgetPolicy::default(), criterion)
}

/// One labelled train instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub descriptor: Descriptor,
    pub label: SolverId,
    pub best_rate: f64,
    pub instance_id: String,
}

#[derive(Clone, Copy, Debug)]
struct Scored {
    solver: SolverId,
    accepted: bool,
    feasible: bool,
    r_ver: f64,
    cost_units: u64,
}

/// Label rule: accepted beats rejected-but-feasible beats infeasible; then
/// higher verified rate, lower cost, and finally solver order.
fn label_order(a: &Scored, b: &Scored) -> Ordering {
    b.accepted
        .cmp(&a.accepted)
        .then(b.feasible.cmp(&a.feasible))
        .then(b.r_ver.total_cmp(&a.r_ver))
        .then(a.cost_units.cmp(&b.cost_units))
        .then(a.solver.cmp(&b.solver))
}

/// Run the whole portfolio on every train instance and record the verified
/// best solver for each.
pub fn build_memory(
    train: &[Instance],
    portfolio: &dyn SolverPortfolio,
    verifier: &VerifierConfig,
    exec: Execution,
) -> Result<Vec<MemoryEntry>> {
    if train.is_empty() {
        return Err(Error::MissingMemory("memory needs a non-empty train split".into()));
    }
    exec.map(train, |inst| label_instance(inst, portfolio, verifier)).into_iter().collect()
}

fn label_instance(inst: &Instance, portfolio: &dyn SolverPortfolio, verifier: &VerifierConfig) -> Result<MemoryEntry> {
    let crit = AcceptanceCriterion::for_instance(inst, verifier);
    let mut scored = Vec::with_capacity(SolverId::ALL.len());
    for solver in SolverId::ALL {
        let result = portfolio.solve(solver, inst);
        let rep = verify(inst, &result.candidate, &crit)?;
        scored.push(Scored {
            solver,
            accepted: rep.accepted,
            feasible: rep.feasible,
            r_ver: rep.r_ver,
            cost_units: result.cost_units,
        });
    }
    scored.sort_by(label_order);
    let best = scored[0];
    Ok(MemoryEntry {
        descriptor: extract_descriptor(inst),
        label: best.solver,
        best_rate: best.r_ver,
        instance_id: inst.id.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Neighbours consulted per query.
    pub k: usize,
    /// Fallback order for the solvers not chosen first.
    pub fallback_order: Vec<SolverId>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { k: 1, fallback_order: vec![SolverId::Exact, SolverId::Fast, SolverId::Dist] }
    }
}

/// Per-feature z-score statistics over the memory (population std).
fn feature_stats(memory: &[MemoryEntry]) -> ([f64; Descriptor::N_FEATURES], [f64; Descriptor::N_FEATURES]) {
    let n = memory.len() as f64;
    let mut mean = [0.0; Descriptor::N_FEATURES];
    let mut std = [0.0; Descriptor::N_FEATURES];
    for e in memory {
        for (m, f) in mean.iter_mut().zip(e.descriptor.features()) {
            *m += f / n;
        }
    }
    for e in memory {
        for ((s, m), f) in std.iter_mut().zip(&mean).zip(e.descriptor.features()) {
            *s += (f - m).powi(2) / n;
        }
    }
    std.iter_mut().for_each(|s| *s = s.sqrt());
    (mean, std)
}

/// Nearest-neighbour routing over the memory: majority label of the `k`
/// closest entries in z-scored feature space picks the first solver.
pub fn route_agent(
    desc: &Descriptor,
    memory: &[MemoryEntry],
    cfg: &AgentConfig,
    criterion: AcceptanceCriterion,
) -> Result<SolverPlan> {
    if memory.is_empty() {
        return Err(Error::MissingMemory("agent router needs a non-empty memory".into()));
    }
    if cfg.k == 0 || cfg.k > memory.len() {
        return Err(Error::usage(format!("agent k = {} must lie in 1..={}", cfg.k, memory.len())));
    }
    let (mean, std) = feature_stats(memory);
    let query = desc.features();
    let distance = |d: &Descriptor| -> f64 {
        d.features()
            .iter()
            .zip(&query)
            .zip(mean.iter().zip(&std))
            .filter(|(_, (_, s))| **s > 0.0)
            .map(|((a, b), (_, s))| ((a - b) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let mut ranked: Vec<(f64, &MemoryEntry)> = memory.iter().map(|e| (distance(&e.descriptor), e)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.instance_id.cmp(&b.1.instance_id)));
    let neighbours = &ranked[..cfg.k];

    let mut votes: BTreeMap<SolverId, usize> = BTreeMap::new();
    for (_, e) in neighbours {
        *votes.entry(e.label).or_default() += 1;
    }
    let top = votes.values().copied().max().unwrap_or(0);
    let leaders: Vec<SolverId> = votes.iter().filter(|(_, c)| **c == top).map(|(s, _)| *s).collect();
    let first = if leaders.len() == 1 { leaders[0] } else { neighbours[0].1.label };

    let mut fallback: Vec<SolverId> = cfg.fallback_order.iter().copied().filter(|s| *s != first).collect();
    fallback.dedup();
    SolverPlan::new(first, fallback, BudgetPolicy::default(), criterion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Split;
    use crate::solvers::{Portfolio, SolverResult};
    use crate::verifier::VerifierConfig;

    fn crit() -> AcceptanceCriterion {
        AcceptanceCriterion::for_instance(
            &Instance::from_parts("c", Split::Test, vec![vec![1.0]], vec![1.0], 1.0, 0.0).unwrap(),
            &VerifierConfig::default(),
        )
    }

    fn desc_with(gamma: f64, load: f64, imb: f64) -> Descriptor {
        Descriptor {
            L: 4,
            K: 4,
            load_ratio: load,
            gamma_target: gamma,
            budget_mean: 0.2,
            budget_min: 0.2,
            gain_log_mean: -5.0,
            gain_log_std: 1.0,
            gain_log_min: -7.0,
            gain_log_max: -3.0,
            imbalance: imb,
        }
    }

    fn entry(id: &str, label: SolverId, gamma: f64) -> MemoryEntry {
        MemoryEntry { descriptor: desc_with(gamma, 1.0, 0.1), label, best_rate: 1.0, instance_id: id.into() }
    }

    #[test]
    fn load_ratio_and_gini() {
        let inst = Instance::from_parts("d", Split::Test, vec![vec![1.0; 8]; 4], vec![1.0; 4], 1.0, 0.5).unwrap();
        let d = extract_descriptor(&inst);
        assert_eq!(d.load_ratio, 2.0);
        assert_eq!(d.imbalance, 0.0);
        assert_eq!(d.gain_log_mean, 0.0);

        let skew = Instance::from_parts("d", Split::Test, vec![vec![0.0, 3.0]], vec![1.0], 1.0, 0.0).unwrap();
        assert_eq!(extract_descriptor(&skew).imbalance, 0.5);
    }

    #[test]
    fn gini_reference_values() {
        // brute-force definition: pairs (1,2),(1,3),(2,3) twice -> 2*(1+2+1)=8; 2*9*2 = 36
        assert!((gini(&[1.0, 2.0, 3.0]) - 8.0 / 36.0).abs() < 1e-15);
        assert_eq!(gini(&[0.0, 0.0]), 0.0);
        assert_eq!(gini(&[5.0]), 0.0);
    }

    #[test]
    fn all_zero_gains_use_log_floor() {
        let inst = Instance::from_parts("z", Split::Test, vec![vec![0.0, 0.0]], vec![1.0], 1.0, 0.0).unwrap();
        let d = extract_descriptor(&inst);
        assert_eq!(d.gain_log_mean, LOG_GAIN_FLOOR);
        assert_eq!(d.gain_log_min, LOG_GAIN_FLOOR);
        assert_eq!(d.gain_log_std, 0.0);
        assert!(d.features().iter().all(|f| f.is_finite()));
    }

    #[test]
    fn fixed_routes() {
        for (kind, solver) in [
            (RouterKind::AlwaysFast, SolverId::Fast),
            (RouterKind::AlwaysExact, SolverId::Exact),
            (RouterKind::AlwaysDist, SolverId::Dist),
        ] {
            let plan = route_fixed(kind, crit()).unwrap();
            assert_eq!(plan.first, solver);
            assert!(plan.fallback.is_empty());
            assert_eq!(plan.chain().len(), 1);
        }
        assert!(matches!(route_fixed(RouterKind::Rule, crit()), Err(Error::Usage(_))));
        assert!(matches!(route_fixed(RouterKind::Agent, crit()), Err(Error::Usage(_))));
    }

    #[test]
    fn rule_routes() {
        let cfg = RuleConfig::with_thresholds(1.0, 0.5, 0.3);
        let easy = route_rule(&desc_with(0.5, 0.4, 0.1), &cfg, crit()).unwrap();
        assert_eq!(easy.chain(), vec![SolverId::Fast, SolverId::Exact, SolverId::Dist]);
        let hard = route_rule(&desc_with(1.5, 0.4, 0.1), &cfg, crit()).unwrap();
        assert_eq!(hard.chain(), vec![SolverId::Exact, SolverId::Fast, SolverId::Dist]);
        assert_eq!(route_rule(&desc_with(0.5, 0.6, 0.1), &cfg, crit()).unwrap().first, SolverId::Exact);
        assert_eq!(route_rule(&desc_with(0.5, 0.4, 0.4), &cfg, crit()).unwrap().first, SolverId::Exact);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0, 5.0], 0.5), 3.0);
        // position 0.6 * 5 = 3.0 over six values
        assert_eq!(quantile(&[6.0, 1.0, 2.0, 3.0, 4.0, 5.0], 0.6), 4.0);
        assert!((quantile(&[0.0, 10.0], 0.6) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn plan_rejects_duplicates() {
        let dup = SolverPlan::new(SolverId::Fast, vec![SolverId::Fast], BudgetPolicy::default(), crit());
        assert!(matches!(dup, Err(Error::Usage(_))));
        let dup =
            SolverPlan::new(SolverId::Fast, vec![SolverId::Dist, SolverId::Dist], BudgetPolicy::default(), crit());
        assert!(dup.is_err());
    }

    #[test]
    fn agent_single_entry_memory() {
        let mem = vec![entry("a", SolverId::Fast, 1.0)];
        let plan = route_agent(&desc_with(9.0, 3.0, 0.9), &mem, &AgentConfig::default(), crit()).unwrap();
        assert_eq!(plan.chain(), vec![SolverId::Fast, SolverId::Exact, SolverId::Dist]);
    }

    #[test]
    fn agent_exact_match_wins_at_k1() {
        let mem =
            vec![entry("a", SolverId::Fast, 1.0), entry("b", SolverId::Dist, 2.0), entry("c", SolverId::Exact, 3.0)];
        let plan = route_agent(&desc_with(2.0, 1.0, 0.1), &mem, &AgentConfig::default(), crit()).unwrap();
        assert_eq!(plan.chain(), vec![SolverId::Dist, SolverId::Exact, SolverId::Fast]);
    }

    #[test]
    fn agent_majority_and_vote_ties() {
        let mem = vec![
            entry("a", SolverId::Fast, 1.0),
            entry("b", SolverId::Exact, 1.1),
            entry("c", SolverId::Exact, 1.2),
            entry("d", SolverId::Dist, 5.0),
        ];
        let cfg = AgentConfig { k: 3, ..Default::default() };
        assert_eq!(route_agent(&desc_with(1.0, 1.0, 0.1), &mem, &cfg, crit()).unwrap().first, SolverId::Exact);
        // two neighbours with different labels: nearest one decides
        let cfg = AgentConfig { k: 2, ..Default::default() };
        assert_eq!(route_agent(&desc_with(1.0, 1.0, 0.1), &mem, &cfg, crit()).unwrap().first, SolverId::Fast);
    }

    #[test]
    fn agent_distance_ties_use_instance_id() {
        let mem =
            vec![entry("z", SolverId::Dist, 1.0), entry("a", SolverId::Fast, 1.0), entry("m", SolverId::Exact, 3.0)];
        let plan = route_agent(&desc_with(1.0, 1.0, 0.1), &mem, &AgentConfig::default(), crit()).unwrap();
        assert_eq!(plan.first, SolverId::Fast);
        let mut reversed = mem.clone();
        reversed.reverse();
        let again = route_agent(&desc_with(1.0, 1.0, 0.1), &reversed, &AgentConfig::default(), crit()).unwrap();
        assert_eq!(again, plan);
    }

    #[test]
    fn agent_errors() {
        let e = route_agent(&desc_with(1.0, 1.0, 0.1), &[], &AgentConfig::default(), crit());
        assert!(matches!(e, Err(Error::MissingMemory(_))));
        let mem = vec![entry("a", SolverId::Fast, 1.0)];
        let e = route_agent(&desc_with(1.0, 1.0, 0.1), &mem, &AgentConfig { k: 2, ..Default::default() }, crit());
        assert!(matches!(e, Err(Error::Usage(_))));
    }

    struct Scripted(Vec<(SolverId, Vec<Vec<f64>>, u64)>);

    impl SolverPortfolio for Scripted {
        fn solve(&self, solver: SolverId, _inst: &Instance) -> SolverResult {
            let (_, rows, cost) = self.0.iter().find(|(s, _, _)| *s == solver).unwrap().clone();
            SolverResult {
                solver,
                candidate: crate::model::PowerAllocation::from_rows(rows).unwrap(),
                cost_units: cost,
                wall_time_s: 0.0,
                converged: true,
                self_reported_rate: f64::NAN,
            }
        }
    }

    #[test]
    fn memory_labels_unique_acceptance() {
        // symmetric pair; only the equal split reaches log2(4/3)
        let inst = Instance::from_parts("m", Split::Train, vec![vec![1.0, 1.0]], vec![1.0], 1.0, 0.4).unwrap();
        let p = Scripted(vec![
            (SolverId::Fast, vec![vec![0.3, 0.7]], 5),
            (SolverId::Exact, vec![vec![0.5, 0.5]], 50),
            (SolverId::Dist, vec![vec![0.2, 0.8]], 1),
        ]);
        let mem = build_memory(&[inst], &p, &VerifierConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(mem.len(), 1);
        assert_eq!(mem[0].label, SolverId::Exact);
        assert!((mem[0].best_rate - (4.0f64 / 3.0).log2()).abs() < 1e-15);
    }

    #[test]
    fn memory_tie_prefers_cheaper_solver() {
        let inst = Instance::from_parts("m", Split::Train, vec![vec![1.0, 1.0]], vec![1.0], 1.0, 0.4).unwrap();
        let p = Scripted(vec![
            (SolverId::Fast, vec![vec![0.5, 0.5]], 50),
            (SolverId::Exact, vec![vec![0.5, 0.5]], 40),
            (SolverId::Dist, vec![vec![0.5, 0.5]], 40),
        ]);
        let mem = build_memory(&[inst], &p, &VerifierConfig::default(), Execution::Sequential).unwrap();
        // Exact and Dist tie on cost; solver order breaks it
        assert_eq!(mem[0].label, SolverId::Exact);
    }

    #[test]
    fn memory_falls_back_to_best_feasible() {
        let inst = Instance::from_parts("m", Split::Train, vec![vec![1.0, 1.0]], vec![1.0], 1.0, 5.0).unwrap();
        let mem =
            build_memory(&[inst], &Portfolio::default(), &VerifierConfig::default(), Execution::Sequential).unwrap();
        assert!(mem[0].best_rate < 5.0);
        assert!(mem[0].best_rate > 0.4);
    }

    #[test]
    fn memory_needs_train() {
        let r = build_memory(&[], &Portfolio::default(), &VerifierConfig::default(), Execution::Sequential);
        assert!(matches!(r, Err(Error::MissingMemory(_))));
    }

    #[test]
    fn router_kind_names() {
        for k in RouterKind::ALL {
            assert_eq!(k.slug().parse::<RouterKind>().unwrap(), k);
            assert_eq!(k.label().parse::<RouterKind>().unwrap(), k);
        }
        assert_eq!(serde_json::to_string(&RouterKind::AlwaysFast).unwrap(), "\"always-fast\"");
    }
}
