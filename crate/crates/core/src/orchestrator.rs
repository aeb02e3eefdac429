//! Sequential verifier-in-the-loop orchestration.
//!
//! Solvers in a plan are tried one at a time. Each candidate goes to the
//! verifier; the first accepted candidate is returned immediately and nothing
//! after it runs. If the chain or the budget runs out first, the instance is
//! unresolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Instance, PowerAllocation, Split};
use crate::router::{
    extract_descriptor, route_agent, route_fixed, route_rule, AgentConfig, MemoryEntry, RouterKind, RuleConfig,
    SolverPlan,
};
use crate::solvers::{SolverId, SolverPortfolio};
use crate::verifier::{verify, AcceptanceCriterion, VerifierConfig};

/// Limits on how far down the fallback chain an orchestration may go.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetPolicy {
    /// Maximum solver calls; `None` means the full chain.
    pub max_attempts: Option<usize>,
    /// Cap on cumulative `cost_units`. The solver that crosses it still gets
    /// verified; the loop stops afterwards.
    pub cost_cap: Option<u64>,
}

impl BudgetPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == Some(0) {
            return Err(Error::usage("max_attempts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub solver: SolverId,
    pub accepted: bool,
    pub feasible: bool,
    pub r_ver: f64,
    pub cost_units: u64,
    pub wall_time_s: f64,
    /// Returned allocation, kept only in audit mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<PowerAllocation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrchestrationOutcome {
    pub instance_id: String,
    pub split: Split,
    pub method: RouterKind,
    pub attempts: Vec<AttemptRecord>,
    pub resolved: bool,
    pub final_solver: Option<SolverId>,
    /// Verified rate of the accepted candidate; 0 when unresolved.
    pub final_r_ver: f64,
    /// Verified rate of the candidate the method hands back: the accepted one
    /// when resolved, otherwise the best feasible attempt (0 if none).
    pub returned_r_ver: f64,
    pub returned_feasible: bool,
    pub total_cost_units: u64,
    pub total_wall_time_s: f64,
}

impl OrchestrationOutcome {
    pub fn n_attempts(&self) -> usize {
        self.attempts.len()
    }
}

/// Run `plan` on `inst`.
pub fn orchestrate(
    inst: &Instance,
    method: RouterKind,
    plan: &SolverPlan,
    portfolio: &dyn SolverPortfolio,
    audit: bool,
) -> Result<OrchestrationOutcome> {
    plan.validate()?;
    let chain = plan.chain();
    if chain.is_empty() {
        return Err(Error::usage("solver plan is empty"));
    }
    let max_attempts = plan.budget.max_attempts.unwrap_or(chain.len());

    let mut attempts = Vec::new();
    let mut total_cost = 0u64;
    let mut total_wall = 0.0;
    let mut accepted_at = None;

    for solver in chain.into_iter().take(max_attempts) {
        let result = portfolio.solve(solver, inst);
        let report = verify(inst, &result.candidate, &plan.criterion)?;
        total_cost += result.cost_units;
        total_wall += result.wall_time_s;
        attempts.push(AttemptRecord {
            solver,
            accepted: report.accepted,
            feasible: report.feasible,
            r_ver: report.r_ver,
            cost_units: result.cost_units,
            wall_time_s: result.wall_time_s,
            candidate: audit.then_some(result.candidate),
        });
        if report.accepted {
            accepted_at = Some(attempts.len() - 1);
            break;
        }
        if plan.budget.cost_cap.is_some_and(|cap| total_cost > cap) {
            break;
        }
    }

    let (resolved, final_solver, final_r_ver, returned_r_ver, returned_feasible) = match accepted_at {
        Some(i) => (true, Some(attempts[i].solver), attempts[i].r_ver, attempts[i].r_ver, true),
        None => {
            let best_feasible = attempts
                .iter()
                .filter(|a| a.feasible)
                .map(|a| a.r_ver)
                .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |b| b.max(r))));
            (false, None, 0.0, best_feasible.unwrap_or(0.0), best_feasible.is_some())
        }
    };

    Ok(OrchestrationOutcome {
        instance_id: inst.id.clone(),
        split: inst.split,
        method,
        attempts,
        resolved,
        final_solver,
        final_r_ver,
        returned_r_ver,
        returned_feasible,
        total_cost_units: total_cost,
        total_wall_time_s: total_wall,
    })
}

/// Everything a method run needs besides instances and memory.
#[derive(Clone, Debug)]
pub struct MethodConfig {
    pub verifier: VerifierConfig,
    pub rule: RuleConfig,
    pub agent: AgentConfig,
    pub budget: BudgetPolicy,
    pub audit: bool,
}

impl MethodConfig {
    pub fn new(rule: RuleConfig) -> Self {
        MethodConfig {
            verifier: VerifierConfig::default(),
            rule,
            agent: AgentConfig::default(),
            budget: BudgetPolicy::default(),
            audit: false,
        }
    }
}

/// Produce the plan a method would use on `inst`.
pub fn plan_for(
    inst: &Instance,
    kind: RouterKind,
    memory: Option<&[MemoryEntry]>,
    cfg: &MethodConfig,
) -> Result<SolverPlan> {
    let criterion = AcceptanceCriterion::for_instance(inst, &cfg.verifier);
    let mut plan = match kind {
        RouterKind::AlwaysFast | RouterKind::AlwaysExact | RouterKind::AlwaysDist => route_fixed(kind, criterion)?,
        RouterKind::Rule => route_rule(&extract_descriptor(inst), &cfg.rule, criterion)?,
        RouterKind::Agent => {
            let memory = memory.ok_or_else(|| Error::MissingMemory("agent router requires a memory".into()))?;
            route_agent(&extract_descriptor(inst), memory, &cfg.agent, criterion)?
        }
    };
    plan.budget = cfg.budget;
    Ok(plan)
}

/// Evaluate one method on every instance, in input order.
pub fn run_method(
    instances: &[Instance],
    kind: RouterKind,
    memory: Option<&[MemoryEntry]>,
    portfolio: &dyn SolverPortfolio,
    cfg: &MethodConfig,
    exec: Execution,
) -> Result<Vec<OrchestrationOutcome>> {
    cfg.verifier.validate()?;
    if kind == RouterKind::Agent && memory.is_none() {
        return Err(Error::MissingMemory("agent router requires a memory".into()));
    }
    exec.map(instances, |inst| {
        let plan = plan_for(inst, kind, memory, cfg)?;
        orchestrate(inst, kind, &plan, portfolio, cfg.audit)
    })
    .into_iter()
    .collect()
}

/// Re-verify every audited candidate and check it reproduces the recorded
/// verdict. Returns the number of attempts checked.
pub fn replay_audit(
    instances: &[Instance],
    outcomes: &[OrchestrationOutcome],
    verifier: &VerifierConfig,
) -> Result<usize> {
    let mut checked = 0;
    for out in outcomes {
        let inst = instances
            .iter()
            .find(|i| i.id == out.instance_id)
            .ok_or_else(|| Error::Coverage(format!("instance {} not in benchmark", out.instance_id)))?;
        let crit = AcceptanceCriterion::for_instance(inst, verifier);
        for a in &out.attempts {
            let cand = a.candidate.as_ref().ok_or_else(|| {
                Error::usage(format!("{}: attempt without candidate; run with --audit", out.instance_id))
            })?;
            let rep = verify(inst, cand, &crit)?;
            if rep.accepted != a.accepted || rep.feasible != a.feasible || rep.r_ver.to_bits() != a.r_ver.to_bits() {
                return Err(Error::usage(format!(
                    "{} / {} / {}: replayed verdict differs from the record",
                    out.method, out.instance_id, a.solver
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
