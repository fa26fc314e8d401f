//! Base-case and N-1 DC optimal power flow as linear programs.
//!
//! Flow variables stay explicit, tied to angles by per-branch equalities, so
//! that reduced monitoring is literally "drop thermal inequality rows":
//! equalities (flow definitions, nodal balance, reserve) are always present,
//! thermal rows exist exactly for the monitored (case, branch) pairs.
//!
//! Convention: angles in radians, flows in MW on a 100 MVA base, flow leaves
//! the from-bus and enters the to-bus. The reference bus (lowest id) has its
//! angle fixed to zero in the base case and in every contingency.

use crate::grid::{ContingencySet, GridCase, GridError};
use crate::lp::{
    LinearProgram, LpError, LpSolution, LpStatus, Relation, Simplex, SolverStats,
};
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const BASE_MVA: f64 = 100.0;

/// Fraction of total demand that must be held as reserve in the base case.
pub const RESERVE_FRACTION: f64 = 0.05;

/// Per-bus demand in MW for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub demand: Array1<f64>,
}

impl LoadProfile {
    pub fn new(demand: Vec<f64>) -> Self {
        LoadProfile {
            demand: Array1::from(demand),
        }
    }

    pub fn total(&self) -> f64 {
        self.demand.sum()
    }

    pub fn check(&self, case: &GridCase) -> Result<(), OpfError> {
        if self.demand.len() != case.n_bus() {
            return Err(OpfError::Grid(GridError::DimensionMismatch {
                got: self.demand.len(),
                want: case.n_bus(),
            }));
        }
        if self.demand.iter().any(|d| *d < 0.0 || !d.is_finite()) {
            return Err(OpfError::NegativeDemand);
        }
        Ok(())
    }
}

/// The (case, branch) pairs whose thermal limits are enforced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorSet {
    /// Base-case branches under their normal rating.
    pub base: BTreeSet<usize>,
    /// Per-contingency branches under the emergency rating, keyed by the
    /// outaged branch id.
    pub per_contingency: BTreeMap<usize, BTreeSet<usize>>,
}

impl MonitorSet {
    pub fn empty() -> Self {
        MonitorSet::default()
    }

    /// Monitor everything: all branches in the base case and, per
    /// contingency, all surviving branches.
    pub fn full(case: &GridCase, contingencies: &ContingencySet) -> Self {
        let all: BTreeSet<usize> = case.branches.iter().map(|b| b.id).collect();
        let per_contingency = contingencies
            .branch_ids
            .iter()
            .map(|&c| {
                let mut s = all.clone();
                s.remove(&c);
                (c, s)
            })
            .collect();
        MonitorSet {
            base: all,
            per_contingency,
        }
    }

    pub fn contingency(&self, c: usize) -> Option<&BTreeSet<usize>> {
        self.per_contingency.get(&c)
    }

    /// Componentwise union.
    pub fn union(&self, other: &MonitorSet) -> MonitorSet {
        let mut out = self.clone();
        out.base.extend(other.base.iter().copied());
        for (c, set) in &other.per_contingency {
            out.per_contingency
                .entry(*c)
                .or_default()
                .extend(set.iter().copied());
        }
        out
    }

    /// True when every monitored pair of `self` is in `other`.
    pub fn is_subset_of(&self, other: &MonitorSet) -> bool {
        if !self.base.is_subset(&other.base) {
            return false;
        }
        self.per_contingency.iter().all(|(c, set)| {
            set.is_empty()
                || other
                    .per_contingency
                    .get(c)
                    .is_some_and(|o| set.is_subset(o))
        })
    }

    /// Total number of monitored (case, branch) pairs.
    pub fn size(&self) -> usize {
        self.base.len() + self.per_contingency.values().map(|s| s.len()).sum::<usize>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpfMode {
    BaseOnly,
    FullN1,
    ReducedN1,
}

#[derive(Debug, Error)]
pub enum OpfError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("load profile has negative or non-finite demand")]
    NegativeDemand,
    #[error("monitor set references unknown branch {0}")]
    InvalidMonitor(usize),
    #[error("monitor set keyed by {0}, which is not in the contingency set")]
    UnknownContingency(usize),
    #[error("monitor for contingency {0} references the outaged branch itself")]
    MonitorOnOutage(usize),
    #[error("lp backend: {0}")]
    Lp(#[from] LpError),
    #[error("{mode:?} OPF did not reach an optimum: {status:?}")]
    NotOptimal { mode: OpfMode, status: LpStatus },
}

/// Variable layout of a built OPF. Base block first (dispatch, reserve,
/// angles, flows), then one block per contingency in contingency-set order.
#[derive(Clone, Debug)]
pub struct OpfIndex {
    pub n_gen: usize,
    pub n_bus: usize,
    pub n_branch: usize,
    pub contingency_ids: Vec<usize>,
}

impl OpfIndex {
    fn base_len(&self) -> usize {
        2 * self.n_gen + self.n_bus + self.n_branch
    }

    fn cont_len(&self) -> usize {
        self.n_gen + self.n_bus + self.n_branch
    }

    pub fn p(&self, g: usize) -> usize {
        g
    }

    pub fn res(&self, g: usize) -> usize {
        self.n_gen + g
    }

    pub fn theta(&self, n: usize) -> usize {
        2 * self.n_gen + n
    }

    pub fn flow(&self, k: usize) -> usize {
        2 * self.n_gen + self.n_bus + k
    }

    pub fn cont_p(&self, ci: usize, g: usize) -> usize {
        self.base_len() + ci * self.cont_len() + g
    }

    pub fn cont_theta(&self, ci: usize, n: usize) -> usize {
        self.base_len() + ci * self.cont_len() + self.n_gen + n
    }

    pub fn cont_flow(&self, ci: usize, k: usize) -> usize {
        self.base_len() + ci * self.cont_len() + self.n_gen + self.n_bus + k
    }
}

/// A built OPF: the LP, the index maps into it, and what was monitored.
pub struct OpfProblem {
    pub lp: LinearProgram,
    pub index: OpfIndex,
    pub monitor: MonitorSet,
    pub mode: OpfMode,
}

impl OpfProblem {
    pub fn n_constraints(&self) -> usize {
        self.lp.n_constraints()
    }

    pub fn n_inequalities(&self) -> usize {
        self.lp.n_inequalities()
    }
}

/// Base-case OPF (no contingencies) with thermal limits on `monitor_base`.
pub fn build_base_opf(
    case: &GridCase,
    load: &LoadProfile,
    monitor_base: &BTreeSet<usize>,
) -> Result<OpfProblem, OpfError> {
    let monitor = MonitorSet {
        base: monitor_base.clone(),
        per_contingency: BTreeMap::new(),
    };
    let empty = ContingencySet {
        branch_ids: Vec::new(),
    };
    build(case, load, &empty, &monitor, OpfMode::BaseOnly)
}

/// Full N-1 OPF: every branch monitored in the base case and in every
/// contingency.
pub fn build_full_n1_opf(
    case: &GridCase,
    load: &LoadProfile,
    contingencies: &ContingencySet,
) -> Result<OpfProblem, OpfError> {
    let monitor = MonitorSet::full(case, contingencies);
    build(case, load, contingencies, &monitor, OpfMode::FullN1)
}

/// Reduced N-1 OPF: thermal rows only for the monitored pairs.
pub fn build_reduced_n1_opf(
    case: &GridCase,
    load: &LoadProfile,
    contingencies: &ContingencySet,
    monitor: &MonitorSet,
) -> Result<OpfProblem, OpfError> {
    build(case, load, contingencies, monitor, OpfMode::ReducedN1)
}

fn build(
    case: &GridCase,
    load: &LoadProfile,
    contingencies: &ContingencySet,
    monitor: &MonitorSet,
    mode: OpfMode,
) -> Result<OpfProblem, OpfError> {
    load.check(case)?;
    let branch_idx = case.branch_index();
    for &k in &monitor.base {
        if !branch_idx.contains_key(&k) {
            return Err(OpfError::InvalidMonitor(k));
        }
    }
    for (&c, set) in &monitor.per_contingency {
        if !contingencies.contains(c) {
            return Err(OpfError::UnknownContingency(c));
        }
        for &k in set {
            if !branch_idx.contains_key(&k) {
                return Err(OpfError::InvalidMonitor(k));
            }
            if k == c {
                return Err(OpfError::MonitorOnOutage(c));
            }
        }
    }

    let n_gen = case.n_gen();
    let n_bus = case.n_bus();
    let n_branch = case.n_branch();
    let index = OpfIndex {
        n_gen,
        n_bus,
        n_branch,
        contingency_ids: contingencies.branch_ids.clone(),
    };
    let n_cont = contingencies.len();
    let endpoints = case.branch_endpoints();
    let ref_bus = case.reference_bus();

    let n_vars = index.base_len() + n_cont * index.cont_len();
    let mut lp = LinearProgram {
        objective: Vec::with_capacity(n_vars),
        variables: Vec::with_capacity(n_vars),
        constraints: Vec::new(),
    };

    // Base variables: dispatch, reserve, angles, flows.
    for g in &case.generators {
        lp.add_variable(format!("p{}", g.id), g.p_min, f64::INFINITY, g.cost);
    }
    for g in &case.generators {
        lp.add_variable(format!("r{}", g.id), 0.0, f64::INFINITY, 0.0);
    }
    for (n, b) in case.buses.iter().enumerate() {
        let (lo, hi) = if n == ref_bus {
            (0.0, 0.0)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        lp.add_variable(format!("t{}", b.id), lo, hi, 0.0);
    }
    for b in &case.branches {
        lp.add_variable(format!("f{}", b.id), f64::NEG_INFINITY, f64::INFINITY, 0.0);
    }
    // Contingency variables.
    for (ci, &c) in contingencies.branch_ids.iter().enumerate() {
        for g in &case.generators {
            lp.add_variable(format!("p{}c{}", g.id, c), g.p_min, g.p_max, 0.0);
        }
        for (n, b) in case.buses.iter().enumerate() {
            let (lo, hi) = if n == ref_bus {
                (0.0, 0.0)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            lp.add_variable(format!("t{}c{}", b.id, c), lo, hi, 0.0);
        }
        for b in &case.branches {
            let (lo, hi) = if b.id == c {
                (0.0, 0.0) // outaged branch carries no flow
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            lp.add_variable(format!("f{}c{}", b.id, c), lo, hi, 0.0);
        }
        let _ = ci;
    }

    // Reserve requirement.
    let total_demand = load.total();
    lp.add_constraint(
        (0..n_gen).map(|g| (index.res(g), 1.0)).collect(),
        Relation::Eq,
        RESERVE_FRACTION * total_demand,
    );
    // Dispatch plus reserve within capacity.
    for (g, gen) in case.generators.iter().enumerate() {
        lp.add_constraint(
            vec![(index.p(g), 1.0), (index.res(g), 1.0)],
            Relation::Le,
            gen.p_max,
        );
    }
    // Base flow definitions.
    for (k, b) in case.branches.iter().enumerate() {
        let beta = BASE_MVA / b.x;
        let (f, t) = endpoints[k];
        lp.add_constraint(
            vec![
                (index.flow(k), 1.0),
                (index.theta(f), -beta),
                (index.theta(t), beta),
            ],
            Relation::Eq,
            0.0,
        );
    }
    // Base nodal balance.
    add_balance_rows(&mut lp, case, &endpoints, load, |g| index.p(g), |k| {
        index.flow(k)
    });
    // Base thermal limits on the monitored branches.
    for &bid in &monitor.base {
        let k = branch_idx[&bid];
        let rate = case.branches[k].rate_a;
        lp.add_constraint(vec![(index.flow(k), 1.0)], Relation::Le, rate);
        lp.add_constraint(vec![(index.flow(k), 1.0)], Relation::Ge, -rate);
    }

    let empty = BTreeSet::new();
    for (ci, &c) in contingencies.branch_ids.iter().enumerate() {
        let out_k = branch_idx[&c];
        // Ramp coupling to the base dispatch.
        for (g, gen) in case.generators.iter().enumerate() {
            lp.add_constraint(
                vec![(index.cont_p(ci, g), 1.0), (index.p(g), -1.0)],
                Relation::Le,
                gen.ramp,
            );
            lp.add_constraint(
                vec![(index.cont_p(ci, g), 1.0), (index.p(g), -1.0)],
                Relation::Ge,
                -gen.ramp,
            );
        }
        // Flow definitions for the surviving branches.
        for (k, b) in case.branches.iter().enumerate() {
            if k == out_k {
                continue;
            }
            let beta = BASE_MVA / b.x;
            let (f, t) = endpoints[k];
            lp.add_constraint(
                vec![
                    (index.cont_flow(ci, k), 1.0),
                    (index.cont_theta(ci, f), -beta),
                    (index.cont_theta(ci, t), beta),
                ],
                Relation::Eq,
                0.0,
            );
        }
        // Post-contingency balance.
        add_balance_rows(
            &mut lp,
            case,
            &endpoints,
            load,
            |g| index.cont_p(ci, g),
            |k| index.cont_flow(ci, k),
        );
        // Thermal limits under the emergency rating.
        let monitored = monitor.per_contingency.get(&c).unwrap_or(&empty);
        for &bid in monitored {
            let k = branch_idx[&bid];
            let rate = case.branches[k].rate_c;
            lp.add_constraint(vec![(index.cont_flow(ci, k), 1.0)], Relation::Le, rate);
            lp.add_constraint(vec![(index.cont_flow(ci, k), 1.0)], Relation::Ge, -rate);
        }
    }

    Ok(OpfProblem {
        lp,
        index,
        monitor: monitor.clone(),
        mode,
    })
}

fn add_balance_rows(
    lp: &mut LinearProgram,
    case: &GridCase,
    endpoints: &[(usize, usize)],
    load: &LoadProfile,
    p_var: impl Fn(usize) -> usize,
    flow_var: impl Fn(usize) -> usize,
) {
    let bus_idx = case.bus_index();
    let n_bus = case.n_bus();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_bus];
    for (g, gen) in case.generators.iter().enumerate() {
        rows[bus_idx[&gen.bus]].push((p_var(g), 1.0));
    }
    for (k, &(f, t)) in endpoints.iter().enumerate() {
        rows[f].push((flow_var(k), -1.0));
        rows[t].push((flow_var(k), 1.0));
    }
    for (n, coeffs) in rows.into_iter().enumerate() {
        lp.add_constraint(coeffs, Relation::Eq, load.demand[n]);
    }
}

/// Dispatch/angles/flows of one optimal solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpfSolution {
    pub dispatch: Vec<f64>,
    pub reserve: Vec<f64>,
    pub angles: Vec<f64>,
    pub flows: Vec<f64>,
    pub contingencies: Vec<ContingencySolution>,
    pub objective_value: f64,
    pub stats: SolverStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContingencySolution {
    pub outaged_branch: usize,
    pub dispatch: Vec<f64>,
    pub angles: Vec<f64>,
    pub flows: Vec<f64>,
}

impl OpfSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("opf solution serializes")
    }
}

/// Solves a built OPF with the native simplex, seeded with a structural
/// basis (flows, angles, and one slack unit per case) so the solver starts
/// from a power-flow-consistent point instead of an all-logical basis.
pub fn solve_opf(problem: &OpfProblem) -> Result<OpfSolution, OpfError> {
    let hint = crash_basis(problem);
    let solver = Simplex::with_initial_basis(hint);
    let sol = solver.solve(&problem.lp)?;
    unpack_solution(problem, &sol)
}

/// Initial basis proposal: all flow variables and non-reference angles plus
/// the largest generator (and its reserve) per case. Dependent columns are
/// repaired inside the solver.
fn crash_basis(problem: &OpfProblem) -> Vec<usize> {
    let ix = &problem.index;
    let mut hint =
        Vec::with_capacity((ix.n_branch + ix.n_bus + 2) * (1 + ix.contingency_ids.len()));
    let slack_gen = (0..ix.n_gen)
        .max_by(|&a, &b| {
            let va = problem.lp.variables[ix.cont_or_base_pmax(a)].upper;
            let vb = problem.lp.variables[ix.cont_or_base_pmax(b)].upper;
            va.partial_cmp(&vb).unwrap()
        })
        .unwrap_or(0);
    hint.push(ix.p(slack_gen));
    hint.push(ix.res(slack_gen));
    for k in 0..ix.n_branch {
        hint.push(ix.flow(k));
    }
    for n in 0..ix.n_bus {
        hint.push(ix.theta(n));
    }
    for ci in 0..ix.contingency_ids.len() {
        hint.push(ix.cont_p(ci, slack_gen));
        for k in 0..ix.n_branch {
            hint.push(ix.cont_flow(ci, k));
        }
        for n in 0..ix.n_bus {
            hint.push(ix.cont_theta(ci, n));
        }
    }
    hint
}

impl OpfIndex {
    // Capacity lookup helper for the crash basis: contingency blocks carry
    // p_max as an upper bound, the base block does not.
    fn cont_or_base_pmax(&self, g: usize) -> usize {
        if self.contingency_ids.is_empty() {
            self.p(g)
        } else {
            self.cont_p(0, g)
        }
    }
}

fn unpack_solution(problem: &OpfProblem, sol: &LpSolution) -> Result<OpfSolution, OpfError> {
    if sol.status != LpStatus::Optimal {
        return Err(OpfError::NotOptimal {
            mode: problem.mode,
            status: sol.status,
        });
    }
    let ix = &problem.index;
    let v = &sol.values;
    let contingencies = ix
        .contingency_ids
        .iter()
        .enumerate()
        .map(|(ci, &c)| ContingencySolution {
            outaged_branch: c,
            dispatch: (0..ix.n_gen).map(|g| v[ix.cont_p(ci, g)]).collect(),
            angles: (0..ix.n_bus).map(|n| v[ix.cont_theta(ci, n)]).collect(),
            flows: (0..ix.n_branch).map(|k| v[ix.cont_flow(ci, k)]).collect(),
        })
        .collect();
    Ok(OpfSolution {
        dispatch: (0..ix.n_gen).map(|g| v[ix.p(g)]).collect(),
        reserve: (0..ix.n_gen).map(|g| v[ix.res(g)]).collect(),
        angles: (0..ix.n_bus).map(|n| v[ix.theta(n)]).collect(),
        flows: (0..ix.n_branch).map(|k| v[ix.flow(k)]).collect(),
        contingencies,
        objective_value: sol.objective_value,
        stats: sol.stats.clone(),
    })
}

/// Flows recomputed from angles, independent of the LP's flow variables.
#[derive(Clone, Debug)]
pub struct FlowTable {
    pub base: Vec<f64>,
    /// One row per contingency, in solution order.
    pub per_contingency: Vec<Vec<f64>>,
}

pub fn compute_all_flows(case: &GridCase, solution: &OpfSolution) -> FlowTable {
    let endpoints = case.branch_endpoints();
    let flow_from_angles = |angles: &[f64], skip: Option<usize>| -> Vec<f64> {
        case.branches
            .iter()
            .enumerate()
            .map(|(k, b)| {
                if Some(b.id) == skip {
                    0.0
                } else {
                    let (f, t) = endpoints[k];
                    BASE_MVA * (angles[f] - angles[t]) / b.x
                }
            })
            .collect()
    };
    FlowTable {
        base: flow_from_angles(&solution.angles, None),
        per_contingency: solution
            .contingencies
            .iter()
            .map(|c| flow_from_angles(&c.angles, Some(c.outaged_branch)))
            .collect(),
    }
}

/// One thermal-limit exceedance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    /// `None` for the base case, otherwise the outaged branch id.
    pub contingency: Option<usize>,
    pub branch_id: usize,
    pub flow_mw: f64,
    pub limit_mw: f64,
    pub excess_mw: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViolationReport {
    pub tolerance_mw: f64,
    pub violations: Vec<Violation>,
}

pub const DEFAULT_VIOLATION_TOLERANCE_MW: f64 = 1e-4;

impl ViolationReport {
    pub fn count(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn total_excess_mw(&self) -> f64 {
        self.violations.iter().map(|v| v.excess_mw).sum()
    }

    /// CSV rows: case,branch,flow,limit,excess.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["case", "branch", "flow", "limit", "excess"])?;
        for v in &self.violations {
            let case = match v.contingency {
                None => "base".to_string(),
                Some(c) => c.to_string(),
            };
            wtr.write_record([
                case,
                v.branch_id.to_string(),
                format!("{}", v.flow_mw),
                format!("{}", v.limit_mw),
                format!("{}", v.excess_mw),
            ])?;
        }
        wtr.flush()
    }
}

/// Checks every branch of every case against its applicable rating using
/// flows recomputed from angles. Lists exceedances above `tolerance_mw`.
pub fn verify_solution(
    case: &GridCase,
    solution: &OpfSolution,
    tolerance_mw: f64,
) -> ViolationReport {
    let flows = compute_all_flows(case, solution);
    let mut violations = Vec::new();
    for (k, b) in case.branches.iter().enumerate() {
        let excess = flows.base[k].abs() - b.rate_a;
        if excess > tolerance_mw {
            violations.push(Violation {
                contingency: None,
                branch_id: b.id,
                flow_mw: flows.base[k],
                limit_mw: b.rate_a,
                excess_mw: excess,
            });
        }
    }
    for (ci, cont) in solution.contingencies.iter().enumerate() {
        for (k, b) in case.branches.iter().enumerate() {
            if b.id == cont.outaged_branch {
                continue;
            }
            let excess = flows.per_contingency[ci][k].abs() - b.rate_c;
            if excess > tolerance_mw {
                violations.push(Violation {
                    contingency: Some(cont.outaged_branch),
                    branch_id: b.id,
                    flow_mw: flows.per_contingency[ci][k],
                    limit_mw: b.rate_c,
                    excess_mw: excess,
                });
            }
        }
    }
    ViolationReport {
        tolerance_mw,
        violations,
    }
}

/// Branches at or above `tau` of their applicable rating in the solution,
/// excluding each contingency's own outaged branch.
pub fn binding_set(case: &GridCase, solution: &OpfSolution, tau: f64) -> MonitorSet {
    assert!(tau > 0.0 && tau <= 1.0, "tau must be in (0, 1]");
    let mut monitor = MonitorSet::empty();
    for (k, b) in case.branches.iter().enumerate() {
        if solution.flows[k].abs() >= tau * b.rate_a {
            monitor.base.insert(b.id);
        }
    }
    for cont in &solution.contingencies {
        let mut set = BTreeSet::new();
        for (k, b) in case.branches.iter().enumerate() {
            if b.id == cont.outaged_branch {
                continue;
            }
            if cont.flows[k].abs() >= tau * b.rate_c {
                set.insert(b.id);
            }
        }
        monitor.per_contingency.insert(cont.outaged_branch, set);
    }
    monitor
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_contingency_set, Branch, Bus, Generator, GridCase};

    fn two_bus() -> GridCase {
        GridCase::new(
            "two-bus",
            vec![Bus { id: 1, load: 0.0 }, Bus { id: 2, load: 50.0 }],
            vec![Branch {
                id: 1,
                from_bus: 1,
                to_bus: 2,
                x: 0.1,
                rate_a: 100.0,
                rate_c: 110.0,
            }],
            vec![Generator {
                id: 1,
                bus: 1,
                p_min: 0.0,
                p_max: 100.0,
                ramp: 50.0,
                cost: 10.0,
            }],
        )
        .unwrap()
    }

    /// Triangle with a cheap unit at bus 1 and a dear unit at bus 3; branch 1
    /// is tight enough that unconstrained dispatch overloads it.
    fn congested_triangle() -> GridCase {
        GridCase::new(
            "congested",
            vec![
                Bus { id: 1, load: 0.0 },
                Bus { id: 2, load: 60.0 },
                Bus { id: 3, load: 0.0 },
            ],
            vec![
                Branch {
                    id: 1,
                    from_bus: 1,
                    to_bus: 2,
                    x: 0.1,
                    rate_a: 35.0,
                    rate_c: 65.0,
                },
                Branch {
                    id: 2,
                    from_bus: 2,
                    to_bus: 3,
                    x: 0.1,
                    rate_a: 80.0,
                    rate_c: 90.0,
                },
                Branch {
                    id: 3,
                    from_bus: 1,
                    to_bus: 3,
                    x: 0.1,
                    rate_a: 80.0,
                    rate_c: 90.0,
                },
            ],
            vec![
                Generator {
                    id: 1,
                    bus: 1,
                    p_min: 0.0,
                    p_max: 150.0,
                    ramp: 80.0,
                    cost: 8.0,
                },
                Generator {
                    id: 2,
                    bus: 3,
                    p_min: 0.0,
                    p_max: 150.0,
                    ramp: 80.0,
                    cost: 25.0,
                },
            ],
        )
        .unwrap()
    }

    fn base_load(case: &GridCase) -> LoadProfile {
        LoadProfile::new(case.base_loads())
    }

    #[test]
    fn two_bus_analytic_solution() {
        let case = two_bus();
        let load = base_load(&case);
        let monitor: BTreeSet<usize> = [1].into();
        let problem = build_base_opf(&case, &load, &monitor).unwrap();
        let sol = solve_opf(&problem).unwrap();
        assert!((sol.objective_value - 500.0).abs() < 1e-7);
        assert!((sol.dispatch[0] - 50.0).abs() < 1e-7);
        assert!((sol.reserve[0] - 2.5).abs() < 1e-7);
        assert!((sol.flows[0] - 50.0).abs() < 1e-7);
        // flow = 100/x (θ1 − θ2); reference bus 1 pinned at zero
        assert!((sol.angles[0]).abs() < 1e-12);
        assert!((sol.angles[1] + 0.05).abs() < 1e-9);
    }

    #[test]
    fn monitor_empty_drops_only_inequalities() {
        let case = two_bus();
        let load = base_load(&case);
        let all = build_base_opf(&case, &load, &[1].into()).unwrap();
        let none = build_base_opf(&case, &load, &BTreeSet::new()).unwrap();
        assert_eq!(all.n_constraints() - none.n_constraints(), 2);
        let eq = |p: &OpfProblem| p.n_constraints() - p.n_inequalities();
        assert_eq!(eq(&all), eq(&none));
    }

    #[test]
    fn invalid_monitor_rejected() {
        let case = two_bus();
        let load = base_load(&case);
        assert!(matches!(
            build_base_opf(&case, &load, &[99].into()),
            Err(OpfError::InvalidMonitor(99))
        ));
    }

    #[test]
    fn monitor_on_outage_rejected() {
        let case = congested_triangle();
        let load = base_load(&case);
        let conts = build_contingency_set(&case);
        let mut monitor = MonitorSet::empty();
        monitor.per_contingency.insert(1, [1].into());
        assert!(matches!(
            build_reduced_n1_opf(&case, &load, &conts, &monitor),
            Err(OpfError::MonitorOnOutage(1))
        ));
    }

    #[test]
    fn overload_infeasible() {
        let case = two_bus();
        let load = LoadProfile::new(vec![0.0, 200.0]);
        let problem = build_base_opf(&case, &load, &BTreeSet::new()).unwrap();
        assert!(matches!(
            solve_opf(&problem),
            Err(OpfError::NotOptimal {
                status: LpStatus::Infeasible,
                ..
            })
        ));
    }

    #[test]
    fn full_n1_invariants_on_triangle() {
        let case = congested_triangle();
        let load = base_load(&case);
        let conts = build_contingency_set(&case);
        assert_eq!(conts.len(), 3);
        let problem = build_full_n1_opf(&case, &load, &conts).unwrap();
        let sol = solve_opf(&problem).unwrap();

        // Reserve equality.
        let res_sum: f64 = sol.reserve.iter().sum();
        assert!((res_sum - 0.05 * 60.0).abs() < 1e-6);
        // Outaged branch flow is pinned to zero.
        for cont in &sol.contingencies {
            let k = case.branch_index()[&cont.outaged_branch];
            assert_eq!(cont.flows[k], 0.0);
        }
        // Ramp feasibility.
        for cont in &sol.contingencies {
            for g in 0..case.n_gen() {
                let delta = (cont.dispatch[g] - sol.dispatch[g]).abs();
                assert!(delta <= case.generators[g].ramp + 1e-6);
            }
        }
        // Nodal balance from recomputed flows.
        let flows = compute_all_flows(&case, &sol);
        let endpoints = case.branch_endpoints();
        let check_balance = |disp: &[f64], fl: &[f64]| {
            let mut resid = load.demand.to_vec();
            for (g, gen) in case.generators.iter().enumerate() {
                resid[case.bus_index()[&gen.bus]] -= disp[g];
            }
            for (k, &(f, t)) in endpoints.iter().enumerate() {
                resid[f] += fl[k];
                resid[t] -= fl[k];
            }
            for r in resid {
                assert!(r.abs() < 1e-6, "balance residual {}", r);
            }
        };
        check_balance(&sol.dispatch, &flows.base);
        for (ci, cont) in sol.contingencies.iter().enumerate() {
            check_balance(&cont.dispatch, &flows.per_contingency[ci]);
        }
        // Monitor-all solutions verify clean.
        assert!(verify_solution(&case, &sol, DEFAULT_VIOLATION_TOLERANCE_MW).is_empty());
    }

    #[test]
    fn recomputed_flows_match_lp_variables() {
        let case = congested_triangle();
        let load = base_load(&case);
        let conts = build_contingency_set(&case);
        let sol = solve_opf(&build_full_n1_opf(&case, &load, &conts).unwrap()).unwrap();
        let flows = compute_all_flows(&case, &sol);
        for k in 0..case.n_branch() {
            assert!((flows.base[k] - sol.flows[k]).abs() < 1e-6);
        }
        for (ci, cont) in sol.contingencies.iter().enumerate() {
            for k in 0..case.n_branch() {
                assert!((flows.per_contingency[ci][k] - cont.flows[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unmonitored_congestion_is_reported() {
        let case = congested_triangle();
        let load = base_load(&case);
        // Base-only, nothing monitored: the cheap unit serves everything and
        // overloads branch 1.
        let relaxed = solve_opf(&build_base_opf(&case, &load, &BTreeSet::new()).unwrap()).unwrap();
        let report = verify_solution(&case, &relaxed, DEFAULT_VIOLATION_TOLERANCE_MW);
        assert!(!report.is_empty());
        assert!(report.violations.iter().any(|v| v.branch_id == 1));
        // Large tolerance hides it.
        let loose = verify_solution(&case, &relaxed, 1e6);
        assert!(loose.is_empty());
        // Monitored solve costs more and is clean.
        let tight =
            solve_opf(&build_base_opf(&case, &load, &case.branches.iter().map(|b| b.id).collect()).unwrap())
                .unwrap();
        assert!(tight.objective_value > relaxed.objective_value + 1.0);
        assert!(verify_solution(&case, &tight, DEFAULT_VIOLATION_TOLERANCE_MW).is_empty());
    }

    #[test]
    fn binding_set_thresholds() {
        let case = congested_triangle();
        let load = base_load(&case);
        let conts = build_contingency_set(&case);
        let sol = solve_opf(&build_full_n1_opf(&case, &load, &conts).unwrap()).unwrap();
        // tau → 0⁺ captures every branch with nonzero flow.
        let all = binding_set(&case, &sol, 1e-12);
        for (k, b) in case.branches.iter().enumerate() {
            assert_eq!(all.base.contains(&b.id), sol.flows[k].abs() > 0.0);
        }
        // The outaged branch never appears in its own contingency set.
        for (&c, set) in &all.per_contingency {
            assert!(!set.contains(&c));
        }
        // tau = 1.0 keeps only exactly-binding branches.
        let tight = binding_set(&case, &sol, 1.0);
        for &bid in &tight.base {
            let k = case.branch_index()[&bid];
            assert!(sol.flows[k].abs() >= case.branches[k].rate_a - 1e-9);
        }
    }

    #[test]
    fn relaxation_monotone_on_nested_monitors() {
        let case = congested_triangle();
        let load = base_load(&case);
        let conts = build_contingency_set(&case);
        let mut m1 = MonitorSet::empty();
        m1.base.insert(1);
        let mut m2 = m1.clone();
        m2.base.insert(2);
        m2.per_contingency.insert(1, [2, 3].into());
        let obj = |m: &MonitorSet| {
            solve_opf(&build_reduced_n1_opf(&case, &load, &conts, m).unwrap())
                .unwrap()
                .objective_value
        };
        let (o1, o2) = (obj(&m1), obj(&m2));
        let ofull = solve_opf(&build_full_n1_opf(&case, &load, &conts).unwrap())
            .unwrap()
            .objective_value;
        let tol = 1e-6 * ofull.abs().max(1.0);
        assert!(o1 <= o2 + tol);
        assert!(o2 <= ofull + tol);
    }

    #[test]
    fn screening_exactness_on_triangle() {
        let case = congested_triangle();
        let load = base_load(&case);
        let conts = build_contingency_set(&case);
        let full = solve_opf(&build_full_n1_opf(&case, &load, &conts).unwrap()).unwrap();
        let monitor = binding_set(&case, &full, 1.0 - 1e-6);
        let reduced =
            solve_opf(&build_reduced_n1_opf(&case, &load, &conts, &monitor).unwrap()).unwrap();
        let tol = 1e-6 * full.objective_value.abs().max(1.0);
        assert!((reduced.objective_value - full.objective_value).abs() <= tol);
        assert!(verify_solution(&case, &reduced, DEFAULT_VIOLATION_TOLERANCE_MW).is_empty());
    }

    #[test]
    fn empty_contingency_set_matches_base_problem() {
        let case = congested_triangle();
        let load = base_load(&case);
        let empty = ContingencySet {
            branch_ids: Vec::new(),
        };
        let all: BTreeSet<usize> = case.branches.iter().map(|b| b.id).collect();
        let monitor = MonitorSet {
            base: all.clone(),
            per_contingency: BTreeMap::new(),
        };
        let degenerate = build_reduced_n1_opf(&case, &load, &empty, &monitor).unwrap();
        let base = build_base_opf(&case, &load, &all).unwrap();
        assert_eq!(degenerate.lp.dump(), base.lp.dump());
    }

    #[test]
    fn resolve_is_idempotent() {
        let case = congested_triangle();
        let load = base_load(&case);
        let conts = build_contingency_set(&case);
        let a = solve_opf(&build_full_n1_opf(&case, &load, &conts).unwrap()).unwrap();
        let b = solve_opf(&build_full_n1_opf(&case, &load, &conts).unwrap()).unwrap();
        assert!((a.objective_value - b.objective_value).abs() < 1e-9);
    }

    #[test]
    fn violation_csv_shape() {
        let case = congested_triangle();
        let load = base_load(&case);
        let relaxed = solve_opf(&build_base_opf(&case, &load, &BTreeSet::new()).unwrap()).unwrap();
        let report = verify_solution(&case, &relaxed, DEFAULT_VIOLATION_TOLERANCE_MW);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case,branch,flow,limit,excess"));
        assert_eq!(text.lines().count(), 1 + report.count());
    }
}
