//! Power-network description: parsing, validation, radial-branch detection,
//! contingency enumeration, and graph feature assembly.

use crate::opf::LoadProfile;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

/// A bus with its base demand in MW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub load: f64,
}

/// A transmission branch. Reactance in per-unit, ratings in MW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    #[serde(rename = "from")]
    pub from_bus: usize,
    #[serde(rename = "to")]
    pub to_bus: usize,
    pub x: f64,
    pub rate_a: f64,
    pub rate_c: f64,
}

/// A generating unit attached to a bus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp: f64,
    pub cost: f64,
}

/// Immutable, validated network description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

/// Single-branch outages to consider, radial branches excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencySet {
    pub branch_ids: Vec<usize>,
}

impl ContingencySet {
    pub fn len(&self) -> usize {
        self.branch_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branch_ids.is_empty()
    }

    pub fn contains(&self, branch_id: usize) -> bool {
        self.branch_ids.binary_search(&branch_id).is_ok()
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("malformed case file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("case has no buses")]
    NoBuses,
    #[error("case has no generators")]
    NoGenerators,
    #[error("duplicate bus id {0}")]
    DuplicateBusId(usize),
    #[error("duplicate branch id {0}")]
    DuplicateBranchId(usize),
    #[error("duplicate generator id {0}")]
    DuplicateGeneratorId(usize),
    #[error("{entity} {id} references missing bus {bus}")]
    DanglingBusRef {
        entity: &'static str,
        id: usize,
        bus: usize,
    },
    #[error("bus {bus} is unreachable from bus {root}; the network must be connected")]
    Disconnected { root: usize, bus: usize },
    #[error("total capacity {capacity} MW below reserve-feasible requirement {required} MW")]
    CapacityShortfall { capacity: f64, required: f64 },
    #[error("bus {0} has negative load")]
    NegativeLoad(usize),
    #[error("branch {0} must have positive reactance")]
    NonPositiveReactance(usize),
    #[error("branch {id} ratings invalid: need 0 < rate_a <= rate_c, got {rate_a}/{rate_c}")]
    BadRates { id: usize, rate_a: f64, rate_c: f64 },
    #[error("branch {0} connects a bus to itself")]
    SelfLoop(usize),
    #[error("generator {0} bounds invalid: need 0 <= p_min <= p_max, ramp >= 0, cost >= 0")]
    BadGeneratorData(usize),
    #[error("load profile has {got} entries, case has {want} buses")]
    DimensionMismatch { got: usize, want: usize },
    #[error("branch {0} is not a valid outage")]
    NotAContingency(usize),
}

/// Parses and validates a JSON case file.
pub fn parse_case(text: &str) -> Result<GridCase, GridError> {
    let case: GridCase = serde_json::from_str(text)?;
    case.validate()?;
    Ok(case)
}

impl GridCase {
    pub fn new(
        name: impl Into<String>,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Result<Self, GridError> {
        let case = GridCase {
            name: name.into(),
            buses,
            branches,
            generators,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid case serializes")
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branch(&self) -> usize {
        self.branches.len()
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    /// Map from bus id to position in `buses`.
    pub fn bus_index(&self) -> HashMap<usize, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    /// Map from branch id to position in `branches`.
    pub fn branch_index(&self) -> HashMap<usize, usize> {
        self.branches
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    /// Branch endpoints as bus positions, in branch order.
    pub fn branch_endpoints(&self) -> Vec<(usize, usize)> {
        let bus_idx = self.bus_index();
        self.branches
            .iter()
            .map(|b| (bus_idx[&b.from_bus], bus_idx[&b.to_bus]))
            .collect()
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.load).sum()
    }

    pub fn base_loads(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.load).collect()
    }

    /// The angle-reference bus: lowest id, as a position in `buses`.
    pub fn reference_bus(&self) -> usize {
        self.buses
            .iter()
            .enumerate()
            .min_by_key(|(_, b)| b.id)
            .map(|(i, _)| i)
            .expect("validated case has buses")
    }

    fn validate(&self) -> Result<(), GridError> {
        if self.buses.is_empty() {
            return Err(GridError::NoBuses);
        }
        if self.generators.is_empty() {
            return Err(GridError::NoGenerators);
        }
        let mut bus_ids = BTreeSet::new();
        for b in &self.buses {
            if !bus_ids.insert(b.id) {
                return Err(GridError::DuplicateBusId(b.id));
            }
            if b.load < 0.0 || !b.load.is_finite() {
                return Err(GridError::NegativeLoad(b.id));
            }
        }
        let mut branch_ids = BTreeSet::new();
        for br in &self.branches {
            if !branch_ids.insert(br.id) {
                return Err(GridError::DuplicateBranchId(br.id));
            }
            for bus in [br.from_bus, br.to_bus] {
                if !bus_ids.contains(&bus) {
                    return Err(GridError::DanglingBusRef {
                        entity: "branch",
                        id: br.id,
                        bus,
                    });
                }
            }
            if br.from_bus == br.to_bus {
                return Err(GridError::SelfLoop(br.id));
            }
            if !(br.x > 0.0) || !br.x.is_finite() {
                return Err(GridError::NonPositiveReactance(br.id));
            }
            if !(br.rate_a > 0.0 && br.rate_a <= br.rate_c) || !br.rate_c.is_finite() {
                return Err(GridError::BadRates {
                    id: br.id,
                    rate_a: br.rate_a,
                    rate_c: br.rate_c,
                });
            }
        }
        let mut gen_ids = BTreeSet::new();
        for g in &self.generators {
            if !gen_ids.insert(g.id) {
                return Err(GridError::DuplicateGeneratorId(g.id));
            }
            if !bus_ids.contains(&g.bus) {
                return Err(GridError::DanglingBusRef {
                    entity: "generator",
                    id: g.id,
                    bus: g.bus,
                });
            }
            if !(0.0 <= g.p_min && g.p_min <= g.p_max) || g.ramp < 0.0 || g.cost < 0.0 {
                return Err(GridError::BadGeneratorData(g.id));
            }
        }
        // Connectivity from the reference bus.
        let bus_idx = self.bus_index();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            let (f, t) = (bus_idx[&br.from_bus], bus_idx[&br.to_bus]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let root = self.reference_bus();
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(GridError::Disconnected {
                root: self.buses[root].id,
                bus: self.buses[i].id,
            });
        }
        // The reserve equation needs 5% headroom above base load.
        let capacity: f64 = self.generators.iter().map(|g| g.p_max).sum();
        let required = 1.05 * self.total_load();
        if capacity < required {
            return Err(GridError::CapacityShortfall { capacity, required });
        }
        Ok(())
    }
}

/// Exact set of bridge branches: the ones whose removal disconnects the
/// network. Parallel branches between one bus pair are never bridges.
/// Linear-time lowlink traversal; tests keep a brute-force removal check as
/// the oracle.
pub fn find_radial_branches(case: &GridCase) -> BTreeSet<usize> {
    let n = case.n_bus();
    let endpoints = case.branch_endpoints();
    // adjacency as (neighbor, branch position)
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &(f, t)) in endpoints.iter().enumerate() {
        adj[f].push((t, e));
        adj[t].push((f, e));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;
    let mut bridges = BTreeSet::new();
    // Iterative DFS frames: (node, incoming branch position, adjacency cursor).
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        stack.push((start, usize::MAX, 0));
        while let Some(&mut (u, in_edge, ref mut cursor)) = stack.last_mut() {
            if *cursor < adj[u].len() {
                let (v, e) = adj[u][*cursor];
                *cursor += 1;
                if e == in_edge {
                    continue; // skip only the entering edge; parallels count
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&mut (parent, _, _)) = stack.last_mut() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        bridges.insert(case.branches[in_edge].id);
                    }
                }
            }
        }
    }
    bridges
}

/// All non-radial branches in ascending branch-id order.
pub fn build_contingency_set(case: &GridCase) -> ContingencySet {
    let radial = find_radial_branches(case);
    let mut ids: Vec<usize> = case
        .branches
        .iter()
        .map(|b| b.id)
        .filter(|id| !radial.contains(id))
        .collect();
    ids.sort_unstable();
    ContingencySet { branch_ids: ids }
}

/// Node/edge feature tensors for one (sample, case) pair.
///
/// Edge features are stored per branch; the two directions of a branch share
/// one row until a model splits them. The adjacency matrix is only used for
/// neighborhood lookup; parallel branches remain distinct edge rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphTensors {
    pub node_features: Array2<f64>,
    pub edge_features: Array2<f64>,
    pub adjacency: Array2<u8>,
    pub branch_endpoints: Vec<(usize, usize)>,
}

impl GraphTensors {
    pub fn n_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn n_branches(&self) -> usize {
        self.edge_features.nrows()
    }
}

/// Assembles the feature tensors for one load profile, optionally marking an
/// outaged branch and appending base-case congestion probabilities as an
/// extra edge feature.
///
/// Node features: bus load, total generator p_max, total p_min, and
/// cost-weighted capacity, each normalized by its case-wide maximum so all
/// samples of one case share scales. Edge features: reactance, both ratings
/// (normalized by the largest emergency rating), and the outage flag.
pub fn assemble_graph(
    case: &GridCase,
    load: &LoadProfile,
    outaged_branch: Option<usize>,
    bc_predictions: Option<&[f64]>,
) -> Result<GraphTensors, GridError> {
    let n = case.n_bus();
    let k = case.n_branch();
    if load.demand.len() != n {
        return Err(GridError::DimensionMismatch {
            got: load.demand.len(),
            want: n,
        });
    }
    if let Some(p) = bc_predictions {
        if p.len() != k {
            return Err(GridError::DimensionMismatch {
                got: p.len(),
                want: k,
            });
        }
    }
    let outage_pos = match outaged_branch {
        Some(id) => {
            let idx = case.branch_index();
            Some(*idx.get(&id).ok_or(GridError::NotAContingency(id))?)
        }
        None => None,
    };

    let bus_idx = case.bus_index();
    let mut bus_pmax = vec![0.0f64; n];
    let mut bus_pmin = vec![0.0f64; n];
    let mut bus_costcap = vec![0.0f64; n];
    for g in &case.generators {
        let i = bus_idx[&g.bus];
        bus_pmax[i] += g.p_max;
        bus_pmin[i] += g.p_min;
        bus_costcap[i] += g.cost * g.p_max;
    }
    let denom = |v: f64| if v > 0.0 { v } else { 1.0 };
    let max_load = denom(case.buses.iter().map(|b| b.load).fold(0.0, f64::max));
    let max_pmax = denom(bus_pmax.iter().copied().fold(0.0, f64::max));
    let max_costcap = denom(bus_costcap.iter().copied().fold(0.0, f64::max));

    let mut node_features = Array2::zeros((n, 4));
    for i in 0..n {
        node_features[(i, 0)] = load.demand[i] / max_load;
        node_features[(i, 1)] = bus_pmax[i] / max_pmax;
        node_features[(i, 2)] = bus_pmin[i] / max_pmax;
        node_features[(i, 3)] = bus_costcap[i] / max_costcap;
    }

    let max_x = denom(case.branches.iter().map(|b| b.x).fold(0.0, f64::max));
    let max_rate_c = denom(case.branches.iter().map(|b| b.rate_c).fold(0.0, f64::max));
    let f_e = if bc_predictions.is_some() { 5 } else { 4 };
    let mut edge_features = Array2::zeros((k, f_e));
    for (e, br) in case.branches.iter().enumerate() {
        edge_features[(e, 0)] = br.x / max_x;
        edge_features[(e, 1)] = br.rate_a / max_rate_c;
        edge_features[(e, 2)] = br.rate_c / max_rate_c;
        edge_features[(e, 3)] = if outage_pos == Some(e) { 1.0 } else { 0.0 };
        if let Some(p) = bc_predictions {
            edge_features[(e, 4)] = p[e];
        }
    }

    let endpoints = case.branch_endpoints();
    let mut adjacency = Array2::zeros((n, n));
    for &(f, t) in &endpoints {
        adjacency[(f, t)] = 1;
        adjacency[(t, f)] = 1;
    }

    Ok(GraphTensors {
        node_features,
        edge_features,
        adjacency,
        branch_endpoints: endpoints,
    })
}

/// The case's base demand as a load profile.
pub fn base_profile(case: &GridCase) -> LoadProfile {
    LoadProfile {
        demand: Array1::from(case.base_loads()),
    }
}
