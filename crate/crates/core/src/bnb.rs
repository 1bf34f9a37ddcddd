//! Breadth-first branch and bound over link reservations with a
//! shortest-path primal heuristic.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::{apply_reservation, EffectiveNetwork, FrDesign, RoadNetwork};
use crate::shortest::shortest_to_exit;
use crate::ue::{solve_so, solve_ue, FlowAssignment, UeResult};

pub const BNB_UE_TOL: f64 = 1e-3;
const BOUND_TOL: f64 = 1e-6;
/// Warm-start values this close to the incumbent are re-checked cold.
const INCUMBENT_SLACK: f64 = 0.05;

/// A search node: link fixings plus warm-start flows from its parent.
#[derive(Debug, Clone, Default)]
pub struct BnbNode {
    pub fixed_on: BTreeSet<usize>,
    pub fixed_off: BTreeSet<usize>,
    pub parent_flows: Option<FlowAssignment>,
    pub depth: usize,
    /// Position in the FR order of the target whose path was branched on.
    pub branch_target: Option<usize>,
}

impl BnbNode {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn is_consistent(&self) -> bool {
        self.fixed_on.is_disjoint(&self.fixed_off)
    }

    fn child(&self, target: usize, link: usize, reserve: bool, flows: Option<FlowAssignment>) -> Self {
        let mut child = Self {
            fixed_on: self.fixed_on.clone(),
            fixed_off: self.fixed_off.clone(),
            parent_flows: flows,
            depth: self.depth + 1,
            branch_target: Some(target),
        };
        if reserve {
            child.fixed_on.insert(link);
        } else {
            child.fixed_off.insert(link);
        }
        child
    }
}

/// Design built by the primal heuristic at a node.
#[derive(Debug, Clone)]
pub struct HeuristicDesign {
    pub design: FrDesign,
    /// Per FR target, the reserved route as link indices from the target
    /// towards the exit.
    pub paths: Vec<Vec<usize>>,
    /// Every `fixed_on` link lies on some route.
    pub honors_fixings: bool,
}

/// Shortest route from every FR target to an exit, skipping `fixed_off`
/// links and charging nothing for `fixed_on` ones. Only route links are
/// reserved.
pub fn heuristic_design(net: &RoadNetwork, node: &BnbNode) -> Result<HeuristicDesign> {
    let cost = |l: usize| {
        if node.fixed_off.contains(&l) {
            None
        } else if node.fixed_on.contains(&l) {
            Some(0.0)
        } else {
            Some(net.link(l).free_flow_time)
        }
    };
    let paths = net
        .fr_nodes()
        .iter()
        .map(|&k| {
            shortest_to_exit(net, k, cost, None)
                .map(|(links, _)| links)
                .ok_or(Error::Disconnected { node: k })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[usize]> = paths.iter().map(Vec::as_slice).collect();
    let design = FrDesign::from_paths(net, net.fr_nodes(), &refs);
    let honors_fixings = node.fixed_on.iter().all(|&l| design.is_reserved(l));
    Ok(HeuristicDesign {
        design,
        paths,
        honors_fixings,
    })
}

/// Heuristic design plus its equilibrium (relative tolerance 1e-3,
/// warm-started from the parent's flows). The equilibrium is `None` when
/// the routes miss a forced link or the reservation cuts an evacuee
/// source off.
pub fn primal_heuristic(net: &RoadNetwork, node: &BnbNode) -> Result<(HeuristicDesign, Option<UeResult>)> {
    let h = heuristic_design(net, node)?;
    if !h.honors_fixings {
        return Ok((h, None));
    }
    let ue = solve_ue(&apply_reservation(net, &h.design), BNB_UE_TOL, node.parent_flows.as_ref()).ok();
    Ok((h, ue))
}

/// Next link to branch on: targets are visited cyclically starting after
/// the node's `branch_target`, and each target's route is read from the
/// exit end. Returns the target position and link.
pub fn select_branch_link(node: &BnbNode, paths: &[Vec<usize>]) -> Option<(usize, usize)> {
    let count = paths.len();
    let start = node.branch_target.map_or(0, |t| t + 1);
    (0..count).map(|off| (start + off) % count).find_map(|t| {
        paths[t]
            .iter()
            .rev()
            .find(|l| !node.fixed_on.contains(l) && !node.fixed_off.contains(l))
            .map(|&l| (t, l))
    })
}

/// System-optimal total time with only the forced reservations applied.
/// Lower-bounds the equilibrium time of every design below the node.
pub fn so_dual_bound(net: &RoadNetwork, node: &BnbNode) -> Result<f64> {
    let mut reserved = vec![false; net.link_count()];
    for &l in &node.fixed_on {
        reserved[l] = true;
    }
    Ok(solve_so(&EffectiveNetwork::from_reserved(net, &reserved), BOUND_TOL)?.total_time)
}

#[derive(Debug, Clone)]
pub struct BnbConfig {
    pub time_limit: Duration,
    pub use_bounds: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(300),
            use_bounds: false,
        }
    }
}

/// Incumbent improvement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncumbentEvent {
    pub wall_time: f64,
    pub objective: f64,
    pub nodes_explored: usize,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub incumbent: FrDesign,
    /// Cold-start equilibrium total time at the incumbent.
    pub objective: f64,
    pub nodes_explored: usize,
    /// The queue emptied before the time limit.
    pub exhausted: bool,
    pub proven_optimal: bool,
    pub wall_time: f64,
    pub trace: Vec<IncumbentEvent>,
}

/// FIFO branch and bound. The root is always processed; afterwards the
/// search stops once `time_limit` has elapsed.
pub fn bnb_solve(net: &RoadNetwork, config: &BnbConfig) -> Result<BnbResult> {
    let started = Instant::now();
    let mut queue = VecDeque::from([BnbNode::root()]);
    let mut cache: HashMap<Vec<bool>, Option<(f64, FlowAssignment)>> = HashMap::new();
    let mut cold: HashMap<Vec<bool>, f64> = HashMap::new();
    let mut incumbent: Option<(FrDesign, f64)> = None;
    let mut trace = Vec::new();
    let mut nodes_explored = 0;

    while let Some(node) = queue.pop_front() {
        if nodes_explored > 0 && started.elapsed() >= config.time_limit {
            queue.push_front(node);
            break;
        }
        nodes_explored += 1;
        let Ok(h) = heuristic_design(net, &node) else {
            continue;
        };
        if config.use_bounds {
            if let Some((_, best)) = &incumbent {
                if so_dual_bound(net, &node)? >= *best {
                    continue;
                }
            }
        }
        if !h.honors_fixings {
            if let Some((t, l)) = select_branch_link(&node, &h.paths) {
                queue.push_back(node.child(t, l, true, node.parent_flows.clone()));
                queue.push_back(node.child(t, l, false, node.parent_flows.clone()));
            }
            continue;
        }
        let entry = cache.entry(h.design.key()).or_insert_with(|| {
            solve_ue(&apply_reservation(net, &h.design), BNB_UE_TOL, node.parent_flows.as_ref())
                .ok()
                .map(|r| (r.total_time, r.flows))
        });
        let flows = entry.as_ref().map(|(_, f)| f.clone());
        if let Some((warm, _)) = entry {
            let close = incumbent.as_ref().is_none_or(|(_, best)| *warm < *best * (1.0 + INCUMBENT_SLACK));
            if close {
                let value = *cold.entry(h.design.key()).or_insert_with(|| {
                    solve_ue(&apply_reservation(net, &h.design), BNB_UE_TOL, None).map_or(f64::INFINITY, |r| r.total_time)
                });
                if value.is_finite() && incumbent.as_ref().is_none_or(|(_, best)| value < *best) {
                    incumbent = Some((h.design.clone(), value));
                    trace.push(IncumbentEvent {
                        wall_time: started.elapsed().as_secs_f64(),
                        objective: value,
                        nodes_explored,
                    });
                }
            }
        }
        if let Some((t, l)) = select_branch_link(&node, &h.paths) {
            queue.push_back(node.child(t, l, true, flows.clone()));
            queue.push_back(node.child(t, l, false, flows));
        }
    }

    let exhausted = queue.is_empty();
    let (design, objective) = incumbent.ok_or(Error::NoIncumbent)?;
    Ok(BnbResult {
        incumbent: design,
        objective,
        nodes_explored,
        exhausted,
        proven_optimal: exhausted && config.use_bounds,
        wall_time: started.elapsed().as_secs_f64(),
        trace,
    })
}
