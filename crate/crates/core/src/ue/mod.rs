//! BPR link costs, the Beckmann objective and Frank-Wolfe traffic
//! assignment (user equilibrium and system optimum).

mod decompose;

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::netmodel::EffectiveNetwork;
use crate::shortest::distances_to_exits;

pub use decompose::{decompose_flows, PathFlow};

pub const BPR_ALPHA: f64 = 0.15;
pub const BPR_BETA: i32 = 4;

/// Smallest step the halving fallback will try before giving up.
const MIN_STEP: f64 = 1.0 / (1u32 << 20) as f64;
const DEFAULT_MAX_ITER: usize = 20_000;

/// `T (1 + 0.15 (f/c)^4)`. Callers must not query closed links.
pub fn bpr(flow: f64, capacity: f64, free_flow_time: f64) -> f64 {
    debug_assert!(capacity > 0.0, "BPR queried on a closed link");
    free_flow_time * (1.0 + BPR_ALPHA * (flow / capacity).powi(BPR_BETA))
}

/// Integral of [`bpr`] from 0 to `flow`.
pub fn bpr_integral(flow: f64, capacity: f64, free_flow_time: f64) -> f64 {
    free_flow_time * (flow + BPR_ALPHA * flow.powi(5) / (5.0 * capacity.powi(4)))
}

/// `flow * bpr(flow)`.
fn link_total_time(flow: f64, capacity: f64, free_flow_time: f64) -> f64 {
    flow * bpr(flow, capacity, free_flow_time)
}

/// Derivative of `flow * bpr(flow)`: `T (1 + 5 * 0.15 (f/c)^4)`.
fn marginal_cost(flow: f64, capacity: f64, free_flow_time: f64) -> f64 {
    free_flow_time * (1.0 + 5.0 * BPR_ALPHA * (flow / capacity).powi(BPR_BETA))
}

pub fn bpr_time(net: &EffectiveNetwork<'_>, l: usize, flow: f64) -> f64 {
    bpr(flow, net.capacity(l), net.free_flow_time(l))
}

/// Per-link evacuee flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment(Vec<f64>);

impl FlowAssignment {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn new(flows: Vec<f64>) -> Self {
        Self(flows)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest `|out - in - d_i|` over non-exit nodes.
    pub fn conservation_residual(&self, net: &EffectiveNetwork<'_>) -> f64 {
        let base = net.base();
        (0..base.node_count())
            .filter(|&i| !base.is_exit(i))
            .map(|i| {
                let out: f64 = base.out_links(i).iter().map(|&l| self.0[l]).sum();
                let inc: f64 = base.in_links(i).iter().map(|&l| self.0[l]).sum();
                (out - inc - base.demand(i)).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Deref for FlowAssignment {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FlowAssignment {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Outcome of a Frank-Wolfe run.
#[derive(Debug, Clone)]
pub struct UeResult {
    pub flows: FlowAssignment,
    pub total_time: f64,
    pub beckmann_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative duality gap at the returned flows.
    pub relative_gap: f64,
    /// Minimised objective (Beckmann for UE, total time for SO) at the start
    /// and after every accepted step.
    pub objective_trace: Vec<f64>,
}

pub fn beckmann_objective(flows: &[f64], net: &EffectiveNetwork<'_>) -> f64 {
    flows
        .iter()
        .enumerate()
        .filter(|&(l, _)| !net.is_closed(l))
        .map(|(l, &x)| bpr_integral(x, net.capacity(l), net.free_flow_time(l)))
        .sum()
}

pub fn total_evac_time(flows: &[f64], net: &EffectiveNetwork<'_>) -> f64 {
    flows
        .iter()
        .enumerate()
        .filter(|&(l, _)| !net.is_closed(l))
        .map(|(l, &x)| link_total_time(x, net.capacity(l), net.free_flow_time(l)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    UserEquilibrium,
    SystemOptimum,
}

impl Mode {
    fn cost(self, flow: f64, capacity: f64, free_flow_time: f64) -> f64 {
        match self {
            Mode::UserEquilibrium => bpr(flow, capacity, free_flow_time),
            Mode::SystemOptimum => marginal_cost(flow, capacity, free_flow_time),
        }
    }

    fn objective(self, flows: &[f64], net: &EffectiveNetwork<'_>) -> f64 {
        match self {
            Mode::UserEquilibrium => beckmann_objective(flows, net),
            Mode::SystemOptimum => total_evac_time(flows, net),
        }
    }
}

/// User equilibrium by Frank-Wolfe with a halving step rule: the step
/// starts at 1 and is halved until the Beckmann objective strictly
/// decreases. Stops once an iteration improves the objective by a relative
/// amount below `rel_tol`.
pub fn solve_ue(
    net: &EffectiveNetwork<'_>,
    rel_tol: f64,
    warm_start: Option<&FlowAssignment>,
) -> Result<UeResult> {
    frank_wolfe(net, Mode::UserEquilibrium, rel_tol, warm_start, DEFAULT_MAX_ITER)
}

/// System optimum: the same loop run on marginal costs.
pub fn solve_so(net: &EffectiveNetwork<'_>, rel_tol: f64) -> Result<UeResult> {
    frank_wolfe(net, Mode::SystemOptimum, rel_tol, None, DEFAULT_MAX_ITER)
}

/// All-or-nothing loading of every demand onto its shortest route to an
/// exit under `costs`.
pub fn all_or_nothing(net: &EffectiveNetwork<'_>, costs: &[f64]) -> Result<FlowAssignment> {
    let base = net.base();
    let (dist, next) = distances_to_exits(base, |l| (!net.is_closed(l)).then(|| costs[l]));
    let mut order: Vec<usize> = (0..base.node_count())
        .filter(|&i| !base.is_exit(i) && dist[i].is_finite())
        .collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut carried: Vec<f64> = base.nodes().iter().map(|n| n.demand).collect();
    for node in base.sources() {
        if !dist[node].is_finite() {
            return Err(Error::DisconnectedSource { node });
        }
    }
    let mut flows = FlowAssignment::zeros(base.link_count());
    for u in order {
        let f = carried[u];
        if f == 0.0 {
            continue;
        }
        let l = next[u].expect("finite distance implies a next link");
        flows[l] += f;
        carried[base.link(l).to] += f;
    }
    Ok(flows)
}

fn current_costs(mode: Mode, net: &EffectiveNetwork<'_>, flows: &[f64]) -> Vec<f64> {
    flows
        .iter()
        .enumerate()
        .map(|(l, &x)| {
            if net.is_closed(l) {
                f64::INFINITY
            } else {
                mode.cost(x, net.capacity(l), net.free_flow_time(l))
            }
        })
        .collect()
}

/// Moves flow stranded on closed links back onto open shortest routes.
fn project_warm_start(net: &EffectiveNetwork<'_>, warm: &FlowAssignment) -> Result<FlowAssignment> {
    let base = net.base();
    if warm.len() != base.link_count() {
        return Err(Error::DimensionMismatch {
            left: warm.len(),
            right: base.link_count(),
        });
    }
    let scale = base.max_demand().max(1.0);
    if warm.conservation_residual(net) > 1e-6 * scale {
        return Err(Error::InvalidParameter(
            "warm start does not conserve this network's demands".into(),
        ));
    }
    if !(0..base.link_count()).any(|l| net.is_closed(l) && warm[l] > 0.0) {
        return Ok(warm.clone());
    }
    let mut kept = FlowAssignment::zeros(base.link_count());
    let mut stranded = vec![0.0; base.node_count()];
    for path in decompose_flows(base, warm, 1e-12) {
        if path.links.iter().any(|&l| net.is_closed(l)) {
            stranded[path.origin] += path.amount;
        } else {
            for &l in &path.links {
                kept[l] += path.amount;
            }
        }
    }
    let costs = current_costs(Mode::UserEquilibrium, net, &kept);
    let (dist, next) = distances_to_exits(base, |l| (!net.is_closed(l)).then(|| costs[l]));
    for (origin, &amount) in stranded.iter().enumerate() {
        if amount == 0.0 {
            continue;
        }
        if !dist[origin].is_finite() {
            return Err(Error::DisconnectedSource { node: origin });
        }
        let mut u = origin;
        while let Some(l) = next[u] {
            kept[l] += amount;
            u = base.link(l).to;
        }
    }
    Ok(kept)
}

fn frank_wolfe(
    net: &EffectiveNetwork<'_>,
    mode: Mode,
    rel_tol: f64,
    warm_start: Option<&FlowAssignment>,
    max_iter: usize,
) -> Result<UeResult> {
    let m = net.base().link_count();
    let mut flows = match warm_start {
        Some(w) => project_warm_start(net, w)?,
        None => all_or_nothing(net, &current_costs(mode, net, &vec![0.0; m]))?,
    };
    let mut objective = mode.objective(&flows, net);
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;
    let mut trial = vec![0.0; m];

    while iterations < max_iter {
        let costs = current_costs(mode, net, &flows);
        let target = all_or_nothing(net, &costs)?;
        let direction: Vec<f64> = (0..m).map(|l| target[l] - flows[l]).collect();
        if direction.iter().all(|&d| d == 0.0) {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let value = loop {
            for l in 0..m {
                trial[l] = (flows[l] + step * direction[l]).max(0.0);
            }
            let value = mode.objective(&trial, net);
            if value < objective || step < MIN_STEP {
                break value;
            }
            step *= 0.5;
        };
        if value >= objective {
            // no halving step improves: stalled at the current flows
            converged = relative_gap(mode, net, &flows)? <= rel_tol;
            break;
        }
        flows.copy_from_slice(&trial);
        let improvement = (objective - value) / objective.max(1e-12);
        objective = value;
        trace.push(objective);
        iterations += 1;
        if improvement < rel_tol {
            converged = true;
            break;
        }
    }

    Ok(UeResult {
        total_time: total_evac_time(&flows, net),
        beckmann_value: beckmann_objective(&flows, net),
        relative_gap: relative_gap(mode, net, &flows)?,
        flows,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// `sum c (x - y) / sum c x` with `y` the all-or-nothing response to the
/// costs `c` at `x`.
fn relative_gap(mode: Mode, net: &EffectiveNetwork<'_>, flows: &FlowAssignment) -> Result<f64> {
    let costs = current_costs(mode, net, flows);
    let target = all_or_nothing(net, &costs)?;
    let (mut gap, mut scale) = (0.0, 0.0);
    for l in (0..flows.len()).filter(|&l| !net.is_closed(l)) {
        gap += costs[l] * (flows[l] - target[l]);
        scale += costs[l] * flows[l];
    }
    Ok(if scale > 0.0 { (gap / scale).max(0.0) } else { 0.0 })
}

/// Per-source spread between the shortest route time and the slowest
/// flow-carrying route, at the given flows. Links carrying at most
/// `used_threshold` are treated as unused.
pub fn used_path_spread(
    net: &EffectiveNetwork<'_>,
    flows: &[f64],
    used_threshold: f64,
) -> Vec<(usize, f64, f64)> {
    let base = net.base();
    let costs = current_costs(Mode::UserEquilibrium, net, flows);
    let (dist, _) = distances_to_exits(base, |l| (!net.is_closed(l)).then(|| costs[l]));
    let n = base.node_count();
    // slowest used route time from each node; None = not yet computed
    let mut longest: Vec<Option<f64>> = vec![None; n];
    let mut on_stack = vec![false; n];

    fn visit(
        u: usize,
        net: &EffectiveNetwork<'_>,
        flows: &[f64],
        costs: &[f64],
        threshold: f64,
        longest: &mut [Option<f64>],
        on_stack: &mut [bool],
    ) -> f64 {
        if let Some(v) = longest[u] {
            return v;
        }
        let base = net.base();
        if base.is_exit(u) {
            longest[u] = Some(0.0);
            return 0.0;
        }
        on_stack[u] = true;
        let mut best = f64::NEG_INFINITY;
        for &l in base.out_links(u) {
            if net.is_closed(l) || flows[l] <= threshold {
                continue;
            }
            let v = base.link(l).to;
            if on_stack[v] {
                continue;
            }
            let tail = visit(v, net, flows, costs, threshold, longest, on_stack);
            best = best.max(costs[l] + tail);
        }
        on_stack[u] = false;
        longest[u] = Some(best);
        best
    }

    base.sources()
        .filter(|&s| !base.is_exit(s))
        .map(|s| {
            let slow = visit(s, net, flows, &costs, used_threshold, &mut longest, &mut on_stack);
            (s, dist[s], slow.max(dist[s]))
        })
        .collect()
}

#[cfg(test)]
mod tests;
