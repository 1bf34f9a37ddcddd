//! Road network data model, FR lane-reservation designs and the
//! capacity-reservation transform.

mod generate;
mod instance;

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub use generate::{generate_random_instance, GeneratorParams};
pub use instance::{load_instance, save_instance, InstanceFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Interior,
    Exit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: f64,
    pub role: NodeRole,
}

/// A directed road link. One entry per direction of travel.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub free_flow_time: f64,
    pub lanes: u32,
}

/// Immutable directed road network with node roles and demands.
///
/// Node ids are the contiguous range `0..n` and the link list order is the
/// index space used by every flow and design vector in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    links: Vec<Link>,
    fr_nodes: Vec<usize>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
    reverse: Vec<Option<usize>>,
    index: HashMap<(usize, usize), usize>,
}

impl RoadNetwork {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>, fr_nodes: Vec<usize>) -> Result<Self> {
        let n = nodes.len();
        for (pos, node) in nodes.iter().enumerate() {
            let loc = format!("nodes[{pos}]");
            if node.id != pos {
                return Err(Error::schema(
                    format!("{loc}.id"),
                    format!("expected contiguous id {pos}, found {}", node.id),
                ));
            }
            if !node.demand.is_finite() || node.demand < 0.0 {
                return Err(Error::schema(
                    format!("{loc}.demand"),
                    format!("demand must be finite and non-negative, found {}", node.demand),
                ));
            }
            if node.role == NodeRole::Exit && node.demand != 0.0 {
                return Err(Error::schema(
                    format!("{loc}.demand"),
                    "exit nodes must have zero demand",
                ));
            }
        }

        let mut index = HashMap::with_capacity(links.len());
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (pos, link) in links.iter().enumerate() {
            let loc = format!("arcs[{pos}]");
            if link.from >= n || link.to >= n {
                return Err(Error::schema(
                    loc,
                    format!("endpoint out of range ({} -> {})", link.from, link.to),
                ));
            }
            if link.from == link.to {
                return Err(Error::schema(loc, "self loops are not allowed"));
            }
            if !(link.capacity.is_finite() && link.capacity > 0.0) {
                return Err(Error::schema(
                    format!("{loc}.capacity"),
                    format!("capacity must be positive, found {}", link.capacity),
                ));
            }
            if !(link.free_flow_time.is_finite() && link.free_flow_time > 0.0) {
                return Err(Error::schema(
                    format!("{loc}.free_flow_time"),
                    format!("free-flow time must be positive, found {}", link.free_flow_time),
                ));
            }
            if link.lanes == 0 {
                return Err(Error::schema(format!("{loc}.lanes"), "at least one lane required"));
            }
            if index.insert((link.from, link.to), pos).is_some() {
                return Err(Error::schema(
                    loc,
                    format!("duplicate arc ({}, {})", link.from, link.to),
                ));
            }
            out_links[link.from].push(pos);
            in_links[link.to].push(pos);
        }

        let mut seen = vec![false; n];
        for (pos, &k) in fr_nodes.iter().enumerate() {
            let loc = format!("fr_nodes[{pos}]");
            if k >= n {
                return Err(Error::schema(loc, format!("unknown node {k}")));
            }
            if nodes[k].role == NodeRole::Exit {
                return Err(Error::schema(loc, format!("node {k} is an exit")));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::schema(loc, format!("duplicate FR node {k}")));
            }
        }

        let reverse = links
            .iter()
            .map(|l| index.get(&(l.to, l.from)).copied())
            .collect();

        Ok(Self {
            nodes,
            links,
            fr_nodes,
            out_links,
            in_links,
            reverse,
            index,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, l: usize) -> &Link {
        &self.links[l]
    }

    /// FR demand nodes in instance-file order.
    pub fn fr_nodes(&self) -> &[usize] {
        &self.fr_nodes
    }

    pub fn is_exit(&self, node: usize) -> bool {
        self.nodes[node].role == NodeRole::Exit
    }

    pub fn exits(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.role == NodeRole::Exit)
            .map(|n| n.id)
    }

    /// Nodes with positive demand.
    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.demand > 0.0).map(|n| n.id)
    }

    pub fn demand(&self, node: usize) -> f64 {
        self.nodes[node].demand
    }

    pub fn total_demand(&self) -> f64 {
        self.nodes.iter().map(|n| n.demand).sum()
    }

    pub fn max_demand(&self) -> f64 {
        self.nodes.iter().map(|n| n.demand).fold(0.0, f64::max)
    }

    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: usize) -> &[usize] {
        &self.in_links[node]
    }

    pub fn link_index(&self, from: usize, to: usize) -> Option<usize> {
        self.index.get(&(from, to)).copied()
    }

    /// The opposite-direction link, if the network has one.
    pub fn reverse_link(&self, l: usize) -> Option<usize> {
        self.reverse[l]
    }

    /// Integer node-arc incidence row for a non-exit node: +1 on outgoing
    /// arcs, -1 on incoming arcs.
    pub fn balance(&self, node: usize, values: impl Fn(usize) -> i64) -> i64 {
        let out: i64 = self.out_links[node].iter().map(|&l| values(l)).sum();
        let inc: i64 = self.in_links[node].iter().map(|&l| values(l)).sum();
        out - inc
    }

    /// Returns a copy with demands and capacities replaced.
    pub(crate) fn with_demands_and_capacities(&self, demands: &[f64], capacities: &[f64]) -> Self {
        let mut scaled = self.clone();
        for (node, &d) in scaled.nodes.iter_mut().zip(demands) {
            node.demand = d;
        }
        for (link, &c) in scaled.links.iter_mut().zip(capacities) {
            link.capacity = c;
        }
        scaled
    }
}

/// Link indices along a node sequence, if every hop is a link.
pub fn path_links(net: &RoadNetwork, nodes: &[usize]) -> Option<Vec<usize>> {
    nodes.windows(2).map(|w| net.link_index(w[0], w[1])).collect()
}

/// Design for a single FR target given its route written from the exit
/// end, e.g. `[3, 1, 0]`. Lanes are reserved on the links of the reversed
/// route.
pub fn design_from_fr_route(net: &RoadNetwork, target: usize, route_from_exit: &[usize]) -> Option<FrDesign> {
    let mut nodes = route_from_exit.to_vec();
    nodes.reverse();
    let links = path_links(net, &nodes)?;
    Some(FrDesign::from_paths(net, &[target], &[&links]))
}

/// Whether `arcs` (a 0/1 selection over links) satisfies the per-target
/// flow balance: one unit leaves `target` and every other non-exit node is
/// balanced.
pub fn satisfies_balance(net: &RoadNetwork, target: usize, arcs: &[bool]) -> bool {
    (0..net.node_count())
        .filter(|&i| !net.is_exit(i))
        .all(|i| net.balance(i, |l| arcs[l] as i64) == (i == target) as i64)
}

/// Binary lane-reservation decision.
///
/// `target_arcs[t]` holds `y_ijk` for the `t`-th FR target; `reserved`
/// holds `y_ij`. Designs built from paths or Graver steps keep
/// `reserved` equal to the OR over targets. Branch-and-bound designs may
/// carry additional forced reservations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrDesign {
    targets: Vec<usize>,
    target_arcs: Vec<Vec<bool>>,
    reserved: Vec<bool>,
}

impl FrDesign {
    pub fn from_target_arcs(targets: Vec<usize>, target_arcs: Vec<Vec<bool>>) -> Self {
        let m = target_arcs.first().map_or(0, Vec::len);
        let mut reserved = vec![false; m];
        for arcs in &target_arcs {
            for (r, &a) in reserved.iter_mut().zip(arcs) {
                *r |= a;
            }
        }
        Self {
            targets,
            target_arcs,
            reserved,
        }
    }

    /// One path (as link indices) per FR target, in target order.
    pub fn from_paths(net: &RoadNetwork, targets: &[usize], paths: &[&[usize]]) -> Self {
        let m = net.link_count();
        let target_arcs = paths
            .iter()
            .map(|p| {
                let mut v = vec![false; m];
                for &l in p.iter() {
                    v[l] = true;
                }
                v
            })
            .collect();
        Self::from_target_arcs(targets.to_vec(), target_arcs)
    }

    /// An empty design over `m` links (no FR targets, nothing reserved).
    pub fn empty(m: usize) -> Self {
        Self {
            targets: Vec::new(),
            target_arcs: Vec::new(),
            reserved: vec![false; m],
        }
    }

    /// Adds reservations that no target path uses.
    pub fn with_extra_reservations(mut self, extra: impl IntoIterator<Item = usize>) -> Self {
        for l in extra {
            self.reserved[l] = true;
        }
        self
    }

    /// Rebuilds a design from the flattened `y_ijk` vector (target-major).
    pub fn from_flat(targets: Vec<usize>, m: usize, flat: &[i64]) -> Self {
        if m == 0 {
            return Self::empty(0);
        }
        let target_arcs = flat.chunks(m).map(|c| c.iter().map(|&v| v == 1).collect()).collect();
        Self::from_target_arcs(targets, target_arcs)
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn target_arcs(&self, t: usize) -> &[bool] {
        &self.target_arcs[t]
    }

    pub fn reserved(&self) -> &[bool] {
        &self.reserved
    }

    pub fn is_reserved(&self, l: usize) -> bool {
        self.reserved[l]
    }

    pub fn reserved_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.reserved.iter().enumerate().filter(|(_, &r)| r).map(|(l, _)| l)
    }

    /// `y_ijk` flattened target-major, as integers.
    pub fn flat(&self) -> Vec<i64> {
        self.target_arcs
            .iter()
            .flat_map(|arcs| arcs.iter().map(|&a| a as i64))
            .collect()
    }

    /// Checks the flow balance for every target and, when `tight` is set,
    /// that `y_ij` is exactly the OR over targets.
    pub fn is_valid(&self, net: &RoadNetwork, tight: bool) -> bool {
        if self.reserved.len() != net.link_count() || self.targets.len() != self.target_arcs.len() {
            return false;
        }
        let balanced = self
            .targets
            .iter()
            .zip(&self.target_arcs)
            .all(|(&k, arcs)| arcs.len() == net.link_count() && satisfies_balance(net, k, arcs));
        if !balanced {
            return false;
        }
        (0..net.link_count()).all(|l| {
            let used = self.target_arcs.iter().any(|a| a[l]);
            if tight {
                used == self.reserved[l]
            } else {
                !used || self.reserved[l]
            }
        })
    }

    /// Reserved-link bitmask, used as an evaluation cache key.
    pub fn key(&self) -> Vec<bool> {
        self.reserved.clone()
    }
}

impl fmt::Display for FrDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = self.reserved.iter().map(|&r| if r { '1' } else { '0' }).collect();
        f.write_str(&bits)
    }
}

/// Network as seen by evacuees after a reservation is applied.
#[derive(Debug, Clone)]
pub struct EffectiveNetwork<'a> {
    base: &'a RoadNetwork,
    capacity: Vec<f64>,
    closed: Vec<bool>,
}

impl<'a> EffectiveNetwork<'a> {
    /// No reservations: capacities unchanged.
    pub fn unreserved(base: &'a RoadNetwork) -> Self {
        Self {
            base,
            capacity: base.links.iter().map(|l| l.capacity).collect(),
            closed: vec![false; base.link_count()],
        }
    }

    /// Applies `c <- c (l-1)/l` to every link that is reserved in either
    /// direction.
    pub fn from_reserved(base: &'a RoadNetwork, reserved: &[bool]) -> Self {
        let capacity: Vec<f64> = base
            .links
            .iter()
            .enumerate()
            .map(|(l, link)| {
                let hit = reserved[l] || base.reverse[l].is_some_and(|r| reserved[r]);
                if hit {
                    link.capacity * f64::from(link.lanes - 1) / f64::from(link.lanes)
                } else {
                    link.capacity
                }
            })
            .collect();
        let closed = capacity.iter().map(|&c| c <= 0.0).collect();
        Self {
            base,
            capacity,
            closed,
        }
    }

    pub fn base(&self) -> &'a RoadNetwork {
        self.base
    }

    pub fn capacity(&self, l: usize) -> f64 {
        self.capacity[l]
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacity
    }

    pub fn is_closed(&self, l: usize) -> bool {
        self.closed[l]
    }

    pub fn closed(&self) -> &[bool] {
        &self.closed
    }

    pub fn free_flow_time(&self, l: usize) -> f64 {
        self.base.links[l].free_flow_time
    }
}

pub fn apply_reservation<'a>(net: &'a RoadNetwork, design: &FrDesign) -> EffectiveNetwork<'a> {
    EffectiveNetwork::from_reserved(net, design.reserved())
}

/// The four-node worked example network.
pub fn n4_fixture() -> RoadNetwork {
    let coords = [(0.0, 0.5), (0.5, 1.0), (0.5, 0.0), (1.0, 0.5)];
    let nodes = coords
        .iter()
        .enumerate()
        .map(|(id, &(x, y))| Node {
            id,
            x,
            y,
            demand: if id == 0 { 100.0 } else { 0.0 },
            role: if id == 3 { NodeRole::Exit } else { NodeRole::Interior },
        })
        .collect();
    let arcs = [(0, 1, 25.0), (0, 2, 30.0), (0, 3, 35.0), (1, 2, 35.0), (1, 3, 15.0), (2, 3, 45.0)];
    let links = arcs
        .iter()
        .map(|&(from, to, capacity)| Link {
            from,
            to,
            capacity,
            free_flow_time: 1.0,
            lanes: 1,
        })
        .collect();
    RoadNetwork::new(nodes, links, vec![0]).expect("fixture is valid")
}
