//! Samples of simple source-to-exit routes: QUBO + simulated annealing,
//! Yen's k shortest paths, and exhaustive enumeration for small graphs.
//!
//! Routes are stored in evacuee orientation (from the node towards an
//! exit). An FR route is the same link set travelled the other way; lane
//! reservation is symmetric so the orientation does not change a design.

mod anneal;
mod qubo;
mod yen;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::netmodel::RoadNetwork;
use crate::shortest::shortest_to_exit;

pub use anneal::{anneal_samples, AnnealSchedule};
pub use qubo::{build_path_qubo, QuboProblem, QuboVar};
pub use yen::yen_k_shortest;

/// A simple route as a link sequence, with its free-flow length.
#[derive(Debug, Clone)]
pub struct Path {
    pub links: Vec<usize>,
    pub length: f64,
}

impl PartialEq for Path {
    fn eq(&self, other: &Self) -> bool {
        self.links == other.links
    }
}

impl Eq for Path {}

impl Path {
    pub fn new(net: &RoadNetwork, links: Vec<usize>) -> Self {
        let length = links.iter().map(|&l| net.link(l).free_flow_time).sum();
        Self { links, length }
    }

    /// Visited nodes, starting at the origin.
    pub fn nodes(&self, net: &RoadNetwork) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(self.links.len() + 1);
        if let Some(&first) = self.links.first() {
            nodes.push(net.link(first).from);
        }
        nodes.extend(self.links.iter().map(|&l| net.link(l).to));
        nodes
    }

    pub fn is_simple(&self, net: &RoadNetwork) -> bool {
        let nodes = self.nodes(net);
        let distinct: BTreeSet<_> = nodes.iter().collect();
        distinct.len() == nodes.len()
    }

    pub fn selection(&self, link_count: usize) -> Vec<bool> {
        let mut s = vec![false; link_count];
        for &l in &self.links {
            s[l] = true;
        }
        s
    }
}

/// Distinct simple routes from one node.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub source: usize,
    pub paths: Vec<Path>,
}

/// How route samples are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum PathBackend {
    SimulatedAnnealing {
        n_samples: usize,
        schedule: AnnealSchedule,
        forbid_cycles: bool,
    },
    Yens,
}

impl PathBackend {
    pub fn annealing(n_samples: usize) -> Self {
        PathBackend::SimulatedAnnealing {
            n_samples,
            schedule: AnnealSchedule::default(),
            forbid_cycles: true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PathBackend::SimulatedAnnealing { .. } => "sa",
            PathBackend::Yens => "yens",
        }
    }
}

/// Shortest route from `source` to an exit using only `selected` links,
/// by free-flow time. Cycles in the selection are ignored.
pub fn extract_simple_path(net: &RoadNetwork, source: usize, selected: &[bool]) -> Result<Path> {
    let cost = |l: usize| selected[l].then(|| net.link(l).free_flow_time);
    let (links, _) =
        shortest_to_exit(net, source, cost, None).ok_or(Error::NoPathInSelection { node: source })?;
    Ok(Path::new(net, links))
}

/// Keeps the `n_paths` shortest distinct routes (ties by node sequence).
fn truncate_shortest(net: &RoadNetwork, mut paths: Vec<Path>, n_paths: usize) -> Vec<Path> {
    paths.sort_by(|a, b| {
        a.length
            .total_cmp(&b.length)
            .then_with(|| a.nodes(net).cmp(&b.nodes(net)))
    });
    paths.dedup();
    paths.truncate(n_paths);
    paths
}

/// Anneals `qubo`, keeps zero-energy samples, reduces each to its simple
/// route and returns up to `n_paths` distinct routes.
pub fn sample_feasible(
    net: &RoadNetwork,
    qubo: &QuboProblem,
    n_samples: usize,
    n_paths: usize,
    seed: u64,
    schedule: &AnnealSchedule,
) -> Result<PathSample> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let source = qubo.target();
    let feasible: BTreeSet<Vec<u8>> = anneal_samples(qubo, n_samples, seed, schedule)
        .into_iter()
        .filter(|x| qubo.residual(x) == 0)
        .collect();
    if feasible.is_empty() {
        return Err(Error::NoFeasibleSample { node: source });
    }
    let paths = feasible
        .iter()
        .map(|x| extract_simple_path(net, source, &qubo.decode(x, net.link_count())))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathSample {
        source,
        paths: truncate_shortest(net, paths, n_paths),
    })
}

/// Route sample for one node with the configured backend.
pub fn generate_paths(
    net: &RoadNetwork,
    source: usize,
    n_paths: usize,
    backend: &PathBackend,
    seed: u64,
) -> Result<PathSample> {
    match backend {
        PathBackend::SimulatedAnnealing {
            n_samples,
            schedule,
            forbid_cycles,
        } => {
            let qubo = build_path_qubo(net, source, *forbid_cycles);
            sample_feasible(net, &qubo, *n_samples, n_paths, seed, schedule)
        }
        PathBackend::Yens => yen_k_shortest(net, source, n_paths),
    }
}

/// Every simple route from `source` to an exit (exits end a route).
/// Fails with [`Error::CapExceeded`] once more than `cap` exist.
pub fn all_simple_paths(net: &RoadNetwork, source: usize, cap: usize) -> Result<Vec<Path>> {
    fn dfs(
        net: &RoadNetwork,
        u: usize,
        visited: &mut [bool],
        stack: &mut Vec<usize>,
        out: &mut Vec<Path>,
        cap: usize,
    ) -> Result<()> {
        if net.is_exit(u) {
            if out.len() == cap {
                return Err(Error::CapExceeded { cap });
            }
            out.push(Path::new(net, stack.clone()));
            return Ok(());
        }
        for &l in net.out_links(u) {
            let v = net.link(l).to;
            if visited[v] {
                continue;
            }
            visited[v] = true;
            stack.push(l);
            dfs(net, v, visited, stack, out, cap)?;
            stack.pop();
            visited[v] = false;
        }
        Ok(())
    }
    let mut visited = vec![false; net.node_count()];
    visited[source] = true;
    let mut out = Vec::new();
    dfs(net, source, &mut visited, &mut Vec::new(), &mut out, cap)?;
    Ok(truncate_shortest(net, out, usize::MAX))
}
