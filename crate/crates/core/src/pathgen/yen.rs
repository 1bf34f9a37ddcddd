//! Yen's k loopless shortest paths from a node to the exit set.

use crate::error::{Error, Result};
use crate::netmodel::RoadNetwork;
use crate::shortest::shortest_to_exit;

use super::{Path, PathSample};

/// Up to `k_paths` loopless routes from `source` to any exit, by
/// nondecreasing free-flow length. Ties are ordered by node sequence.
pub fn yen_k_shortest(net: &RoadNetwork, source: usize, k_paths: usize) -> Result<PathSample> {
    let free_flow = |l: usize| Some(net.link(l).free_flow_time);
    let (first, _) =
        shortest_to_exit(net, source, free_flow, None).ok_or(Error::Disconnected { node: source })?;
    let mut accepted = vec![Path::new(net, first)];
    let mut candidates: Vec<Path> = Vec::new();

    while accepted.len() < k_paths.max(1) {
        let last = accepted.last().expect("nonempty");
        let last_nodes = last.nodes(net);
        for i in 0..last.links.len() {
            let spur = last_nodes[i];
            let root_nodes = &last_nodes[..=i];
            let root_links = &last.links[..i];
            let mut banned_links = vec![false; net.link_count()];
            for p in &accepted {
                let nodes = p.nodes(net);
                if nodes.len() > i + 1 && nodes[..=i] == *root_nodes {
                    banned_links[p.links[i]] = true;
                }
            }
            let mut banned_nodes = vec![false; net.node_count()];
            for &v in &root_nodes[..i] {
                banned_nodes[v] = true;
            }
            let spur_cost = |l: usize| (!banned_links[l]).then(|| net.link(l).free_flow_time);
            let Some((spur_links, _)) = shortest_to_exit(net, spur, spur_cost, Some(&banned_nodes))
            else {
                continue;
            };
            let mut links = root_links.to_vec();
            links.extend(spur_links);
            let candidate = Path::new(net, links);
            if !accepted.contains(&candidate) && !candidates.contains(&candidate) {
                candidates.push(candidate);
            }
        }
        let Some(best) = (0..candidates.len()).min_by(|&a, &b| {
            candidates[a]
                .length
                .total_cmp(&candidates[b].length)
                .then_with(|| candidates[a].nodes(net).cmp(&candidates[b].nodes(net)))
        }) else {
            break;
        };
        accepted.push(candidates.swap_remove(best));
    }
    Ok(PathSample {
        source,
        paths: accepted,
    })
}
