//! Exhaustive FR design enumeration for small instances.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::netmodel::{apply_reservation, FrDesign, RoadNetwork};
use crate::pathgen::{all_simple_paths, Path};
use crate::ue::solve_ue;

pub const ENUMERATION_UE_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct DesignEvaluation {
    pub design: FrDesign,
    /// Route per FR target, as node sequences.
    pub routes: Vec<Vec<usize>>,
    /// Equilibrium total time; `None` when some evacuee source is cut off.
    pub objective: Option<f64>,
}

/// Every combination of one simple route per FR target, deduplicated by
/// reserved links and ordered by total free-flow length, then routes.
/// Fails when more than `cap` distinct designs exist.
pub fn feasible_designs(net: &RoadNetwork, cap: usize) -> Result<Vec<(FrDesign, Vec<Vec<usize>>)>> {
    let per_target: Vec<Vec<Path>> = net
        .fr_nodes()
        .iter()
        .map(|&k| all_simple_paths(net, k, cap))
        .collect::<Result<_>>()?;
    let raw: usize = per_target.iter().map(Vec::len).try_fold(1usize, |acc, n| acc.checked_mul(n)).unwrap_or(usize::MAX);
    if raw > cap.saturating_mul(64) {
        return Err(Error::CapExceeded { cap });
    }
    let mut combos: Vec<(f64, Vec<Vec<usize>>, FrDesign)> = Vec::new();
    let mut seen = HashSet::new();
    for code in 0..raw {
        let mut rest = code;
        let mut chosen: Vec<&Path> = Vec::with_capacity(per_target.len());
        for paths in per_target.iter().rev() {
            chosen.push(&paths[rest % paths.len()]);
            rest /= paths.len();
        }
        chosen.reverse();
        let links: Vec<&[usize]> = chosen.iter().map(|p| p.links.as_slice()).collect();
        let design = FrDesign::from_paths(net, net.fr_nodes(), &links);
        if seen.insert(design.key()) {
            if seen.len() > cap {
                return Err(Error::CapExceeded { cap });
            }
            let length = chosen.iter().map(|p| p.length).sum();
            combos.push((length, chosen.iter().map(|p| p.nodes(net)).collect(), design));
        }
    }
    combos.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(combos.into_iter().map(|(_, routes, design)| (design, routes)).collect())
}

/// [`feasible_designs`] with every design solved to equilibrium.
pub fn enumerate_designs(net: &RoadNetwork, cap: usize) -> Result<Vec<DesignEvaluation>> {
    Ok(feasible_designs(net, cap)?
        .into_par_iter()
        .map(|(design, routes)| {
            let objective = solve_ue(&apply_reservation(net, &design), ENUMERATION_UE_TOL, None)
                .ok()
                .map(|r| r.total_time);
            DesignEvaluation {
                design,
                routes,
                objective,
            }
        })
        .collect())
}

/// Lowest objective among `table`, first on ties.
pub fn optimum(table: &[DesignEvaluation]) -> Option<&DesignEvaluation> {
    table
        .iter()
        .filter(|e| e.objective.is_some())
        .min_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{n4_fixture, Link, Node, NodeRole};

    #[test]
    fn n4_table() {
        let net = n4_fixture();
        let table = enumerate_designs(&net, 100).unwrap();
        let routes: Vec<Vec<usize>> = table.iter().map(|e| e.routes[0].clone()).collect();
        assert_eq!(routes, vec![vec![0, 3], vec![0, 1, 3], vec![0, 2, 3], vec![0, 1, 2, 3]]);
        for (e, want) in table.iter().zip([507.56, 243.43, 379.01, 1099.58]) {
            let got = e.objective.unwrap();
            assert!((got - want).abs() / want < 0.01, "{got} vs {want}");
        }
        assert_eq!(optimum(&table).unwrap().routes[0], vec![0, 1, 3]);
    }

    #[test]
    fn cap_is_enforced() {
        let net = n4_fixture();
        assert!(matches!(feasible_designs(&net, 3), Err(Error::CapExceeded { cap: 3 })));
        assert_eq!(feasible_designs(&net, 4).unwrap().len(), 4);
    }

    #[test]
    fn single_route_instance_has_one_design() {
        let nodes = (0..2)
            .map(|id| Node {
                id,
                x: id as f64,
                y: 0.0,
                demand: if id == 0 { 5.0 } else { 0.0 },
                role: if id == 1 { NodeRole::Exit } else { NodeRole::Interior },
            })
            .collect();
        let links = vec![Link { from: 0, to: 1, capacity: 10.0, free_flow_time: 1.0, lanes: 2 }];
        let net = RoadNetwork::new(nodes, links, vec![0]).unwrap();
        let table = enumerate_designs(&net, 10).unwrap();
        assert_eq!(table.len(), 1);
        assert!(table[0].objective.is_some());
    }
}
