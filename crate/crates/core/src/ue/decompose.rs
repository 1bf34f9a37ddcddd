use crate::netmodel::RoadNetwork;

/// Flow carried along one origin-to-exit route.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlow {
    pub origin: usize,
    pub links: Vec<usize>,
    pub amount: f64,
}

/// Splits link flows into origin-to-exit route flows. Circulations are
/// cancelled and dropped; amounts below `eps` are treated as zero.
pub fn decompose_flows(net: &RoadNetwork, flows: &[f64], eps: f64) -> Vec<PathFlow> {
    let mut residual = flows.to_vec();
    let mut supply: Vec<f64> = (0..net.node_count())
        .map(|i| {
            if net.is_exit(i) {
                0.0
            } else {
                let out: f64 = net.out_links(i).iter().map(|&l| flows[l]).sum();
                let inc: f64 = net.in_links(i).iter().map(|&l| flows[l]).sum();
                out - inc
            }
        })
        .collect();
    let mut paths = Vec::new();

    for origin in 0..net.node_count() {
        while supply[origin] > eps {
            let mut links: Vec<usize> = Vec::new();
            let mut position = vec![usize::MAX; net.node_count()];
            let mut u = origin;
            position[u] = 0;
            let mut reached = false;
            while !net.is_exit(u) {
                let Some(&l) = net
                    .out_links(u)
                    .iter()
                    .filter(|&&l| residual[l] > eps)
                    .max_by(|&&a, &&b| residual[a].total_cmp(&residual[b]).then(b.cmp(&a)))
                else {
                    break;
                };
                let v = net.link(l).to;
                if position[v] != usize::MAX {
                    // cancel the circulation v -> ... -> u -> v
                    let start = position[v];
                    let mut cycle: Vec<usize> = links[start..].to_vec();
                    cycle.push(l);
                    let amount = cycle.iter().map(|&c| residual[c]).fold(f64::INFINITY, f64::min);
                    for &c in &cycle {
                        residual[c] -= amount;
                    }
                    for &c in &links[start..] {
                        position[net.link(c).to] = usize::MAX;
                    }
                    links.truncate(start);
                    u = v;
                    position[u] = start;
                    continue;
                }
                links.push(l);
                position[v] = links.len();
                u = v;
                if net.is_exit(u) {
                    reached = true;
                }
            }
            if !reached {
                // numerical dust: nothing left to follow
                supply[origin] = 0.0;
                break;
            }
            let amount = links
                .iter()
                .map(|&l| residual[l])
                .fold(supply[origin], f64::min);
            for &l in &links {
                residual[l] -= amount;
            }
            supply[origin] -= amount;
            paths.push(PathFlow { origin, links, amount });
        }
    }
    paths
}
