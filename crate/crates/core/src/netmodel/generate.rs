use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Link, Node, NodeRole, RoadNetwork};
use crate::error::{Error, Result};

/// Parameters of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Interior node count.
    pub n: usize,
    /// Base edge probability, scaled by `exp(-dist / decay_length)`.
    pub p: f64,
    pub seed: u64,
    /// Number of FR demand nodes drawn from the interior nodes;
    /// `None` uses `ceil(n / 5)`.
    pub fr_count: Option<usize>,
    pub decay_length: f64,
    pub capacity_mean: f64,
    pub capacity_sd: f64,
    pub demand_mean: f64,
    pub demand_sd: f64,
    /// Normal draws below this value are clamped to it.
    pub floor: f64,
    pub lanes: u32,
    pub max_attempts: usize,
}

impl GeneratorParams {
    pub fn new(n: usize, p: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            seed,
            fr_count: None,
            decay_length: 0.5,
            capacity_mean: 50.0,
            capacity_sd: 20.0,
            demand_mean: 100.0,
            demand_sd: 10.0,
            floor: 1.0,
            lanes: 2,
            max_attempts: 1000,
        }
    }

    pub fn with_fr_count(mut self, fr_count: usize) -> Self {
        self.fr_count = Some(fr_count);
        self
    }

    pub fn exit_count(&self) -> usize {
        self.n.div_ceil(10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if self.decay_length <= 0.0 {
            return Err(Error::InvalidParameter("decay_length must be positive".into()));
        }
        if self.lanes == 0 {
            return Err(Error::InvalidParameter("lanes must be >= 1".into()));
        }
        let fr = self.fr_count.unwrap_or_else(|| self.n.div_ceil(5));
        if fr == 0 || fr > self.n {
            return Err(Error::InvalidParameter(format!("fr_count must lie in 1..={}", self.n)));
        }
        Ok(())
    }
}

/// Draws a random FR-feasible instance: interior nodes uniform in the unit
/// square, `ceil(n/10)` exits on its boundary, bidirectional multi-lane
/// edges with distance-decayed probability.
pub fn generate_random_instance(params: &GeneratorParams) -> Result<RoadNetwork> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..params.max_attempts {
        let net = draw(params, &mut rng);
        if all_reach_exit(&net) {
            return Ok(net);
        }
    }
    Err(Error::InfeasibleRegime {
        attempts: params.max_attempts,
    })
}

fn truncated(dist: &Normal<f64>, floor: f64, rng: &mut ChaCha8Rng) -> f64 {
    dist.sample(rng).max(floor)
}

fn draw(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> RoadNetwork {
    let capacity = Normal::new(params.capacity_mean, params.capacity_sd).expect("finite sd");
    let demand = Normal::new(params.demand_mean, params.demand_sd).expect("finite sd");
    let n = params.n;
    let exits = params.exit_count();

    let mut nodes = Vec::with_capacity(n + exits);
    for id in 0..n {
        let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
        let d = truncated(&demand, params.floor, rng).round().max(params.floor.ceil());
        nodes.push(Node { id, x, y, demand: d, role: NodeRole::Interior });
    }
    for id in n..n + exits {
        let t: f64 = rng.random();
        let (x, y) = match rng.random_range(0..4) {
            0 => (t, 0.0),
            1 => (1.0, t),
            2 => (t, 1.0),
            _ => (0.0, t),
        };
        nodes.push(Node { id, x, y, demand: 0.0, role: NodeRole::Exit });
    }

    let mut links = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let dist = ((nodes[i].x - nodes[j].x).powi(2) + (nodes[i].y - nodes[j].y).powi(2)).sqrt();
            let prob = params.p * (-dist / params.decay_length).exp();
            if rng.random::<f64>() >= prob {
                continue;
            }
            let c = truncated(&capacity, params.floor, rng);
            let t = dist.max(1e-3);
            for (from, to) in [(i, j), (j, i)] {
                links.push(Link { from, to, capacity: c, free_flow_time: t, lanes: params.lanes });
            }
        }
    }

    let fr_count = params.fr_count.unwrap_or_else(|| n.div_ceil(5));
    let mut fr: Vec<usize> = sample(rng, n, fr_count).into_vec();
    fr.sort_unstable();
    RoadNetwork::new(nodes, links, fr).expect("generator output satisfies the network invariants")
}

/// True when every interior node has a directed route to some exit.
pub(crate) fn all_reach_exit(net: &RoadNetwork) -> bool {
    let mut seen = vec![false; net.node_count()];
    let mut queue: VecDeque<usize> = net.exits().collect();
    for &e in &queue {
        seen[e] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &l in net.in_links(v) {
            let u = net.link(l).from;
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_counts_follow_n_over_ten() {
        for (n, exits) in [(10, 1), (20, 2), (30, 3)] {
            let net = generate_random_instance(&GeneratorParams::new(n, 0.75, 3)).unwrap();
            assert_eq!(net.exits().count(), exits);
            assert_eq!(net.node_count(), n + exits);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_random_instance(&GeneratorParams::new(10, 0.5, 7)).unwrap();
        let b = generate_random_instance(&GeneratorParams::new(10, 0.5, 7)).unwrap();
        assert_eq!(a, b);
        let c = generate_random_instance(&GeneratorParams::new(10, 0.5, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn positive_data_and_zero_exit_demand() {
        for seed in 0..10 {
            let net = generate_random_instance(&GeneratorParams::new(10, 0.5, seed)).unwrap();
            assert!(all_reach_exit(&net));
            for node in net.nodes() {
                match node.role {
                    NodeRole::Exit => assert_eq!(node.demand, 0.0),
                    NodeRole::Interior => {
                        assert!(node.demand > 0.0);
                        assert_eq!(node.demand.fract(), 0.0);
                    }
                }
            }
            for link in net.links() {
                assert!(link.capacity > 0.0);
                assert_eq!(link.lanes, 2);
                assert!(net.link_index(link.to, link.from).is_some());
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            generate_random_instance(&GeneratorParams::new(1, 0.5, 0)),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            generate_random_instance(&GeneratorParams::new(10, 0.0, 0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn sparse_regime_gives_up() {
        let mut params = GeneratorParams::new(40, 1e-6, 0);
        params.max_attempts = 5;
        assert!(matches!(
            generate_random_instance(&params),
            Err(Error::InfeasibleRegime { attempts: 5 })
        ));
    }
}
