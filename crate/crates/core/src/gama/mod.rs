//! Multi-seed Graver augmentation over FR designs.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graver::{conformal_filter, lattice_from_differences, GraverSet, IntMatrix, IntVector};
use crate::netmodel::{satisfies_balance, FrDesign, RoadNetwork};
use crate::pathgen::{Path, PathSample};

/// Scores candidate designs for an outer walk.
///
/// `evaluate` returns `None` when the design cannot be scored (for example
/// an evacuee source loses every route); the walk treats that as a
/// rejection. `accept` is called whenever the walk moves to a design.
pub trait DesignEvaluator {
    fn evaluate(&mut self, design: &FrDesign) -> Option<f64>;

    fn accept(&mut self, _design: &FrDesign) {}

    /// Any second figure of merit for the last accepted design.
    fn secondary(&self) -> Option<f64> {
        None
    }
}

impl<F: FnMut(&FrDesign) -> Option<f64>> DesignEvaluator for F {
    fn evaluate(&mut self, design: &FrDesign) -> Option<f64> {
        self(design)
    }
}

/// `M` starting designs, one sampled path per FR target each.
pub fn build_seeds(net: &RoadNetwork, paths: &[PathSample], m: usize, rng_seed: u64) -> Result<Vec<FrDesign>> {
    if m == 0 {
        return Err(Error::InvalidParameter("seed count M must be at least 1".into()));
    }
    for sample in paths {
        if sample.paths.is_empty() {
            return Err(Error::NoPaths { node: sample.source });
        }
    }
    let targets: Vec<usize> = paths.iter().map(|s| s.source).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok((0..m)
        .map(|_| {
            let chosen: Vec<&[usize]> = paths
                .iter()
                .map(|s| s.paths[rng.random_range(0..s.paths.len())].links.as_slice())
                .collect();
            FrDesign::from_paths(net, &targets, &chosen)
        })
        .collect())
}

/// Block-diagonal balance matrix over the `y_ijk` index space: one
/// incidence block (rows at non-exit nodes) per FR target.
pub fn outer_matrix(net: &RoadNetwork, target_count: usize) -> IntMatrix {
    let m = net.link_count();
    let block = incidence_rows(net);
    let rows = (0..target_count)
        .flat_map(|t| {
            block
                .iter()
                .map(move |r| r.iter().map(|&(l, v)| (t * m + l, v)).collect::<Vec<_>>())
        })
        .collect();
    IntMatrix::new(m * target_count, rows)
}

/// Node-link incidence rows (outflow positive) for every non-exit node.
pub fn incidence_rows(net: &RoadNetwork) -> Vec<Vec<(usize, i64)>> {
    (0..net.node_count())
        .filter(|&i| !net.is_exit(i))
        .map(|i| {
            let mut row: Vec<(usize, i64)> = net
                .out_links(i)
                .iter()
                .map(|&l| (l, 1))
                .chain(net.in_links(i).iter().map(|&l| (l, -1)))
                .collect();
            row.sort_unstable();
            row
        })
        .collect()
}

pub(crate) fn path_vector(path: &Path, offset: usize, dim: usize) -> IntVector {
    let mut v = vec![0; dim];
    for &l in &path.links {
        v[offset + l] += 1;
    }
    IntVector::new(v)
}

/// Partial basis over `y_ijk`: differences of same-target paths, embedded
/// in that target's block, pooled and filtered once.
pub fn outer_basis(net: &RoadNetwork, paths: &[PathSample]) -> Result<GraverSet> {
    let m = net.link_count();
    let dim = m * paths.len();
    let mut pool = Vec::new();
    for (t, sample) in paths.iter().enumerate() {
        let points: Vec<IntVector> = sample.paths.iter().map(|p| path_vector(p, t * m, dim)).collect();
        pool.extend(lattice_from_differences(&points));
    }
    conformal_filter(outer_matrix(net, paths.len()), &pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Leaves the binary box or breaks a target's flow balance.
    Infeasible,
    /// Same reserved links as the current design.
    Unchanged,
    /// The evaluator could not score the design.
    Rejected,
    NotImproving,
    Accepted,
}

/// One candidate step tried by a walk.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub direction: usize,
    pub sign: i64,
    pub objective: Option<f64>,
    pub outcome: StepOutcome,
}

/// Objective after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressPoint {
    pub step: usize,
    pub objective: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub step: i64,
    pub time_budget: Option<Duration>,
    /// Keep every tried candidate in [`WalkResult::candidates`].
    pub log_candidates: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            step: 1,
            time_budget: None,
            log_candidates: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkResult {
    pub design: FrDesign,
    pub objective: f64,
    pub accepted_steps: usize,
    pub evaluations: usize,
    pub wall_time: f64,
    pub timed_out: bool,
    pub secondary_objective: Option<f64>,
    pub progress: Vec<ProgressPoint>,
    pub candidates: Vec<StepRecord>,
}

fn flat_feasible(net: &RoadNetwork, targets: &[usize], flat: &[i64]) -> bool {
    if flat.iter().any(|&v| v != 0 && v != 1) {
        return false;
    }
    let m = net.link_count();
    targets.iter().enumerate().all(|(t, &k)| {
        let arcs: Vec<bool> = flat[t * m..(t + 1) * m].iter().map(|&v| v == 1).collect();
        satisfies_balance(net, k, &arcs)
    })
}

/// First-improvement augmentation from `seed`: scan the basis in order,
/// try `+g` then `-g`, move on the first strict improvement and rescan
/// from the start. Stops when a full scan finds nothing.
pub fn outer_walk(
    net: &RoadNetwork,
    seed: &FrDesign,
    basis: &GraverSet,
    evaluator: &mut impl DesignEvaluator,
    config: &WalkConfig,
) -> Result<WalkResult> {
    let started = Instant::now();
    let deadline = config.time_budget.map(|b| started + b);
    let targets = seed.targets().to_vec();
    let m = net.link_count();
    let mut cache: HashMap<Vec<bool>, Option<f64>> = HashMap::new();

    let objective = evaluator.evaluate(seed).ok_or(Error::InfeasibleSeed { seed: 0 })?;
    let mut evaluations = 1;
    cache.insert(seed.key(), Some(objective));
    evaluator.accept(seed);

    let mut current = seed.flat();
    let mut current_design = seed.clone();
    let mut current_value = objective;
    let mut progress = vec![ProgressPoint {
        step: 0,
        objective,
        wall_time: started.elapsed().as_secs_f64(),
    }];
    let mut candidates = Vec::new();
    let mut accepted_steps = 0;
    let mut timed_out = false;

    'scan: loop {
        for (idx, g) in basis.vectors().iter().enumerate() {
            for sign in [1, -1] {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    timed_out = true;
                    break 'scan;
                }
                let step = sign * config.step;
                let next: Vec<i64> = current.iter().zip(g.iter()).map(|(&x, &d)| x + step * d).collect();
                let mut record = |objective, outcome| {
                    if config.log_candidates {
                        candidates.push(StepRecord {
                            direction: idx,
                            sign,
                            objective,
                            outcome,
                        });
                    }
                };
                if !flat_feasible(net, &targets, &next) {
                    record(None, StepOutcome::Infeasible);
                    continue;
                }
                let design = FrDesign::from_flat(targets.clone(), m, &next);
                if design.key() == current_design.key() {
                    record(Some(current_value), StepOutcome::Unchanged);
                    continue;
                }
                let value = *cache.entry(design.key()).or_insert_with(|| {
                    evaluations += 1;
                    evaluator.evaluate(&design)
                });
                match value {
                    None => record(None, StepOutcome::Rejected),
                    Some(v) if v < current_value => {
                        record(Some(v), StepOutcome::Accepted);
                        evaluator.accept(&design);
                        current = next;
                        current_design = design;
                        current_value = v;
                        accepted_steps += 1;
                        progress.push(ProgressPoint {
                            step: accepted_steps,
                            objective: v,
                            wall_time: started.elapsed().as_secs_f64(),
                        });
                        continue 'scan;
                    }
                    Some(v) => record(Some(v), StepOutcome::NotImproving),
                }
            }
        }
        break;
    }

    Ok(WalkResult {
        design: current_design,
        objective: current_value,
        accepted_steps,
        evaluations,
        wall_time: started.elapsed().as_secs_f64(),
        timed_out,
        secondary_objective: evaluator.secondary(),
        progress,
        candidates,
    })
}

/// Per-seed outcomes and the best terminus.
#[derive(Debug, Clone)]
pub struct MultiSeedResult {
    /// One entry per seed, in seed order; `None` when the seed was never
    /// walked (budget exhausted) or could not be evaluated.
    pub per_seed: Vec<Option<WalkResult>>,
    /// Index into `per_seed` of the lowest objective (ties: lowest index).
    pub best: usize,
}

impl MultiSeedResult {
    pub fn best(&self) -> &WalkResult {
        self.per_seed[self.best].as_ref().expect("best seed has a result")
    }

    pub fn completed(&self) -> usize {
        self.per_seed.iter().filter(|r| r.as_ref().is_some_and(|w| !w.timed_out)).count()
    }
}

/// Runs [`outer_walk`] from every seed in parallel. `make_evaluator`
/// builds independent evaluator state for seed `i`. Seeds not started
/// before `overall_budget` runs out are skipped.
pub fn multi_seed_solve<E, F>(
    net: &RoadNetwork,
    seeds: &[FrDesign],
    basis: &GraverSet,
    make_evaluator: F,
    config: &WalkConfig,
    overall_budget: Option<Duration>,
) -> Result<MultiSeedResult>
where
    E: DesignEvaluator,
    F: Fn(usize) -> E + Sync,
{
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let started = Instant::now();
    let per_seed: Vec<Option<WalkResult>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| {
            let mut cfg = config.clone();
            if let Some(budget) = overall_budget {
                let left = budget.checked_sub(started.elapsed())?;
                cfg.time_budget = Some(cfg.time_budget.map_or(left, |b| b.min(left)));
            }
            let mut evaluator = make_evaluator(i);
            outer_walk(net, seed, basis, &mut evaluator, &cfg).ok()
        })
        .collect();
    let best = per_seed
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().map(|w| (i, w.objective)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(Error::NoIncumbent)?;
    Ok(MultiSeedResult { per_seed, best })
}
