//! Nested augmentation: an outer walk over FR designs scored by an inner
//! walk over integral evacuee flows, followed by an exact equilibrium
//! solve at every outer terminus.

mod inner;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graver::GraverSet;
use crate::gama::{build_seeds, multi_seed_solve, outer_basis, WalkConfig, WalkResult};
use crate::netmodel::{apply_reservation, FrDesign, RoadNetwork};
use crate::pathgen::{generate_paths, yen_k_shortest, AnnealSchedule, PathBackend, PathSample};
use crate::ue::solve_ue;

pub use inner::{
    build_inner_seed, inner_basis, inner_gama_ue, warm_start, InnerEvaluator, InnerOutcome, InnerTotals,
};

/// Relative tolerance for the final equilibrium solves.
pub const REFINE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Sa,
    Yens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GagaConfig {
    pub n_paths: usize,
    pub n_samples: usize,
    pub m: usize,
    pub inner_tolerance: Option<f64>,
    pub normalized: bool,
    pub path_backend: BackendKind,
    pub rng_seed: u64,
    pub time_budget: Option<f64>,
    pub forbid_cycles: bool,
    pub anneal_sweeps: usize,
    /// Keep every outer candidate step in the per-seed walk results.
    #[serde(default)]
    pub log_candidates: bool,
}

impl Default for GagaConfig {
    fn default() -> Self {
        Self {
            n_paths: 25,
            n_samples: 10_000,
            m: 10,
            inner_tolerance: None,
            normalized: false,
            path_backend: BackendKind::Sa,
            rng_seed: 0,
            time_budget: None,
            forbid_cycles: true,
            anneal_sweeps: AnnealSchedule::default().sweeps,
            log_candidates: false,
        }
    }
}

impl GagaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        if self.path_backend == BackendKind::Sa && (self.n_samples == 0 || self.anneal_sweeps == 0) {
            return Err(Error::InvalidParameter("n_samples and sweeps must be at least 1".into()));
        }
        if let Some(tol) = self.inner_tolerance {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::InvalidParameter(format!("inner tolerance {tol} outside (0, 1)")));
            }
        }
        if self.time_budget.is_some_and(|t| t.is_nan() || t < 0.0) {
            return Err(Error::InvalidParameter("time budget must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn backend(&self) -> PathBackend {
        match self.path_backend {
            BackendKind::Sa => PathBackend::SimulatedAnnealing {
                n_samples: self.n_samples,
                schedule: AnnealSchedule {
                    sweeps: self.anneal_sweeps,
                    ..AnnealSchedule::default()
                },
                forbid_cycles: self.forbid_cycles,
            },
            BackendKind::Yens => PathBackend::Yens,
        }
    }

    pub fn setting_name(&self) -> &'static str {
        setting_name(self.normalized, self.inner_tolerance.is_some())
    }
}

/// Row label for the four normalisation/tolerance combinations.
pub fn setting_name(normalized: bool, tolerance: bool) -> &'static str {
    match (normalized, tolerance) {
        (false, false) => "Unnormalized",
        (false, true) => "Unnormalized, Tol = 1e-3",
        (true, false) => "Normalized",
        (true, true) => "Normalized, Tol=1e-3",
    }
}

/// Scales demands so the largest is 100 (rounded to integers) and
/// multiplies capacities by the same factor. Returns the factor.
pub fn normalize_demands(net: &RoadNetwork) -> Result<(RoadNetwork, f64)> {
    let max = net.max_demand();
    if max.is_nan() || max <= 0.0 {
        return Err(Error::ZeroDemand);
    }
    let s = 100.0 / max;
    let demands: Vec<f64> = net.nodes().iter().map(|n| (s * n.demand).round()).collect();
    let capacities: Vec<f64> = net.links().iter().map(|l| s * l.capacity).collect();
    Ok((net.with_demands_and_capacities(&demands, &capacities), s))
}

fn node_seed(rng_seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(stream);
    rng.next_u64()
}

const PATH_STREAM: u64 = 1 << 32;
const SEED_STREAM: u64 = 2 << 32;
const INNER_STREAM: u64 = 3 << 32;

/// Route samples for the FR targets (in FR order) and for the evacuee
/// sources (ascending node id).
#[derive(Debug, Clone)]
pub struct RouteSamples {
    pub fr: Vec<PathSample>,
    pub evacuee: Vec<PathSample>,
}

/// Samples routes once per node in `F ∪ S`, in parallel. When annealing
/// yields no zero-energy state for a node, that node falls back to Yen's
/// algorithm.
pub fn sample_routes(net: &RoadNetwork, config: &GagaConfig) -> Result<RouteSamples> {
    let nodes: BTreeSet<usize> = net.fr_nodes().iter().copied().chain(net.sources()).collect();
    let backend = config.backend();
    let samples: Vec<PathSample> = nodes
        .par_iter()
        .map(|&k| {
            let seed = node_seed(config.rng_seed, PATH_STREAM + k as u64);
            match generate_paths(net, k, config.n_paths, &backend, seed) {
                Err(Error::NoFeasibleSample { .. }) => yen_k_shortest(net, k, config.n_paths),
                other => other,
            }
        })
        .collect::<Result<_>>()?;
    let find = |k: usize| samples.iter().find(|s| s.source == k).cloned().expect("sampled");
    Ok(RouteSamples {
        fr: net.fr_nodes().iter().map(|&k| find(k)).collect(),
        evacuee: net.sources().map(find).collect(),
    })
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub paths: f64,
    pub graver: f64,
    pub walk: f64,
    pub leblanc: f64,
}

#[derive(Debug, Clone)]
pub struct SeedReport {
    pub initial: FrDesign,
    /// `None` when the seed was skipped or could not be scored. Objectives
    /// are on the (possibly scaled) network the walk ran on.
    pub walk: Option<WalkResult>,
    /// Equilibrium total time at the walk's terminus on the original
    /// network.
    pub refined: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GagaResult {
    /// Terminus with the lowest refined objective.
    pub best_design: FrDesign,
    pub gaga_leblanc_objective: f64,
    /// Terminus with the lowest inner-walk objective.
    pub gaga_only_design: FrDesign,
    /// Inner-walk total time at `gaga_only_design`, in original units.
    pub gaga_only_objective: f64,
    /// Beckmann value of the inner flows at `gaga_only_design`, on the
    /// network the walk ran on.
    pub gaga_only_beckmann: Option<f64>,
    pub per_seed: Vec<SeedReport>,
    pub times: PhaseTimes,
    pub seeds_completed: usize,
    /// Some seeds were skipped or cut short by the time budget.
    pub partial: bool,
    pub scale: f64,
    pub outer_basis: GraverSet,
    pub inner_basis_size: usize,
    pub inner_totals: InnerTotals,
}

/// Full pipeline with randomly drawn seeds.
pub fn run_gaga(net: &RoadNetwork, config: &GagaConfig) -> Result<GagaResult> {
    run_gaga_with_seeds(net, config, None)
}

/// Full pipeline; `seeds` replaces the random seed draw when given.
pub fn run_gaga_with_seeds(
    net: &RoadNetwork,
    config: &GagaConfig,
    seeds: Option<Vec<FrDesign>>,
) -> Result<GagaResult> {
    config.validate()?;
    let mut times = PhaseTimes::default();
    let started = Instant::now();
    let budget = config.time_budget.map(Duration::from_secs_f64);

    let (walk_net, scale) = if config.normalized {
        normalize_demands(net)?
    } else {
        (net.clone(), 1.0)
    };

    let t = Instant::now();
    let routes = sample_routes(net, config)?;
    let evacuee: Vec<PathSample> = routes
        .evacuee
        .iter()
        .filter(|s| walk_net.demand(s.source) > 0.0)
        .cloned()
        .collect();
    times.paths = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let outer = outer_basis(net, &routes.fr)?;
    let inner = inner_basis(net, &evacuee)?;
    times.graver = t.elapsed().as_secs_f64();

    let seeds = match seeds {
        Some(s) => s,
        None => build_seeds(net, &routes.fr, config.m, node_seed(config.rng_seed, SEED_STREAM))?,
    };

    let t = Instant::now();
    let remaining = budget.map(|b| b.saturating_sub(started.elapsed()));
    let totals = std::sync::Mutex::new(Vec::new());
    let multi = multi_seed_solve(
        &walk_net,
        &seeds,
        &outer,
        |i| {
            InnerEvalGuard::new(
                InnerEvaluator::new(
                    &walk_net,
                    &inner,
                    &evacuee,
                    config.inner_tolerance,
                    node_seed(config.rng_seed, INNER_STREAM + i as u64),
                ),
                &totals,
            )
        },
        &WalkConfig {
            log_candidates: config.log_candidates,
            ..WalkConfig::default()
        },
        remaining,
    )?;
    times.walk = t.elapsed().as_secs_f64();
    let inner_totals = totals.into_inner().expect("no panics").into_iter().fold(
        InnerTotals::default(),
        |mut acc, t: InnerTotals| {
            acc.evaluations += t.evaluations;
            acc.passes += t.passes;
            acc.accepted_steps += t.accepted_steps;
            acc.walk_time += t.walk_time;
            acc
        },
    );

    let t = Instant::now();
    let refined: Vec<Option<f64>> = multi
        .per_seed
        .par_iter()
        .map(|w| {
            let w = w.as_ref()?;
            solve_ue(&apply_reservation(net, &w.design), REFINE_TOL, None)
                .ok()
                .map(|r| r.total_time)
        })
        .collect();
    times.leblanc = t.elapsed().as_secs_f64();

    let best_refined = refined
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or(Error::NoIncumbent)?;
    let only = multi.best();
    let seeds_completed = multi.completed();
    let per_seed: Vec<SeedReport> = seeds
        .into_iter()
        .zip(multi.per_seed.iter().cloned())
        .zip(refined)
        .map(|((initial, walk), refined)| SeedReport { initial, walk, refined })
        .collect();

    Ok(GagaResult {
        best_design: per_seed[best_refined.0].walk.as_ref().expect("refined").design.clone(),
        gaga_leblanc_objective: best_refined.1,
        gaga_only_design: only.design.clone(),
        gaga_only_objective: only.objective / scale,
        gaga_only_beckmann: only.secondary_objective,
        seeds_completed,
        partial: seeds_completed < per_seed.len(),
        per_seed,
        times,
        scale,
        outer_basis: outer,
        inner_basis_size: inner.len(),
        inner_totals,
    })
}

/// Hands an evaluator's counters back to the pipeline when its walk ends.
struct InnerEvalGuard<'a, 's> {
    inner: InnerEvaluator<'a>,
    sink: &'s std::sync::Mutex<Vec<InnerTotals>>,
}

impl<'a, 's> InnerEvalGuard<'a, 's> {
    fn new(inner: InnerEvaluator<'a>, sink: &'s std::sync::Mutex<Vec<InnerTotals>>) -> Self {
        Self { inner, sink }
    }
}

impl Drop for InnerEvalGuard<'_, '_> {
    fn drop(&mut self) {
        if let Ok(mut v) = self.sink.lock() {
            v.push(self.inner.totals());
        }
    }
}

impl crate::gama::DesignEvaluator for InnerEvalGuard<'_, '_> {
    fn evaluate(&mut self, design: &FrDesign) -> Option<f64> {
        self.inner.evaluate(design)
    }

    fn accept(&mut self, design: &FrDesign) {
        self.inner.accept(design)
    }

    fn secondary(&self) -> Option<f64> {
        self.inner.secondary()
    }
}
