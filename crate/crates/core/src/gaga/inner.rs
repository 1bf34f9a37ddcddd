use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gama::{incidence_rows, path_vector, DesignEvaluator};
use crate::graver::{conformal_filter, lattice_from_differences, GraverSet, IntMatrix, IntVector};
use crate::netmodel::{apply_reservation, EffectiveNetwork, FrDesign, RoadNetwork};
use crate::pathgen::{Path, PathSample};
use crate::ue::{bpr_integral, decompose_flows, total_evac_time, FlowAssignment};

const PASS_LIMIT: usize = 1_000_000;
const TOLERANCE_FLOOR: f64 = 1e-12;

/// Partial basis over link flows: differences of routes that share an
/// origin, pooled over origins and filtered once.
pub fn inner_basis(net: &RoadNetwork, samples: &[PathSample]) -> Result<GraverSet> {
    let m = net.link_count();
    let mut pool = Vec::new();
    for sample in samples {
        let points: Vec<IntVector> = sample.paths.iter().map(|p| path_vector(p, 0, m)).collect();
        pool.extend(lattice_from_differences(&points));
    }
    conformal_filter(IntMatrix::new(m, incidence_rows(net)), &pool)
}

fn integral_demand(net: &RoadNetwork, k: usize) -> Result<u64> {
    let d = net.demand(k);
    if d < 0.0 || d.fract() != 0.0 {
        return Err(Error::NonIntegralDemand { node: k, demand: d });
    }
    Ok(d as u64)
}

fn open_paths<'p>(net: &EffectiveNetwork<'_>, sample: &'p PathSample) -> Vec<&'p Path> {
    sample
        .paths
        .iter()
        .filter(|p| p.links.iter().all(|&l| !net.is_closed(l)))
        .collect()
}

fn sample_for(samples: &[PathSample], k: usize) -> Option<&PathSample> {
    samples.iter().find(|s| s.source == k)
}

fn load_units(
    flows: &mut [f64],
    net: &EffectiveNetwork<'_>,
    samples: &[PathSample],
    k: usize,
    units: u64,
    rng: &mut impl Rng,
) -> Result<()> {
    if units == 0 {
        return Ok(());
    }
    let open = sample_for(samples, k).map(|s| open_paths(net, s)).unwrap_or_default();
    if open.is_empty() {
        return Err(Error::NoOpenPath { node: k });
    }
    for _ in 0..units {
        for &l in &open[rng.random_range(0..open.len())].links {
            flows[l] += 1.0;
        }
    }
    Ok(())
}

/// Integral starting flows: every evacuee at a source independently picks
/// one of that source's open sampled routes.
pub fn build_inner_seed(net: &EffectiveNetwork<'_>, samples: &[PathSample], rng_seed: u64) -> Result<FlowAssignment> {
    let base = net.base();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut flows = vec![0.0; base.link_count()];
    for k in base.sources() {
        let units = integral_demand(base, k)?;
        load_units(&mut flows, net, samples, k, units, &mut rng)?;
    }
    Ok(FlowAssignment::new(flows))
}

/// Reuses `flows` under a new reservation. Routes crossing a closed link
/// are torn down and their evacuees re-seeded on open sampled routes of
/// the same origin; everything else is kept.
pub fn warm_start(
    net: &EffectiveNetwork<'_>,
    flows: &FlowAssignment,
    samples: &[PathSample],
    rng_seed: u64,
) -> Result<FlowAssignment> {
    let stranded = flows.iter().enumerate().any(|(l, &x)| x > 0.0 && net.is_closed(l));
    if !stranded {
        return Ok(flows.clone());
    }
    let base = net.base();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rebuilt = vec![0.0; base.link_count()];
    let mut lost: Vec<(usize, u64)> = Vec::new();
    for pf in decompose_flows(base, flows, 0.5) {
        let amount = pf.amount.round();
        if pf.links.iter().any(|&l| net.is_closed(l)) {
            lost.push((pf.origin, amount as u64));
        } else {
            for &l in &pf.links {
                rebuilt[l] += amount;
            }
        }
    }
    for (k, units) in lost {
        load_units(&mut rebuilt, net, samples, k, units, &mut rng)?;
    }
    Ok(FlowAssignment::new(rebuilt))
}

/// Result of one inner walk.
#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub flows: FlowAssignment,
    pub beckmann: f64,
    pub total_time: f64,
    pub passes: usize,
    pub accepted_steps: usize,
}

/// Unit-step augmentation of integral flows on the Beckmann objective.
///
/// Each pass walks the basis in order; a direction (either sign) is
/// applied repeatedly while it keeps improving. Without a tolerance the
/// walk stops after a pass with no improvement; with one, after a pass
/// whose relative improvement falls below it.
pub fn inner_gama_ue(
    net: &EffectiveNetwork<'_>,
    basis: &GraverSet,
    start: &FlowAssignment,
    tolerance: Option<f64>,
) -> InnerOutcome {
    let mut x: Vec<i64> = start.iter().map(|v| v.round() as i64).collect();
    let term = |l: usize, v: i64| bpr_integral(v as f64, net.capacity(l), net.free_flow_time(l));
    let directions: Vec<Vec<(usize, i64)>> = basis
        .vectors()
        .iter()
        .map(|g| g.support().map(|l| (l, g[l])).collect())
        .collect();
    let value_of = |x: &[i64]| -> f64 {
        x.iter()
            .enumerate()
            .filter(|&(l, _)| !net.is_closed(l))
            .map(|(l, &v)| term(l, v))
            .sum()
    };
    let mut value = value_of(&x);
    let mut passes = 0;
    let mut accepted_steps = 0;
    while passes < PASS_LIMIT {
        let pass_start = value;
        let mut improved = false;
        for g in &directions {
            for sign in [1, -1] {
                loop {
                    let feasible = g.iter().all(|&(l, d)| {
                        let next = x[l] + sign * d;
                        next >= 0 && (next == 0 || !net.is_closed(l))
                    });
                    if !feasible {
                        break;
                    }
                    let delta: f64 = g
                        .iter()
                        .filter(|&&(l, _)| !net.is_closed(l))
                        .map(|&(l, d)| term(l, x[l] + sign * d) - term(l, x[l]))
                        .sum();
                    if delta >= 0.0 {
                        break;
                    }
                    for &(l, d) in g {
                        x[l] += sign * d;
                    }
                    value += delta;
                    accepted_steps += 1;
                    improved = true;
                }
            }
        }
        passes += 1;
        if !improved {
            break;
        }
        if let Some(tol) = tolerance {
            if (pass_start - value) / pass_start.max(TOLERANCE_FLOOR) < tol {
                break;
            }
        }
    }
    let flows = FlowAssignment::new(x.iter().map(|&v| v as f64).collect());
    InnerOutcome {
        beckmann: value_of(&x),
        total_time: total_evac_time(&flows, net),
        flows,
        passes,
        accepted_steps,
    }
}

/// Counters accumulated by an [`InnerEvaluator`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InnerTotals {
    pub evaluations: usize,
    pub passes: usize,
    pub accepted_steps: usize,
    pub walk_time: Duration,
}

/// Scores a design by an inner walk on the reserved network, warm-started
/// from the flows of the design the outer walk currently sits at.
pub struct InnerEvaluator<'a> {
    net: &'a RoadNetwork,
    basis: &'a GraverSet,
    samples: &'a [PathSample],
    tolerance: Option<f64>,
    rng: ChaCha8Rng,
    current: Option<(FlowAssignment, f64)>,
    candidates: HashMap<Vec<bool>, (FlowAssignment, f64)>,
    totals: InnerTotals,
}

impl<'a> InnerEvaluator<'a> {
    pub fn new(
        net: &'a RoadNetwork,
        basis: &'a GraverSet,
        samples: &'a [PathSample],
        tolerance: Option<f64>,
        rng_seed: u64,
    ) -> Self {
        Self {
            net,
            basis,
            samples,
            tolerance,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            current: None,
            candidates: HashMap::new(),
            totals: InnerTotals::default(),
        }
    }

    pub fn totals(&self) -> InnerTotals {
        self.totals
    }

    /// Flows and Beckmann value at the last accepted design.
    pub fn current(&self) -> Option<&(FlowAssignment, f64)> {
        self.current.as_ref()
    }

    fn run(&mut self, design: &FrDesign) -> Result<InnerOutcome> {
        let eff = apply_reservation(self.net, design);
        let seed = self.rng.next_u64();
        let start = match &self.current {
            Some((flows, _)) => warm_start(&eff, flows, self.samples, seed)?,
            None => build_inner_seed(&eff, self.samples, seed)?,
        };
        let began = Instant::now();
        let out = inner_gama_ue(&eff, self.basis, &start, self.tolerance);
        self.totals.walk_time += began.elapsed();
        self.totals.evaluations += 1;
        self.totals.passes += out.passes;
        self.totals.accepted_steps += out.accepted_steps;
        Ok(out)
    }
}

impl DesignEvaluator for InnerEvaluator<'_> {
    fn evaluate(&mut self, design: &FrDesign) -> Option<f64> {
        let out = self.run(design).ok()?;
        self.candidates.insert(design.key(), (out.flows, out.beckmann));
        Some(out.total_time)
    }

    fn accept(&mut self, design: &FrDesign) {
        if let Some(state) = self.candidates.remove(&design.key()) {
            self.current = Some(state);
        }
    }

    fn secondary(&self) -> Option<f64> {
        self.current.as_ref().map(|(_, b)| *b)
    }
}
