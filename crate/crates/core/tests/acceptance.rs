//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use frndp::bnb::{bnb_solve, BnbConfig};
use frndp::enumerate::{enumerate_designs, optimum};
use frndp::experiment::{run_experiment, ExperimentSpec, InstanceSource, SolverKind};
use frndp::gaga::{run_gaga, run_gaga_with_seeds, GagaConfig};
use frndp::gama::StepOutcome;
use frndp::graver::{conformal_filter, lattice_from_differences, pottier_graver, IntMatrix, IntVector};
use frndp::netmodel::{
    apply_reservation, design_from_fr_route, generate_random_instance, n4_fixture, EffectiveNetwork, GeneratorParams,
    RoadNetwork,
};
use frndp::pathgen::{build_path_qubo, QuboProblem, QuboVar};
use frndp::shortest::distances_to_exits;
use frndp::ue::{bpr, decompose_flows, solve_so, solve_ue, UeResult};

type Check = std::result::Result<String, String>;

/// Objective traces of every equilibrium solve made here.
static TRACES: Mutex<Vec<Vec<f64>>> = Mutex::new(Vec::new());

fn record(r: UeResult) -> UeResult {
    TRACES.lock().unwrap().push(r.objective_trace.clone());
    r
}

fn ue(eff: &EffectiveNetwork<'_>, tol: f64) -> UeResult {
    record(solve_ue(eff, tol, None).expect("equilibrium"))
}

fn so(eff: &EffectiveNetwork<'_>, tol: f64) -> UeResult {
    record(solve_so(eff, tol).expect("system optimum"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn vectors(rows: &[[i64; 6]]) -> BTreeSet<Vec<i64>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

fn up_to_sign(vs: &[IntVector]) -> BTreeSet<Vec<i64>> {
    vs.iter().map(|v| v.canonical().into_inner()).collect()
}

const TABLE1: [f64; 4] = [507.56, 243.43, 379.01, 1099.58];

fn criterion_1() -> Check {
    let start = Instant::now();
    let table = enumerate_designs(&n4_fixture(), 100).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(table.len() == 4, || format!("{} designs", table.len()))?;
    let got: Vec<f64> = table.iter().map(|e| e.objective.unwrap_or(f64::NAN)).collect();
    for (g, w) in got.iter().zip(TABLE1) {
        ensure(rel(*g, w) < 0.01, || format!("objective {g:.2} vs {w}"))?;
    }
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("objectives {:.2?} in {:.2}s", got, elapsed.as_secs_f64()))
}

fn criterion_2() -> Check {
    let net = n4_fixture();
    let seed = design_from_fr_route(&net, 0, &[3, 0]).unwrap();
    let config = GagaConfig {
        m: 1,
        n_samples: 1000,
        log_candidates: true,
        ..GagaConfig::default()
    };
    let start = Instant::now();
    let r = run_gaga_with_seeds(&net, &config, Some(vec![seed])).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let reference = vectors(&[
        [0, 0, 0, 1, -1, 1],
        [1, -1, 0, 1, 0, 0],
        [1, 0, -1, 1, 0, 1],
        [1, -1, 0, 0, 1, -1],
        [1, 0, -1, 0, 1, 0],
        [0, 1, -1, 0, 0, 1],
    ]);
    let basis: BTreeSet<Vec<i64>> = up_to_sign(r.outer_basis.vectors());
    let reference: BTreeSet<Vec<i64>> = reference.iter().map(|v| IntVector::new(v.clone()).canonical().into_inner()).collect();
    ensure(basis == reference, || format!("outer basis {basis:?}"))?;

    let walk = r.per_seed[0].walk.as_ref().ok_or("walk missing")?;
    let first = walk
        .candidates
        .iter()
        .position(|c| c.outcome == StepOutcome::Accepted)
        .ok_or("no accepted step")?;
    ensure(
        walk.candidates[..first].iter().all(|c| c.outcome == StepOutcome::Infeasible),
        || "a feasible candidate preceded the first accepted step".into(),
    )?;
    let step = &walk.candidates[first];
    let g: Vec<i64> = r.outer_basis.vectors()[step.direction].iter().map(|x| x * step.sign).collect();
    ensure(g == vec![1, 0, -1, 0, 1, 0], || format!("first accepted direction {g:?}"))?;
    ensure(walk.accepted_steps == 1, || format!("{} accepted steps", walk.accepted_steps))?;
    let rejected = walk.candidates[first + 1..]
        .iter()
        .filter(|c| c.outcome == StepOutcome::NotImproving)
        .count();
    ensure(rejected >= 1, || "no improvement was rejected after the move".into())?;

    let best = design_from_fr_route(&net, 0, &[3, 1, 0]).unwrap();
    ensure(r.best_design == best, || format!("terminus {}", r.best_design))?;
    ensure(rel(r.gaga_leblanc_objective, 243.43) < 0.01, || {
        format!("refined {:.2}", r.gaga_leblanc_objective)
    })?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "first accepted g={g:?} after {first} infeasible, {rejected} rejected, refined {:.2} in {:.2}s",
        r.gaga_leblanc_objective,
        elapsed.as_secs_f64()
    ))
}

/// Third row as its balance equation reads, with the `y_23` term.
fn a_fr() -> IntMatrix {
    IntMatrix::from_dense(&[
        vec![1, 1, 1, 0, 0, 0],
        vec![-1, 0, 0, 1, 1, 0],
        vec![0, -1, 0, -1, 0, 1],
    ])
}

fn criterion_3() -> Check {
    // reference full basis, one vector per entry
    let reference = [
        [1, -1, 0, 1, 0, 0],
        [1, 0, -1, 0, 1, 0],
        [0, 1, -1, 0, 0, 1],
        [-1, 1, 0, -1, 0, 0],
        [-1, 0, 1, 0, -1, 0],
        [0, -1, 1, 0, 0, -1],
        [1, 0, -1, 1, 0, 1],
        [-1, 0, 1, -1, 0, -1],
        [0, -1, 1, 1, -1, 0],
        [0, 1, -1, -1, 1, 0],
        [1, -1, 0, 0, 1, -1],
        [-1, 1, 0, 0, -1, 1],
        [0, 0, 0, 1, -1, 1],
        [0, 0, 0, -1, 1, -1],
    ];
    let full = pottier_graver(&a_fr()).map_err(|e| e.to_string())?;
    let got: BTreeSet<Vec<i64>> = full.signed().into_iter().map(IntVector::into_inner).collect();
    ensure(got.len() == 14 && got == vectors(&reference), || format!("completion gave {got:?}"))?;

    // the fourth reference solution carries a typo in y_23
    let feasible: Vec<IntVector> = [
        [1, 0, 0, 1, 0, 1],
        [1, 0, 0, 0, 1, 0],
        [0, 1, 0, 0, 0, 1],
        [0, 0, 1, 0, 0, 0],
    ]
    .iter()
    .map(|v| IntVector::new(v.to_vec()))
    .collect();
    let diffs = lattice_from_differences(&feasible);
    let kept = conformal_filter(a_fr(), &diffs).map_err(|e| e.to_string())?;
    let kernel = [
        [0, 0, 0, 1, -1, 1],
        [1, -1, 0, 1, 0, 0],
        [1, 0, -1, 1, 0, 1],
        [1, -1, 0, 0, 1, -1],
        [1, 0, -1, 0, 1, 0],
        [0, 1, -1, 0, 0, 1],
    ];
    let want: BTreeSet<Vec<i64>> = kernel.iter().map(|v| IntVector::new(v.to_vec()).canonical().into_inner()).collect();
    ensure(diffs.len() == 6, || format!("{} differences", diffs.len()))?;
    ensure(kept.len() == 6 && up_to_sign(kept.vectors()) == want, || {
        format!("filter kept {:?}", kept.vectors())
    })?;
    Ok("14 completion vectors, 6 differences all retained".into())
}

fn criterion_4() -> Check {
    let net = n4_fixture();
    let d310 = design_from_fr_route(&net, 0, &[3, 1, 0]).unwrap();
    let r = ue(&apply_reservation(&net, &d310), 1e-3);
    let want = [0.0, 39.0, 61.0, 0.0, 0.0, 39.0];
    for (l, w) in want.iter().enumerate() {
        ensure((r.flows[l] - w).abs() <= 2.0, || format!("flows {:?}", &r.flows[..6]))?;
    }
    let d30 = design_from_fr_route(&net, 0, &[3, 0]).unwrap();
    let direct = ue(&apply_reservation(&net, &d30), 1e-3);
    ensure(rel(direct.total_time, 507.56) < 0.01, || format!("(3,0) total {:.2}", direct.total_time))?;
    Ok(format!(
        "flows {:.1?}, (3,0) total {:.2}",
        &r.flows[..6],
        direct.total_time
    ))
}

/// Instances from the generator, skipping seeds it rejects.
fn generated(n: usize, p: f64, count: usize) -> Vec<RoadNetwork> {
    (0u64..)
        .filter_map(|seed| generate_random_instance(&GeneratorParams::new(n, p, seed)).ok())
        .take(count)
        .collect()
}

const WARDROP_TOL: f64 = 1e-10;

/// Routes carrying less than this share of their origin's demand are
/// treated as unused.
const USED_SHARE: f64 = 1e-3;

fn criterion_5() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut nets = generated(10, 0.5, 10);
    nets.extend(generated(10, 0.75, 10));
    for (i, net) in nets.iter().enumerate() {
        let eff = EffectiveNetwork::unreserved(net);
        let r = ue(&eff, WARDROP_TOL);
        let costs: Vec<f64> = (0..net.link_count())
            .map(|l| bpr(r.flows[l], eff.capacity(l), eff.free_flow_time(l)))
            .collect();
        let (dist, _) = distances_to_exits(net, |l| Some(costs[l]));
        for path in decompose_flows(net, &r.flows, 1e-9) {
            if path.amount < USED_SHARE * net.demand(path.origin) {
                continue;
            }
            let time: f64 = path.links.iter().map(|&l| costs[l]).sum();
            let spread = time / dist[path.origin] - 1.0;
            worst = worst.max(spread);
            ensure(spread <= 0.05, || {
                format!("instance {i}: source {} route {time:.4} vs shortest {:.4}", path.origin, dist[path.origin])
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} instances, worst used-route excess {:.3}% in {:.1}s",
        nets.len(),
        100.0 * worst,
        elapsed.as_secs_f64()
    ))
}

fn criterion_6() -> Check {
    let net = n4_fixture();
    for route in [&[3, 0][..], &[3, 1, 0], &[3, 2, 0], &[3, 2, 1, 0]] {
        let eff = apply_reservation(&net, &design_from_fr_route(&net, 0, route).unwrap());
        ue(&eff, 1e-6);
        so(&eff, 1e-6);
    }
    for net in generated(10, 0.5, 5) {
        let eff = EffectiveNetwork::unreserved(&net);
        ue(&eff, 1e-4);
        so(&eff, 1e-4);
    }
    let traces = TRACES.lock().unwrap();
    let steps: usize = traces.iter().map(|t| t.len().saturating_sub(1)).sum();
    let violations = traces
        .iter()
        .flat_map(|t| t.windows(2))
        .filter(|w| w[1] > w[0])
        .count();
    ensure(violations == 0, || format!("{violations} increases"))?;
    Ok(format!("{} runs, {steps} steps, 0 increases", traces.len()))
}

/// Solutions of the balance (and one-out) system for the QUBO's variables,
/// read directly off the network.
fn satisfies_system(net: &RoadNetwork, qubo: &QuboProblem, x: &[u8], forbid_cycles: bool) -> bool {
    let mut link = vec![0i64; net.link_count()];
    let mut slack = vec![0i64; net.node_count()];
    for (v, &b) in qubo.vars().iter().zip(x) {
        match *v {
            QuboVar::Link(l) => link[l] = b as i64,
            QuboVar::Slack(i) => slack[i] = b as i64,
        }
    }
    (0..net.node_count()).filter(|&i| !net.is_exit(i)).all(|i| {
        let out: i64 = net.out_links(i).iter().map(|&l| link[l]).sum();
        let inc: i64 = net.in_links(i).iter().map(|&l| link[l]).sum();
        out - inc == (i == qubo.target()) as i64 && (!forbid_cycles || out + slack[i] == 1)
    })
}

fn criterion_7() -> Check {
    let mut nets = vec![n4_fixture()];
    for n in [5, 6, 7] {
        nets.extend(generated(n, 0.5, 4));
    }
    let (mut checked, mut n4_count) = (0usize, None);
    for (idx, net) in nets.iter().enumerate() {
        for k in (0..net.node_count()).filter(|&k| !net.is_exit(k)) {
            for forbid in [false, true] {
                let qubo = build_path_qubo(net, k, forbid);
                let n = qubo.len();
                if n > 20 {
                    continue;
                }
                let mut zero = 0usize;
                let mut x = vec![0u8; n];
                for mask in 0u32..1 << n {
                    for (i, b) in x.iter_mut().enumerate() {
                        *b = ((mask >> i) & 1) as u8;
                    }
                    let is_zero = qubo.energy(&x).abs() < 1e-9;
                    ensure(is_zero == satisfies_system(net, &qubo, &x, forbid), || {
                        format!("instance {idx}, node {k}, state {x:?}")
                    })?;
                    zero += is_zero as usize;
                }
                if idx == 0 && k == 0 && forbid {
                    n4_count = Some(zero);
                }
                checked += 1;
            }
        }
    }
    ensure(n4_count == Some(4), || format!("N4 node 0 has {n4_count:?} zero-energy states"))?;
    Ok(format!("{checked} QUBOs matched, N4 node 0 has 4 solutions"))
}

/// (n, |F|, generator seed) with between 9 and 12 FR designs at p = 0.5.
const SMALL_INSTANCES: [(usize, usize, u64); 10] = [
    (8, 2, 8),
    (8, 2, 18),
    (8, 3, 28),
    (8, 3, 38),
    (10, 1, 11),
    (10, 1, 12),
    (10, 1, 30),
    (10, 2, 32),
    (10, 2, 37),
    (10, 3, 19),
];

fn criterion_8() -> Check {
    let mut worst: f64 = 0.0;
    for (n, fr, seed) in SMALL_INSTANCES {
        let label = format!("n={n} |F|={fr} seed={seed}");
        let net = generate_random_instance(&GeneratorParams::new(n, 0.5, seed).with_fr_count(fr))
            .map_err(|e| format!("{label}: {e}"))?;
        let table = enumerate_designs(&net, 12).map_err(|e| format!("{label}: {e}"))?;
        let best = optimum(&table).and_then(|e| e.objective).ok_or(format!("{label}: no feasible design"))?;
        let config = GagaConfig {
            m: 10,
            n_paths: 10,
            n_samples: 1000,
            ..GagaConfig::default()
        };
        let g = run_gaga(&net, &config).map_err(|e| format!("{label}: {e}"))?;
        let gap = g.gaga_leblanc_objective / best - 1.0;
        worst = worst.max(gap);
        ensure(gap <= 0.10, || format!("{label}: GAGA {:.3} vs {best:.3}", g.gaga_leblanc_objective))?;
        let b = bnb_solve(&net, &BnbConfig::default()).map_err(|e| format!("{label}: {e}"))?;
        ensure(b.objective == best, || format!("{label}: BnB {:.6} vs {best:.6}", b.objective))?;
    }
    Ok(format!(
        "{} instances, BnB exact, worst GAGA gap {:.3}%",
        SMALL_INSTANCES.len(),
        100.0 * worst
    ))
}

/// Every CSV in `dir`, with time columns blanked.
fn masked_csvs(dir: &Path) -> BTreeMap<String, Vec<Vec<String>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "csv") {
            continue;
        }
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let headers = reader.headers().unwrap().clone();
        let timed: Vec<bool> = headers.iter().map(|h| h.starts_with("time_") || h.contains("wall_time")).collect();
        let mut rows = vec![headers.iter().map(String::from).collect::<Vec<_>>()];
        for rec in reader.records() {
            let rec = rec.unwrap();
            rows.push(
                rec.iter()
                    .zip(&timed)
                    .map(|(v, &t)| if t { String::new() } else { v.to_string() })
                    .collect(),
            );
        }
        out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), rows);
    }
    out
}

fn criterion_9() -> Check {
    let mut compared = 0;
    for solver in [SolverKind::Gaga, SolverKind::Bnb, SolverKind::Enumerate, SolverKind::UeOnly] {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let mut spec = ExperimentSpec::new(
                    InstanceSource::Generated(GeneratorParams::new(8, 0.5, 8).with_fr_count(2)),
                    solver,
                    dir.path(),
                );
                spec.gaga = GagaConfig {
                    m: 4,
                    n_paths: 8,
                    n_samples: 500,
                    rng_seed: 11,
                    ..GagaConfig::default()
                };
                run_experiment(&spec).map_err(|e| e.to_string())?;
                Ok(masked_csvs(dir.path()))
            })
            .collect::<std::result::Result<_, String>>()?;
        ensure(runs[0] == runs[1], || format!("{} output differs between runs", solver.name()))?;
        compared += runs[0].len();
    }
    Ok(format!("{compared} CSV files identical across reruns"))
}

fn criterion_10() -> Check {
    let net = generate_random_instance(&GeneratorParams::new(10, 0.5, 3)).map_err(|e| e.to_string())?;
    let run = |tol: Option<f64>| {
        let config = GagaConfig {
            m: 10,
            n_paths: 10,
            n_samples: 1000,
            inner_tolerance: tol,
            ..GagaConfig::default()
        };
        run_gaga(&net, &config).map_err(|e| e.to_string())
    };
    let exact = run(None)?;
    let loose = run(Some(1e-3))?;
    let (t_exact, t_loose) = (exact.inner_totals.walk_time, loose.inner_totals.walk_time);
    ensure(t_loose < t_exact, || format!("inner walk {t_loose:?} vs {t_exact:?}"))?;
    let gap = rel(loose.gaga_leblanc_objective, exact.gaga_leblanc_objective);
    ensure(gap <= 0.10, || format!("objective moved {:.2}%", 100.0 * gap))?;
    Ok(format!(
        "inner walk {:.3}s vs {:.3}s ({:.1}x), objectives differ by {:.3}%",
        t_loose.as_secs_f64(),
        t_exact.as_secs_f64(),
        t_exact.as_secs_f64() / t_loose.as_secs_f64().max(1e-9),
        100.0 * gap
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Check); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
