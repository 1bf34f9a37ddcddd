//! Experiment runs: load or generate an instance, run one solver, write
//! result tables and traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bnb::{bnb_solve, BnbConfig};
use crate::enumerate::enumerate_designs;
use crate::error::{Error, Result};
use crate::gaga::{run_gaga, GagaConfig, GagaResult};
use crate::netmodel::{generate_random_instance, load_instance, EffectiveNetwork, GeneratorParams, RoadNetwork};
use crate::ue::{bpr_time, solve_ue};

pub const RESULTS_FILE: &str = "results.csv";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    File(PathBuf),
    Generated(GeneratorParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gaga,
    Bnb,
    Enumerate,
    UeOnly,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gaga => "gaga",
            SolverKind::Bnb => "bnb",
            SolverKind::Enumerate => "enumerate",
            SolverKind::UeOnly => "ue-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instance: InstanceSource,
    pub solver: SolverKind,
    pub gaga: GagaConfig,
    /// Seconds.
    pub time_limit: f64,
    pub use_bounds: bool,
    pub enumerate_cap: usize,
    pub ue_tol: f64,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(instance: InstanceSource, solver: SolverKind, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            instance,
            solver,
            gaga: GagaConfig::default(),
            time_limit: 300.0,
            use_bounds: false,
            enumerate_cap: 10_000,
            ue_tol: 1e-3,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let InstanceSource::Generated(p) = &self.instance {
            p.validate()?;
        }
        if self.solver == SolverKind::Gaga {
            self.gaga.validate()?;
        }
        if !(self.time_limit >= 0.0 && self.time_limit.is_finite()) {
            return Err(Error::InvalidParameter("time limit must be a nonnegative number".into()));
        }
        if self.ue_tol.is_nan() || self.ue_tol <= 0.0 {
            return Err(Error::InvalidParameter("ue tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn instance_id(&self) -> String {
        match &self.instance {
            InstanceSource::File(path) => path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
            InstanceSource::Generated(p) => format!("n{}_p{}_s{}", p.n, p.p, p.seed),
        }
    }

    pub fn load(&self) -> Result<RoadNetwork> {
        match &self.instance {
            InstanceSource::File(path) => load_instance(path),
            InstanceSource::Generated(p) => generate_random_instance(p),
        }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub solver: String,
    pub setting: String,
    pub objective_gaga_only: Option<f64>,
    pub objective_final: Option<f64>,
    pub time_paths_s: Option<f64>,
    pub time_graver_s: Option<f64>,
    pub time_walk_s: Option<f64>,
    pub time_leblanc_s: Option<f64>,
    pub seeds_completed: Option<usize>,
}

impl ResultRow {
    fn bare(spec: &ExperimentSpec, setting: impl Into<String>) -> Self {
        Self {
            instance: spec.instance_id(),
            solver: spec.solver.name().to_string(),
            setting: setting.into(),
            objective_gaga_only: None,
            objective_final: None,
            time_paths_s: None,
            time_graver_s: None,
            time_walk_s: None,
            time_leblanc_s: None,
            seeds_completed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ProgressRow {
    seed: usize,
    step: usize,
    objective: f64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct SeedRow {
    seed: usize,
    initial_design: String,
    final_design: String,
    objective_walk: Option<f64>,
    objective_refined: Option<f64>,
    beckmann_walk: Option<f64>,
    accepted_steps: Option<usize>,
    evaluations: Option<usize>,
    timed_out: bool,
}

#[derive(Serialize)]
struct DesignRow {
    id: String,
    routes: String,
    reserved: String,
    objective: Option<f64>,
}

#[derive(Serialize)]
struct FlowRow {
    link: usize,
    from: usize,
    to: usize,
    capacity: f64,
    flow: f64,
    travel_time: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn route_string(routes: &[Vec<usize>]) -> String {
    routes
        .iter()
        .map(|r| r.iter().map(usize::to_string).collect::<Vec<_>>().join("-"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Runs `spec` and writes `results.csv`, `config.json` and the solver's
/// trace files into `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let net = spec.load()?;
    let dir = &spec.out_dir;
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    let config_path = dir.join(CONFIG_FILE);
    let config = serde_json::to_string_pretty(spec).expect("spec serialises");
    fs::write(&config_path, config + "\n").map_err(|source| Error::Io {
        path: config_path.clone(),
        source,
    })?;
    files.push(config_path);

    let rows = match spec.solver {
        SolverKind::Gaga => {
            let result = run_gaga(&net, &spec.gaga)?;
            files.extend(write_gaga_traces(dir, &result)?);
            vec![gaga_row(spec, &result)]
        }
        SolverKind::Bnb => {
            let config = BnbConfig {
                time_limit: Duration::from_secs_f64(spec.time_limit),
                use_bounds: spec.use_bounds,
            };
            let r = bnb_solve(&net, &config)?;
            let trace_path = dir.join("bnb_trace.csv");
            write_csv(&trace_path, &r.trace)?;
            files.push(trace_path);
            let mut row = ResultRow::bare(spec, if r.exhausted { "BB" } else { "BB (time limit)" });
            row.objective_final = Some(r.objective);
            row.time_walk_s = Some(r.wall_time);
            vec![row]
        }
        SolverKind::Enumerate => {
            let table = enumerate_designs(&net, spec.enumerate_cap)?;
            let designs: Vec<DesignRow> = table
                .iter()
                .enumerate()
                .map(|(i, e)| DesignRow {
                    id: format!("ID-{}", i + 1),
                    routes: route_string(&e.routes),
                    reserved: e.design.to_string(),
                    objective: e.objective,
                })
                .collect();
            let path = dir.join("designs.csv");
            write_csv(&path, &designs)?;
            files.push(path);
            designs
                .iter()
                .map(|d| {
                    let mut row = ResultRow::bare(spec, d.id.clone());
                    row.objective_final = d.objective;
                    row
                })
                .collect()
        }
        SolverKind::UeOnly => {
            let eff = EffectiveNetwork::unreserved(&net);
            let started = Instant::now();
            let r = solve_ue(&eff, spec.ue_tol, None)?;
            let flows: Vec<FlowRow> = net
                .links()
                .iter()
                .enumerate()
                .map(|(l, link)| FlowRow {
                    link: l,
                    from: link.from,
                    to: link.to,
                    capacity: link.capacity,
                    flow: r.flows[l],
                    travel_time: bpr_time(&eff, l, r.flows[l]),
                })
                .collect();
            let path = dir.join("flows.csv");
            write_csv(&path, &flows)?;
            files.push(path);
            let mut row = ResultRow::bare(spec, "No reservation");
            row.objective_final = Some(r.total_time);
            row.time_walk_s = Some(started.elapsed().as_secs_f64());
            vec![row]
        }
    };
    let results_path = dir.join(RESULTS_FILE);
    write_csv(&results_path, &rows)?;
    files.push(results_path);
    Ok(ExperimentReport { rows, files })
}

fn gaga_row(spec: &ExperimentSpec, r: &GagaResult) -> ResultRow {
    let mut row = ResultRow::bare(spec, spec.gaga.setting_name());
    row.objective_gaga_only = Some(r.gaga_only_objective);
    row.objective_final = Some(r.gaga_leblanc_objective);
    row.time_paths_s = Some(r.times.paths);
    row.time_graver_s = Some(r.times.graver);
    row.time_walk_s = Some(r.times.walk);
    row.time_leblanc_s = Some(r.times.leblanc);
    row.seeds_completed = Some(r.seeds_completed);
    row
}

fn write_gaga_traces(dir: &Path, r: &GagaResult) -> Result<Vec<PathBuf>> {
    let progress: Vec<ProgressRow> = r
        .per_seed
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.walk.as_ref().map(|w| (i, w)))
        .flat_map(|(i, w)| {
            w.progress.iter().map(move |p| ProgressRow {
                seed: i,
                step: p.step,
                objective: p.objective / r.scale,
                wall_time_s: p.wall_time,
            })
        })
        .collect();
    let seeds: Vec<SeedRow> = r
        .per_seed
        .iter()
        .enumerate()
        .map(|(i, s)| SeedRow {
            seed: i,
            initial_design: s.initial.to_string(),
            final_design: s.walk.as_ref().map(|w| w.design.to_string()).unwrap_or_default(),
            objective_walk: s.walk.as_ref().map(|w| w.objective / r.scale),
            objective_refined: s.refined,
            beckmann_walk: s.walk.as_ref().and_then(|w| w.secondary_objective),
            accepted_steps: s.walk.as_ref().map(|w| w.accepted_steps),
            evaluations: s.walk.as_ref().map(|w| w.evaluations),
            timed_out: s.walk.as_ref().is_none_or(|w| w.timed_out),
        })
        .collect();
    let progress_path = dir.join("gaga_progress.csv");
    let seeds_path = dir.join("gaga_seeds.csv");
    write_csv(&progress_path, &progress)?;
    write_csv(&seeds_path, &seeds)?;
    Ok(vec![progress_path, seeds_path])
}

/// Reads a results table back.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_path() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/n4.json")
    }

    #[test]
    fn enumerate_writes_four_rows() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::new(InstanceSource::File(fixture_path()), SolverKind::Enumerate, dir.path());
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.rows[0].instance, "n4");
        let back = read_results(&dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(back, report.rows);
        let config: ExperimentSpec =
            serde_json::from_str(&fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap()).unwrap();
        assert_eq!(config, spec);
    }

    #[test]
    fn ue_only_writes_flows() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::new(InstanceSource::File(fixture_path()), SolverKind::UeOnly, dir.path());
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.rows[0].setting, "No reservation");
        let flows = fs::read_to_string(dir.path().join("flows.csv")).unwrap();
        assert_eq!(flows.lines().count(), 7);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ExperimentSpec::new(InstanceSource::File(fixture_path()), SolverKind::Bnb, dir.path());
        spec.time_limit = -1.0;
        assert!(run_experiment(&spec).is_err());
        let missing = ExperimentSpec::new(InstanceSource::File(dir.path().join("nope.json")), SolverKind::Bnb, dir.path());
        assert!(matches!(run_experiment(&missing), Err(Error::Io { .. })));
    }
}
