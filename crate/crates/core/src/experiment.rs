//! Batch harness: fit a classifier, sample factual instances and run the
//! robust search for every budget, then aggregate the usual summary columns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::cgnc::{fit, CgncModel};
use crate::data::{load_csv, percentile_bounds, Dataset};
use crate::error::{Error, Result};
use crate::metric::NormOrder;
use crate::recourse::{find_counterfactual, Backend, Outcome, RecourseConfig, RecourseProblem, RecourseResult};
use crate::structure::{structure_ban_from_file, structure_nb, structure_tan, DagStructure};

/// Bins per feature when estimating mutual information for TAN.
pub const TAN_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureSpec {
    Nb,
    Tan,
    Ban(PathBuf),
}

impl FromStr for StructureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nb" => Ok(Self::Nb),
            "tan" => Ok(Self::Tan),
            _ => match s.strip_prefix("ban:") {
                Some(path) if !path.is_empty() => Ok(Self::Ban(PathBuf::from(path))),
                _ => Err(Error::InvalidArgument(format!(
                    "unknown structure '{s}' (expected nb, tan or ban:<file>)"
                ))),
            },
        }
    }
}

impl std::fmt::Display for StructureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Nb => f.write_str("nb"),
            Self::Tan => f.write_str("tan"),
            Self::Ban(p) => write!(f, "ban:{}", p.display()),
        }
    }
}

pub fn learn_structure(ds: &Dataset, spec: &StructureSpec, max_in_degree: Option<usize>) -> Result<DagStructure> {
    match spec {
        StructureSpec::Nb => structure_nb(ds.n_features()),
        StructureSpec::Tan => structure_tan(ds, TAN_BINS),
        StructureSpec::Ban(path) => structure_ban_from_file(path, ds.n_features(), max_in_degree),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub label: String,
    pub structure: StructureSpec,
    pub max_in_degree: Option<usize>,
    pub gammas: Vec<f64>,
    pub p: NormOrder,
    pub runs: usize,
    pub seed: u64,
    /// Worker threads; 1 keeps runtimes comparable across runs.
    pub jobs: usize,
    pub out_dir: Option<PathBuf>,
    /// Solver settings shared by all runs; `gamma` is overridden per budget.
    pub recourse: RecourseConfig,
}

impl ExperimentConfig {
    pub fn new(data: impl Into<PathBuf>, label: impl Into<String>, structure: StructureSpec) -> Self {
        Self {
            data: data.into(),
            label: label.into(),
            structure,
            max_in_degree: None,
            gammas: vec![0.01, 0.05],
            p: NormOrder::LInf,
            runs: 25,
            seed: 0,
            jobs: 1,
            out_dir: None,
            recourse: RecourseConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidArgument("budgets must be positive".into()));
        }
        if !self.data.exists() {
            return Err(Error::io(
                &self.data,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
            ));
        }
        if let StructureSpec::Ban(path) = &self.structure {
            if !path.exists() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "network file not found"),
                ));
            }
        }
        Ok(())
    }
}

/// Per-run seed derived from the master seed; independent of scheduling.
pub fn run_seed(master: u64, run: usize) -> u64 {
    let mut z = master ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample (without replacement) of class-0 rows that the model also
/// classifies as 0. Returns row indices in sampling order.
pub fn sample_factuals(ds: &Dataset, model: &CgncModel, tau: f64, runs: usize, seed: u64) -> Result<Vec<usize>> {
    let mut eligible = Vec::new();
    for i in 0..ds.n_rows() {
        if ds.labels()[i] == 0 && model.classify(ds.row(i), tau)? == 0 {
            eligible.push(i);
        }
    }
    if eligible.len() < runs {
        return Err(Error::InvalidArgument(format!(
            "only {} correctly classified class-0 rows for {runs} runs",
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, eligible.len(), runs).into_iter().map(|k| eligible[k]).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub gamma: f64,
    pub run: usize,
    pub row: usize,
    pub backend: Backend,
    /// `None` when the run failed with an error.
    pub result: Option<RecourseResult>,
    pub error: Option<String>,
    /// Wall-clock seconds; omitted from the JSONL stream.
    #[serde(skip)]
    pub runtime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: Option<f64>,
    /// Standard error of the mean; 0 for a single sample.
    pub se: Option<f64>,
    pub count: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self { mean: None, se: None, count };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let se = if count < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        };
        Self {
            mean: Some(mean),
            se: Some(se),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSummary {
    pub gamma: f64,
    pub backend: Backend,
    pub runs: usize,
    pub runtime: MeanSe,
    pub iterations: MeanSe,
    pub distance: MeanSe,
    pub robust: usize,
    pub early_stops: usize,
    pub mean_coverage: Option<f64>,
    pub infeasible: usize,
    pub timeouts: usize,
    pub errors: usize,
}

pub fn summarize(gamma: f64, backend: Backend, records: &[RunRecord]) -> BudgetSummary {
    let finished: Vec<(&RunRecord, &RecourseResult)> = records
        .iter()
        .filter_map(|r| r.result.as_ref().map(|res| (r, res)))
        .collect();
    let count = |o: Outcome| finished.iter().filter(|(_, r)| r.outcome == o).count();
    // timeouts are excluded from runtime and iteration statistics
    let kept: Vec<&(&RunRecord, &RecourseResult)> =
        finished.iter().filter(|(_, r)| r.outcome != Outcome::Timeout).collect();
    let coverages: Vec<f64> = finished
        .iter()
        .filter(|(_, r)| r.outcome == Outcome::EarlyStop)
        .filter_map(|(_, r)| r.coverage)
        .collect();
    BudgetSummary {
        gamma,
        backend,
        runs: records.len(),
        runtime: MeanSe::of(&kept.iter().map(|(rec, _)| rec.runtime).collect::<Vec<_>>()),
        iterations: MeanSe::of(&kept.iter().map(|(_, r)| r.iterations as f64).collect::<Vec<_>>()),
        distance: MeanSe::of(
            &kept
                .iter()
                .filter(|(_, r)| r.distance.is_finite())
                .map(|(_, r)| r.distance)
                .collect::<Vec<_>>(),
        ),
        robust: count(Outcome::Robust),
        early_stops: count(Outcome::EarlyStop),
        mean_coverage: (!coverages.is_empty()).then(|| coverages.iter().sum::<f64>() / coverages.len() as f64),
        infeasible: count(Outcome::Infeasible),
        timeouts: count(Outcome::Timeout),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub structure: String,
    pub nodes: usize,
    pub edges: usize,
    pub summaries: Vec<BudgetSummary>,
    #[serde(skip)]
    pub records: Vec<RunRecord>,
}

/// Fits the model and runs every (budget, run) pair. Per-run failures are
/// recorded and counted, never propagated.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let ds = load_csv(&config.data, &config.label)?;
    let structure = learn_structure(&ds, &config.structure, config.max_in_degree)?;
    let model = fit(&ds, &structure)?;
    let bounds = percentile_bounds(&ds, 0.05, 0.95)?;
    let problem = RecourseProblem::new(model.clone(), config.p, bounds)?;
    let rows = sample_factuals(&ds, &model, config.recourse.tau, config.runs, config.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &gamma in &config.gammas {
        let batch: Vec<RunRecord> = pool.install(|| {
            rows.par_iter()
                .enumerate()
                .map(|(run, &row)| {
                    let mut rc = config.recourse.clone();
                    rc.gamma = gamma;
                    rc.local.seed = run_seed(config.seed, run);
                    if let Some(dir) = &rc.dump_lp {
                        rc.dump_lp = Some(dir.join(format!("gamma_{gamma}_run_{run:03}")));
                    }
                    let start = std::time::Instant::now();
                    let outcome = find_counterfactual(&problem, ds.row(row), &rc);
                    let runtime = start.elapsed().as_secs_f64();
                    let (result, error) = match outcome {
                        Ok(r) => (Some(r), None),
                        Err(e) => {
                            log::warn!("run {run} (row {row}, gamma {gamma}) failed: {e}");
                            (None, Some(e.to_string()))
                        }
                    };
                    RunRecord {
                        gamma,
                        run,
                        row,
                        backend: rc.backend,
                        result,
                        error,
                        runtime,
                    }
                })
                .collect()
        });
        summaries.push(summarize(gamma, config.recourse.backend, &batch));
        records.extend(batch);
    }
    let report = ExperimentReport {
        dataset: config.data.display().to_string(),
        structure: config.structure.to_string(),
        nodes: structure.n(),
        edges: structure.edge_count(),
        summaries,
        records,
    };
    if let Some(dir) = &config.out_dir {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time");
            map.values_mut().for_each(strip_wall_time);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

/// One JSON object per run, without any wall-clock fields, so that a fixed
/// seed reproduces the stream byte for byte.
pub fn jsonl(records: &[RunRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let mut v = serde_json::to_value(r)?;
        strip_wall_time(&mut v);
        out.push_str(&serde_json::to_string(&v)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn scatter_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("gamma,run,row,backend,outcome,distance,runtime,iterations\n");
    for r in records {
        let (outcome, distance, iterations) = match &r.result {
            Some(res) => (res.outcome.to_string(), res.distance, res.iterations.to_string()),
            None => ("error".to_string(), f64::NAN, String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{}",
            r.gamma, r.run, r.row, r.backend, outcome, distance, r.runtime, iterations
        );
    }
    out
}

fn fmt_mean_se(m: &MeanSe, digits: usize) -> String {
    match (m.mean, m.se) {
        (Some(mean), Some(se)) => format!("{mean:.digits$} ({se:.digits$})"),
        _ => "-".into(),
    }
}

/// Aligned text table, one block per budget.
pub fn summary_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{} | {} | gamma = {} | backend = {} | {} nodes, {} edges",
            report.dataset, report.structure, s.gamma, s.backend, report.nodes, report.edges
        );
        let header = [
            "runs", "runtime (s)", "iterations", "distance", "robust", "early stop", "coverage", "infeasible",
            "timeout", "errors",
        ];
        let row = [
            s.runs.to_string(),
            fmt_mean_se(&s.runtime, 3),
            fmt_mean_se(&s.iterations, 2),
            fmt_mean_se(&s.distance, 4),
            s.robust.to_string(),
            s.early_stops.to_string(),
            s.mean_coverage.map_or("-".into(), |c| format!("{:.2}%", 100.0 * c)),
            s.infeasible.to_string(),
            s.timeouts.to_string(),
            s.errors.to_string(),
        ];
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", line(header.to_vec()));
        let _ = writeln!(out, "{}", line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    write("results.jsonl", jsonl(&report.records)?)?;
    write("summary.json", serde_json::to_string_pretty(report)? + "\n")?;
    write("summary.txt", summary_table(report))?;
    write("scatter.csv", scatter_csv(&report.records))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_spec_parsing() {
        assert_eq!("nb".parse::<StructureSpec>().unwrap(), StructureSpec::Nb);
        assert_eq!(
            "ban:net.txt".parse::<StructureSpec>().unwrap(),
            StructureSpec::Ban(PathBuf::from("net.txt"))
        );
        assert!("ban:".parse::<StructureSpec>().is_err());
        assert!("full".parse::<StructureSpec>().is_err());
    }

    #[test]
    fn mean_and_standard_error() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, Some(2.5));
        // sample sd = sqrt(5/3), se = sd / 2
        assert!((m.se.unwrap() - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(MeanSe::of(&[7.0]).se, Some(0.0));
        assert_eq!(MeanSe::of(&[]).mean, None);
    }

    #[test]
    fn run_seeds_differ_and_repeat() {
        assert_eq!(run_seed(3, 4), run_seed(3, 4));
        assert_ne!(run_seed(3, 4), run_seed(3, 5));
        assert_ne!(run_seed(3, 4), run_seed(4, 4));
    }

    #[test]
    fn wall_time_is_stripped() {
        let mut v = serde_json::json!({"a": {"wall_time": 1.0, "b": [{"wall_time": 2.0, "c": 3}]}});
        strip_wall_time(&mut v);
        assert_eq!(v, serde_json::json!({"a": {"b": [{"c": 3}]}}));
    }
}
