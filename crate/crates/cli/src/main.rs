use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgnc_recourse::cgnc::fit;
use cgnc_recourse::data::{load_csv, percentile_bounds};
use cgnc_recourse::diagnostics::{check_model, CheckOptions};
use cgnc_recourse::experiment::{learn_structure, run_experiment, summary_table, ExperimentConfig, StructureSpec};
use cgnc_recourse::recourse::{baseline_counterfactual, find_counterfactual, model_bounds, RecourseProblem};
use cgnc_recourse::solve::{LocalParams, MilpParams};
use cgnc_recourse::{Backend, CgncModel, Error, NormOrder, RecourseConfig};

#[derive(Parser)]
#[command(name = "cgnc", version, about = "Robust counterfactual explanations for conditional Gaussian network classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a structure, fit the classifier and write it as JSON.
    Fit(FitArgs),
    /// Find a robust counterfactual for one instance.
    Explain(ExplainArgs),
    /// Run the batch protocol and write summary tables.
    Experiment(ExperimentArgs),
    /// Print numerical diagnostics for a fitted model.
    Check(CheckArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the binary label column.
    #[arg(long, default_value = "class")]
    label: String,
}

#[derive(Args)]
struct StructureArgs {
    /// nb, tan or ban (with --ban-file); `ban:<file>` is also accepted.
    #[arg(long, default_value = "nb")]
    structure: String,
    /// Weighted edge list for ban.
    #[arg(long)]
    ban_file: Option<PathBuf>,
    #[arg(long)]
    max_in_degree: Option<usize>,
}

impl StructureArgs {
    fn spec(&self) -> Result<StructureSpec, Error> {
        match (self.structure.as_str(), &self.ban_file) {
            ("ban", Some(path)) => Ok(StructureSpec::Ban(path.clone())),
            ("ban", None) => Err(Error::InvalidArgument("--structure ban needs --ban-file".into())),
            (s, _) => s.parse(),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// 1, 2 or inf.
    #[arg(long = "p-norm", default_value = "inf")]
    p_norm: NormOrder,
    /// milp or local.
    #[arg(long, default_value = "milp")]
    backend: Backend,
    #[arg(long, default_value_t = 20)]
    m_init: usize,
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    /// Relative MIP gap.
    #[arg(long, default_value_t = 0.01)]
    gap: f64,
    /// Seconds per instance.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1_000_000)]
    node_limit: usize,
    /// Random starts for the local backend.
    #[arg(long, default_value_t = 16)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Also partition every product on its second factor.
    #[arg(long)]
    double_partition: bool,
    /// Write every MILP subproblem in LP format to this directory.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self, gamma: f64) -> RecourseConfig {
        RecourseConfig {
            gamma,
            epsilon: self.epsilon,
            tau: self.tau,
            backend: self.backend,
            m_init: self.m_init,
            nu: self.nu,
            max_iter: self.max_iter,
            time_budget: self.time_limit,
            milp: MilpParams {
                gap_tol: self.gap,
                node_limit: self.node_limit,
                time_limit: self.time_limit,
                ..MilpParams::default()
            },
            local: LocalParams {
                starts: self.starts,
                seed: self.seed,
                ..LocalParams::default()
            },
            double_partition: self.double_partition,
            dump_lp: self.dump_lp.clone(),
            ..RecourseConfig::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    structure: StructureArgs,
    /// Model JSON destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset for the search box and for --row.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "class")]
    label: String,
    /// Row index of the factual instance in --data.
    #[arg(long, conflicts_with = "factual")]
    row: Option<usize>,
    /// Comma-separated factual instance.
    #[arg(long, allow_hyphen_values = true)]
    factual: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    /// Only solve the non-robust problem.
    #[arg(long)]
    baseline: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    structure: StructureArgs,
    /// Budget; repeat for several.
    #[arg(long = "gamma", default_values_t = vec![0.01, 0.05])]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 25)]
    runs: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    /// Domain radius R; defaults to the whitened radius of the data box.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "class")]
    label: String,
    #[arg(long = "p-norm", default_value = "inf")]
    p_norm: NormOrder,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AlreadyPositive { .. } => 3,
        Error::Solver(_) | Error::EmptyScenarioSet => 4,
        _ => 2,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), Error> {
    let ds = load_csv(&args.data.data, &args.data.label)?;
    let structure = learn_structure(&ds, &args.structure.spec()?, args.structure.max_in_degree)?;
    let model = fit(&ds, &structure)?;
    model.save(&args.out)?;
    println!("{} nodes, {} edges", structure.n(), structure.edge_count());
    for (parent, child) in structure.edges() {
        println!("  {} -> {}", ds.feature_names()[parent], ds.feature_names()[child]);
    }
    Ok(())
}

fn parse_vector(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("'{v}' is not a number")))
        })
        .collect()
}

fn cmd_explain(args: &ExplainArgs) -> Result<(), Error> {
    let model = CgncModel::load(&args.model)?;
    let ds = args.data.as_ref().map(|d| load_csv(d, &args.label)).transpose()?;
    let factual = match (&args.factual, args.row, &ds) {
        (Some(text), _, _) => parse_vector(text)?,
        (None, Some(row), Some(ds)) => {
            if row >= ds.n_rows() {
                return Err(Error::IndexOutOfRange { index: row, n: ds.n_rows() });
            }
            ds.row(row).to_vec()
        }
        (None, Some(_), None) => return Err(Error::InvalidArgument("--row needs --data".into())),
        (None, None, _) => return Err(Error::InvalidArgument("give --factual or --row".into())),
    };
    let bounds = match &ds {
        Some(ds) => percentile_bounds(ds, 0.05, 0.95)?,
        None => model_bounds(&model, 3.0)?,
    };
    let problem = RecourseProblem::new(model, args.solver.p_norm, bounds)?;
    let config = args.solver.config(args.gamma);
    let result = if args.baseline {
        baseline_counterfactual(&problem, &factual, &config)?
    } else {
        find_counterfactual(&problem, &factual, &config)?
    };
    emit(&serde_json::to_string_pretty(&result)?, args.out.as_deref())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), Error> {
    let mut config = ExperimentConfig::new(&args.data.data, &args.data.label, args.structure.spec()?);
    config.max_in_degree = args.structure.max_in_degree;
    config.gammas = args.gammas.clone();
    config.p = args.solver.p_norm;
    config.runs = args.runs;
    config.seed = args.solver.seed;
    config.jobs = args.jobs;
    config.out_dir = Some(args.out.clone());
    config.recourse = args.solver.config(args.gammas[0]);
    let report = run_experiment(&config)?;
    print!("{}", summary_table(&report));
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<(), Error> {
    let model = CgncModel::load(&args.model)?;
    let bounds = match &args.data {
        Some(d) => Some(percentile_bounds(&load_csv(d, &args.label)?, 0.05, 0.95)?),
        None if args.radius.is_none() => Some(model_bounds(&model, 3.0)?),
        None => None,
    };
    let opts = CheckOptions {
        p: args.p_norm,
        radius: args.radius,
        bounds,
        epsilon: args.epsilon,
        seed: args.seed,
        ..CheckOptions::default()
    };
    let report = check_model(&model, &opts)?;
    emit(&serde_json::to_string_pretty(&report)?, args.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
