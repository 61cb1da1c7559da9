//! Cutting-set search for robust counterfactuals, the non-robust baseline,
//! and the coverage ratio reported on early stops.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cgnc::{log_threshold, CgncModel};
use crate::data::FeatureBounds;
use crate::error::{Error, Result};
use crate::expansion::{build_expansion, ExpandedForm};
use crate::metric::{build_metric, NormOrder, UncertaintySet, WhitenedMetric};
use crate::milp::{build_ap, build_mp, tighten, BuildOptions, MilpModel, TighteningState};
use crate::solve::{
    polish_mp, solve_local_ap, solve_local_mp, solve_milp, LocalParams, MilpParams, SolveResult, SolveStats,
    SolveStatus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Milp,
    Local,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Milp => "milp",
            Backend::Local => "local",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "milp" => Ok(Backend::Milp),
            "local" | "qcqp" => Ok(Backend::Local),
            other => Err(Error::InvalidArgument(format!("unknown backend '{other}' (expected milp or local)"))),
        }
    }
}

/// Violations at or below this are treated as zero when classifying
/// outcomes; boundary points otherwise flip on rounding noise.
pub const ZERO_VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Robust,
    EarlyStop,
    Infeasible,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Robust => "robust",
            Outcome::EarlyStop => "early-stop",
            Outcome::Infeasible => "infeasible",
            Outcome::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecourseConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub backend: Backend,
    pub m_init: usize,
    pub nu: f64,
    /// Cap on master solves; hitting it is reported as a timeout.
    pub max_iter: usize,
    /// Wall-clock budget per instance, seconds.
    pub time_budget: f64,
    pub milp: MilpParams,
    pub local: LocalParams,
    pub double_partition: bool,
    /// Add indicator-free valid inequalities to the relaxations.
    pub strengthen: bool,
    /// Refine MILP master iterates in the original space.
    pub polish: bool,
    /// Relative bisection tolerance for the coverage ratio.
    pub coverage_tol: f64,
    /// Write every MILP subproblem in LP format to this directory.
    pub dump_lp: Option<PathBuf>,
}

impl Default for RecourseConfig {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            epsilon: 1e-3,
            tau: 0.5,
            backend: Backend::Milp,
            m_init: 20,
            nu: 0.5,
            max_iter: 50,
            time_budget: 3600.0,
            milp: MilpParams::default(),
            local: LocalParams::default(),
            double_partition: false,
            strengthen: true,
            polish: true,
            coverage_tol: 1e-3,
            dump_lp: None,
        }
    }
}

impl RecourseConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("epsilon", self.epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidArgument(format!("nu = {} must lie in (0, 1)", self.nu)));
        }
        if self.m_init == 0 || self.max_iter == 0 {
            return Err(Error::InvalidArgument("m_init and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Everything fixed for one classifier: the model, its expansion, the
/// class-0 metric and the search box.
#[derive(Debug, Clone)]
pub struct RecourseProblem {
    pub model: CgncModel,
    pub expansion: ExpandedForm,
    pub metric: WhitenedMetric,
    pub bounds: FeatureBounds,
}

impl RecourseProblem {
    pub fn new(model: CgncModel, p: NormOrder, bounds: FeatureBounds) -> Result<Self> {
        let geometry = model.class_geometry(0)?;
        let metric = build_metric(&geometry.covariance, p)?;
        Self::with_metric(model, metric, bounds)
    }

    pub fn with_metric(model: CgncModel, metric: WhitenedMetric, bounds: FeatureBounds) -> Result<Self> {
        let n = model.n();
        for len in [metric.n(), bounds.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let expansion = build_expansion(&model);
        Ok(Self {
            model,
            expansion,
            metric,
            bounds,
        })
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }
}

/// Search box derived from the model alone: the hull of
/// `mean_c ± k·sd_c` over both classes. Used when no data is at hand.
pub fn model_bounds(model: &CgncModel, k: f64) -> Result<FeatureBounds> {
    let n = model.n();
    let mut lower = vec![f64::INFINITY; n];
    let mut upper = vec![f64::NEG_INFINITY; n];
    for c in 0..2 {
        let mean = model.class_mean(c);
        let cov = model.class_geometry(c)?.covariance;
        for j in 0..n {
            let sd = cov[(j, j)].sqrt();
            lower[j] = lower[j].min(mean[j] - k * sd);
            upper[j] = upper[j].max(mean[j] + k * sd);
        }
    }
    FeatureBounds::new(lower, upper)
}

/// Algorithm state between master/adversarial rounds.
#[derive(Debug, Clone)]
pub struct CuttingSetState {
    pub scenarios: Vec<Vec<f64>>,
    pub iterate: Vec<f64>,
    pub violation: f64,
    pub t: usize,
    pub tightening: Option<TighteningState>,
    pub log: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Worst-case violation found by the adversarial problem.
    pub phi: f64,
    /// Distance of the master iterate.
    pub objective: f64,
    /// Master objective before any polish (relaxed value on the MILP path).
    pub master_objective: f64,
    pub partitions: Option<usize>,
    pub master: SolveStats,
    pub adversary: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecourseResult {
    pub factual: Vec<f64>,
    /// Empty when no counterfactual was found.
    pub counterfactual: Vec<f64>,
    pub distance: f64,
    pub iterations: usize,
    pub outcome: Outcome,
    /// `γ̃/γ`; 1 for robust outcomes, computed by bisection on early stops.
    pub coverage: Option<f64>,
    pub violation_final: f64,
    pub log: Vec<IterationRecord>,
    pub stats: SolveStats,
    pub wall_time: f64,
}

impl RecourseResult {
    pub fn scenarios_used(&self) -> usize {
        self.iterations
    }
}

struct Runner<'a> {
    problem: &'a RecourseProblem,
    config: &'a RecourseConfig,
    start: Instant,
    tau_prime: f64,
    /// Search box: the problem box widened to contain the factual.
    search_box: FeatureBounds,
}

impl Runner<'_> {
    fn remaining(&self) -> f64 {
        (self.config.time_budget - self.start.elapsed().as_secs_f64()).max(0.0)
    }

    fn milp_params(&self) -> MilpParams {
        MilpParams {
            time_limit: self.config.milp.time_limit.min(self.remaining()),
            ..self.config.milp
        }
    }

    fn dump(&self, model: &MilpModel, stem: &str) -> Result<()> {
        if let Some(dir) = &self.config.dump_lp {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            model.write_lp(dir.join(format!("{stem}.lp")))?;
        }
        Ok(())
    }

    fn opts(&self) -> BuildOptions {
        BuildOptions {
            double_partition: self.config.double_partition,
            strengthen: self.config.strengthen,
        }
    }

    fn master(&self, state: &CuttingSetState, factual: &[f64]) -> Result<(MasterOutcome, SolveStats)> {
        let p = self.problem;
        match self.config.backend {
            Backend::Milp => {
                let tight = state.tightening.as_ref().expect("MILP path keeps a tightening state");
                let (model, layout) = build_mp(
                    &p.expansion,
                    &p.metric,
                    factual,
                    &state.scenarios,
                    tight,
                    self.tau_prime,
                    self.opts(),
                )?;
                self.dump(&model, &format!("mp_{:03}", state.t))?;
                let r = solve_milp(&model, &self.milp_params())?;
                if !r.has_solution() {
                    return Ok((classify_failure(&r), r.stats));
                }
                let relaxed = layout.x_values(&r.assignment);
                let x = if self.config.polish {
                    match polish_mp(
                        &p.expansion,
                        &p.metric,
                        factual,
                        &state.scenarios,
                        &tight.current_bounds,
                        self.tau_prime,
                        &relaxed,
                    )? {
                        Some(x) => x,
                        None => {
                            log::warn!("polish could not restore feasibility at t = {}", state.t);
                            relaxed
                        }
                    }
                } else {
                    relaxed
                };
                let limit = r.status == SolveStatus::IterationLimit;
                Ok((MasterOutcome::Point { x, relaxed_objective: r.objective, limit }, r.stats))
            }
            Backend::Local => {
                let params = LocalParams {
                    seed: self.config.local.seed.wrapping_add(state.t as u64),
                    ..self.config.local.clone()
                };
                let r = solve_local_mp(
                    &p.expansion,
                    &p.metric,
                    factual,
                    &state.scenarios,
                    &self.search_box,
                    self.tau_prime,
                    &params,
                )?;
                if !r.has_solution() {
                    return Ok((MasterOutcome::Infeasible, r.stats));
                }
                Ok((
                    MasterOutcome::Point {
                        relaxed_objective: r.objective,
                        x: r.assignment,
                        limit: false,
                    },
                    r.stats,
                ))
            }
        }
    }

    /// Worst violation and the maximizing perturbation at `x_hat`.
    fn adversary(&self, x_hat: &[f64], gamma: f64, t: usize) -> Result<(f64, Vec<f64>, SolveStats)> {
        let p = self.problem;
        let uset = UncertaintySet::new(p.metric.clone(), gamma)?;
        match self.config.backend {
            Backend::Milp => {
                let (model, layout) =
                    build_ap(&p.expansion, &uset, x_hat, self.config.m_init, self.tau_prime, self.opts())?;
                self.dump(&model, &format!("ap_{t:03}"))?;
                let r = solve_milp(&model, &self.milp_params())?;
                if !r.has_solution() {
                    return Err(Error::Solver(format!("adversarial MILP returned {:?}", r.status)));
                }
                let delta = layout.delta_values(&r.assignment);
                // a stopped search can only certify its bound
                let phi = if r.status == SolveStatus::IterationLimit && r.bound.is_finite() {
                    r.bound.max(r.objective)
                } else {
                    r.objective
                };
                Ok((phi, delta, r.stats))
            }
            Backend::Local => {
                let params = LocalParams {
                    seed: self.config.local.seed.wrapping_add(1_000_003 * t as u64),
                    ..self.config.local.clone()
                };
                let r = solve_local_ap(&p.expansion, &uset, x_hat, self.tau_prime, &params)?;
                Ok((r.objective, r.assignment, r.stats))
            }
        }
    }
}

enum MasterOutcome {
    Point {
        x: Vec<f64>,
        relaxed_objective: f64,
        limit: bool,
    },
    Infeasible,
    Limit,
}

fn classify_failure(r: &SolveResult) -> MasterOutcome {
    match r.status {
        SolveStatus::IterationLimit => MasterOutcome::Limit,
        _ => MasterOutcome::Infeasible,
    }
}

fn check_inputs(problem: &RecourseProblem, factual: &[f64], config: &RecourseConfig) -> Result<f64> {
    config.validate()?;
    let n = problem.n();
    if factual.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: factual.len() });
    }
    if factual.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("factual instance".into()));
    }
    let tau_prime = log_threshold(config.tau)?;
    let h = problem.model.decision_h(factual);
    if problem.model.classify(factual, config.tau)? == 1 {
        return Err(Error::AlreadyPositive { h, threshold: tau_prime });
    }
    Ok(tau_prime)
}

/// Robust counterfactual by alternating master and adversarial solves
/// until the worst-case violation drops to `epsilon`.
pub fn find_counterfactual(
    problem: &RecourseProblem,
    factual: &[f64],
    config: &RecourseConfig,
) -> Result<RecourseResult> {
    let tau_prime = check_inputs(problem, factual, config)?;
    run(problem, factual, config, tau_prime, false)
}

/// Single master solve with the zero scenario only: the non-robust nearest
/// counterfactual.
pub fn baseline_counterfactual(
    problem: &RecourseProblem,
    factual: &[f64],
    config: &RecourseConfig,
) -> Result<RecourseResult> {
    let tau_prime = check_inputs(problem, factual, config)?;
    run(problem, factual, config, tau_prime, true)
}

fn run(
    problem: &RecourseProblem,
    factual: &[f64],
    config: &RecourseConfig,
    tau_prime: f64,
    baseline: bool,
) -> Result<RecourseResult> {
    let runner = Runner {
        problem,
        config,
        start: Instant::now(),
        tau_prime,
        search_box: problem.bounds.hull_with(factual),
    };
    let tightening = match config.backend {
        Backend::Milp => Some(TighteningState::new(runner.search_box.clone(), config.nu, config.m_init)?),
        Backend::Local => None,
    };
    let mut state = CuttingSetState {
        scenarios: vec![vec![0.0; problem.n()]],
        iterate: factual.to_vec(),
        violation: f64::INFINITY,
        t: 1,
        tightening,
        log: Vec::new(),
    };
    let mut stats = SolveStats::default();
    let mut best: Option<Vec<f64>> = None;

    let outcome = loop {
        if runner.remaining() <= 0.0 || state.t > config.max_iter {
            break Outcome::Timeout;
        }
        let (master, master_stats) = runner.master(&state, factual)?;
        stats.accumulate(&master_stats);
        let (x_hat, master_objective, limit) = match master {
            MasterOutcome::Point {
                x,
                relaxed_objective,
                limit,
            } => (x, relaxed_objective, limit),
            MasterOutcome::Infeasible => break Outcome::Infeasible,
            MasterOutcome::Limit => break Outcome::Timeout,
        };
        check_history(problem, &state.scenarios, &x_hat, tau_prime);
        best = Some(x_hat.clone());
        state.iterate = x_hat.clone();
        if limit {
            break Outcome::Timeout;
        }

        let (phi, delta, adversary_stats) = if baseline {
            (tau_prime - problem.expansion.h(&x_hat), vec![0.0; problem.n()], SolveStats::default())
        } else {
            runner.adversary(&x_hat, config.gamma, state.t)?
        };
        stats.accumulate(&adversary_stats);
        state.violation = phi;
        state.log.push(IterationRecord {
            t: state.t,
            phi,
            objective: problem.metric.distance(&x_hat, factual),
            master_objective,
            partitions: state.tightening.as_ref().map(|s| s.m_t),
            master: master_stats,
            adversary: adversary_stats,
        });
        log::debug!("t = {}: phi = {phi:e}, distance = {}", state.t, problem.metric.distance(&x_hat, factual));
        if baseline || phi <= config.epsilon {
            break if phi <= ZERO_VIOLATION_TOL { Outcome::Robust } else { Outcome::EarlyStop };
        }
        if runner.remaining() <= 0.0 {
            break Outcome::Timeout;
        }
        state.scenarios.push(delta);
        if let Some(tight) = &state.tightening {
            state.tightening = Some(tighten(tight, &x_hat));
        }
        state.t += 1;
    };

    let iterations = state.scenarios.len();
    let counterfactual = if outcome == Outcome::Infeasible { Vec::new() } else { best.unwrap_or_default() };
    let distance = if counterfactual.is_empty() {
        f64::NAN
    } else {
        problem.metric.distance(&counterfactual, factual)
    };
    let coverage = match outcome {
        Outcome::Robust => Some(1.0),
        Outcome::EarlyStop => Some(runner.coverage(&counterfactual)?),
        _ => None,
    };
    stats.wall_time = runner.start.elapsed().as_secs_f64();
    Ok(RecourseResult {
        factual: factual.to_vec(),
        counterfactual,
        distance,
        iterations,
        outcome,
        coverage,
        violation_final: state.violation,
        log: state.log,
        stats,
        wall_time: stats.wall_time,
    })
}

/// Every master iterate must satisfy the scenarios collected so far.
fn check_history(problem: &RecourseProblem, scenarios: &[Vec<f64>], x: &[f64], tau_prime: f64) {
    let worst = crate::solve::local::mp_violation(&problem.expansion, x, scenarios, tau_prime);
    if worst > 1e-6 {
        log::warn!("master iterate violates collected scenarios by {worst:e}");
    }
}

impl Runner<'_> {
    fn coverage(&self, x: &[f64]) -> Result<f64> {
        let gamma = self.config.gamma;
        let tol = self.config.coverage_tol * gamma;
        let mut lo = 0.0;
        let mut hi = gamma;
        if self.tau_prime - self.problem.expansion.h(x) > ZERO_VIOLATION_TOL {
            return Ok(0.0);
        }
        if self.adversary(x, gamma, 0)?.0 <= ZERO_VIOLATION_TOL {
            return Ok(1.0);
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.adversary(x, mid, 0)?.0 <= ZERO_VIOLATION_TOL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo / gamma)
    }
}

/// `γ̃/γ` for a given point: the largest budget at which the worst-case
/// violation is non-positive, found by bisection.
pub fn coverage_ratio(
    problem: &RecourseProblem,
    x: &[f64],
    config: &RecourseConfig,
) -> Result<f64> {
    config.validate()?;
    if x.len() != problem.n() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coverage point".into()));
    }
    let runner = Runner {
        problem,
        config,
        start: Instant::now(),
        tau_prime: log_threshold(config.tau)?,
        search_box: problem.bounds.hull_with(x),
    };
    runner.coverage(x)
}

/// Largest `τ′ − H(x + δ)` over `samples` uniform draws from the set
/// (plus `δ = 0`).
pub fn monte_carlo_violation(
    exp: &ExpandedForm,
    uset: &UncertaintySet,
    x: &[f64],
    tau_prime: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = tau_prime - exp.h(x);
    let mut v = vec![0.0; x.len()];
    for _ in 0..samples {
        let d = uset.sample(&mut rng);
        for j in 0..x.len() {
            v[j] = x[j] + d[j];
        }
        worst = worst.max(tau_prime - exp.h(&v));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgnc::tests::two_gaussians;

    fn one_d_problem() -> RecourseProblem {
        let bounds = FeatureBounds::new(vec![-3.0], vec![5.0]).unwrap();
        RecourseProblem::with_metric(two_gaussians(), WhitenedMetric::identity(1, NormOrder::LInf), bounds).unwrap()
    }

    fn config(backend: Backend) -> RecourseConfig {
        RecourseConfig {
            backend,
            milp: MilpParams {
                gap_tol: 1e-9,
                abs_gap_tol: 1e-9,
                ..MilpParams::default()
            },
            ..RecourseConfig::default()
        }
    }

    #[test]
    fn one_d_robust_point_matches_closed_form() {
        let problem = one_d_problem();
        for backend in [Backend::Milp, Backend::Local] {
            let cfg = config(backend);
            let r = find_counterfactual(&problem, &[0.0], &cfg).unwrap();
            // H(x) = 2x − 2 and τ′ = 0: robust point x = 1 + γ
            let expected = 1.0 + cfg.gamma;
            assert!(r.iterations <= 3, "{backend}: {} iterations", r.iterations);
            assert!(matches!(r.outcome, Outcome::Robust | Outcome::EarlyStop), "{backend}: {:?}", r.outcome);
            assert!((r.counterfactual[0] - expected).abs() < 1e-4, "{backend}: {:?}", r.counterfactual);
            assert_eq!(r.iterations, r.log.len());
        }
    }

    #[test]
    fn baseline_hits_boundary() {
        let problem = one_d_problem();
        for backend in [Backend::Milp, Backend::Local] {
            let cfg = RecourseConfig { tau: 0.75, ..config(backend) };
            let r = baseline_counterfactual(&problem, &[0.0], &cfg).unwrap();
            let expected = (3f64.ln() + 2.0) / 2.0;
            assert!((r.counterfactual[0] - expected).abs() < 1e-4, "{backend}: {:?}", r.counterfactual);
            assert_eq!(r.iterations, 1);
            let robust = find_counterfactual(&problem, &[0.0], &cfg).unwrap();
            assert!(r.distance <= robust.distance + 1e-9);
        }
    }

    #[test]
    fn tiny_gamma_stops_after_first_adversary() {
        let problem = one_d_problem();
        let cfg = RecourseConfig { gamma: 1e-12, ..config(Backend::Local) };
        let r = find_counterfactual(&problem, &[0.0], &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.violation_final <= cfg.epsilon);
    }

    #[test]
    fn model_box_covers_both_classes() {
        let b = model_bounds(&two_gaussians(), 3.0).unwrap();
        assert_eq!(b.lower, vec![-3.0]);
        assert_eq!(b.upper, vec![5.0]);
    }

    #[test]
    fn rejects_positive_factual() {
        let problem = one_d_problem();
        let err = find_counterfactual(&problem, &[3.0], &config(Backend::Local)).unwrap_err();
        assert!(matches!(err, Error::AlreadyPositive { .. }));
    }

    #[test]
    fn infeasible_when_threshold_unreachable() {
        let model = crate::cgnc::tests::symmetric_model(1);
        let bounds = FeatureBounds::new(vec![-1.0], vec![1.0]).unwrap();
        let problem = RecourseProblem::with_metric(model, WhitenedMetric::identity(1, NormOrder::LInf), bounds).unwrap();
        for backend in [Backend::Milp, Backend::Local] {
            let cfg = RecourseConfig { tau: 0.6, ..config(backend) };
            let r = find_counterfactual(&problem, &[0.0], &cfg).unwrap();
            assert_eq!(r.outcome, Outcome::Infeasible);
            assert!(r.counterfactual.is_empty());
        }
    }

    #[test]
    fn coverage_of_half_robust_point() {
        // x = 1 + γ/2 is robust exactly up to radius γ/2
        let problem = one_d_problem();
        let cfg = config(Backend::Local);
        let ratio = coverage_ratio(&problem, &[1.0 + cfg.gamma / 2.0], &cfg).unwrap();
        assert!((ratio - 0.5).abs() <= cfg.coverage_tol + 1e-12, "{ratio}");
        assert_eq!(coverage_ratio(&problem, &[1.5], &cfg).unwrap(), 1.0);
        let cfg_milp = config(Backend::Milp);
        let ratio = coverage_ratio(&problem, &[1.0 + cfg.gamma / 2.0], &cfg_milp).unwrap();
        assert!((ratio - 0.5).abs() <= cfg.coverage_tol + 1e-9, "{ratio}");
    }

    #[test]
    fn constant_violation_has_zero_coverage() {
        let model = crate::cgnc::tests::symmetric_model(1);
        let bounds = FeatureBounds::new(vec![-1.0], vec![1.0]).unwrap();
        let problem = RecourseProblem::with_metric(model, WhitenedMetric::identity(1, NormOrder::LInf), bounds).unwrap();
        // H ≡ 0 and τ′ = ln 3 > 0: violated at every radius
        let cfg = RecourseConfig { tau: 0.75, ..config(Backend::Local) };
        assert_eq!(coverage_ratio(&problem, &[0.0], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn robust_point_passes_sampling_oracle() {
        let problem = one_d_problem();
        let cfg = config(Backend::Milp);
        let r = find_counterfactual(&problem, &[0.0], &cfg).unwrap();
        let uset = UncertaintySet::new(problem.metric.clone(), cfg.gamma).unwrap();
        let worst = monte_carlo_violation(&problem.expansion, &uset, &r.counterfactual, 0.0, 100_000, 4);
        assert!(worst <= cfg.epsilon + 1e-6);
    }
}
