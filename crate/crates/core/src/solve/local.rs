//! Multi-start local search for the original (unrelaxed) master and
//! adversarial problems, plus the sequential-LP polish that turns an
//! approximate master iterate into a truly feasible one.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::FeatureBounds;
use crate::error::{Error, Result};
use crate::expansion::ExpandedForm;
use crate::metric::{project_ball, NormOrder, UncertaintySet, WhitenedMetric};
use crate::milp::{MilpModel, ObjectiveSense, Sense, VarId};

use super::simplex::{solve_lp, LpStatus};
use super::{SolveResult, SolveStats, SolveStatus};

/// Scenario constraints count as satisfied above `τ′ − FEAS_TOL`.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalParams {
    pub starts: usize,
    pub seed: u64,
    pub rho_schedule: Vec<f64>,
    /// Gradient iterations per start (and per penalty level).
    pub max_iter: usize,
}

impl Default for LocalParams {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            rho_schedule: vec![1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
            max_iter: 300,
        }
    }
}

fn wt_vec(metric: &WhitenedMetric, v: &[f64]) -> Vec<f64> {
    let w = metric.whitener();
    (0..w.ncols())
        .map(|j| (0..w.nrows()).map(|i| w[(i, j)] * v[i]).sum())
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Projected gradient ascent with Barzilai-Borwein steps and a backtracking
/// line search. `f` returns the value and gradient; `project` maps onto the
/// feasible set in place.
fn projected_ascent(
    start: Vec<f64>,
    max_iter: usize,
    f: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    project: &dyn Fn(&mut [f64]),
) -> (Vec<f64>, f64) {
    let mut x = start;
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut step = 1.0;
    for _ in 0..max_iter {
        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + trial_step * b).collect();
            project(&mut y);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let (fy, gy) = f(&y);
            if fy >= fx + 1e-4 * decrease && fy >= fx {
                accepted = Some((y, fy, gy, d));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((y, fy, gy, d)) = accepted else { break };
        let moved = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // BB step from the change in gradient (ascent: curvature sign flipped)
        let dg: Vec<f64> = gy.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sd: f64 = d.iter().zip(&dg).map(|(a, b)| a * b).sum();
        let ss: f64 = d.iter().map(|v| v * v).sum();
        step = if sd < -1e-300 { (ss / -sd).clamp(1e-12, 1e12) } else { (trial_step * 4.0).min(1e12) };
        let gain = fy - fx;
        x = y;
        fx = fy;
        g = gy;
        if moved <= 1e-13 * scale || gain.abs() <= 1e-15 * (1.0 + fx.abs()) && moved <= 1e-9 * scale {
            break;
        }
    }
    (x, fx)
}

/// Local maximization of `τ′ − H(x̂ + δ)` over the uncertainty set, from
/// `δ = 0` and `starts − 1` seeded random points of the set.
pub fn solve_local_ap(
    exp: &ExpandedForm,
    uset: &UncertaintySet,
    x_hat: &[f64],
    tau_prime: f64,
    params: &LocalParams,
) -> Result<SolveResult> {
    let n = exp.n();
    if x_hat.len() != n || uset.metric().n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x_hat.len() });
    }
    if params.starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    let start_time = Instant::now();
    let metric = uset.metric();
    let gamma = uset.gamma();
    let p = metric.p();
    // work in u = Wδ, where the set is a plain ℓp ball
    let objective = |u: &[f64]| -> (f64, Vec<f64>) {
        let v = add(x_hat, &metric.unwhiten(u));
        let grad = metric.whiten_dual(&exp.grad_h(&v));
        (tau_prime - exp.h(&v), grad.iter().map(|g| -g).collect())
    };
    let project = |u: &mut [f64]| project_ball(u, p, gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in 0..params.starts {
        let u0 = if s == 0 { vec![0.0; n] } else { crate::metric::sample_ball(n, p, gamma, &mut rng) };
        let (u, value) = projected_ascent(u0, params.max_iter * 4, &objective, &project);
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((u, value));
        }
    }
    let (u, _) = best.expect("at least one start");
    let delta = metric.unwhiten(&u);
    let objective = tau_prime - exp.h(&add(x_hat, &delta));
    Ok(SolveResult {
        status: SolveStatus::Feasible,
        objective,
        assignment: delta,
        bound: f64::NAN,
        gap: f64::NAN,
        stats: SolveStats {
            nodes: params.starts,
            simplex_iterations: 0,
            wall_time: start_time.elapsed().as_secs_f64(),
        },
    })
}

/// Smoothed distance `‖W(x − x_fac)‖_p` and its gradient in whitened
/// coordinates.
fn smooth_norm(p: NormOrder, u: &[f64], mu: f64) -> (f64, Vec<f64>) {
    match p {
        NormOrder::L1 => {
            let r: Vec<f64> = u.iter().map(|v| (v * v + mu * mu).sqrt()).collect();
            (r.iter().sum(), u.iter().zip(&r).map(|(v, r)| v / r).collect())
        }
        NormOrder::L2 => {
            let r = (u.iter().map(|v| v * v).sum::<f64>() + mu * mu).sqrt();
            (r, u.iter().map(|v| v / r).collect())
        }
        NormOrder::LInf => {
            let top = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let weights: Vec<(f64, f64)> = u
                .iter()
                .map(|v| (((v - top) / mu).exp(), ((-v - top) / mu).exp()))
                .collect();
            let total: f64 = weights.iter().map(|(a, b)| a + b).sum();
            (
                top + mu * total.ln(),
                weights.iter().map(|(a, b)| (a - b) / total).collect(),
            )
        }
    }
}

fn min_margin(exp: &ExpandedForm, x: &[f64], scenarios: &[Vec<f64>], tau_prime: f64) -> f64 {
    scenarios
        .iter()
        .map(|d| exp.h(&add(x, d)) - tau_prime)
        .fold(f64::INFINITY, f64::min)
}

/// Local minimization of the distance to `factual` subject to
/// `H(x + δ̂) ≥ τ′` for every scenario, over `bounds`. Each start runs an
/// exact-penalty descent followed by [`polish_mp`]; the nearest truly
/// feasible point wins. Reports `Infeasible` when no start reaches
/// feasibility, with the best residual violation as the objective.
#[allow(clippy::too_many_arguments)]
pub fn solve_local_mp(
    exp: &ExpandedForm,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    bounds: &FeatureBounds,
    tau_prime: f64,
    params: &LocalParams,
) -> Result<SolveResult> {
    let n = exp.n();
    check_mp_inputs(n, metric, factual, scenarios, bounds)?;
    if params.starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    let start_time = Instant::now();
    let p = metric.p();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let width: Vec<f64> = (0..n).map(|j| bounds.upper[j] - bounds.lower[j]).collect();
    let project = |x: &mut [f64]| {
        for j in 0..n {
            x[j] = x[j].clamp(bounds.lower[j], bounds.upper[j]);
        }
    };
    let scale = 1.0 + metric.box_radius(bounds);
    let mu = 1e-6 * scale;

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut best_violation = f64::INFINITY;
    let mut lp_iterations = 0;
    for s in 0..params.starts {
        let mut x: Vec<f64> = if s == 0 {
            factual.to_vec()
        } else {
            (0..n).map(|j| factual[j] + 0.25 * width[j] * rng.random_range(-1.0..=1.0)).collect()
        };
        project(&mut x);
        for &rho in &params.rho_schedule {
            let penalty = |x: &[f64]| -> (f64, Vec<f64>) {
                let diff: Vec<f64> = x.iter().zip(factual).map(|(a, b)| a - b).collect();
                let (d, gu) = smooth_norm(p, &metric.whiten(&diff), mu);
                let mut value = d;
                let mut grad = wt_vec(metric, &gu);
                for delta in scenarios {
                    let v = add(x, delta);
                    let r = tau_prime - exp.h(&v);
                    if r > 0.0 {
                        value += rho * r * r;
                        for (g, h) in grad.iter_mut().zip(exp.grad_h(&v)) {
                            *g -= 2.0 * rho * r * h;
                        }
                    }
                }
                (-value, grad.iter().map(|g| -g).collect())
            };
            x = projected_ascent(x, params.max_iter, &penalty, &project).0;
        }
        let (polished, iters) = polish_with_stats(exp, metric, factual, scenarios, bounds, tau_prime, &x);
        lp_iterations += iters;
        match polished {
            Some(xp) => {
                let d = metric.distance(&xp, factual);
                if best.as_ref().is_none_or(|(_, b)| d < *b) {
                    best = Some((xp, d));
                }
            }
            None => {
                best_violation = best_violation.min(-min_margin(exp, &x, scenarios, tau_prime));
            }
        }
    }
    let stats = SolveStats {
        nodes: params.starts,
        simplex_iterations: lp_iterations,
        wall_time: start_time.elapsed().as_secs_f64(),
    };
    Ok(match best {
        Some((x, d)) => SolveResult {
            status: SolveStatus::Feasible,
            objective: d,
            assignment: x,
            bound: f64::NAN,
            gap: f64::NAN,
            stats,
        },
        None => {
            log::debug!("local MP found no feasible point; best violation {best_violation:e}");
            SolveResult {
                objective: best_violation,
                ..SolveResult::without_solution(SolveStatus::Infeasible, stats)
            }
        }
    })
}

fn check_mp_inputs(
    n: usize,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    bounds: &FeatureBounds,
) -> Result<()> {
    if scenarios.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    for len in [metric.n(), factual.len(), bounds.len()]
        .into_iter()
        .chain(scenarios.iter().map(Vec::len))
    {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    Ok(())
}

/// One linearized master subproblem around `x`: minimize the distance model
/// plus `merit · Σ v_s` subject to `H_s + g_s·d + v_s ≥ τ′ + margin`,
/// `|d_j| ≤ radius_j` and the box. Returns the step, the model value and
/// the LP iteration count.
#[allow(clippy::too_many_arguments)]
fn slp_step(
    exp: &ExpandedForm,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    bounds: &FeatureBounds,
    tau_prime: f64,
    x: &[f64],
    radius: &[f64],
    merit: Option<f64>,
    margin: f64,
) -> Option<(Vec<f64>, f64, usize)> {
    let n = x.len();
    let mut lp = MilpModel::new("slp", ObjectiveSense::Minimize);
    let d: Vec<VarId> = (0..n)
        .map(|j| {
            let lo = (bounds.lower[j] - x[j]).max(-radius[j]).min(0.0);
            let hi = (bounds.upper[j] - x[j]).min(radius[j]).max(0.0);
            lp.add_continuous(format!("d{j}"), lo, hi)
        })
        .collect();
    let mut objective: Vec<(VarId, f64)> = Vec::new();
    let diff: Vec<f64> = x.iter().zip(factual).map(|(a, b)| a - b).collect();
    let u0 = metric.whiten(&diff);
    let w = metric.whitener();
    // generous bound for epigraph variables
    let cap = 10.0 * (1.0 + metric.box_radius(bounds) + NormOrder::L1.norm(&u0));
    match merit {
        // feasibility restoration: minimize Σ|d_j|
        None => {
            for j in 0..n {
                let s = lp.add_continuous(format!("a{j}"), 0.0, cap);
                lp.add_constraint(format!("ap{j}"), vec![(s, 1.0), (d[j], -1.0)], Sense::Ge, 0.0);
                lp.add_constraint(format!("an{j}"), vec![(s, 1.0), (d[j], 1.0)], Sense::Ge, 0.0);
                objective.push((s, 1.0 / radius[j].max(1e-300)));
            }
        }
        Some(_) => match metric.p() {
            NormOrder::LInf | NormOrder::L1 => {
                let single = metric.p() == NormOrder::LInf;
                let t_single = single.then(|| lp.add_continuous("t", 0.0, cap));
                for i in 0..n {
                    let t = t_single.unwrap_or_else(|| lp.add_continuous(format!("s{i}"), 0.0, cap));
                    if !single {
                        objective.push((t, 1.0));
                    }
                    let row: Vec<(VarId, f64)> = (0..n).map(|j| (d[j], w[(i, j)])).collect();
                    let mut pos = vec![(t, 1.0)];
                    pos.extend(row.iter().map(|&(v, a)| (v, -a)));
                    lp.add_constraint(format!("np{i}"), pos, Sense::Ge, u0[i]);
                    let mut neg = vec![(t, 1.0)];
                    neg.extend(row.iter().copied());
                    lp.add_constraint(format!("nn{i}"), neg, Sense::Ge, -u0[i]);
                }
                if let Some(t) = t_single {
                    objective.push((t, 1.0));
                }
            }
            NormOrder::L2 => {
                let norm = NormOrder::L2.norm(&u0);
                if norm > 0.0 {
                    let g = wt_vec(metric, &u0.iter().map(|v| v / norm).collect::<Vec<_>>());
                    objective.extend(d.iter().zip(&g).map(|(&v, &c)| (v, c)));
                }
            }
        },
    }
    let mut constant = 0.0;
    if metric.p() == NormOrder::L2 && merit.is_some() {
        constant = NormOrder::L2.norm(&u0);
    }
    for (s, delta) in scenarios.iter().enumerate() {
        let v = add(x, delta);
        let hs = exp.h(&v);
        let gs = exp.grad_h(&v);
        let mut row: Vec<(VarId, f64)> = d.iter().zip(&gs).map(|(&v, &c)| (v, c)).collect();
        if let Some(mu) = merit {
            let slack = lp.add_continuous(format!("v{s}"), 0.0, (tau_prime - hs).max(0.0) + 1.0);
            objective.push((slack, mu));
            row.push((slack, 1.0));
        }
        lp.add_constraint(format!("h{s}"), row, Sense::Ge, tau_prime + margin - hs);
    }
    lp.set_objective(objective, constant);
    let bounds_vec: Vec<(f64, f64)> = lp.variables.iter().map(|v| (v.lower, v.upper)).collect();
    let sol = solve_lp(&lp, &bounds_vec);
    if sol.status != LpStatus::Optimal {
        return None;
    }
    Some((d.iter().map(|v| sol.x[v.0]).collect(), sol.objective, sol.iterations))
}

fn exact_merit(
    exp: &ExpandedForm,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    tau_prime: f64,
    x: &[f64],
    mu: f64,
) -> f64 {
    let violation: f64 = scenarios
        .iter()
        .map(|d| (tau_prime - exp.h(&add(x, d))).max(0.0))
        .sum();
    metric.distance(x, factual) + mu * violation
}

/// Sequential-LP refinement of an approximate master solution: a
/// trust-region SLP on the ℓ1 exact-penalty merit, followed by Newton-type
/// restoration until every scenario constraint holds. The search stays
/// inside `bounds`. Returns `None` when feasibility cannot be restored.
pub fn polish_mp(
    exp: &ExpandedForm,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    bounds: &FeatureBounds,
    tau_prime: f64,
    start: &[f64],
) -> Result<Option<Vec<f64>>> {
    check_mp_inputs(exp.n(), metric, factual, scenarios, bounds)?;
    Ok(polish_with_stats(exp, metric, factual, scenarios, bounds, tau_prime, start).0)
}

fn polish_with_stats(
    exp: &ExpandedForm,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    bounds: &FeatureBounds,
    tau_prime: f64,
    start: &[f64],
) -> (Option<Vec<f64>>, usize) {
    let n = start.len();
    let mut iterations = 0;
    let mut x = start.to_vec();
    bounds.clamp(&mut x);
    let width: Vec<f64> = (0..n)
        .map(|j| (bounds.upper[j] - bounds.lower[j]).max(1e-12 * (1.0 + x[j].abs())))
        .collect();
    let mut delta = 0.1;
    let mut mu = 10.0;
    for _round in 0..8 {
        for _ in 0..200 {
            let radius: Vec<f64> = width.iter().map(|w| w * delta).collect();
            let Some((d, model_value, it)) =
                slp_step(exp, metric, factual, scenarios, bounds, tau_prime, &x, &radius, Some(mu), 0.0)
            else {
                break;
            };
            iterations += it;
            let current = exact_merit(exp, metric, factual, scenarios, tau_prime, &x, mu);
            let predicted = current - model_value;
            if predicted <= 1e-13 * (1.0 + current.abs()) {
                break;
            }
            let mut trial = add(&x, &d);
            bounds.clamp(&mut trial);
            let actual = current - exact_merit(exp, metric, factual, scenarios, tau_prime, &trial, mu);
            let ratio = actual / predicted;
            if ratio > 0.1 {
                let at_edge = d.iter().zip(&radius).any(|(a, r)| a.abs() >= 0.99 * r);
                x = trial;
                if ratio > 0.75 && at_edge {
                    delta = (delta * 2.0).min(1.0);
                }
            } else {
                delta *= 0.25;
            }
            if delta < 1e-12 {
                break;
            }
        }
        if min_margin(exp, &x, scenarios, tau_prime) >= -1e-7 {
            break;
        }
        // constraints still clearly violated: raise the penalty weight
        mu *= 10.0;
        delta = delta.max(1e-3);
    }

    // restoration: minimal linearized moves until all constraints hold
    for _ in 0..30 {
        let worst = min_margin(exp, &x, scenarios, tau_prime);
        if worst >= 0.0 {
            return (Some(x), iterations);
        }
        let radius: Vec<f64> = width.iter().map(|w| w * 0.5).collect();
        let margin = 1e-12 * (1.0 + tau_prime.abs()) + 0.5 * (-worst).min(1e-9);
        let Some((d, _, it)) =
            slp_step(exp, metric, factual, scenarios, bounds, tau_prime, &x, &radius, None, margin)
        else {
            return (None, iterations);
        };
        iterations += it;
        let mut next = add(&x, &d);
        bounds.clamp(&mut next);
        if inf_dist(&next, &x) == 0.0 {
            // no representable move left; accept tiny residuals only
            return ((worst >= -FEAS_TOL).then_some(x), iterations);
        }
        x = next;
    }
    let ok = min_margin(exp, &x, scenarios, tau_prime) >= -FEAS_TOL;
    (ok.then_some(x), iterations)
}

/// Residual `τ′ − min_s H(x + δ̂_s)` (negative when strictly feasible).
pub fn mp_violation(exp: &ExpandedForm, x: &[f64], scenarios: &[Vec<f64>], tau_prime: f64) -> f64 {
    -min_margin(exp, x, scenarios, tau_prime)
}
