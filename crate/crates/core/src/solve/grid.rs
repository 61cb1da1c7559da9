//! Exhaustive grid search, used as a verification oracle on small instances.

use std::time::Instant;

use crate::data::FeatureBounds;
use crate::error::{Error, Result};
use crate::expansion::ExpandedForm;
use crate::metric::{UncertaintySet, WhitenedMetric};

use super::{SolveResult, SolveStats, SolveStatus};

pub const MAX_GRID_DIM: usize = 4;

fn axis(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    if resolution == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let mut pts: Vec<f64> = (0..resolution)
        .map(|r| lo + (hi - lo) * r as f64 / (resolution - 1) as f64)
        .collect();
    pts[resolution - 1] = hi;
    pts
}

/// Calls `visit` on every point of the tensor grid; returns the point count.
fn for_each_point(bounds: &FeatureBounds, resolution: usize, mut visit: impl FnMut(&[f64])) -> Result<usize> {
    let n = bounds.len();
    if n > MAX_GRID_DIM {
        return Err(Error::InvalidArgument(format!(
            "grid oracle supports at most {MAX_GRID_DIM} features, got {n}"
        )));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    let axes: Vec<Vec<f64>> = (0..n).map(|j| axis(bounds.lower[j], bounds.upper[j], resolution)).collect();
    let total = resolution.pow(n as u32);
    let mut point = vec![0.0; n];
    for idx in 0..total {
        let mut rest = idx;
        for j in 0..n {
            point[j] = axes[j][rest % resolution];
            rest /= resolution;
        }
        visit(&point);
    }
    Ok(total)
}

fn result(best: Option<(Vec<f64>, f64)>, points: usize, start: Instant) -> SolveResult {
    let stats = SolveStats {
        nodes: points,
        simplex_iterations: 0,
        wall_time: start.elapsed().as_secs_f64(),
    };
    match best {
        Some((x, v)) => SolveResult {
            status: SolveStatus::Feasible,
            objective: v,
            assignment: x,
            bound: f64::NAN,
            gap: f64::NAN,
            stats,
        },
        None => SolveResult::without_solution(SolveStatus::Infeasible, stats),
    }
}

/// Nearest grid point of `bounds` satisfying `H(x + δ̂) ≥ τ′` for every
/// scenario. Ties keep the first point in grid order.
pub fn solve_grid_mp(
    exp: &ExpandedForm,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    bounds: &FeatureBounds,
    tau_prime: f64,
    resolution: usize,
) -> Result<SolveResult> {
    if scenarios.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    let start = Instant::now();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut v = vec![0.0; exp.n()];
    let points = for_each_point(bounds, resolution, |x| {
        let feasible = scenarios.iter().all(|d| {
            for j in 0..x.len() {
                v[j] = x[j] + d[j];
            }
            exp.h(&v) >= tau_prime
        });
        if feasible {
            let dist = metric.distance(x, factual);
            if best.as_ref().is_none_or(|(_, b)| dist < *b) {
                best = Some((x.to_vec(), dist));
            }
        }
    })?;
    Ok(result(best, points, start))
}

/// Largest `τ′ − H(x̂ + δ)` over grid points of the coordinate extent that lie
/// in the uncertainty set. `δ = 0` is always evaluated.
pub fn solve_grid_ap(
    exp: &ExpandedForm,
    uset: &UncertaintySet,
    x_hat: &[f64],
    tau_prime: f64,
    resolution: usize,
) -> Result<SolveResult> {
    let start = Instant::now();
    let n = exp.n();
    let zero = vec![0.0; n];
    let mut best = Some((zero.clone(), tau_prime - exp.h(x_hat)));
    let mut v = vec![0.0; n];
    let points = for_each_point(&uset.coordinate_extent(), resolution, |d| {
        if !uset.contains(d, 1e-12 * uset.gamma()) {
            return;
        }
        for j in 0..n {
            v[j] = x_hat[j] + d[j];
        }
        let value = tau_prime - exp.h(&v);
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((d.to_vec(), value));
        }
    })?;
    Ok(result(best, points, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgnc::tests::two_gaussians;
    use crate::expansion::build_expansion;
    use crate::metric::NormOrder;

    #[test]
    fn counts_points() {
        let b = FeatureBounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut seen = Vec::new();
        let count = for_each_point(&b, 3, |x| seen.push(x.to_vec())).unwrap();
        assert_eq!(count, 9);
        assert!(seen.contains(&vec![0.5, 1.0]));
        let too_big = FeatureBounds::new(vec![0.0; 5], vec![1.0; 5]).unwrap();
        assert!(for_each_point(&too_big, 2, |_| {}).is_err());
    }

    #[test]
    fn converges_to_one_d_boundary() {
        let exp = build_expansion(&two_gaussians());
        let metric = WhitenedMetric::identity(1, NormOrder::LInf);
        let bounds = FeatureBounds::new(vec![-4.0], vec![6.0]).unwrap();
        let tp = 0.3;
        let exact = (tp + 2.0) / 2.0;
        for res in [11, 101, 1001, 10001] {
            let r = solve_grid_mp(&exp, &metric, &[0.0], &[vec![0.0]], &bounds, tp, res).unwrap();
            let step = 10.0 / (res - 1) as f64;
            assert!(r.objective >= exact - 1e-12 && r.objective <= exact + step + 1e-12);
        }
    }

    #[test]
    fn refinement_never_worsens() {
        let exp = build_expansion(&two_gaussians());
        let metric = WhitenedMetric::identity(1, NormOrder::LInf);
        let bounds = FeatureBounds::new(vec![-4.0], vec![6.0]).unwrap();
        let uset = UncertaintySet::new(metric.clone(), 0.3).unwrap();
        let mut prev_mp = f64::INFINITY;
        let mut prev_ap = f64::NEG_INFINITY;
        let mut res = 5;
        for _ in 0..6 {
            let mp = solve_grid_mp(&exp, &metric, &[0.0], &[vec![0.0], vec![-0.1]], &bounds, 0.7, res).unwrap();
            let ap = solve_grid_ap(&exp, &uset, &[1.2], 0.7, res).unwrap();
            assert!(mp.objective <= prev_mp);
            assert!(ap.objective >= prev_ap);
            prev_mp = mp.objective;
            prev_ap = ap.objective;
            res = 2 * res - 1;
        }
    }
}
