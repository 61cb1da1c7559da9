//! Best-first branch and bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use crate::error::Result;
use crate::milp::{MilpModel, ObjectiveSense, VarKind};

use super::simplex::{LpEngine, LpState, LpStatus};
use super::{relative_gap, SolveResult, SolveStats, SolveStatus};

const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpParams {
    /// Relative gap at which the search stops.
    pub gap_tol: f64,
    /// Absolute gap at which the search stops; guards objectives near zero.
    pub abs_gap_tol: f64,
    pub node_limit: usize,
    /// Seconds.
    pub time_limit: f64,
    /// Upper limit on memory held by stored parent tableaux.
    pub warm_start_bytes: usize,
}

impl Default for MilpParams {
    fn default() -> Self {
        Self {
            gap_tol: 0.01,
            abs_gap_tol: 1e-6,
            node_limit: 1_000_000,
            time_limit: 3600.0,
            warm_start_bytes: 256 << 20,
        }
    }
}

struct Node {
    /// Parent LP value in minimisation form.
    bound: f64,
    depth: usize,
    id: usize,
    bounds: Vec<(f64, f64)>,
    warm: Option<Rc<LpState>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Max-heap order: smallest bound first, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Solves a MILP to the configured gap. Deterministic for fixed inputs
/// unless the time limit interrupts the search.
pub fn solve_milp(model: &MilpModel, params: &MilpParams) -> Result<SolveResult> {
    model.validate()?;
    let start = Instant::now();
    let sign = match model.objective.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    let engine = LpEngine::new(model);
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let root_bounds: Vec<(f64, f64)> = model
        .variables
        .iter()
        .map(|v| match v.kind {
            VarKind::Binary => (v.lower.ceil(), v.upper.floor()),
            VarKind::Continuous => (v.lower, v.upper),
        })
        .collect();

    let mut stats = SolveStats::default();
    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        id: next_id,
        bounds: root_bounds,
        warm: None,
    });
    next_id += 1;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    // smallest bound among nodes discarded by the cutoff test
    let mut pruned_bound = f64::INFINITY;
    let mut unbounded = false;
    let mut interrupted = false;
    let mut warm_nodes = 0usize;

    let cutoff = |inc: &Option<(f64, Vec<f64>)>| -> f64 {
        inc.as_ref().map_or(f64::INFINITY, |(v, _)| {
            v - (params.gap_tol * v.abs().max(1e-9)).max(params.abs_gap_tol)
        })
    };

    while let Some(node) = heap.pop() {
        if node.warm.is_some() {
            warm_nodes -= 1;
        }
        if node.bound >= cutoff(&incumbent) {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }
        if stats.nodes >= params.node_limit || start.elapsed().as_secs_f64() > params.time_limit {
            heap.push(node);
            interrupted = true;
            break;
        }
        stats.nodes += 1;
        let (lp, state) = engine.solve(&node.bounds, node.warm.as_deref());
        stats.simplex_iterations += lp.iterations;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                unbounded = true;
                break;
            }
            LpStatus::IterationLimit => {
                log::warn!("LP iteration limit at node {}; node dropped", node.id);
                pruned_bound = pruned_bound.min(node.bound);
                continue;
            }
            LpStatus::Optimal => {}
        }
        let value = sign * lp.objective;
        if value >= cutoff(&incumbent) {
            pruned_bound = pruned_bound.min(value);
            continue;
        }
        let branch = binaries
            .iter()
            .map(|&b| (b, (lp.x[b] - lp.x[b].round()).abs()))
            .filter(|&(_, frac)| frac > INTEGRALITY_TOL)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match branch {
            None => {
                // integral: fix binaries and re-solve to clean up continuous values
                let mut fixed = node.bounds.clone();
                for &b in &binaries {
                    let v = lp.x[b].round();
                    fixed[b] = (v, v);
                }
                let (clean, _) = engine.solve(&fixed, Some(&state));
                stats.simplex_iterations += clean.iterations;
                let (obj, mut x) = if clean.status == LpStatus::Optimal {
                    (sign * clean.objective, clean.x)
                } else {
                    (value, lp.x.clone())
                };
                for &b in &binaries {
                    x[b] = x[b].round();
                }
                let better = incumbent.as_ref().is_none_or(|(v, _)| obj < *v);
                if better {
                    log::debug!("node {}: incumbent {}", node.id, sign * obj);
                    incumbent = Some((obj, x));
                }
            }
            Some((b, _)) => {
                let state_bytes = state.memory_bytes().max(1);
                let warm = if (warm_nodes + 2) * state_bytes <= params.warm_start_bytes {
                    warm_nodes += 2;
                    Some(Rc::new(state))
                } else {
                    None
                };
                for v in [0.0, 1.0] {
                    let mut bounds = node.bounds.clone();
                    bounds[b] = (v, v);
                    heap.push(Node {
                        bound: value,
                        depth: node.depth + 1,
                        id: next_id,
                        bounds,
                        warm: warm.clone(),
                    });
                    next_id += 1;
                }
            }
        }
    }
    stats.wall_time = start.elapsed().as_secs_f64();

    if unbounded {
        return Ok(SolveResult::without_solution(SolveStatus::Unbounded, stats));
    }
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let Some((inc_value, assignment)) = incumbent else {
        let status = if interrupted { SolveStatus::IterationLimit } else { SolveStatus::Infeasible };
        let mut r = SolveResult::without_solution(status, stats);
        if interrupted {
            r.bound = sign * open_bound.min(pruned_bound);
        }
        return Ok(r);
    };
    let bound = open_bound.min(pruned_bound).min(inc_value);
    let gap = relative_gap(inc_value, bound);
    let status = if interrupted {
        SolveStatus::IterationLimit
    } else {
        SolveStatus::Optimal
    };
    Ok(SolveResult {
        status,
        objective: model.objective_value(&assignment),
        assignment,
        bound: sign * bound,
        gap,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::milp::{Sense, VarId};

    fn exact() -> MilpParams {
        MilpParams {
            gap_tol: 0.0,
            abs_gap_tol: 1e-9,
            ..MilpParams::default()
        }
    }

    #[test]
    fn pure_lp() {
        let mut m = MilpModel::new("lp", ObjectiveSense::Minimize);
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        m.set_objective(vec![(x, 1.0)], 0.0);
        let r = solve_milp(&m, &MilpParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_toy() {
        let mut m = MilpModel::new("knap", ObjectiveSense::Maximize);
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("cap", vec![(a, 3.0), (b, 2.0)], Sense::Le, 4.0);
        m.set_objective(vec![(a, 5.0), (b, 4.0)], 0.0);
        let r = solve_milp(&m, &exact()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, 5.0);
        assert_eq!(r.assignment, vec![1.0, 0.0]);
    }

    #[test]
    fn infeasible_milp() {
        let mut m = MilpModel::new("inf", ObjectiveSense::Minimize);
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("c", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.5);
        m.set_objective(vec![(a, 1.0)], 0.0);
        assert_eq!(solve_milp(&m, &exact()).unwrap().status, SolveStatus::Infeasible);
    }

    fn enumerate(m: &MilpModel, bins: &[VarId], conts: &[VarId]) -> Option<f64> {
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << bins.len()) {
            let mut fixed = m.clone();
            for (k, &b) in bins.iter().enumerate() {
                let v = f64::from(mask >> k & 1);
                fixed.variables[b.0].lower = v;
                fixed.variables[b.0].upper = v;
                fixed.variables[b.0].kind = VarKind::Continuous;
            }
            let bounds: Vec<(f64, f64)> = fixed.variables.iter().map(|v| (v.lower, v.upper)).collect();
            let s = super::super::simplex::solve_lp(&fixed, &bounds);
            if s.status == LpStatus::Optimal {
                let better = best.map_or(true, |b| match m.objective.sense {
                    ObjectiveSense::Minimize => s.objective < b,
                    ObjectiveSense::Maximize => s.objective > b,
                });
                if better {
                    best = Some(s.objective);
                }
            }
        }
        let _ = conts;
        best
    }

    #[test]
    fn random_mixed_problems_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..60 {
            let sense = if trial % 2 == 0 { ObjectiveSense::Minimize } else { ObjectiveSense::Maximize };
            let mut m = MilpModel::new("mix", sense);
            let bins: Vec<VarId> = (0..rng.random_range(1..7)).map(|k| m.add_binary(format!("b{k}"))).collect();
            let conts: Vec<VarId> = (0..rng.random_range(1..4))
                .map(|k| m.add_continuous(format!("c{k}"), rng.random_range(-3.0..0.0), rng.random_range(0.0..3.0)))
                .collect();
            for r in 0..rng.random_range(2..6) {
                let coeffs: Vec<(VarId, f64)> = bins
                    .iter()
                    .chain(&conts)
                    .map(|&v| (v, rng.random_range(-4.0..4.0)))
                    .collect();
                m.add_constraint(format!("r{r}"), coeffs, Sense::Le, rng.random_range(0.0..6.0));
            }
            m.set_objective(
                bins.iter().chain(&conts).map(|&v| (v, rng.random_range(-2.0..2.0))).collect(),
                0.0,
            );
            let r = solve_milp(&m, &exact()).unwrap();
            match enumerate(&m, &bins, &conts) {
                Some(best) => {
                    assert_eq!(r.status, SolveStatus::Optimal, "trial {trial}");
                    assert!((r.objective - best).abs() < 1e-7, "trial {trial}: {} vs {best}", r.objective);
                    assert!(m.max_violation(&r.assignment) < 1e-6);
                    assert!((m.objective_value(&r.assignment) - r.objective).abs() < 1e-9);
                    assert!(relative_gap(r.objective, r.bound) <= 1e-6 || (r.objective - r.bound).abs() <= 1e-9);
                }
                None => assert_eq!(r.status, SolveStatus::Infeasible, "trial {trial}"),
            }
        }
    }

    #[test]
    fn node_limit_reports_iteration_limit() {
        let mut m = MilpModel::new("big", ObjectiveSense::Maximize);
        let bins: Vec<VarId> = (0..12).map(|k| m.add_binary(format!("b{k}"))).collect();
        let weights: Vec<(VarId, f64)> = bins.iter().enumerate().map(|(k, &b)| (b, 3.0 + (k as f64 * 0.7).sin())).collect();
        m.add_constraint("cap", weights.clone(), Sense::Le, 12.5);
        m.set_objective(bins.iter().enumerate().map(|(k, &b)| (b, 2.0 + (k as f64 * 1.3).cos())).collect(), 0.0);
        let params = MilpParams {
            node_limit: 3,
            ..exact()
        };
        let r = solve_milp(&m, &params).unwrap();
        assert_eq!(r.status, SolveStatus::IterationLimit);
        assert!(r.stats.nodes <= 3);
    }

    #[test]
    fn deterministic_results() {
        let mut m = MilpModel::new("det", ObjectiveSense::Maximize);
        let bins: Vec<VarId> = (0..10).map(|k| m.add_binary(format!("b{k}"))).collect();
        m.add_constraint(
            "cap",
            bins.iter().enumerate().map(|(k, &b)| (b, 1.0 + k as f64 * 0.37)).collect(),
            Sense::Le,
            9.3,
        );
        m.set_objective(bins.iter().enumerate().map(|(k, &b)| (b, 1.0 + (k as f64).sqrt())).collect(), 0.0);
        let a = solve_milp(&m, &MilpParams::default()).unwrap();
        let b = solve_milp(&m, &MilpParams::default()).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.stats.nodes, b.stats.nodes);
    }
}
