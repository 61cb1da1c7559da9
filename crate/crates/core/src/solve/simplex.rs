//! Dense bounded-variable primal simplex.
//!
//! Every row `i` gets a logical `s_i = a_i·x` whose bounds encode the row
//! sense, so all relations are homogeneous. The tableau is condensed: one
//! row per basic variable, one column per nonbasic variable, with
//! `x_B = T x_N`.

use nalgebra::DMatrix;

use crate::milp::{MilpModel, ObjectiveSense, Sense};

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const DRIFT_TOL: f64 = 1e-8;
const BLAND_AFTER: usize = 50;
const REINVERT_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values in original units.
    pub x: Vec<f64>,
    /// Objective in the model's own sense.
    pub objective: f64,
    pub iterations: usize,
}

/// Scaled problem data shared by every solve on the same model.
#[derive(Debug, Clone)]
pub struct LpEngine {
    m: usize,
    n: usize,
    /// Row-major scaled constraint matrix.
    a: Vec<f64>,
    col_scale: Vec<f64>,
    /// Scaled bounds of the logicals.
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    /// Scaled minimisation costs.
    cost: Vec<f64>,
    obj_scale: f64,
    obj_sign: f64,
    obj_constant: f64,
    pub max_iterations: usize,
}

/// Basis, tableau and current point; reusable as a warm start.
#[derive(Debug, Clone)]
pub struct LpState {
    tab: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    /// Values of all `n + m` variables in scaled units.
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpState {
    pub fn memory_bytes(&self) -> usize {
        8 * (self.tab.len() + 3 * self.x.len()) + 16 * self.basic.len()
    }
}

impl LpEngine {
    pub fn new(model: &MilpModel) -> Self {
        let m = model.constraints.len();
        let n = model.variables.len();
        let col_scale: Vec<f64> = model
            .variables
            .iter()
            .map(|v| {
                let s = v.lower.abs().max(v.upper.abs());
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let mut a = vec![0.0; m * n];
        let mut row_lower = vec![f64::NEG_INFINITY; m];
        let mut row_upper = vec![f64::INFINITY; m];
        for (i, c) in model.constraints.iter().enumerate() {
            let mut rmax: f64 = 0.0;
            for &(v, coef) in &c.coeffs {
                let val = coef * col_scale[v.0];
                a[i * n + v.0] += val;
                rmax = rmax.max(val.abs());
            }
            let rs = if rmax > 0.0 { 1.0 / rmax } else { 1.0 };
            for j in 0..n {
                a[i * n + j] *= rs;
            }
            let rhs = c.rhs * rs;
            match c.sense {
                Sense::Le => row_upper[i] = rhs,
                Sense::Ge => row_lower[i] = rhs,
                Sense::Eq => {
                    row_lower[i] = rhs;
                    row_upper[i] = rhs;
                }
            }
        }
        let obj_sign = match model.objective.sense {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n];
        for &(v, coef) in &model.objective.coeffs {
            cost[v.0] += obj_sign * coef * col_scale[v.0];
        }
        let cmax = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let obj_scale = if cmax > 0.0 { cmax } else { 1.0 };
        cost.iter_mut().for_each(|c| *c /= obj_scale);
        Self {
            m,
            n,
            a,
            col_scale,
            row_lower,
            row_upper,
            cost,
            obj_scale,
            obj_sign,
            obj_constant: model.objective.constant,
            max_iterations: 50_000,
        }
    }

    pub fn n_structural(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    /// Slack basis with structurals at their lower bound.
    fn cold_state(&self, bounds: &[(f64, f64)]) -> LpState {
        let (m, n) = (self.m, self.n);
        let (lower, upper) = self.scaled_bounds(bounds);
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = if lower[j].abs() <= upper[j].abs() { lower[j] } else { upper[j] };
        }
        let mut st = LpState {
            tab: self.a.clone(),
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            x,
            lower,
            upper,
        };
        self.recompute_basics(&mut st);
        st
    }

    fn scaled_bounds(&self, bounds: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
        let mut lower = Vec::with_capacity(self.n + self.m);
        let mut upper = Vec::with_capacity(self.n + self.m);
        for j in 0..self.n {
            lower.push(bounds[j].0 / self.col_scale[j]);
            upper.push(bounds[j].1 / self.col_scale[j]);
        }
        lower.extend_from_slice(&self.row_lower);
        upper.extend_from_slice(&self.row_upper);
        (lower, upper)
    }

    /// Solves with the given structural bounds, optionally warm-started from
    /// a previous state of this engine.
    pub fn solve(&self, bounds: &[(f64, f64)], warm: Option<&LpState>) -> (LpSolution, LpState) {
        assert_eq!(bounds.len(), self.n, "bound vector length");
        let mut st = match warm {
            Some(w) => {
                let mut st = w.clone();
                let (lower, upper) = self.scaled_bounds(bounds);
                st.lower = lower;
                st.upper = upper;
                for &j in &st.nonbasic {
                    st.x[j] = snap_to_bound(st.x[j], st.lower[j], st.upper[j]);
                }
                self.recompute_basics(&mut st);
                st
            }
            None => self.cold_state(bounds),
        };
        if (0..self.n).any(|j| st.lower[j] > st.upper[j] + FEAS_TOL) {
            return (self.solution(&st, LpStatus::Infeasible, 0), st);
        }
        let (status, iterations) = self.iterate(&mut st);
        (self.solution(&st, status, iterations), st)
    }

    fn solution(&self, st: &LpState, status: LpStatus, iterations: usize) -> LpSolution {
        let x: Vec<f64> = (0..self.n).map(|j| st.x[j] * self.col_scale[j]).collect();
        let scaled: f64 = (0..self.n).map(|j| self.cost[j] * st.x[j]).sum();
        LpSolution {
            status,
            objective: self.obj_sign * scaled * self.obj_scale + self.obj_constant,
            x,
            iterations,
        }
    }

    fn recompute_basics(&self, st: &mut LpState) {
        let n = self.n;
        for r in 0..self.m {
            let row = &st.tab[r * n..(r + 1) * n];
            let v: f64 = row.iter().zip(&st.nonbasic).map(|(t, &j)| t * st.x[j]).sum();
            st.x[st.basic[r]] = v;
        }
    }

    /// Largest `|s_i − a_i·x|` against the original scaled rows.
    fn residual(&self, st: &LpState) -> f64 {
        let n = self.n;
        (0..self.m)
            .map(|i| {
                let ax: f64 = self.a[i * n..(i + 1) * n].iter().zip(&st.x[..n]).map(|(a, x)| a * x).sum();
                (ax - st.x[n + i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Rebuilds the tableau from the basis. Basic structurals `S` are solved
    /// from the rows `R` whose logicals are nonbasic.
    fn reinvert(&self, st: &mut LpState) -> bool {
        let (m, n) = (self.m, self.n);
        let basic_struct: Vec<usize> = st.basic.iter().copied().filter(|&v| v < n).collect();
        let free_rows: Vec<usize> = st.nonbasic.iter().copied().filter(|&v| v >= n).map(|v| v - n).collect();
        let k = basic_struct.len();
        if free_rows.len() != k {
            return false;
        }
        let mut col_of = vec![usize::MAX; n + m];
        for (c, &v) in st.nonbasic.iter().enumerate() {
            col_of[v] = c;
        }
        // x_S = B⁻¹ (s_R − A_{R,N} x_N): coefficient block `k × n` over nonbasic columns
        let mut s_coeffs = vec![0.0; k * n];
        if k > 0 {
            let b = DMatrix::from_fn(k, k, |r, c| self.a[free_rows[r] * n + basic_struct[c]]);
            let lu = b.lu();
            if !lu.is_invertible() {
                return false;
            }
            let mut rhs = DMatrix::zeros(k, n);
            for (r, &row) in free_rows.iter().enumerate() {
                for (c, &v) in st.nonbasic.iter().enumerate() {
                    rhs[(r, c)] = if v >= n {
                        if v - n == row {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        -self.a[row * n + v]
                    };
                }
            }
            let Some(sol) = lu.solve(&rhs) else {
                return false;
            };
            if sol.iter().any(|v| !v.is_finite()) {
                return false;
            }
            for r in 0..k {
                for c in 0..n {
                    s_coeffs[r * n + c] = sol[(r, c)];
                }
            }
        }
        let mut s_index = vec![usize::MAX; n];
        for (r, &v) in basic_struct.iter().enumerate() {
            s_index[v] = r;
        }
        let mut tab = vec![0.0; m * n];
        for (r, &v) in st.basic.iter().enumerate() {
            let out = &mut tab[r * n..(r + 1) * n];
            if v < n {
                out.copy_from_slice(&s_coeffs[s_index[v] * n..(s_index[v] + 1) * n]);
            } else {
                // s_i = A_{i,N} x_N + A_{i,S} x_S
                let i = v - n;
                let arow = &self.a[i * n..(i + 1) * n];
                for (c, &nv) in st.nonbasic.iter().enumerate() {
                    if nv < n {
                        out[c] = arow[nv];
                    }
                }
                for (sr, &sv) in basic_struct.iter().enumerate() {
                    let coef = arow[sv];
                    if coef != 0.0 {
                        let src = &s_coeffs[sr * n..(sr + 1) * n];
                        for c in 0..n {
                            out[c] += coef * src[c];
                        }
                    }
                }
            }
        }
        st.tab = tab;
        self.recompute_basics(st);
        true
    }

    /// Falls back to the slack basis, keeping structurals near their values.
    fn reset_basis(&self, st: &mut LpState) {
        let n = self.n;
        let mut x = vec![0.0; n + self.m];
        for j in 0..n {
            x[j] = st.x[j].clamp(st.lower[j], st.upper[j]);
            x[j] = snap_to_bound(x[j], st.lower[j], st.upper[j]);
        }
        st.tab = self.a.clone();
        st.basic = (n..n + self.m).collect();
        st.nonbasic = (0..n).collect();
        st.x = x;
        self.recompute_basics(st);
    }

    fn iterate(&self, st: &mut LpState) -> (LpStatus, usize) {
        let (m, n) = (self.m, self.n);
        let mut iterations = 0;
        let mut degenerate_run = 0;
        let mut since_reinvert = 0;
        let mut d = vec![0.0; n];
        let mut sigma = vec![0.0; m];
        loop {
            if iterations >= self.max_iterations {
                return (LpStatus::IterationLimit, iterations);
            }
            if since_reinvert >= REINVERT_EVERY {
                since_reinvert = 0;
                if self.residual(st) > DRIFT_TOL && !self.reinvert(st) {
                    self.reset_basis(st);
                }
            }
            // phase selection: basic infeasibilities drive a composite objective
            let mut phase1 = false;
            for r in 0..m {
                let v = st.basic[r];
                let x = st.x[v];
                sigma[r] = if x < st.lower[v] - tol(st.lower[v]) {
                    phase1 = true;
                    -1.0
                } else if x > st.upper[v] + tol(st.upper[v]) {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            for c in 0..n {
                let v = st.nonbasic[c];
                d[c] = if phase1 { 0.0 } else if v < n { self.cost[v] } else { 0.0 };
            }
            for r in 0..m {
                let w = if phase1 {
                    sigma[r]
                } else {
                    let v = st.basic[r];
                    if v < n {
                        self.cost[v]
                    } else {
                        0.0
                    }
                };
                if w != 0.0 {
                    let row = &st.tab[r * n..(r + 1) * n];
                    for c in 0..n {
                        d[c] += w * row[c];
                    }
                }
            }
            let bland = degenerate_run >= BLAND_AFTER;
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for c in 0..n {
                let v = st.nonbasic[c];
                if st.upper[v] - st.lower[v] <= 0.0 {
                    continue;
                }
                let dir = if d[c] < -DUAL_TOL && st.x[v] < st.upper[v] {
                    1.0
                } else if d[c] > DUAL_TOL && st.x[v] > st.lower[v] {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    if enter.is_none_or(|(ec, _)| v < st.nonbasic[ec]) {
                        enter = Some((c, dir));
                    }
                } else if d[c].abs() > best {
                    best = d[c].abs();
                    enter = Some((c, dir));
                }
            }
            let Some((q, dir)) = enter else {
                if phase1 {
                    // confirm against a fresh factorisation before declaring infeasibility
                    if since_reinvert > 0 && self.reinvert(st) {
                        since_reinvert = 0;
                        continue;
                    }
                    return (LpStatus::Infeasible, iterations);
                }
                if since_reinvert > 0 && self.residual(st) > DRIFT_TOL {
                    since_reinvert = 0;
                    if self.reinvert(st) {
                        continue;
                    }
                }
                return (LpStatus::Optimal, iterations);
            };
            let qv = st.nonbasic[q];
            let flip = st.upper[qv] - st.lower[qv];

            // Harris two-pass ratio test
            let mut theta_max = flip;
            for r in 0..m {
                let alpha = st.tab[r * n + q] * dir;
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let v = st.basic[r];
                if let Some(lim) = ratio_limit(st.x[v], st.lower[v], st.upper[v], alpha, sigma[r], true) {
                    theta_max = theta_max.min(lim);
                }
            }
            if !theta_max.is_finite() {
                return (LpStatus::Unbounded, iterations);
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            let mut best_alpha = 0.0;
            for r in 0..m {
                let alpha = st.tab[r * n + q] * dir;
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let v = st.basic[r];
                if let Some(lim) = ratio_limit(st.x[v], st.lower[v], st.upper[v], alpha, sigma[r], false) {
                    if lim <= theta_max {
                        let better = if bland {
                            leave.is_none_or(|(lr, _, _)| v < st.basic[lr])
                        } else {
                            alpha.abs() > best_alpha
                        };
                        if better {
                            best_alpha = alpha.abs();
                            let target = if alpha > 0.0 {
                                if sigma[r] < 0.0 {
                                    st.lower[v]
                                } else {
                                    st.upper[v]
                                }
                            } else if sigma[r] > 0.0 {
                                st.upper[v]
                            } else {
                                st.lower[v]
                            };
                            leave = Some((r, lim.max(0.0), target));
                        }
                    }
                }
            }
            iterations += 1;
            match leave {
                Some((p, theta, target)) if theta <= flip => {
                    if theta <= 1e-12 {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                    st.x[qv] += dir * theta;
                    let leaving = st.basic[p];
                    self.pivot(st, p, q);
                    st.x[leaving] = target;
                    self.recompute_basics(st);
                    since_reinvert += 1;
                }
                _ => {
                    // bound flip of the entering variable
                    degenerate_run = 0;
                    st.x[qv] = if dir > 0.0 { st.upper[qv] } else { st.lower[qv] };
                    self.recompute_basics(st);
                }
            }
        }
    }

    fn pivot(&self, st: &mut LpState, p: usize, q: usize) {
        let (m, n) = (self.m, self.n);
        let piv = st.tab[p * n + q];
        let mut prow: Vec<f64> = st.tab[p * n..(p + 1) * n].iter().map(|t| -t / piv).collect();
        prow[q] = 1.0 / piv;
        for r in 0..m {
            if r == p {
                continue;
            }
            let f = st.tab[r * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut st.tab[r * n..(r + 1) * n];
            for c in 0..n {
                row[c] += f * prow[c];
            }
            row[q] = f * prow[q];
        }
        st.tab[p * n..(p + 1) * n].copy_from_slice(&prow);
        std::mem::swap(&mut st.basic[p], &mut st.nonbasic[q]);
    }
}

fn tol(bound: f64) -> f64 {
    FEAS_TOL * (1.0 + bound.abs())
}

fn snap_to_bound(x: f64, lower: f64, upper: f64) -> f64 {
    if !lower.is_finite() {
        return upper;
    }
    if !upper.is_finite() {
        return lower;
    }
    if (x - lower).abs() <= (upper - x).abs() {
        lower
    } else {
        upper
    }
}

/// Step at which a basic variable with rate `alpha` blocks. Infeasible
/// variables (`sigma ≠ 0`) block only when they reach the bound they violate.
fn ratio_limit(x: f64, lower: f64, upper: f64, alpha: f64, sigma: f64, relaxed: bool) -> Option<f64> {
    let slack = |b: f64| if relaxed { tol(b) } else { 0.0 };
    if sigma < 0.0 {
        return (alpha > 0.0).then(|| (lower - x) / alpha);
    }
    if sigma > 0.0 {
        return (alpha < 0.0).then(|| (upper - x) / alpha);
    }
    if alpha > 0.0 && upper.is_finite() {
        Some(((upper + slack(upper) - x) / alpha).max(0.0))
    } else if alpha < 0.0 && lower.is_finite() {
        Some(((lower - slack(lower) - x) / alpha).max(0.0))
    } else {
        None
    }
}

/// One-shot LP solve with explicit structural bounds (binaries relaxed).
pub fn solve_lp(model: &MilpModel, bounds: &[(f64, f64)]) -> LpSolution {
    LpEngine::new(model).solve(bounds, None).0
}
