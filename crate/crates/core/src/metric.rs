//! Mahalanobis-ℓp geometry induced by the class-0 covariance.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cgnc::min_eigenvalue;
use crate::data::FeatureBounds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormOrder {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl NormOrder {
    pub fn dual(self) -> Self {
        match self {
            NormOrder::L1 => NormOrder::LInf,
            NormOrder::L2 => NormOrder::L2,
            NormOrder::LInf => NormOrder::L1,
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => v.iter().map(|x| x.abs()).sum(),
            NormOrder::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormOrder::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn dual_norm(self, v: &[f64]) -> f64 {
        self.dual().norm(v)
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::L1 => "1",
            NormOrder::L2 => "2",
            NormOrder::LInf => "inf",
        })
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(NormOrder::L1),
            "2" | "l2" => Ok(NormOrder::L2),
            "inf" | "linf" | "infinity" => Ok(NormOrder::LInf),
            other => Err(Error::InvalidArgument(format!(
                "unknown norm order `{other}` (expected 1, 2 or inf)"
            ))),
        }
    }
}

/// Lower-triangular `W` with `WᵀW = Σ₀⁻¹`, plus the norm order.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedMetric {
    whitener: DMatrix<f64>,
    inverse: DMatrix<f64>,
    p: NormOrder,
}

/// Builds `W = L⁻¹` from the Cholesky factor `Σ₀ = LLᵀ`.
pub fn build_metric(sigma0: &DMatrix<f64>, p: NormOrder) -> Result<WhitenedMetric> {
    if !sigma0.is_square() || sigma0.nrows() == 0 {
        return Err(Error::InvalidArgument("covariance must be a non-empty square matrix".into()));
    }
    let asym = (sigma0 - sigma0.transpose()).amax();
    if asym > 1e-9 * sigma0.amax().max(1.0) {
        return Err(Error::InvalidArgument(format!("covariance is not symmetric (|Σ−Σᵀ| = {asym:e})")));
    }
    let sym = (sigma0 + sigma0.transpose()) * 0.5;
    let chol = sym.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: min_eigenvalue(&sym),
    })?;
    let l = chol.l();
    let n = l.nrows();
    let whitener = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: min_eigenvalue(&sym),
        })?;
    WhitenedMetric::from_whitener(whitener, p)
}

impl WhitenedMetric {
    /// Wraps an explicit lower-triangular whitener with positive diagonal.
    pub fn from_whitener(whitener: DMatrix<f64>, p: NormOrder) -> Result<Self> {
        let n = whitener.nrows();
        if !whitener.is_square() || n == 0 {
            return Err(Error::InvalidArgument("whitener must be a non-empty square matrix".into()));
        }
        for i in 0..n {
            if !(whitener[(i, i)] > 0.0) {
                return Err(Error::InvalidArgument("whitener diagonal must be positive".into()));
            }
            for j in (i + 1)..n {
                if whitener[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument("whitener must be lower triangular".into()));
                }
            }
        }
        let inverse = whitener
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::InvalidArgument("whitener is singular".into()))?;
        Ok(Self {
            whitener,
            inverse,
            p,
        })
    }

    pub fn identity(n: usize, p: NormOrder) -> Self {
        Self {
            whitener: DMatrix::identity(n, n),
            inverse: DMatrix::identity(n, n),
            p,
        }
    }

    pub fn n(&self) -> usize {
        self.whitener.nrows()
    }

    pub fn p(&self) -> NormOrder {
        self.p
    }

    pub fn with_p(&self, p: NormOrder) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    pub fn whitener_inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn whiten(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.whitener, v)
    }

    pub fn unwhiten(&self, u: &[f64]) -> Vec<f64> {
        mat_vec(&self.inverse, u)
    }

    /// `W⁻ᵀ a`: coefficient vector of a linear form expressed in whitened
    /// coordinates.
    pub fn whiten_dual(&self, a: &[f64]) -> Vec<f64> {
        let v = self.inverse.transpose() * DVector::from_column_slice(a);
        v.iter().copied().collect()
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.p.norm(&self.whiten(v))
    }

    /// `‖W(x − x_ref)‖_p`.
    pub fn distance(&self, x: &[f64], x_ref: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(x_ref).map(|(a, b)| a - b).collect();
        self.norm(&diff)
    }

    /// Largest whitened norm over the vertices of a box (the domain radius).
    pub fn box_radius(&self, bounds: &FeatureBounds) -> f64 {
        let n = self.n();
        if n <= 16 {
            let mut best: f64 = 0.0;
            for mask in 0u32..(1 << n) {
                let v: Vec<f64> = (0..n)
                    .map(|j| if mask >> j & 1 == 1 { bounds.upper[j] } else { bounds.lower[j] })
                    .collect();
                best = best.max(self.norm(&v));
            }
            best
        } else {
            let abs = self.whitener.abs();
            let m: Vec<f64> = (0..n)
                .map(|j| bounds.lower[j].abs().max(bounds.upper[j].abs()))
                .collect();
            self.p.norm(&mat_vec(&abs, &m))
        }
    }
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// `{δ : ‖Wδ‖_p ≤ γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    metric: WhitenedMetric,
    gamma: f64,
}

/// One row `Σ delta·δ + Σ aux·s ≤ rhs` of a norm-ball linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBallRow {
    pub delta: Vec<f64>,
    pub aux: Vec<f64>,
    pub rhs: f64,
}

/// Linear description of the ball; `aux_count` auxiliaries `s ≥ 0` are
/// needed for p = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBallConstraints {
    pub aux_count: usize,
    pub rows: Vec<NormBallRow>,
}

impl NormBallConstraints {
    /// Whether `(δ, s)` satisfies every row within `tol`.
    pub fn satisfied(&self, delta: &[f64], aux: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| {
            let lhs: f64 = r.delta.iter().zip(delta).map(|(a, b)| a * b).sum::<f64>()
                + r.aux.iter().zip(aux).map(|(a, b)| a * b).sum::<f64>();
            lhs <= r.rhs + tol
        })
    }
}

impl UncertaintySet {
    pub fn new(metric: WhitenedMetric, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("budget γ = {gamma} must be positive")));
        }
        Ok(Self { metric, gamma })
    }

    pub fn metric(&self) -> &WhitenedMetric {
        &self.metric
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.metric.clone(), gamma)
    }

    pub fn contains(&self, delta: &[f64], tol: f64) -> bool {
        self.metric.norm(delta) <= self.gamma + tol
    }

    /// Tight symmetric box around the projection of the set onto each axis:
    /// `±γ · ‖row j of W⁻¹‖_*`.
    pub fn coordinate_extent(&self) -> FeatureBounds {
        let n = self.metric.n();
        let inv = &self.metric.inverse;
        let half: Vec<f64> = (0..n)
            .map(|j| {
                let row: Vec<f64> = (0..n).map(|k| inv[(j, k)]).collect();
                self.gamma * self.metric.p.dual_norm(&row)
            })
            .collect();
        FeatureBounds {
            lower: half.iter().map(|h| -h).collect(),
            upper: half,
        }
    }

    /// A member of the set attaining the upper extent of coordinate `j`.
    pub fn extent_witness(&self, j: usize) -> Vec<f64> {
        let n = self.metric.n();
        let row: Vec<f64> = (0..n).map(|k| self.metric.inverse[(j, k)]).collect();
        let u: Vec<f64> = match self.metric.p {
            NormOrder::LInf => row.iter().map(|r| self.gamma * r.signum()).collect(),
            NormOrder::L2 => {
                let norm = NormOrder::L2.norm(&row);
                row.iter().map(|r| self.gamma * r / norm).collect()
            }
            NormOrder::L1 => {
                let k = (0..n)
                    .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()))
                    .unwrap_or(0);
                let mut u = vec![0.0; n];
                u[k] = self.gamma * row[k].signum();
                u
            }
        };
        self.metric.unwhiten(&u)
    }

    /// Linear rows describing the ball; p = 2 is rejected.
    pub fn norm_ball_constraints(&self) -> Result<NormBallConstraints> {
        let n = self.metric.n();
        let w = &self.metric.whitener;
        let w_row = |i: usize, sign: f64| -> Vec<f64> { (0..n).map(|j| sign * w[(i, j)]).collect() };
        match self.metric.p {
            NormOrder::L2 => Err(Error::QuadraticNormUnsupported),
            NormOrder::LInf => Ok(NormBallConstraints {
                aux_count: 0,
                rows: (0..n)
                    .flat_map(|i| {
                        [1.0, -1.0].map(|s| NormBallRow {
                            delta: w_row(i, s),
                            aux: Vec::new(),
                            rhs: self.gamma,
                        })
                    })
                    .collect(),
            }),
            NormOrder::L1 => {
                let unit = |i: usize, v: f64| {
                    let mut a = vec![0.0; n];
                    a[i] = v;
                    a
                };
                let mut rows: Vec<NormBallRow> = (0..n)
                    .flat_map(|i| {
                        [1.0, -1.0].map(|s| NormBallRow {
                            delta: w_row(i, s),
                            aux: unit(i, -1.0),
                            rhs: 0.0,
                        })
                    })
                    .collect();
                rows.push(NormBallRow {
                    delta: vec![0.0; n],
                    aux: vec![1.0; n],
                    rhs: self.gamma,
                });
                Ok(NormBallConstraints { aux_count: n, rows })
            }
        }
    }

    /// Uniform draw from the set: uniform in the whitened ball, mapped back.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u = sample_ball(self.metric.n(), self.metric.p, self.gamma, rng);
        self.metric.unwhiten(&u)
    }

    /// Euclidean projection in whitened coordinates, mapped back.
    pub fn project(&self, delta: &[f64]) -> Vec<f64> {
        let mut u = self.metric.whiten(delta);
        project_ball(&mut u, self.metric.p, self.gamma);
        self.metric.unwhiten(&u)
    }
}

/// Uniform sample from the radius-`r` ℓp ball in `n` dimensions.
pub fn sample_ball<R: Rng + ?Sized>(n: usize, p: NormOrder, r: f64, rng: &mut R) -> Vec<f64> {
    match p {
        NormOrder::LInf => (0..n).map(|_| r * rng.random_range(-1.0..=1.0)).collect(),
        NormOrder::L2 => {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let norm = NormOrder::L2.norm(&g).max(f64::MIN_POSITIVE);
            let radius = r * rng.random::<f64>().powf(1.0 / n as f64);
            g.iter().map(|x| x / norm * radius).collect()
        }
        NormOrder::L1 => {
            let e: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = e.iter().sum();
            (0..n)
                .map(|i| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * r * e[i] / total
                })
                .collect()
        }
    }
}

/// In-place Euclidean projection onto the radius-`r` ℓp ball.
pub fn project_ball(u: &mut [f64], p: NormOrder, r: f64) {
    match p {
        NormOrder::LInf => u.iter_mut().for_each(|v| *v = v.clamp(-r, r)),
        NormOrder::L2 => {
            let norm = NormOrder::L2.norm(u);
            if norm > r {
                u.iter_mut().for_each(|v| *v *= r / norm);
            }
        }
        NormOrder::L1 => {
            if NormOrder::L1.norm(u) <= r {
                return;
            }
            let mut mags: Vec<f64> = u.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let mut cumulative = 0.0;
            let mut theta = 0.0;
            for (k, m) in mags.iter().enumerate() {
                cumulative += m;
                let t = (cumulative - r) / (k + 1) as f64;
                if *m > t {
                    theta = t;
                }
            }
            u.iter_mut()
                .for_each(|v| *v = v.signum() * (v.abs() - theta).max(0.0));
        }
    }
}

/// Unbiased sample covariance of the given rows.
pub fn empirical_covariance(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let count = rows.len();
    if count < 2 {
        return Err(Error::InvalidArgument("covariance needs at least two rows".into()));
    }
    let n = rows[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / count as f64)
        .collect();
    let mut cov = DMatrix::zeros(n, n);
    for r in rows {
        for a in 0..n {
            for b in 0..=a {
                cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..n {
        for b in 0..=a {
            let v = cov[(a, b)] / (count - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const ORDERS: [NormOrder; 3] = [NormOrder::L1, NormOrder::L2, NormOrder::LInf];

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.3
    }

    #[test]
    fn identity_and_diagonal_whiteners() {
        let m = build_metric(&DMatrix::identity(3, 3), NormOrder::LInf).unwrap();
        assert_eq!(m.whitener(), &DMatrix::identity(3, 3));
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let m = build_metric(&d, NormOrder::LInf).unwrap();
        assert!((m.whitener() - DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]))).norm() < 1e-15);
        assert_eq!(m.distance(&[2.0, 0.0], &[0.0, 0.0]), 1.0);
        assert_eq!(m.distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match build_metric(&bad, NormOrder::L2) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn whitener_is_lower_triangular_and_reproduces_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..7 {
            let sigma = random_spd(n, &mut rng);
            let m = build_metric(&sigma, NormOrder::L2).unwrap();
            let w = m.whitener();
            for i in 0..n {
                assert!(w[(i, i)] > 0.0);
                for j in (i + 1)..n {
                    assert_eq!(w[(i, j)], 0.0);
                }
            }
            let precision = sigma.clone().try_inverse().unwrap();
            let err = (w.transpose() * w - &precision).norm() / precision.norm();
            assert!(err < 1e-8, "n={n}: {err}");
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let xv = DVector::from_vec(x.clone());
                let quad = (xv.transpose() * &precision * &xv)[(0, 0)];
                let wn = m.norm(&x);
                assert!((wn * wn - quad).abs() <= 1e-10 * quad.max(1.0));
            }
        }
    }

    #[test]
    fn extent_examples() {
        let u = UncertaintySet::new(WhitenedMetric::identity(2, NormOrder::LInf), 0.05).unwrap();
        let b = u.coordinate_extent();
        assert_eq!(b.lower, vec![-0.05, -0.05]);
        assert_eq!(b.upper, vec![0.05, 0.05]);

        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]));
        let u = UncertaintySet::new(WhitenedMetric::from_whitener(w, NormOrder::LInf).unwrap(), 0.01).unwrap();
        let b = u.coordinate_extent();
        assert!((b.upper[0] - 0.02).abs() < 1e-15);
        assert!((b.upper[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn extent_agrees_with_grid_maximisation() {
        // 2-D brute force over a fine grid of the whitened ball boundary
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in ORDERS {
            let sigma = random_spd(2, &mut rng);
            let uset = UncertaintySet::new(build_metric(&sigma, p).unwrap(), 0.3).unwrap();
            let ext = uset.coordinate_extent();
            let mut best = [f64::NEG_INFINITY; 2];
            let steps = 200_000;
            for s in 0..steps {
                let angle = s as f64 / steps as f64 * std::f64::consts::TAU;
                let dir = [angle.cos(), angle.sin()];
                let scale = 0.3 / p.norm(&dir);
                let delta = uset.metric().unwhiten(&[dir[0] * scale, dir[1] * scale]);
                for j in 0..2 {
                    best[j] = best[j].max(delta[j]);
                }
            }
            for j in 0..2 {
                assert!((best[j] - ext.upper[j]).abs() < 1e-6, "{p}: {} vs {}", best[j], ext.upper[j]);
            }
        }
    }

    #[test]
    fn extent_is_attained() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in ORDERS {
            let sigma = random_spd(4, &mut rng);
            let uset = UncertaintySet::new(build_metric(&sigma, p).unwrap(), 0.2).unwrap();
            let ext = uset.coordinate_extent();
            for j in 0..4 {
                let wit = uset.extent_witness(j);
                assert!(uset.contains(&wit, 1e-12));
                assert!((wit[j] - ext.upper[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn norm_ball_rows_examples() {
        let u = UncertaintySet::new(WhitenedMetric::identity(2, NormOrder::LInf), 1.0).unwrap();
        let c = u.norm_ball_constraints().unwrap();
        assert_eq!(c.aux_count, 0);
        let rows: Vec<(Vec<f64>, f64)> = c.rows.iter().map(|r| (r.delta.clone(), r.rhs)).collect();
        assert_eq!(
            rows,
            vec![
                (vec![1.0, 0.0], 1.0),
                (vec![-1.0, 0.0], 1.0),
                (vec![0.0, 1.0], 1.0),
                (vec![0.0, -1.0], 1.0)
            ]
        );
        let u = UncertaintySet::new(WhitenedMetric::identity(1, NormOrder::L1), 0.5).unwrap();
        let c = u.norm_ball_constraints().unwrap();
        assert_eq!(c.aux_count, 1);
        assert_eq!(c.rows.len(), 3);
        assert_eq!(c.rows[2].aux, vec![1.0]);
        assert_eq!(c.rows[2].rhs, 0.5);
        let u = UncertaintySet::new(WhitenedMetric::identity(1, NormOrder::L2), 0.5).unwrap();
        assert!(matches!(u.norm_ball_constraints(), Err(Error::QuadraticNormUnsupported)));
    }

    #[test]
    fn linearization_matches_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in [NormOrder::L1, NormOrder::LInf] {
            let sigma = random_spd(3, &mut rng);
            let uset = UncertaintySet::new(build_metric(&sigma, p).unwrap(), 0.5).unwrap();
            let rows = uset.norm_ball_constraints().unwrap();
            for _ in 0..10_000 {
                let delta: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                // the tightest auxiliaries are |Wδ|
                let aux: Vec<f64> = uset.metric().whiten(&delta).iter().map(|v| v.abs()).collect();
                let aux = if rows.aux_count == 0 { Vec::new() } else { aux };
                let norm = uset.metric().norm(&delta);
                if (norm - 0.5).abs() > 1e-9 {
                    assert_eq!(rows.satisfied(&delta, &aux, 0.0), norm <= 0.5);
                }
            }
        }
    }

    #[test]
    fn projection_lands_in_ball_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in ORDERS {
            for _ in 0..500 {
                let mut u: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
                project_ball(&mut u, p, 1.0);
                assert!(p.norm(&u) <= 1.0 + 1e-12);
                let again = {
                    let mut v = u.clone();
                    project_ball(&mut v, p, 1.0);
                    v
                };
                for (a, b) in u.iter().zip(&again) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn l1_projection_is_nearest_point() {
        // compare against a dense search over the ℓ1 sphere in 2-D
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut proj = x.clone();
            project_ball(&mut proj, NormOrder::L1, 1.0);
            let d_proj = NormOrder::L2.norm(&[proj[0] - x[0], proj[1] - x[1]]);
            let mut best = f64::INFINITY;
            for s in 0..40_000 {
                let t = s as f64 / 10_000.0;
                let (a, b) = match s / 10_000 {
                    0 => (1.0 - t, t),
                    1 => (-(t - 1.0), 1.0 - (t - 1.0)),
                    2 => (-(1.0 - (t - 2.0)), -(t - 2.0)),
                    _ => (t - 3.0, -(1.0 - (t - 3.0))),
                };
                best = best.min(NormOrder::L2.norm(&[a - x[0], b - x[1]]));
            }
            if NormOrder::L1.norm(&x) > 1.0 {
                assert!(d_proj <= best + 1e-4);
            }
        }
    }

    #[test]
    fn ball_samples_are_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in ORDERS {
            let sigma = random_spd(3, &mut rng);
            let uset = UncertaintySet::new(build_metric(&sigma, p).unwrap(), 0.1).unwrap();
            for _ in 0..1000 {
                assert!(uset.contains(&uset.sample(&mut rng), 1e-12));
            }
        }
    }

    #[test]
    fn parse_norm_orders() {
        assert_eq!("inf".parse::<NormOrder>().unwrap(), NormOrder::LInf);
        assert_eq!("1".parse::<NormOrder>().unwrap(), NormOrder::L1);
        assert_eq!("2".parse::<NormOrder>().unwrap(), NormOrder::L2);
        assert!("3".parse::<NormOrder>().is_err());
    }

    proptest! {
        #[test]
        fn distance_is_a_norm(
            seed in 0u64..500,
            a in prop::collection::vec(-5.0f64..5.0, 3),
            b in prop::collection::vec(-5.0f64..5.0, 3),
            c in prop::collection::vec(-5.0f64..5.0, 3),
            scale in -4.0f64..4.0,
            pi in 0usize..3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = build_metric(&random_spd(3, &mut rng), ORDERS[pi]).unwrap();
            let dab = m.distance(&a, &b);
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - m.distance(&b, &a)).abs() <= 1e-12 * (1.0 + dab));
            prop_assert!(dab <= m.distance(&a, &c) + m.distance(&c, &b) + 1e-9);
            let sa: Vec<f64> = a.iter().map(|v| v * scale).collect();
            let zero = [0.0; 3];
            prop_assert!((m.distance(&sa, &zero) - scale.abs() * m.distance(&a, &zero)).abs() <= 1e-9 * (1.0 + dab));
        }

        #[test]
        fn membership_is_symmetric(seed in 0u64..500, d in prop::collection::vec(-1.0f64..1.0, 3), pi in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let uset = UncertaintySet::new(build_metric(&random_spd(3, &mut rng), ORDERS[pi]).unwrap(), 0.4).unwrap();
            let neg: Vec<f64> = d.iter().map(|v| -v).collect();
            prop_assert_eq!(uset.contains(&d, 0.0), uset.contains(&neg, 0.0));
        }
    }
}
