//! Quadratic expansion of the decision function: per-node coefficient
//! vectors, perturbed deviation terms, derivatives and the constants used by
//! the finite-termination bound.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::cgnc::{min_eigenvalue, CgncModel};
use crate::error::{Error, Result};
use crate::metric::WhitenedMetric;

/// Sparse `a_i^c` together with the node's intercept and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTerm {
    /// `(j, a_ij^c)` for `j ∈ P_i⁺`, sorted by `j`.
    pub coeffs: Vec<(usize, f64)>,
    pub intercept: f64,
    pub variance: f64,
}

impl NodeTerm {
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * v[j]).sum()
    }

    /// `ξ(v) = aᵀv − b`.
    pub fn xi(&self, v: &[f64]) -> f64 {
        self.dot(v) - self.intercept
    }

    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(j, a) in &self.coeffs {
            out[j] = a;
        }
        out
    }
}

/// `(aᵀy + ξ)²` expanded in the variable `y`: `Σ_{j≤k} q_jk y_j y_k + lᵀy + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationPoly {
    pub quadratic: Vec<((usize, usize), f64)>,
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
}

impl DeviationPoly {
    /// Evaluates with a product oracle for the quadratic monomials.
    pub fn evaluate_with(&self, y: &[f64], product: impl Fn(usize, usize) -> f64) -> f64 {
        self.quadratic.iter().map(|&((j, k), q)| q * product(j, k)).sum::<f64>()
            + self.linear.iter().map(|&(j, l)| l * y[j]).sum::<f64>()
            + self.constant
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.evaluate_with(y, |j, k| y[j] * y[k])
    }
}

/// `H(v) = ½ vᵀ M v + lᵀ v + k` with constant Hessian `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticH {
    pub hessian: DMatrix<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl QuadraticH {
    pub fn value(&self, v: &[f64]) -> f64 {
        let n = v.len();
        let mut quad = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.hessian[(i, j)] * v[j];
            }
            quad += v[i] * row;
        }
        0.5 * quad + self.linear.iter().zip(v).map(|(l, x)| l * x).sum::<f64>() + self.constant
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| self.linear[i] + (0..n).map(|j| self.hessian[(i, j)] * v[j]).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedForm {
    n: usize,
    /// `P_i⁺ = {i} ∪ P_i`, sorted.
    pub p_plus: Vec<Vec<usize>>,
    /// Pairs `(j, k)`, `j ≤ k`, co-occurring in some `P_i⁺`.
    pub pair_set: Vec<(usize, usize)>,
    pub terms: [Vec<NodeTerm>; 2],
    pub log_priors: [f64; 2],
    quadratic_h: QuadraticH,
}

pub fn build_expansion(model: &CgncModel) -> ExpandedForm {
    let n = model.n();
    let p_plus: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut s: Vec<usize> = model.structure().parents(i).to_vec();
            s.push(i);
            s.sort_unstable();
            s
        })
        .collect();
    let mut pairs = BTreeSet::new();
    for s in &p_plus {
        for (a, &j) in s.iter().enumerate() {
            for &k in &s[a..] {
                pairs.insert((j, k));
            }
        }
    }
    let terms = [0, 1].map(|c| {
        model
            .cpds(c)
            .iter()
            .enumerate()
            .map(|(i, cpd)| {
                let mut coeffs: Vec<(usize, f64)> = cpd
                    .parents
                    .iter()
                    .zip(&cpd.weights)
                    .map(|(&j, &w)| (j, -w))
                    .collect();
                coeffs.push((i, 1.0));
                coeffs.sort_by_key(|&(j, _)| j);
                NodeTerm {
                    coeffs,
                    intercept: cpd.intercept,
                    variance: cpd.variance,
                }
            })
            .collect::<Vec<_>>()
    });
    let priors = model.priors();
    let log_priors = [priors[0].ln(), priors[1].ln()];
    let quadratic_h = assemble_quadratic(n, &terms, log_priors);
    ExpandedForm {
        n,
        p_plus,
        pair_set: pairs.into_iter().collect(),
        terms,
        log_priors,
        quadratic_h,
    }
}

fn assemble_quadratic(n: usize, terms: &[Vec<NodeTerm>; 2], log_priors: [f64; 2]) -> QuadraticH {
    let mut hessian = DMatrix::zeros(n, n);
    let mut linear = vec![0.0; n];
    let mut constant = 0.0;
    for c in 0..2 {
        let sign = if c == 1 { 1.0 } else { -1.0 };
        constant += sign * log_priors[c];
        for t in &terms[c] {
            let s2 = t.variance;
            constant -= sign * (0.5 * s2.ln() + t.intercept * t.intercept / (2.0 * s2));
            for &(j, aj) in &t.coeffs {
                linear[j] += sign * t.intercept * aj / s2;
                for &(k, ak) in &t.coeffs {
                    hessian[(j, k)] -= sign * aj * ak / s2;
                }
            }
        }
    }
    QuadraticH {
        hessian,
        linear,
        constant,
    }
}

impl ExpandedForm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn term(&self, c: usize, i: usize) -> &NodeTerm {
        &self.terms[c][i]
    }

    pub fn pair_index(&self, j: usize, k: usize) -> Option<usize> {
        let key = (j.min(k), j.max(k));
        self.pair_set.binary_search(&key).ok()
    }

    pub fn quadratic_h(&self) -> &QuadraticH {
        &self.quadratic_h
    }

    pub fn xi(&self, c: usize, i: usize, v: &[f64]) -> f64 {
        self.terms[c][i].xi(v)
    }

    /// `(a_iᵀ(primal + fixed) − b_i)²`.
    pub fn deviation_term(&self, c: usize, i: usize, primal: &[f64], fixed: &[f64]) -> f64 {
        let t = &self.terms[c][i];
        let v = t.coeffs.iter().map(|&(j, a)| a * (primal[j] + fixed[j])).sum::<f64>() - t.intercept;
        v * v
    }

    /// Expansion of the deviation term in `primal`, with `ξ(fixed)` folded
    /// into the linear and constant parts.
    pub fn deviation_poly(&self, c: usize, i: usize, fixed: &[f64]) -> DeviationPoly {
        let t = &self.terms[c][i];
        let xi = t.xi(fixed);
        let mut quadratic = Vec::new();
        for (a, &(j, aj)) in t.coeffs.iter().enumerate() {
            for &(k, ak) in &t.coeffs[a..] {
                let q = if j == k { aj * aj } else { 2.0 * aj * ak };
                quadratic.push(((j, k), q));
            }
        }
        DeviationPoly {
            quadratic,
            linear: t.coeffs.iter().map(|&(j, a)| (j, 2.0 * xi * a)).collect(),
            constant: xi * xi,
        }
    }

    /// `Σ_c (2c−1)[log ρ_c − Σ_i (log σ_{i|c} + D_i^c / 2σ²_{i|c})]`, which
    /// equals `H(primal + fixed)`.
    pub fn constraint_lhs(&self, primal: &[f64], fixed: &[f64]) -> f64 {
        let mut total = 0.0;
        for c in 0..2 {
            let sign = if c == 1 { 1.0 } else { -1.0 };
            let mut inner = self.log_priors[c];
            for i in 0..self.n {
                let t = &self.terms[c][i];
                inner -= 0.5 * t.variance.ln() + self.deviation_term(c, i, primal, fixed) / (2.0 * t.variance);
            }
            total += sign * inner;
        }
        total
    }

    /// `τ′ − H(x + δ)` in the expanded form.
    pub fn violation(&self, tau_prime: f64, x: &[f64], delta: &[f64]) -> f64 {
        tau_prime - self.constraint_lhs(x, delta)
    }

    /// `H(v)` via the precomputed quadratic form.
    pub fn h(&self, v: &[f64]) -> f64 {
        self.quadratic_h.value(v)
    }

    pub fn grad_h(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for c in 0..2 {
            let sign = if c == 1 { -1.0 } else { 1.0 };
            for t in &self.terms[c] {
                let scale = sign * t.xi(x) / t.variance;
                for &(j, a) in &t.coeffs {
                    g[j] += scale * a;
                }
            }
        }
        g
    }

    /// `Q_c = Σ_i a_i a_iᵀ / σ²_{i|c}`, so that `∇²H = Q₀ − Q₁`.
    pub fn dc_split(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let q = |c: usize| {
            let mut m = DMatrix::zeros(self.n, self.n);
            for t in &self.terms[c] {
                for &(j, aj) in &t.coeffs {
                    for &(k, ak) in &t.coeffs {
                        m[(j, k)] += aj * ak / t.variance;
                    }
                }
            }
            m
        };
        (q(0), q(1))
    }

    /// Lipschitz constant of `H` over `{‖Wx‖_p ≤ R}` with respect to the
    /// whitened norm, using dual norms of `W⁻ᵀ a_i^c`.
    pub fn lipschitz_constant(&self, metric: &WhitenedMetric, radius: f64) -> Result<f64> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius R = {radius} must be positive")));
        }
        let p = metric.p();
        let mut g = 0.0;
        for c in 0..2 {
            for t in &self.terms[c] {
                let dual = p.dual_norm(&metric.whiten_dual(&t.dense(self.n)));
                g += (dual * radius + t.intercept.abs()) / t.variance * dual;
            }
        }
        Ok(g)
    }
}

pub fn xi(model: &CgncModel, c: usize, i: usize, v: &[f64]) -> f64 {
    let cpd = model.cpd(c, i);
    v[i] - cpd.mean(v)
}

pub fn grad_h(model: &CgncModel, x: &[f64]) -> Vec<f64> {
    build_expansion(model).grad_h(x)
}

/// Positive semi-definite check with eigenvalue floor `−1e-10`.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    min_eigenvalue(m) >= -1e-10 * m.amax().max(1.0)
}

pub fn dc_split(model: &CgncModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (q0, q1) = build_expansion(model).dc_split();
    for q in [&q0, &q1] {
        if !is_psd(q) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_eigenvalue(q),
            });
        }
    }
    Ok((q0, q1))
}

/// Ball-packing iteration bound `(R G / ε)ⁿ` and its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationBound {
    pub value: f64,
    pub ln_value: f64,
}

pub fn iteration_bound(radius: f64, g: f64, epsilon: f64, n: usize) -> Result<IterationBound> {
    if !(radius > 0.0 && g > 0.0 && epsilon > 0.0) {
        return Err(Error::InvalidArgument("R, G and ε must be positive".into()));
    }
    let ratio = radius * g / epsilon;
    Ok(IterationBound {
        value: ratio.powi(n as i32),
        ln_value: n as f64 * ratio.ln(),
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::cgnc::tests::two_gaussians;
    use crate::cgnc::NodeCpd;
    use crate::metric::NormOrder;
    use crate::structure::{structure_nb, DagStructure};

    fn random_model(n: usize, edges: &[(usize, usize)], rng: &mut ChaCha8Rng) -> CgncModel {
        let dag = DagStructure::from_edges(n, edges).unwrap();
        let cpds = [0, 1].map(|_| {
            (0..n)
                .map(|i| {
                    let parents = dag.parents(i).to_vec();
                    NodeCpd {
                        weights: parents.iter().map(|_| rng.random_range(-1.0..1.0)).collect(),
                        parents,
                        intercept: rng.random_range(-2.0..2.0),
                        variance: rng.random_range(0.2..2.0),
                    }
                })
                .collect()
        });
        let p = rng.random_range(0.2..0.8);
        CgncModel::new(dag, (0..n).map(|j| format!("f{j}")).collect(), [p, 1.0 - p], cpds).unwrap()
    }

    #[test]
    fn nb_pairs_are_squares_only() {
        let m = CgncModel::new(
            structure_nb(3).unwrap(),
            vec!["a".into(), "b".into(), "c".into()],
            [0.5, 0.5],
            [0, 1].map(|_| {
                (0..3)
                    .map(|_| NodeCpd {
                        parents: vec![],
                        weights: vec![],
                        intercept: 0.0,
                        variance: 1.0,
                    })
                    .collect()
            }),
        )
        .unwrap();
        let e = build_expansion(&m);
        assert_eq!(e.pair_set, vec![(0, 0), (1, 1), (2, 2)]);
        let (q0, q1) = e.dc_split();
        assert_eq!(q0, DMatrix::identity(3, 3));
        assert_eq!(q1, DMatrix::identity(3, 3));
    }

    #[test]
    fn chain_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = random_model(2, &[(0, 1)], &mut rng);
        let e = build_expansion(&m);
        assert_eq!(e.p_plus[1], vec![0, 1]);
        assert!(e.pair_set.contains(&(0, 1)));
        let w = m.cpd(0, 1).weights[0];
        assert_eq!(e.term(0, 1).coeffs, vec![(0, -w), (1, 1.0)]);
    }

    #[test]
    fn pair_count_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut edges = Vec::new();
        for k in 1..8 {
            for j in 0..k {
                if edges.len() < 18 && (j + k) % 3 != 0 {
                    edges.push((j, k));
                }
            }
        }
        edges.truncate(18);
        let m = random_model(8, &edges, &mut rng);
        let e = build_expansion(&m);
        let mut brute = Vec::new();
        for j in 0..8 {
            for k in j..8 {
                let co = (0..8).any(|i| {
                    let inset = |v: usize| v == i || edges.contains(&(v, i));
                    inset(j) && inset(k)
                });
                if co {
                    brute.push((j, k));
                }
            }
        }
        assert_eq!(e.pair_set, brute);
    }

    #[test]
    fn scalar_examples() {
        let m = two_gaussians();
        let e = build_expansion(&m);
        assert_eq!(e.xi(1, 0, &[3.0]), 1.0);
        assert_eq!(e.xi(0, 0, &[0.0]), 0.0);
        // a = 1, b = 0: (1 + 0.5)²
        assert_eq!(e.deviation_term(0, 0, &[1.0], &[0.5]), 2.25);
        assert_eq!(e.grad_h(&[0.3]), vec![2.0]);
        let (q0, q1) = e.dc_split();
        assert_eq!((q0[(0, 0)], q1[(0, 0)]), (1.0, 1.0));
        let g = e.lipschitz_constant(&WhitenedMetric::identity(1, NormOrder::LInf), 3.0).unwrap();
        assert_eq!(g, 8.0);
        assert!(e.lipschitz_constant(&WhitenedMetric::identity(1, NormOrder::LInf), 0.0).is_err());
    }

    #[test]
    fn iteration_bound_examples() {
        let b = iteration_bound(3.0, 8.0, 0.001, 1).unwrap();
        assert!((b.value - 24000.0).abs() < 1e-9);
        assert!((b.ln_value - 24000f64.ln()).abs() < 1e-12);
        assert_eq!(iteration_bound(2.0, 4.0, 8.0, 5).unwrap().value, 1.0);
        assert_eq!(iteration_bound(1.0, 1.0, 0.5, 2).unwrap().value, 4.0);
        assert!(iteration_bound(1e10, 1e10, 1e-10, 40).unwrap().value.is_infinite());
    }

    #[test]
    fn xi_matches_cpd_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(4, &[(0, 1), (0, 2), (1, 3), (2, 3)], &mut rng);
        let e = build_expansion(&m);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        for c in 0..2 {
            for i in 0..4 {
                assert!((e.xi(c, i, &x) - xi(&m, c, i, &x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expanded_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = random_model(4, &[(0, 1), (1, 2), (0, 3), (2, 3)], &mut rng);
            let e = build_expansion(&m);
            for _ in 0..50 {
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                let d: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
                let v: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
                let h = m.decision_h(&v);
                assert!((e.constraint_lhs(&x, &d) - h).abs() < 1e-9);
                assert!((e.h(&v) - h).abs() < 1e-9);
                for c in 0..2 {
                    for i in 0..4 {
                        let direct = e.deviation_term(c, i, &x, &d);
                        let poly = e.deviation_poly(c, i, &d).evaluate(&x);
                        assert!((direct - poly).abs() < 1e-10 * (1.0 + direct));
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(4, &[(0, 1), (1, 2), (2, 3)], &mut rng);
        let e = build_expansion(&m);
        let (q0, q1) = dc_split(&m).unwrap();
        let hess = &q0 - &q1;
        assert!((&hess - &e.quadratic_h().hessian).amax() < 1e-12);
        let step = 1e-5;
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = e.grad_h(&x);
            for j in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += step;
                xm[j] -= step;
                let fd = (m.decision_h(&xp) - m.decision_h(&xm)) / (2.0 * step);
                assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0));
                let gp = e.grad_h(&xp);
                let gm = e.grad_h(&xm);
                for k in 0..4 {
                    let fd2 = (gp[k] - gm[k]) / (2.0 * step);
                    assert!((fd2 - hess[(k, j)]).abs() < 1e-6);
                }
            }
        }
    }
}
