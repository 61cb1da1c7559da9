//! Conditional Gaussian network classifier: per-class linear Gaussian
//! nodes over a shared feature DAG.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::structure::DagStructure;

/// Lower limit applied to every fitted conditional variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Ridge penalty used when a regression design is singular.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Linear Gaussian CPD for one node in one class. `weights[k]` belongs to
/// `parents[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCpd {
    pub parents: Vec<usize>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub variance: f64,
}

impl NodeCpd {
    pub fn mean(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .parents
                .iter()
                .zip(&self.weights)
                .map(|(&j, &w)| w * x[j])
                .sum::<f64>()
    }

    pub fn weight_of(&self, parent: usize) -> f64 {
        self.parents
            .iter()
            .position(|&p| p == parent)
            .map_or(0.0, |k| self.weights[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgncModel {
    structure: DagStructure,
    feature_names: Vec<String>,
    priors: [f64; 2],
    cpds: [Vec<NodeCpd>; 2],
}

/// `A_c` rows and the implied class covariance.
#[derive(Debug, Clone)]
pub struct ClassGeometry {
    pub a_rows: Vec<Vec<f64>>,
    pub covariance: DMatrix<f64>,
}

impl ClassGeometry {
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let n = self.a_rows.len();
        DMatrix::from_fn(n, n, |i, j| self.a_rows[i][j])
    }
}

/// `ln(τ / (1 − τ))`.
pub fn log_threshold(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold τ = {tau} must lie in (0, 1)")));
    }
    if tau == 0.5 {
        return Ok(0.0);
    }
    Ok((tau / (1.0 - tau)).ln())
}

impl CgncModel {
    /// Assembles a model, checking priors, CPD shapes against the structure
    /// and variance positivity.
    pub fn new(
        structure: DagStructure,
        feature_names: Vec<String>,
        priors: [f64; 2],
        cpds: [Vec<NodeCpd>; 2],
    ) -> Result<Self> {
        let n = structure.n();
        if feature_names.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: feature_names.len(),
            });
        }
        if !(priors[0] > 0.0 && priors[1] > 0.0) || ((priors[0] + priors[1]) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "priors {priors:?} must be positive and sum to one"
            )));
        }
        for class_cpds in &cpds {
            if class_cpds.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: class_cpds.len(),
                });
            }
            for (i, cpd) in class_cpds.iter().enumerate() {
                if cpd.parents != structure.parents(i) || cpd.weights.len() != cpd.parents.len() {
                    return Err(Error::InvalidArgument(format!(
                        "CPD of node {i} is not keyed by its parent set {:?}",
                        structure.parents(i)
                    )));
                }
                let finite = cpd.weights.iter().all(|w| w.is_finite()) && cpd.intercept.is_finite();
                if !finite || !(cpd.variance > 0.0 && cpd.variance.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "CPD of node {i} has non-finite parameters or non-positive variance"
                    )));
                }
            }
        }
        Ok(Self {
            structure,
            feature_names,
            priors,
            cpds,
        })
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }

    pub fn structure(&self) -> &DagStructure {
        &self.structure
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn priors(&self) -> [f64; 2] {
        self.priors
    }

    pub fn cpds(&self, c: usize) -> &[NodeCpd] {
        &self.cpds[c]
    }

    pub fn cpd(&self, c: usize, i: usize) -> &NodeCpd {
        &self.cpds[c][i]
    }

    pub fn log_density_node(&self, c: usize, i: usize, x: &[f64]) -> f64 {
        let cpd = &self.cpds[c][i];
        let dev = x[i] - cpd.mean(x);
        -0.5 * (2.0 * PI * cpd.variance).ln() - dev * dev / (2.0 * cpd.variance)
    }

    /// `log ρ_c + Σ_i log N(x_i; μ̂_{i|c}, σ²_{i|c})`.
    pub fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        self.priors[c].ln() + (0..self.n()).map(|i| self.log_density_node(c, i, x)).sum::<f64>()
    }

    /// Constant part `log ρ_c − Σ_i ½ log(2π σ²_{i|c})` of the affine form.
    pub fn log_normalizer(&self, c: usize) -> f64 {
        self.priors[c].ln()
            - self.cpds[c]
                .iter()
                .map(|cpd| 0.5 * (2.0 * PI * cpd.variance).ln())
                .sum::<f64>()
    }

    /// `−Σ_i (a_iᵀx − b_i)² / (2σ²) + C_c`, written with the `a` coefficients.
    pub fn log_joint_affine(&self, c: usize, x: &[f64]) -> f64 {
        let quad: f64 = self.cpds[c]
            .iter()
            .enumerate()
            .map(|(i, cpd)| {
                let mut ax = x[i];
                for (&j, &w) in cpd.parents.iter().zip(&cpd.weights) {
                    ax -= w * x[j];
                }
                let xi = ax - cpd.intercept;
                xi * xi / (2.0 * cpd.variance)
            })
            .sum();
        self.log_normalizer(c) - quad
    }

    /// Log-relative likelihood `log h_1(x) − log h_0(x)`.
    pub fn decision_h(&self, x: &[f64]) -> f64 {
        self.log_joint(1, x) - self.log_joint(0, x)
    }

    /// Class 1 iff `H(x) ≥ ln(τ/(1−τ))`.
    pub fn classify(&self, x: &[f64], tau: f64) -> Result<u8> {
        let threshold = log_threshold(tau)?;
        Ok(u8::from(self.decision_h(x) >= threshold))
    }

    pub fn posterior_1(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.decision_h(x)).exp())
    }

    /// Dense `a_i^c` rows: 1 on the diagonal, `−w_ij` at parents.
    pub fn a_rows(&self, c: usize) -> Vec<Vec<f64>> {
        let n = self.n();
        self.cpds[c]
            .iter()
            .enumerate()
            .map(|(i, cpd)| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                for (&j, &w) in cpd.parents.iter().zip(&cpd.weights) {
                    row[j] = -w;
                }
                row
            })
            .collect()
    }

    /// `Σ_c = A_c⁻¹ diag(σ²) A_c⁻ᵀ`.
    pub fn class_geometry(&self, c: usize) -> Result<ClassGeometry> {
        let n = self.n();
        self.structure.topological_order()?;
        let a_rows = self.a_rows(c);
        let a = DMatrix::from_fn(n, n, |i, j| a_rows[i][j]);
        let a_inv = a
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("A_c is singular".into()))?;
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            self.cpds[c].iter().map(|cpd| cpd.variance),
        ));
        let mut cov = &a_inv * d * a_inv.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        if cov.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_eigenvalue(&cov),
            });
        }
        Ok(ClassGeometry {
            a_rows,
            covariance: cov,
        })
    }

    /// Class-conditional mean vector `A_c⁻¹ b_c`, evaluated in topological order.
    pub fn class_mean(&self, c: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        for i in self.structure.topological_order().expect("structure is acyclic") {
            x[i] = self.cpds[c][i].mean(&x);
        }
        x
    }

    /// Draws one instance of class `c` by ancestral sampling.
    pub fn sample_class<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Vec<f64> {
        let order = self.structure.topological_order().expect("structure is acyclic");
        let mut x = vec![0.0; self.n()];
        for i in order {
            let cpd = &self.cpds[c][i];
            let z: f64 = StandardNormal.sample(rng);
            x[i] = cpd.mean(&x) + cpd.variance.sqrt() * z;
        }
        x
    }

    /// Draws a labelled dataset with classes drawn from the priors.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Result<Dataset> {
        let mut features = Vec::with_capacity(rows);
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            let c = usize::from(rng.random::<f64>() < self.priors[1]);
            features.push(self.sample_class(c, rng));
            labels.push(c as u8);
        }
        Dataset::new(features, labels, self.feature_names.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDoc::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocIn = serde_json::from_str(text)?;
        doc.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Fits per-class least-squares CPDs on the given structure. Priors are the
/// class frequencies.
pub fn fit(ds: &Dataset, structure: &DagStructure) -> Result<CgncModel> {
    let n = ds.n_features();
    if structure.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: structure.n(),
        });
    }
    let total = ds.n_rows() as f64;
    let priors = [
        ds.class_count(0) as f64 / total,
        ds.class_count(1) as f64 / total,
    ];
    let mut cpds: [Vec<NodeCpd>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for c in 0..2 {
        let rows = ds.class_rows(c as u8);
        for i in 0..n {
            let parents = structure.parents(i).to_vec();
            let params = parents.len() + 1;
            if rows.len() < parents.len() + 2 {
                return Err(Error::InsufficientRows {
                    class: c,
                    node: i,
                    rows: rows.len(),
                    params,
                });
            }
            cpds[c].push(fit_node(&rows, i, parents, c));
        }
    }
    CgncModel::new(structure.clone(), ds.feature_names().to_vec(), priors, cpds)
}

/// OLS of `x_i` on `(x_P, 1)` with centred columns; a singular Gram matrix
/// falls back to ridge.
fn fit_node(rows: &[&[f64]], i: usize, parents: Vec<usize>, class: usize) -> NodeCpd {
    let count = rows.len();
    let dof = (count - parents.len() - 1) as f64;
    let y_mean = rows.iter().map(|r| r[i]).sum::<f64>() / count as f64;
    if parents.is_empty() {
        let rss: f64 = rows.iter().map(|r| (r[i] - y_mean).powi(2)).sum();
        return NodeCpd {
            parents,
            weights: Vec::new(),
            intercept: y_mean,
            variance: (rss / dof).max(VARIANCE_FLOOR),
        };
    }
    let p = parents.len();
    let means: Vec<f64> = parents
        .iter()
        .map(|&j| rows.iter().map(|r| r[j]).sum::<f64>() / count as f64)
        .collect();
    let x = DMatrix::from_fn(count, p, |r, k| rows[r][parents[k]] - means[k]);
    let y = DVector::from_fn(count, |r, _| rows[r][i] - y_mean);
    let gram = x.transpose() * &x;
    let rhs = x.transpose() * &y;
    let eig = gram.clone().symmetric_eigenvalues();
    let max_eig = eig.iter().copied().fold(0.0, f64::max);
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let singular = !(max_eig > 0.0) || min_eig <= 1e-12 * max_eig;
    let solution = if singular {
        None
    } else {
        gram.clone().cholesky().map(|ch| ch.solve(&rhs))
    };
    let w = solution.unwrap_or_else(|| {
        log::warn!(
            "class {class}, node {i}: singular regression design on parents {parents:?}; using ridge λ={RIDGE_LAMBDA:e}"
        );
        let ridge = &gram + DMatrix::identity(p, p) * RIDGE_LAMBDA;
        ridge
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .or_else(|| ridge.lu().solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(p))
    });
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    let rss: f64 = rows
        .iter()
        .map(|r| {
            let fitted = intercept
                + parents
                    .iter()
                    .zip(&weights)
                    .map(|(&j, &w)| w * r[j])
                    .sum::<f64>();
            (r[i] - fitted).powi(2)
        })
        .sum();
    NodeCpd {
        parents,
        weights,
        intercept,
        variance: (rss / dof).max(VARIANCE_FLOOR),
    }
}

/// Real number written with 17 significant digits.
struct Real17(f64);

impl Serialize for Real17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = serde_json::value::RawValue::from_string(format!("{:.16e}", self.0))
            .map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Serialize)]
struct CpdDoc {
    parents: Vec<usize>,
    weights: Vec<Real17>,
    intercept: Real17,
    variance: Real17,
}

#[derive(Serialize)]
struct ModelDoc {
    n: usize,
    feature_names: Vec<String>,
    priors: [Real17; 2],
    edges: Vec<(usize, usize, Real17, Real17)>,
    cpds: [Vec<CpdDoc>; 2],
}

impl ModelDoc {
    fn from_model(m: &CgncModel) -> Self {
        let cpd_doc = |cpd: &NodeCpd| CpdDoc {
            parents: cpd.parents.clone(),
            weights: cpd.weights.iter().map(|&w| Real17(w)).collect(),
            intercept: Real17(cpd.intercept),
            variance: Real17(cpd.variance),
        };
        Self {
            n: m.n(),
            feature_names: m.feature_names.clone(),
            priors: [Real17(m.priors[0]), Real17(m.priors[1])],
            edges: m
                .structure
                .edges()
                .into_iter()
                .map(|(j, k)| {
                    (
                        j,
                        k,
                        Real17(m.cpds[0][k].weight_of(j)),
                        Real17(m.cpds[1][k].weight_of(j)),
                    )
                })
                .collect(),
            cpds: [
                m.cpds[0].iter().map(cpd_doc).collect(),
                m.cpds[1].iter().map(cpd_doc).collect(),
            ],
        }
    }
}

#[derive(Deserialize)]
struct CpdDocIn {
    parents: Vec<usize>,
    weights: Vec<f64>,
    intercept: f64,
    variance: f64,
}

#[derive(Deserialize)]
struct ModelDocIn {
    n: usize,
    feature_names: Vec<String>,
    priors: [f64; 2],
    #[serde(deserialize_with = "edge_rows")]
    edges: Vec<(usize, usize, f64, f64)>,
    cpds: [Vec<CpdDocIn>; 2],
}

fn edge_rows<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<(usize, usize, f64, f64)>, D::Error> {
    let rows: Vec<Vec<serde_json::Value>> = Vec::deserialize(d)?;
    rows.into_iter()
        .map(|r| {
            let idx = |v: &serde_json::Value| {
                v.as_u64()
                    .map(|u| u as usize)
                    .ok_or_else(|| D::Error::custom("edge index must be a non-negative integer"))
            };
            let real = |v: &serde_json::Value| {
                v.as_f64().ok_or_else(|| D::Error::custom("edge weight must be a number"))
            };
            if r.len() != 4 {
                return Err(D::Error::custom("edge rows have four entries [j, k, w_c0, w_c1]"));
            }
            Ok((idx(&r[0])?, idx(&r[1])?, real(&r[2])?, real(&r[3])?))
        })
        .collect()
}

impl ModelDocIn {
    fn into_model(self) -> Result<CgncModel> {
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.0, e.1)).collect();
        let structure = DagStructure::from_edges(self.n, &pairs)?;
        let [c0, c1] = self.cpds;
        let convert = |v: Vec<CpdDocIn>| -> Vec<NodeCpd> {
            v.into_iter()
                .map(|d| NodeCpd {
                    parents: d.parents,
                    weights: d.weights,
                    intercept: d.intercept,
                    variance: d.variance,
                })
                .collect()
        };
        let model = CgncModel::new(structure, self.feature_names, self.priors, [convert(c0), convert(c1)])?;
        for &(j, k, w0, w1) in &self.edges {
            if model.cpds[0][k].weight_of(j) != w0 || model.cpds[1][k].weight_of(j) != w1 {
                return Err(Error::InvalidModel(format!(
                    "edge {j} -> {k} weights disagree with the CPD table"
                )));
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::structure::structure_nb;

    /// 1-D model with class 0 ~ N(0,1), class 1 ~ N(2,1), equal priors.
    pub(crate) fn two_gaussians() -> CgncModel {
        let cpd = |mean: f64| NodeCpd {
            parents: vec![],
            weights: vec![],
            intercept: mean,
            variance: 1.0,
        };
        CgncModel::new(
            structure_nb(1).unwrap(),
            vec!["x".into()],
            [0.5, 0.5],
            [vec![cpd(0.0)], vec![cpd(2.0)]],
        )
        .unwrap()
    }

    /// NB model with identical classes, so `H ≡ 0`.
    pub(crate) fn symmetric_model(n: usize) -> CgncModel {
        let cpds: Vec<NodeCpd> = (0..n)
            .map(|i| NodeCpd {
                parents: vec![],
                weights: vec![],
                intercept: 0.1 * i as f64,
                variance: 1.0 + i as f64,
            })
            .collect();
        CgncModel::new(
            structure_nb(n).unwrap(),
            (0..n).map(|i| format!("f{i}")).collect(),
            [0.5, 0.5],
            [cpds.clone(), cpds],
        )
        .unwrap()
    }

    fn chain_model(w0: f64, w1: f64) -> CgncModel {
        let structure = DagStructure::from_edges(2, &[(0, 1)]).unwrap();
        let class = |w: f64, b: f64| {
            vec![
                NodeCpd {
                    parents: vec![],
                    weights: vec![],
                    intercept: b,
                    variance: 1.5,
                },
                NodeCpd {
                    parents: vec![0],
                    weights: vec![w],
                    intercept: -b,
                    variance: 0.5,
                },
            ]
        };
        CgncModel::new(
            structure,
            vec!["a".into(), "b".into()],
            [0.4, 0.6],
            [class(w0, 0.3), class(w1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn threshold_values() {
        assert_eq!(log_threshold(0.5).unwrap(), 0.0);
        assert!((log_threshold(0.75).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert!((log_threshold(0.25).unwrap() + 3f64.ln()).abs() < 1e-12);
        assert!(log_threshold(0.0).is_err());
        assert!(log_threshold(1.0).is_err());
    }

    #[test]
    fn density_examples() {
        let m = two_gaussians();
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        assert!((m.log_density_node(0, 0, &[0.0]) + half_log_2pi).abs() < 1e-15);
        assert!((m.log_density_node(0, 0, &[2.0]) + half_log_2pi + 2.0).abs() < 1e-15);
        assert!((m.log_joint(0, &[0.0]) - (0.5f64.ln() - half_log_2pi)).abs() < 1e-15);
    }

    #[test]
    fn decision_function_two_gaussians() {
        let m = two_gaussians();
        for x in [-3.0, 0.0, 1.0, 2.5] {
            assert!((m.decision_h(&[x]) - (2.0 * x - 2.0)).abs() < 1e-12);
        }
        assert_eq!(m.classify(&[1.0], 0.5).unwrap(), 1);
        assert_eq!(m.classify(&[0.0], 0.5).unwrap(), 0);
        assert_eq!(m.classify(&[2.0], 0.5).unwrap(), 1);
        assert_eq!(m.classify(&[1.2], 0.75).unwrap(), 0);
    }

    #[test]
    fn identical_classes_give_zero_h() {
        let m = chain_model(0.7, 0.7);
        let m = CgncModel::new(
            m.structure.clone(),
            m.feature_names.clone(),
            [0.5, 0.5],
            [m.cpds[0].clone(), m.cpds[0].clone()],
        )
        .unwrap();
        assert_eq!(m.decision_h(&[0.3, -1.2]), 0.0);
    }

    #[test]
    fn geometry_of_chain_and_nb() {
        let m = chain_model(0.5, -0.25);
        let g = m.class_geometry(0).unwrap();
        assert_eq!(g.a_rows[1], vec![-0.5, 1.0]);
        // x0 ~ N(b, 1.5), x1 = 0.5 x0 + e, var(e) = 0.5
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, 0.75, 0.75, 0.375 + 0.5]);
        assert!((g.covariance - expected).norm() < 1e-12);

        let nb = two_gaussians();
        let g = nb.class_geometry(1).unwrap();
        assert_eq!(g.a_rows, vec![vec![1.0]]);
        assert_eq!(g.covariance[(0, 0)], 1.0);
    }

    #[test]
    fn fit_exact_linear_relation() {
        let features: Vec<Vec<f64>> = (0..20)
            .map(|r| {
                let x = r as f64 * 0.37 - 2.0;
                vec![x, 2.0 * x + 1.0]
            })
            .collect();
        let labels = (0..20).map(|r| (r % 2) as u8).collect();
        let ds = Dataset::new(features, labels, vec!["a".into(), "b".into()]).unwrap();
        let dag = DagStructure::from_edges(2, &[(0, 1)]).unwrap();
        let m = fit(&ds, &dag).unwrap();
        for c in 0..2 {
            let cpd = m.cpd(c, 1);
            assert!((cpd.weights[0] - 2.0).abs() < 1e-10);
            assert!((cpd.intercept - 1.0).abs() < 1e-9);
            assert_eq!(cpd.variance, VARIANCE_FLOOR);
        }
        assert_eq!(m.priors(), [0.5, 0.5]);
    }

    #[test]
    fn fit_parentless_node() {
        let ds = Dataset::new(
            vec![vec![1.0], vec![3.0], vec![0.0], vec![10.0]],
            vec![0, 0, 1, 1],
            vec!["x".into()],
        )
        .unwrap();
        let m = fit(&ds, &structure_nb(1).unwrap()).unwrap();
        assert_eq!(m.cpd(0, 0).intercept, 2.0);
        assert_eq!(m.cpd(0, 0).variance, 2.0);
        assert_eq!(m.cpd(1, 0).intercept, 5.0);
        assert_eq!(m.cpd(1, 0).variance, 50.0);
    }

    #[test]
    fn fit_rejects_too_few_rows() {
        let ds = Dataset::new(
            vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![0.0, 0.0], vec![1.0, 5.0], vec![2.0, 2.5]],
            vec![0, 0, 1, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let dag = DagStructure::from_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(
            fit(&ds, &dag),
            Err(Error::InsufficientRows { class: 0, node: 1, .. })
        ));
    }

    #[test]
    fn collinear_parents_fall_back_to_ridge() {
        let features: Vec<Vec<f64>> = (0..30)
            .map(|r| {
                let x = (r as f64).sin();
                vec![x, 2.0 * x, x + 0.1 * (r as f64).cos()]
            })
            .collect();
        let labels = (0..30).map(|r| (r % 2) as u8).collect();
        let ds = Dataset::new(features, labels, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let dag = DagStructure::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let m = fit(&ds, &dag).unwrap();
        let cpd = m.cpd(0, 2);
        assert!(cpd.weights.iter().all(|w| w.is_finite()));
        // the combined effect w_a + 2 w_b is identified even though the split is not
        assert!((cpd.weights[0] + 2.0 * cpd.weights[1] - 1.0).abs() < 0.1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = chain_model(0.1 + 0.2, -1.0 / 3.0);
        let text = m.to_json().unwrap();
        let back = CgncModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        let keys: Vec<usize> = ["\"n\"", "\"feature_names\"", "\"priors\"", "\"edges\"", "\"cpds\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("3.0000000000000004e-1"));
    }

    #[test]
    fn json_rejects_inconsistent_edges() {
        let m = chain_model(0.5, 0.5);
        let text = m.to_json().unwrap().replacen("5.0000000000000000e-1", "4.0e-1", 1);
        assert!(CgncModel::from_json(&text).is_err());
    }

    #[test]
    fn fit_recovers_sampled_parameters() {
        let truth = chain_model(0.8, -0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ds = truth.sample_dataset(100_000, &mut rng).unwrap();
        let m = fit(&ds, truth.structure()).unwrap();
        for c in 0..2 {
            for i in 0..2 {
                let (a, b) = (truth.cpd(c, i), m.cpd(c, i));
                for (wa, wb) in a.weights.iter().zip(&b.weights) {
                    assert!((wa - wb).abs() < 0.02);
                }
                assert!((a.intercept - b.intercept).abs() < 0.02);
                assert!((a.variance - b.variance).abs() / a.variance < 0.05);
            }
        }
    }

    proptest! {
        #[test]
        fn density_matches_gaussian_pdf(
            x0 in -5.0f64..5.0, x1 in -5.0f64..5.0, c in 0usize..2,
        ) {
            let m = chain_model(0.9, -0.4);
            let x = [x0, x1];
            for i in 0..2 {
                let cpd = m.cpd(c, i);
                let mu = cpd.mean(&x);
                let pdf = (-(x[i] - mu).powi(2) / (2.0 * cpd.variance)).exp()
                    / (2.0 * PI * cpd.variance).sqrt();
                prop_assert!((m.log_density_node(c, i, &x) - pdf.ln()).abs() < 1e-12);
            }
            prop_assert!((m.log_joint(c, &x) - m.log_joint_affine(c, &x)).abs() < 1e-10);
        }

        #[test]
        fn classify_matches_posterior_and_argmax(x0 in -6.0f64..6.0, x1 in -6.0f64..6.0) {
            let m = chain_model(0.9, -0.4);
            let x = [x0, x1];
            let (h0, h1) = (m.log_joint(0, &x).exp(), m.log_joint(1, &x).exp());
            let post = h1 / (h0 + h1);
            let label = m.classify(&x, 0.5).unwrap();
            prop_assert_eq!(label == 1, post >= 0.5);
            let argmax = u8::from(m.log_joint(1, &x) >= m.log_joint(0, &x));
            prop_assert_eq!(label, argmax);
        }
    }
}
