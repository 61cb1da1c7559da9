//! Numerical self-checks for a fitted model: Lipschitz constant and the
//! cutting-set iteration bound, curvature spectra, and consistency of the
//! analytic gradient and the alternative density forms.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cgnc::CgncModel;
use crate::data::FeatureBounds;
use crate::error::Result;
use crate::expansion::{build_expansion, iteration_bound};
use crate::metric::{build_metric, NormOrder, WhitenedMetric};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectra {
    /// Eigenvalues of `Q₀`, ascending.
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    /// Eigenvalues of the Hessian `Q₀ − Q₁`.
    pub hessian: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub n: usize,
    pub p: NormOrder,
    /// Domain radius in the whitened norm.
    pub radius: f64,
    /// The same box measured in the plain ℓp norm, when a box was given.
    pub radius_raw: Option<f64>,
    pub epsilon: f64,
    pub lipschitz: f64,
    pub iteration_bound: f64,
    pub iteration_bound_ln: f64,
    pub spectra: Spectra,
    /// Largest `‖∇H − central difference‖_∞ / max(1, ‖∇H‖_∞)`.
    pub gradient_max_rel_error: f64,
    /// Largest gap between the product and affine forms of `log h_c`.
    pub affine_form_max_error: f64,
    /// Largest gap between the expanded constraint and `H(x + δ)`.
    pub expanded_form_max_error: f64,
    pub sample_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub p: NormOrder,
    /// Explicit radius; otherwise taken from `bounds`.
    pub radius: Option<f64>,
    pub bounds: Option<FeatureBounds>,
    pub epsilon: f64,
    pub points: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            p: NormOrder::LInf,
            radius: None,
            bounds: None,
            epsilon: 1e-3,
            points: 100,
            seed: 0,
        }
    }
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    diff / scale
}

/// Runs every check on points drawn from the model itself.
pub fn check_model(model: &CgncModel, opts: &CheckOptions) -> Result<CheckReport> {
    let n = model.n();
    let exp = build_expansion(model);
    let metric = build_metric(&model.class_geometry(0)?.covariance, opts.p)?;
    let (radius, radius_raw) = match (opts.radius, &opts.bounds) {
        (Some(r), b) => (r, b.as_ref().map(|b| WhitenedMetric::identity(n, opts.p).box_radius(b))),
        (None, Some(b)) => (metric.box_radius(b), Some(WhitenedMetric::identity(n, opts.p).box_radius(b))),
        (None, None) => {
            return Err(crate::Error::InvalidArgument("a radius or a bounding box is required".into()))
        }
    };
    let lipschitz = exp.lipschitz_constant(&metric, radius)?;
    let bound = iteration_bound(radius, lipschitz, opts.epsilon, n)?;
    let (q0, q1) = exp.dc_split();
    let spectra = Spectra {
        q0: sorted_eigenvalues(&q0),
        q1: sorted_eigenvalues(&q1),
        hessian: sorted_eigenvalues(&(&q0 - &q1)),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut grad_err: f64 = 0.0;
    let mut affine_err: f64 = 0.0;
    let mut expanded_err: f64 = 0.0;
    for k in 0..opts.points {
        let x = model.sample_class(k % 2, &mut rng);
        let delta = model.sample_class((k + 1) % 2, &mut rng);
        let delta: Vec<f64> = delta.iter().zip(&x).map(|(d, xv)| 0.1 * (d - xv)).collect();
        let g = exp.grad_h(&x);
        let fd: Vec<f64> = (0..n)
            .map(|j| {
                let h = 1e-5 * (1.0 + x[j].abs());
                let mut a = x.clone();
                let mut b = x.clone();
                a[j] += h;
                b[j] -= h;
                (model.decision_h(&a) - model.decision_h(&b)) / (2.0 * h)
            })
            .collect();
        grad_err = grad_err.max(rel_error(&g, &fd));
        for c in 0..2 {
            affine_err = affine_err.max((model.log_joint(c, &x) - model.log_joint_affine(c, &x)).abs());
        }
        let shifted: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        expanded_err = expanded_err.max((exp.constraint_lhs(&x, &delta) - model.decision_h(&shifted)).abs());
    }
    Ok(CheckReport {
        n,
        p: opts.p,
        radius,
        radius_raw,
        epsilon: opts.epsilon,
        lipschitz,
        iteration_bound: bound.value,
        iteration_bound_ln: bound.ln_value,
        spectra,
        gradient_max_rel_error: grad_err,
        affine_form_max_error: affine_err,
        expanded_form_max_error: expanded_err,
        sample_points: opts.points,
    })
}
