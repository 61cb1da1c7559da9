use crate::error::{Error, Result};
use crate::expansion::ExpandedForm;
use crate::metric::{NormOrder, UncertaintySet, WhitenedMetric};

use super::mccormick::{mccormick_block, product_bounds, PartitionScheme};
use super::tighten::TighteningState;
use super::{MilpModel, ObjectiveSense, Sense, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Also emit the mirrored block partitioned on the larger index of each
    /// off-diagonal pair.
    pub double_partition: bool,
    /// Add valid inequalities that need no indicators: the single-segment
    /// envelope of every product and the aggregated segment membership
    /// `Σ_r λ_r l^r ≤ x_j ≤ Σ_r λ_r l^{r+1}`.
    pub strengthen: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            double_partition: false,
            strengthen: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpLayout {
    pub x: Vec<VarId>,
    /// Indexed like `ExpandedForm::pair_set`.
    pub z: Vec<VarId>,
    pub lambda: Vec<Vec<VarId>>,
    /// `t` for p = ∞, `s_1..s_n` for p = 1.
    pub norm_aux: Vec<VarId>,
}

impl MpLayout {
    pub fn x_values(&self, values: &[f64]) -> Vec<f64> {
        self.x.iter().map(|v| values[v.0]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApLayout {
    pub delta: Vec<VarId>,
    pub eta: Vec<VarId>,
    pub lambda: Vec<Vec<VarId>>,
    pub ball_aux: Vec<VarId>,
}

impl ApLayout {
    pub fn delta_values(&self, values: &[f64]) -> Vec<f64> {
        self.delta.iter().map(|v| values[v.0]).collect()
    }
}

/// `H(y + fixed)` as `Σ_q cz[q]·y_j y_k + Σ_j cy[j]·y_j + constant`.
pub(crate) struct LinearizedH {
    pub pair_coeffs: Vec<f64>,
    pub var_coeffs: Vec<f64>,
    pub constant: f64,
}

pub(crate) fn linearized_h(exp: &ExpandedForm, fixed: &[f64]) -> LinearizedH {
    let n = exp.n();
    let mut pair_coeffs = vec![0.0; exp.pair_set.len()];
    let mut var_coeffs = vec![0.0; n];
    let mut constant = 0.0;
    for c in 0..2 {
        let sign = if c == 1 { 1.0 } else { -1.0 };
        constant += sign * exp.log_priors[c];
        for i in 0..n {
            let t = exp.term(c, i);
            let poly = exp.deviation_poly(c, i, fixed);
            let scale = -sign / (2.0 * t.variance);
            constant += -sign * 0.5 * t.variance.ln() + scale * poly.constant;
            for &(j, l) in &poly.linear {
                var_coeffs[j] += scale * l;
            }
            for &((j, k), q) in &poly.quadratic {
                let idx = exp.pair_index(j, k).expect("pair belongs to the pair set");
                pair_coeffs[idx] += scale * q;
            }
        }
    }
    LinearizedH {
        pair_coeffs,
        var_coeffs,
        constant,
    }
}

/// Adds product variables and piecewise envelopes for every pair in `Q`
/// over the given factor bounds. Returns `(product vars, indicator vars)`.
fn add_relaxation(
    model: &mut MilpModel,
    exp: &ExpandedForm,
    factors: &[VarId],
    bounds: (&[f64], &[f64]),
    m: usize,
    prefix: &str,
    opts: BuildOptions,
) -> Result<(Vec<VarId>, Vec<Vec<VarId>>)> {
    let n = exp.n();
    let (lower, upper) = bounds;
    let schemes: Vec<PartitionScheme> = (0..n)
        .map(|j| PartitionScheme::uniform(lower[j], upper[j], m))
        .collect::<Result<_>>()?;
    let lambda: Vec<Vec<VarId>> = (0..n)
        .map(|j| (0..m).map(|r| model.add_binary(format!("lam{prefix}{j}_{r}"))).collect())
        .collect();
    for (j, lam) in lambda.iter().enumerate() {
        let coeffs = lam.iter().map(|&l| (l, 1.0)).collect();
        model.add_constraint(format!("sos_{prefix}{j}"), coeffs, Sense::Eq, 1.0);
    }
    if opts.strengthen {
        for (j, lam) in lambda.iter().enumerate() {
            let bp = &schemes[j].breakpoints;
            let mut lo_row: Vec<(VarId, f64)> = vec![(factors[j], 1.0)];
            lo_row.extend(lam.iter().enumerate().map(|(r, &l)| (l, -bp[r])));
            model.add_constraint(format!("seg_{prefix}{j}_lo"), lo_row, Sense::Ge, 0.0);
            let mut hi_row: Vec<(VarId, f64)> = vec![(factors[j], 1.0)];
            hi_row.extend(lam.iter().enumerate().map(|(r, &l)| (l, -bp[r + 1])));
            model.add_constraint(format!("seg_{prefix}{j}_hi"), hi_row, Sense::Le, 0.0);
        }
    }
    let mut products = Vec::with_capacity(exp.pair_set.len());
    for &(j, k) in &exp.pair_set {
        let (lo, hi) = product_bounds(lower[j], upper[j], lower[k], upper[k], j == k);
        products.push(model.add_continuous(format!("{prefix}{j}_{k}"), lo, hi));
    }
    for (q, &(j, k)) in exp.pair_set.iter().enumerate() {
        let z = products[q];
        mccormick_block(model, factors[j], factors[k], z, &schemes[j], (lower[k], upper[k]), &lambda[j])?;
        if opts.strengthen {
            let (xj, xk) = (factors[j], factors[k]);
            let (lj, uj, lk, uk) = (lower[j], upper[j], lower[k], upper[k]);
            let tag = format!("env_{prefix}{j}_{k}");
            model.add_constraint(format!("{tag}_a"), vec![(z, 1.0), (xj, -lk), (xk, -lj)], Sense::Ge, -lj * lk);
            model.add_constraint(format!("{tag}_b"), vec![(z, 1.0), (xj, -uk), (xk, -uj)], Sense::Ge, -uj * uk);
            model.add_constraint(format!("{tag}_c"), vec![(z, 1.0), (xj, -uk), (xk, -lj)], Sense::Le, -lj * uk);
            model.add_constraint(format!("{tag}_d"), vec![(z, 1.0), (xj, -lk), (xk, -uj)], Sense::Le, -uj * lk);
        }
        if opts.double_partition && j != k {
            mccormick_block(model, factors[k], factors[j], z, &schemes[k], (lower[j], upper[j]), &lambda[k])?;
        }
    }
    Ok((products, lambda))
}

/// Relaxed master problem: minimise `‖W(x − x_fac)‖_p` subject to the
/// linearized classification row for every scenario.
pub fn build_mp(
    exp: &ExpandedForm,
    metric: &WhitenedMetric,
    factual: &[f64],
    scenarios: &[Vec<f64>],
    tightening: &TighteningState,
    tau_prime: f64,
    opts: BuildOptions,
) -> Result<(MilpModel, MpLayout)> {
    let n = exp.n();
    if metric.p() == NormOrder::L2 {
        return Err(Error::QuadraticNormUnsupported);
    }
    if scenarios.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    if factual.len() != n || metric.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: factual.len(),
        });
    }
    let bounds = &tightening.current_bounds;
    let mut model = MilpModel::new(format!("mp_t{}", tightening.t), ObjectiveSense::Minimize);
    let x: Vec<VarId> = (0..n)
        .map(|j| model.add_continuous(format!("x{j}"), bounds.lower[j], bounds.upper[j]))
        .collect();
    let (z, lambda) = add_relaxation(
        &mut model,
        exp,
        &x,
        (&bounds.lower, &bounds.upper),
        tightening.m_t,
        "z",
        opts,
    )?;

    // |(W(x − x_fac))_i| over the box, for auxiliary bounds
    let w = metric.whitener();
    let row_max: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let a = w[(i, j)].abs();
                    a * (bounds.lower[j] - factual[j]).abs().max((bounds.upper[j] - factual[j]).abs())
                })
                .sum()
        })
        .collect();
    let w_fac: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[(i, j)] * factual[j]).sum()).collect();
    let w_row = |i: usize, sign: f64| -> Vec<(VarId, f64)> { (0..n).map(|j| (x[j], sign * w[(i, j)])).collect() };
    let norm_aux = match metric.p() {
        NormOrder::LInf => {
            let t = model.add_continuous("t", 0.0, row_max.iter().copied().fold(0.0, f64::max));
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut coeffs = w_row(i, sign);
                    coeffs.push((t, -1.0));
                    model.add_constraint(format!("dist{i}_{}", sign as i8), coeffs, Sense::Le, sign * w_fac[i]);
                }
            }
            model.set_objective(vec![(t, 1.0)], 0.0);
            vec![t]
        }
        NormOrder::L1 => {
            let s: Vec<VarId> = (0..n).map(|i| model.add_continuous(format!("s{i}"), 0.0, row_max[i])).collect();
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut coeffs = w_row(i, sign);
                    coeffs.push((s[i], -1.0));
                    model.add_constraint(format!("dist{i}_{}", sign as i8), coeffs, Sense::Le, sign * w_fac[i]);
                }
            }
            model.set_objective(s.iter().map(|&v| (v, 1.0)).collect(), 0.0);
            s
        }
        NormOrder::L2 => unreachable!(),
    };

    for (s_idx, delta) in scenarios.iter().enumerate() {
        if delta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: delta.len(),
            });
        }
        let lin = linearized_h(exp, delta);
        let mut coeffs: Vec<(VarId, f64)> = z.iter().zip(&lin.pair_coeffs).map(|(&v, &a)| (v, a)).collect();
        coeffs.extend(x.iter().zip(&lin.var_coeffs).map(|(&v, &a)| (v, a)));
        model.add_constraint(format!("robust{s_idx}"), coeffs, Sense::Ge, tau_prime - lin.constant);
    }
    model.validate()?;
    Ok((model, MpLayout { x, z, lambda, norm_aux }))
}

/// Relaxed adversarial problem: maximise `τ′ − H(x̂ + δ)` over the
/// uncertainty set with fixed bounds and partition count.
pub fn build_ap(
    exp: &ExpandedForm,
    uset: &UncertaintySet,
    x_hat: &[f64],
    m_fixed: usize,
    tau_prime: f64,
    opts: BuildOptions,
) -> Result<(MilpModel, ApLayout)> {
    let n = exp.n();
    if x_hat.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x_hat.len(),
        });
    }
    let ball = uset.norm_ball_constraints()?;
    let ext = uset.coordinate_extent();
    let mut model = MilpModel::new("ap", ObjectiveSense::Maximize);
    let delta: Vec<VarId> = (0..n)
        .map(|j| model.add_continuous(format!("d{j}"), ext.lower[j], ext.upper[j]))
        .collect();
    let (eta, lambda) = add_relaxation(&mut model, exp, &delta, (&ext.lower, &ext.upper), m_fixed, "e", opts)?;
    let ball_aux: Vec<VarId> = (0..ball.aux_count)
        .map(|i| model.add_continuous(format!("u{i}"), 0.0, uset.gamma()))
        .collect();
    for (r, row) in ball.rows.iter().enumerate() {
        let mut coeffs: Vec<(VarId, f64)> = delta.iter().zip(&row.delta).map(|(&v, &a)| (v, a)).collect();
        coeffs.extend(ball_aux.iter().zip(&row.aux).map(|(&v, &a)| (v, a)));
        model.add_constraint(format!("ball{r}"), coeffs, Sense::Le, row.rhs);
    }
    let lin = linearized_h(exp, x_hat);
    let mut obj: Vec<(VarId, f64)> = eta.iter().zip(&lin.pair_coeffs).map(|(&v, &a)| (v, -a)).collect();
    obj.extend(delta.iter().zip(&lin.var_coeffs).map(|(&v, &a)| (v, -a)));
    model.set_objective(obj, tau_prime - lin.constant);
    model.validate()?;
    Ok((
        model,
        ApLayout {
            delta,
            eta,
            lambda,
            ball_aux,
        },
    ))
}
