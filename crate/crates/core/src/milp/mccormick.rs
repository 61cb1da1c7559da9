use crate::error::{Error, Result};

use super::{MilpModel, Sense, VarId};

/// Uniform breakpoints `l^1 < … < l^{m+1}` for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionScheme {
    pub breakpoints: Vec<f64>,
}

impl PartitionScheme {
    /// `l^r = L + (r−1)/m · (U − L)`.
    pub fn uniform(lower: f64, upper: f64, m: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot partition [{lower}, {upper}] into {m} segment(s)"
            )));
        }
        let mut breakpoints: Vec<f64> = (0..=m)
            .map(|r| lower + r as f64 / m as f64 * (upper - lower))
            .collect();
        breakpoints[m] = upper;
        Ok(Self { breakpoints })
    }

    pub fn m(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn lower(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn upper(&self) -> f64 {
        self.breakpoints[self.m()]
    }

    /// Segment index (0-based) containing `x`, clamped to the range.
    pub fn segment_of(&self, x: f64) -> usize {
        let m = self.m();
        let inner = &self.breakpoints[1..m];
        inner.partition_point(|&b| b <= x)
    }
}

/// Range of `x_j · x_k` over the box; `same` marks a square.
pub fn product_bounds(lj: f64, uj: f64, lk: f64, uk: f64, same: bool) -> (f64, f64) {
    if same {
        let hi = (lj * lj).max(uj * uj);
        let lo = if lj <= 0.0 && uj >= 0.0 { 0.0 } else { (lj * lj).min(uj * uj) };
        return (lo, hi);
    }
    let c = [lj * lk, lj * uk, uj * lk, uj * uk];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn linear_range(model: &MilpModel, coeffs: &[(VarId, f64)]) -> (f64, f64) {
    coeffs.iter().fold((0.0, 0.0), |(lo, hi), &(v, a)| {
        let var = model.var(v);
        if a >= 0.0 {
            (lo + a * var.lower, hi + a * var.upper)
        } else {
            (lo + a * var.upper, hi + a * var.lower)
        }
    })
}

/// Adds `coeffs·v (sense) rhs` enforced only when `indicator = 1`, with the
/// smallest big-M implied by the variable bounds. Rows that hold over the
/// whole box are skipped; returns whether a row was added.
pub fn big_m_row(
    model: &mut MilpModel,
    name: String,
    mut coeffs: Vec<(VarId, f64)>,
    sense: Sense,
    rhs: f64,
    indicator: VarId,
) -> bool {
    let (lo, hi) = linear_range(model, &coeffs);
    let slack_tol = 1e-12 * (1.0 + rhs.abs());
    match sense {
        Sense::Ge => {
            let big_m = rhs - lo;
            if big_m <= slack_tol {
                return false;
            }
            coeffs.push((indicator, -big_m));
            model.add_constraint(name, coeffs, Sense::Ge, rhs - big_m);
        }
        Sense::Le => {
            let big_m = hi - rhs;
            if big_m <= slack_tol {
                return false;
            }
            coeffs.push((indicator, big_m));
            model.add_constraint(name, coeffs, Sense::Le, rhs + big_m);
        }
        Sense::Eq => {
            big_m_row(model, format!("{name}_le"), coeffs.clone(), Sense::Le, rhs, indicator);
            big_m_row(model, format!("{name}_ge"), coeffs, Sense::Ge, rhs, indicator);
        }
    }
    true
}

/// Piecewise McCormick envelope of `z = x_j · x_k`, partitioned on `x_j`
/// with `x_k` at its bounds `k_bounds`. Segment `r` is active when
/// `lambda[r] = 1`; the caller adds `Σ_r λ_r = 1`. Pass `xk == xj` for a
/// square.
pub fn mccormick_block(
    model: &mut MilpModel,
    xj: VarId,
    xk: VarId,
    z: VarId,
    scheme: &PartitionScheme,
    k_bounds: (f64, f64),
    lambda: &[VarId],
) -> Result<()> {
    let (lk, uk) = k_bounds;
    if !(lk.is_finite() && uk.is_finite()) {
        return Err(Error::InvalidModel("McCormick block needs finite bounds".into()));
    }
    if lambda.len() != scheme.m() {
        return Err(Error::InvalidModel(format!(
            "{} indicator(s) for {} segment(s)",
            lambda.len(),
            scheme.m()
        )));
    }
    let tag = format!("mc_{}_{}", model.var(xj).name, model.var(xk).name);
    for (r, &lam) in lambda.iter().enumerate() {
        let lo = scheme.breakpoints[r];
        let hi = scheme.breakpoints[r + 1];
        // z − L_k x_j − l^r x_k ≥ −l^r L_k
        big_m_row(model, format!("{tag}_{r}_a"), vec![(z, 1.0), (xj, -lk), (xk, -lo)], Sense::Ge, -lo * lk, lam);
        // z − U_k x_j − l^{r+1} x_k ≥ −l^{r+1} U_k
        big_m_row(model, format!("{tag}_{r}_b"), vec![(z, 1.0), (xj, -uk), (xk, -hi)], Sense::Ge, -hi * uk, lam);
        // z − U_k x_j − l^r x_k ≤ −l^r U_k
        big_m_row(model, format!("{tag}_{r}_c"), vec![(z, 1.0), (xj, -uk), (xk, -lo)], Sense::Le, -lo * uk, lam);
        // z − L_k x_j − l^{r+1} x_k ≤ −l^{r+1} L_k
        big_m_row(model, format!("{tag}_{r}_d"), vec![(z, 1.0), (xj, -lk), (xk, -hi)], Sense::Le, -hi * lk, lam);
        big_m_row(model, format!("{tag}_{r}_lo"), vec![(xj, 1.0)], Sense::Ge, lo, lam);
        big_m_row(model, format!("{tag}_{r}_hi"), vec![(xj, 1.0)], Sense::Le, hi, lam);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ObjectiveSense;
    use crate::solve::{simplex::solve_lp, LpStatus};

    #[test]
    fn uniform_breakpoints() {
        let s = PartitionScheme::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(s.breakpoints, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(s.segment_of(0.1), 0);
        assert_eq!(s.segment_of(0.25), 1);
        assert_eq!(s.segment_of(1.0), 3);
        assert_eq!(s.segment_of(-5.0), 0);
        assert!(PartitionScheme::uniform(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn product_ranges() {
        assert_eq!(product_bounds(-1.0, 2.0, -1.0, 2.0, true), (0.0, 4.0));
        assert_eq!(product_bounds(1.0, 2.0, 1.0, 2.0, true), (1.0, 4.0));
        assert_eq!(product_bounds(-1.0, 2.0, -3.0, 1.0, false), (-6.0, 3.0));
    }

    /// Single-segment block on [0,1]² with x fixed; returns the z range.
    fn z_range(xj_val: f64, xk_val: f64, m: usize, same: bool) -> (f64, f64) {
        let mut out = [0.0; 2];
        for (slot, sense) in [(0, ObjectiveSense::Minimize), (1, ObjectiveSense::Maximize)] {
            let mut model = MilpModel::new("probe", sense);
            let xj = model.add_continuous("xj", xj_val, xj_val);
            let xk = if same { xj } else { model.add_continuous("xk", xk_val, xk_val) };
            let z = model.add_continuous("z", -1.0, 2.0);
            // the LP relaxation over λ is the weakest setting; fix the segment
            let scheme = PartitionScheme::uniform(0.0, 1.0, m).unwrap();
            let lam: Vec<VarId> = (0..m).map(|r| model.add_continuous(format!("l{r}"), 0.0, 1.0)).collect();
            let seg = scheme.segment_of(xj_val);
            for (r, &l) in lam.iter().enumerate() {
                let v = if r == seg { 1.0 } else { 0.0 };
                model.variables[l.0].lower = v;
                model.variables[l.0].upper = v;
            }
            // widen the variable bounds so big-M values are non-trivial
            model.variables[xj.0].lower = 0.0;
            model.variables[xj.0].upper = 1.0;
            model.add_constraint("fixj", vec![(xj, 1.0)], Sense::Eq, xj_val);
            if !same {
                model.variables[xk.0].lower = 0.0;
                model.variables[xk.0].upper = 1.0;
                model.add_constraint("fixk", vec![(xk, 1.0)], Sense::Eq, xk_val);
            }
            mccormick_block(&mut model, xj, xk, z, &scheme, (0.0, 1.0), &lam).unwrap();
            model.set_objective(vec![(z, 1.0)], 0.0);
            let sol = solve_lp(&model, &model.variables.iter().map(|v| (v.lower, v.upper)).collect::<Vec<_>>());
            assert_eq!(sol.status, LpStatus::Optimal);
            out[slot] = sol.objective;
        }
        (out[0], out[1])
    }

    #[test]
    fn corner_exactness() {
        let (lo, hi) = z_range(1.0, 1.0, 1, false);
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
        let (lo, hi) = z_range(0.0, 1.0, 1, false);
        assert!(lo.abs() < 1e-9 && hi.abs() < 1e-9);
    }

    #[test]
    fn midpoint_envelope() {
        let (lo, hi) = z_range(0.5, 0.5, 1, false);
        assert!(lo.abs() < 1e-9, "{lo}");
        assert!((hi - 0.5).abs() < 1e-9, "{hi}");
    }

    #[test]
    fn breakpoint_exactness() {
        for m in [2, 5] {
            let scheme = PartitionScheme::uniform(0.0, 1.0, m).unwrap();
            for &b in &scheme.breakpoints {
                for kv in [0.0, 1.0] {
                    let (lo, hi) = z_range(b, kv, m, false);
                    assert!((lo - b * kv).abs() < 1e-9 && (hi - b * kv).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn square_gap_shrinks_with_m() {
        for m in [1, 2, 4, 20] {
            let mut worst: f64 = 0.0;
            for s in 0..=200 {
                let x = s as f64 / 200.0;
                let (lo, hi) = z_range(x, x, m, true);
                assert!(lo <= x * x + 1e-9 && hi >= x * x - 1e-9);
                worst = worst.max(x * x - lo).max(hi - x * x);
            }
            assert!(worst <= 0.25 / m as f64 + 1e-9, "m={m}: {worst}");
        }
    }
}
