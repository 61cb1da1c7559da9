use crate::data::FeatureBounds;
use crate::error::{Error, Result};

/// Bound-tightening schedule for the master problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TighteningState {
    /// 1-based iteration index.
    pub t: usize,
    pub nu: f64,
    pub initial_bounds: FeatureBounds,
    pub current_bounds: FeatureBounds,
    pub m_init: usize,
    pub m_t: usize,
}

impl TighteningState {
    pub fn new(initial_bounds: FeatureBounds, nu: f64, m_init: usize) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::InvalidArgument(format!("contraction factor ν = {nu} must lie in (0, 1)")));
        }
        if m_init == 0 {
            return Err(Error::InvalidArgument("initial partition count must be positive".into()));
        }
        Ok(Self {
            t: 1,
            nu,
            current_bounds: initial_bounds.clone(),
            initial_bounds,
            m_init,
            m_t: m_init,
        })
    }

    /// `⌈ν^{t−1} m_init⌉`, never below 1.
    pub fn partitions_at(&self, t: usize) -> usize {
        partition_count(self.m_init, self.nu, t)
    }
}

pub(crate) fn partition_count(m_init: usize, nu: f64, t: usize) -> usize {
    let v = nu.powi(t as i32 - 1) * m_init as f64;
    // guard against ν^k·m landing a hair above an integer
    ((v - 1e-9).ceil() as usize).max(1)
}

/// Contracts the box towards the previous iterate and shrinks the partition
/// count; the result always contains `x_prev` when it lies in the initial box.
pub fn tighten(state: &TighteningState, x_prev: &[f64]) -> TighteningState {
    let t = state.t;
    let w = state.nu.powi(t as i32);
    let init = &state.initial_bounds;
    let lower: Vec<f64> = init
        .lower
        .iter()
        .zip(x_prev)
        .map(|(&l, &x)| (w * l + (1.0 - w) * x).min(x))
        .collect();
    let upper: Vec<f64> = init
        .upper
        .iter()
        .zip(x_prev)
        .map(|(&u, &x)| (w * u + (1.0 - w) * x).max(x))
        .collect();
    TighteningState {
        t: t + 1,
        nu: state.nu,
        initial_bounds: init.clone(),
        current_bounds: FeatureBounds { lower, upper },
        m_init: state.m_init,
        m_t: partition_count(state.m_init, state.nu, t + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sequence() {
        let s = TighteningState::new(FeatureBounds::new(vec![0.0], vec![1.0]).unwrap(), 0.5, 20).unwrap();
        let seq: Vec<usize> = (1..=8).map(|t| s.partitions_at(t)).collect();
        assert_eq!(seq, vec![20, 10, 5, 3, 2, 1, 1, 1]);
    }

    #[test]
    fn first_contraction() {
        let s = TighteningState::new(FeatureBounds::new(vec![0.0], vec![10.0]).unwrap(), 0.5, 20).unwrap();
        let s2 = tighten(&s, &[4.0]);
        assert_eq!(s2.t, 2);
        assert_eq!(s2.current_bounds.lower, vec![2.0]);
        assert_eq!(s2.current_bounds.upper, vec![7.0]);
        assert_eq!(s2.m_t, 10);
        let s3 = tighten(&s2, &[5.0]);
        assert_eq!(s3.current_bounds.lower, vec![0.25 * 0.0 + 0.75 * 5.0]);
        assert_eq!(s3.current_bounds.upper, vec![0.25 * 10.0 + 0.75 * 5.0]);
        assert_eq!(s3.m_t, 5);
    }

    #[test]
    fn iterate_on_boundary_is_kept() {
        let s = TighteningState::new(FeatureBounds::new(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap(), 0.3, 7).unwrap();
        let s2 = tighten(&s, &[1.0, 0.0]);
        assert!(s2.current_bounds.contains(&[1.0, 0.0], 0.0));
        assert_eq!(s2.current_bounds.upper[0], 1.0);
        assert_eq!(s2.current_bounds.lower[1], 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let b = FeatureBounds::new(vec![0.0], vec![1.0]).unwrap();
        assert!(TighteningState::new(b.clone(), 1.0, 20).is_err());
        assert!(TighteningState::new(b, 0.5, 0).is_err());
    }
}
