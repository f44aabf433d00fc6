//! First crossing point `Υ = min{i : O_i > -βi}` and last exit time
//! `τ = max{i >= 0 : O_i > βi}` on a finite window, plus the horizon `N`
//! that makes the window `[-N, N]` large enough with certified probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::NormalizationParams;
use crate::numerics::order_stat_exceed_exact;
use crate::scalar::Real;

/// Default cap on the horizon.
pub const DEFAULT_HORIZON_CAP: usize = 1 << 24;

/// A window half-width `N` with `Σ_{i > N} P(O^{(r)} > iβ) <= tail_bound <= ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonCertificate<T> {
    pub beta: T,
    pub epsilon: T,
    pub n: usize,
    pub tail_bound: T,
    pub d: usize,
    pub r: usize,
}

/// Smallest `N` whose exceedance tail is at most `epsilon`, capped at 2^24.
pub fn truncation_horizon<T: Real>(beta: T, epsilon: T, d: usize, r: usize) -> Result<HorizonCertificate<T>> {
    truncation_horizon_with_cap(beta, epsilon, d, r, DEFAULT_HORIZON_CAP)
}

/// As [`truncation_horizon`] with an explicit cap.
///
/// Terms `e_i = P(O^{(r)} > iβ)` are summed until `e_i < 1e-6 ε`; the rest of
/// the series is bounded by the geometric series with the last term ratio,
/// which dominates because the survival function is log-concave.
pub fn truncation_horizon_with_cap<T: Real>(
    beta: T,
    epsilon: T,
    d: usize,
    r: usize,
    cap: usize,
) -> Result<HorizonCertificate<T>> {
    if !(beta > T::zero() && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if d == 0 || r == 0 || r > d {
        return Err(Error::InvalidParameter(format!("need 1 <= r <= d, got r={r}, d={d}")));
    }

    let stop = epsilon * T::c(1e-6);
    let mut terms: Vec<T> = Vec::new();
    let mut remainder = T::zero();
    let mut i = 1usize;
    loop {
        if i > cap {
            return Err(Error::HorizonOverflow { cap });
        }
        let term = order_stat_exceed_exact(T::from_count(i) * beta, d, r);
        let last = terms.last().copied();
        terms.push(term);
        if term == T::zero() {
            break;
        }
        if term < stop {
            if let Some(prev) = last {
                let ratio = term / prev;
                if ratio < T::one() {
                    remainder = term * ratio / (T::one() - ratio);
                    break;
                }
            }
        }
        i += 1;
    }

    // tail[N] = Σ_{i > N} e_i + remainder, accumulated from the far end.
    let mut tail = remainder;
    let mut horizon = terms.len();
    let mut bound = tail;
    for n in (0..terms.len()).rev() {
        let widened = tail + terms[n];
        if widened > epsilon {
            break;
        }
        tail = widened;
        horizon = n;
        bound = tail;
    }
    if epsilon >= T::one() {
        // A probability never exceeds one, even when the union bound does.
        let total = terms.iter().fold(remainder, |acc, &t| acc + t);
        horizon = 0;
        bound = total;
    }
    if horizon > cap {
        return Err(Error::HorizonOverflow { cap });
    }
    Ok(HorizonCertificate {
        beta,
        epsilon,
        n: horizon,
        tail_bound: bound.min(T::one()),
        d,
        r,
    })
}

/// One replication's crossing pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingSample<T> {
    pub upsilon: i64,
    pub tau: i64,
    /// Υ may lie left of the window: the scan hit `-N`, or found nothing
    /// (then `upsilon = N + 1`).
    pub upsilon_truncated: bool,
    /// The last exceedance sits at the window end `N`.
    pub tau_truncated: bool,
    /// No `i >= 0` had `O_i > βi`; `tau` is recorded as 0.
    pub no_exceedance: bool,
    pub normalized: Option<(T, T)>,
}

impl<T: Real> CrossingSample<T> {
    /// Usable for limit-law estimation.
    pub fn is_valid(&self) -> bool {
        !(self.upsilon_truncated || self.tau_truncated || self.no_exceedance)
    }

    pub fn is_truncated(&self) -> bool {
        self.upsilon_truncated || self.tau_truncated
    }

    /// Attaches `(x̂_Υ, x̂_τ)` when the sample is valid.
    pub fn normalize(mut self, params: &NormalizationParams<T>) -> Self {
        self.normalized = self
            .is_valid()
            .then(|| params.normalize_crossings(self.upsilon, self.tau));
        self
    }
}

fn index<T: Real>(i: i64) -> T {
    T::from_i64(i).expect("window index representable")
}

/// First `i` (scanning up from `offset`) with `values[i - offset] > -βi`.
pub fn first_crossing<T: Real>(values: &[T], offset: i64, beta: T) -> Option<i64> {
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| (offset + k as i64, v))
        .find(|&(i, v)| v > -(beta * index::<T>(i)))
        .map(|(i, _)| i)
}

/// Last `i >= 0` (scanning down from the window end) with `values[i - offset] > βi`.
pub fn last_exit<T: Real>(values: &[T], offset: i64, beta: T) -> Option<i64> {
    values
        .iter()
        .enumerate()
        .rev()
        .map(|(k, &v)| (offset + k as i64, v))
        .take_while(|&(i, _)| i >= 0)
        .find(|&(i, v)| v > beta * index::<T>(i))
        .map(|(i, _)| i)
}

/// `(Υ, τ)` on the window `[-N, N]` with truncation and no-exceedance flags.
pub fn extract_crossings_on<T: Real>(window: &[T], beta: T, half_width: usize) -> CrossingSample<T> {
    assert_eq!(window.len(), 2 * half_width + 1, "window must cover [-N, N]");
    let n = half_width as i64;
    let (upsilon, upsilon_truncated) = match first_crossing(window, -n, beta) {
        Some(i) => (i, i == -n),
        None => (n + 1, true),
    };
    let (tau, tau_truncated, no_exceedance) = match last_exit(window, -n, beta) {
        Some(i) => (i, i == n, false),
        None => (0, false, true),
    };
    CrossingSample {
        upsilon,
        tau,
        upsilon_truncated,
        tau_truncated,
        no_exceedance,
        normalized: None,
    }
}

/// [`extract_crossings_on`] with the window size taken from a certificate.
pub fn extract_crossings<T: Real>(window: &[T], beta: T, certificate: &HorizonCertificate<T>) -> CrossingSample<T> {
    extract_crossings_on(window, beta, certificate.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn direct_scans() {
        assert_eq!(last_exit(&[1.0f64, 0.6, 0.9, 0.2], 0, 0.5), Some(1));
        assert_eq!(first_crossing(&[0.4f64, 0.6], -2, 0.5), Some(-1));
        assert_eq!(last_exit(&[-1.0f64, -0.4, 0.4], -1, 0.5), None);
    }

    #[test]
    fn all_negative_window() {
        let beta = 0.5f64;
        let n = 30usize;
        let window = vec![-10.0; 2 * n + 1];
        let s = extract_crossings_on(&window, beta, n);
        assert_eq!(s.tau, 0);
        assert!(s.no_exceedance && !s.tau_truncated);
        assert_eq!(s.upsilon, (10.0 / beta).floor() as i64 + 1);
        assert!(!s.upsilon_truncated);
        assert!(!s.is_valid());
    }

    #[test]
    fn boundary_hits_are_flagged() {
        let window = vec![5.0f64; 7];
        let s = extract_crossings_on(&window, 0.1, 3);
        assert_eq!((s.upsilon, s.tau), (-3, 3));
        assert!(s.upsilon_truncated && s.tau_truncated);
        let window = vec![-50.0f64; 7];
        let s = extract_crossings_on(&window, 0.1, 3);
        assert_eq!(s.upsilon, 4);
        assert!(s.upsilon_truncated);
    }

    #[test]
    fn unit_budget_gives_zero_horizon() {
        let cert = truncation_horizon(0.05f64, 1.0, 2, 1).unwrap();
        assert_eq!(cert.n, 0);
        assert!(cert.tail_bound <= 1.0);
    }

    #[test]
    fn horizon_matches_direct_summation() {
        let cert = truncation_horizon(0.1f64, 1e-4, 1, 1).unwrap();
        assert_eq!(cert.n, 39);
        assert!(cert.tail_bound <= 1e-4);
        assert!((cert.tail_bound - 8.84e-5).abs() < 1e-7, "{}", cert.tail_bound);
    }

    #[test]
    fn horizon_grows_as_budget_shrinks() {
        for &(beta, d, r) in &[(0.1f64, 1, 1), (0.01, 2, 1), (0.02, 3, 2), (0.005, 2, 2)] {
            let loose = truncation_horizon(beta, 1e-4, d, r).unwrap();
            let tight = truncation_horizon(beta, 1e-6, d, r).unwrap();
            assert!(tight.n >= loose.n);
        }
    }

    #[test]
    fn horizon_cap_is_enforced() {
        let err = truncation_horizon_with_cap(1e-3f64, 1e-4, 1, 1, 100).unwrap_err();
        assert_eq!(err, Error::HorizonOverflow { cap: 100 });
        assert!(truncation_horizon(0.0f64, 1e-4, 1, 1).is_err());
        assert!(truncation_horizon(0.1f64, 0.0, 1, 1).is_err());
    }

    #[test]
    fn normalization_only_for_valid_samples() {
        let params = NormalizationParams::weak(0.01f64, 1, 1).unwrap();
        let good = extract_crossings_on(&[0.0, 0.0, 3.0, 0.0, 0.0], 0.01, 2).normalize(&params);
        assert!(good.normalized.is_some());
        let bad = extract_crossings_on(&[-9.0; 5], 0.01, 2).normalize(&params);
        assert!(bad.normalized.is_none());
    }

    proptest! {
        #[test]
        fn crossings_move_monotonically_in_beta(
            values in proptest::collection::vec(-3.0f64..3.0, 41),
            b1 in 0.001f64..0.5,
            b2 in 0.001f64..0.5,
        ) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let small = extract_crossings_on(&values, lo, 20);
            let large = extract_crossings_on(&values, hi, 20);
            prop_assert!(large.tau <= small.tau);
            prop_assert!(large.upsilon >= small.upsilon);
        }

        #[test]
        fn crossing_definitions_hold(values in proptest::collection::vec(-3.0f64..3.0, 21), beta in 0.01f64..0.4) {
            let s = extract_crossings_on(&values, beta, 10);
            let at = |i: i64| values[(i + 10) as usize];
            if !s.upsilon_truncated {
                prop_assert!(at(s.upsilon) > -beta * s.upsilon as f64);
                for i in -10..s.upsilon {
                    prop_assert!(at(i) <= -beta * i as f64);
                }
            }
            if !s.no_exceedance {
                prop_assert!(at(s.tau) > beta * s.tau as f64);
                for i in s.tau + 1..=10 {
                    prop_assert!(at(i) <= beta * i as f64);
                }
            }
        }
    }
}
