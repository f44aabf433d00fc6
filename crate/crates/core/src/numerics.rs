//! Special functions and probability kernels.
//!
//! Everything here is a pure function of its arguments. The normal CDF and
//! its upper tail are evaluated through `erfc`, so the tail keeps full
//! relative precision far into the right tail where `1 - Φ(x)` would cancel.

use crate::error::{Error, Result};
use crate::quadrature::AdaptiveQuadrature;
use crate::scalar::Real;

/// Standard normal density.
#[inline]
pub fn phi_pdf<T: Real>(x: T) -> T {
    (-(x * x) * T::c(0.5)).exp() / (T::TAU()).sqrt()
}

/// Standard normal CDF `Φ(x)`.
#[inline]
pub fn phi_cdf<T: Real>(x: T) -> T {
    T::c(0.5) * (-x / T::SQRT_2()).erfc()
}

/// Upper tail `1 - Φ(x)` without cancellation.
#[inline]
pub fn mills_tail<T: Real>(x: T) -> T {
    T::c(0.5) * (x / T::SQRT_2()).erfc()
}

/// Binomial coefficient `C(n, k)` as a floating-point value.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(T::one(), |acc, i| {
        acc * T::from_count(n - i) / T::from_count(i + 1)
    })
}

fn check_order(d: usize, r: usize) {
    assert!(r >= 1 && r <= d, "order statistic rank must satisfy 1 <= r <= d (r={r}, d={d})");
}

/// `P(O^{(r)} > u)`: probability that the `r`-th largest of `d` independent
/// standard normals exceeds `u`, i.e. at least `r` of them do.
///
/// # Panics
/// If `r` is not in `1..=d`.
pub fn order_stat_exceed_exact<T: Real>(u: T, d: usize, r: usize) -> T {
    check_order(d, r);
    let p = mills_tail(u);
    let q = phi_cdf(u);
    (r..=d)
        .map(|k| binomial::<T>(d, k) * p.powi(k as i32) * q.powi((d - k) as i32))
        .fold(T::zero(), |a, b| a + b)
}

/// `P(O^{(r)} <= u)`, summed directly over the complementary counts so it
/// stays accurate when the exceedance is close to one.
pub fn order_stat_below_exact<T: Real>(u: T, d: usize, r: usize) -> T {
    check_order(d, r);
    let p = mills_tail(u);
    let q = phi_cdf(u);
    (0..r)
        .map(|k| binomial::<T>(d, k) * p.powi(k as i32) * q.powi((d - k) as i32))
        .fold(T::zero(), |a, b| a + b)
}

/// `ln P(O^{(r)} <= u)`, using whichever complement is numerically safer.
pub fn ln_order_stat_below<T: Real>(u: T, d: usize, r: usize) -> T {
    let exceed = order_stat_exceed_exact(u, d, r);
    if exceed < T::c(0.5) {
        (-exceed).ln_1p()
    } else {
        order_stat_below_exact(u, d, r).ln()
    }
}

/// `P(Z1 > u, Z2 > v)` for a standard bivariate normal pair with correlation
/// `delta`, by quadrature of the conditional form
/// `∫_u^∞ φ(t) (1 - Φ((v - δt)/√(1-δ²))) dt`.
pub fn bivariate_orthant<T: Real>(u: T, v: T, delta: T) -> Result<T> {
    if !(delta.abs() < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "orthant correlation must satisfy |delta| < 1, got {delta}"
        )));
    }
    if u.is_nan() || v.is_nan() {
        return Err(Error::InvalidParameter("orthant thresholds must not be NaN".into()));
    }
    let cutoff = T::c(40.0);
    if u >= cutoff || v >= cutoff {
        return Ok(T::zero());
    }
    if delta == T::zero() {
        return Ok(mills_tail(u) * mills_tail(v));
    }
    let lo = u.max(-cutoff);
    let spread = (T::one() - delta * delta).sqrt();
    let quad = AdaptiveQuadrature::<T> {
        abs_tol: T::c(1e-13),
        rel_tol: T::zero(),
        max_subdivisions: 4000,
    };
    let integral = quad.integrate(|t| phi_pdf(t) * mills_tail((v - delta * t) / spread), lo, cutoff)?;
    Ok(integral.value.max(T::zero()).min(T::one()))
}

/// `P(Z1 <= u, Z2 <= v)` for a standard bivariate normal pair.
pub fn bivariate_cdf<T: Real>(u: T, v: T, delta: T) -> Result<T> {
    let upper = bivariate_orthant(u, v, delta)?;
    let value = phi_cdf(u) - mills_tail(v) + upper;
    Ok(value.max(T::zero()).min(T::one()))
}

/// Two Gaussian arrays with independent columns (copies), described by
/// their per-copy correlation matrices, plus per-row thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonInstance<T> {
    pub d: usize,
    pub r: usize,
    pub thresholds: Vec<T>,
    /// One row-major `n × n` correlation matrix per copy, for the first array.
    pub sigma1: Vec<Vec<T>>,
    /// Same layout, for the second array.
    pub sigma0: Vec<Vec<T>>,
}

impl<T: Real> ComparisonInstance<T> {
    pub fn new(d: usize, r: usize, thresholds: Vec<T>, sigma1: Vec<Vec<T>>, sigma0: Vec<Vec<T>>) -> Result<Self> {
        let n = thresholds.len();
        if r == 0 || r > d {
            return Err(Error::InvalidParameter(format!("need 1 <= r <= d, got r={r}, d={d}")));
        }
        if sigma1.len() != d || sigma0.len() != d {
            return Err(Error::InvalidParameter(format!(
                "expected {d} per-copy matrices, got {} and {}",
                sigma1.len(),
                sigma0.len()
            )));
        }
        for m in sigma1.iter().chain(&sigma0) {
            if m.len() != n * n {
                return Err(Error::InvalidParameter(format!("matrix must have {} entries", n * n)));
            }
            for i in 0..n {
                if (m[i * n + i] - T::one()).abs() > T::c(1e-12) {
                    return Err(Error::InvalidParameter("correlation diagonal must be 1".into()));
                }
                for j in 0..n {
                    if (m[i * n + j] - m[j * n + i]).abs() > T::c(1e-12) {
                        return Err(Error::InvalidParameter("correlation matrix must be symmetric".into()));
                    }
                }
            }
        }
        let instance = Self {
            d,
            r,
            thresholds,
            sigma1,
            sigma0,
        };
        for i in 0..n {
            for j in (i + 1)..n {
                if instance.sigma_bar(i, j) >= T::one() {
                    return Err(Error::InvalidParameter(format!(
                        "pairwise maximum correlation at ({i}, {j}) must be < 1"
                    )));
                }
            }
        }
        Ok(instance)
    }

    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    /// Largest absolute correlation between rows `i` and `j` across copies
    /// and both arrays.
    pub fn sigma_bar(&self, i: usize, j: usize) -> T {
        let n = self.n();
        self.sigma1
            .iter()
            .chain(&self.sigma0)
            .map(|m| m[i * n + j].abs())
            .fold(T::zero(), T::max)
    }
}

/// Normal comparison bound without its unspecified constant:
/// `Σ_k Σ_{i<j} |σ¹ - σ⁰| / (u_i u_j)^{r-1} · exp(-r (u_i² + u_j²) / (2 (1 + σ̄_ij)))`.
pub fn comparison_bound_sum<T: Real>(instance: &ComparisonInstance<T>) -> Result<T> {
    let n = instance.n();
    let r = instance.r;
    if r > 1 {
        if let Some(index) = instance.thresholds.iter().position(|u| *u == T::zero()) {
            return Err(Error::ZeroThreshold { index });
        }
    }
    let rank = T::from_count(r);
    let mut total = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let (ui, uj) = (instance.thresholds[i], instance.thresholds[j]);
            let kernel = (-(rank * (ui * ui + uj * uj)) / (T::c(2.0) * (T::one() + instance.sigma_bar(i, j)))).exp()
                / (ui * uj).powi(r as i32 - 1);
            for (s1, s0) in instance.sigma1.iter().zip(&instance.sigma0) {
                total = total + (s1[i * n + j] - s0[i * n + j]).abs() * kernel;
            }
        }
    }
    Ok(total)
}

/// `P(O^{(r)}_1 <= u_1, O^{(r)}_2 <= u_2)` for one array with the given
/// per-copy correlations. The event says fewer than `r` copies exceed each
/// threshold; copies are independent, so a DP over exceedance counts is exact.
fn order_stat_pair_cdf<T: Real>(u1: T, u2: T, deltas: &[T], r: usize) -> Result<T> {
    let d = deltas.len();
    let cap = r; // counts >= r are absorbing failures and can be dropped
    let mut states = vec![T::zero(); cap * cap];
    states[0] = T::one();
    let (t1, t2) = (mills_tail(u1), mills_tail(u2));
    for &delta in deltas {
        let both = bivariate_orthant(u1, u2, delta)?;
        let only1 = (t1 - both).max(T::zero());
        let only2 = (t2 - both).max(T::zero());
        let neither = (T::one() - both - only1 - only2).max(T::zero());
        let mut next = vec![T::zero(); cap * cap];
        for a in 0..cap {
            for b in 0..cap {
                let mass = states[a * cap + b];
                if mass == T::zero() {
                    continue;
                }
                next[a * cap + b] = next[a * cap + b] + mass * neither;
                if a + 1 < cap {
                    next[(a + 1) * cap + b] = next[(a + 1) * cap + b] + mass * only1;
                }
                if b + 1 < cap {
                    next[a * cap + b + 1] = next[a * cap + b + 1] + mass * only2;
                }
                if a + 1 < cap && b + 1 < cap {
                    next[(a + 1) * cap + b + 1] = next[(a + 1) * cap + b + 1] + mass * both;
                }
            }
        }
        states = next;
    }
    debug_assert_eq!(deltas.len(), d);
    Ok(states.into_iter().fold(T::zero(), |a, b| a + b))
}

/// `|P(O(Y) <= u) - P(O(Z) <= u)|` evaluated exactly for `n = 2`.
pub fn comparison_lhs_exact<T: Real>(instance: &ComparisonInstance<T>) -> Result<T> {
    if instance.n() != 2 {
        return Err(Error::UnsupportedSize(instance.n()));
    }
    let (u1, u2) = (instance.thresholds[0], instance.thresholds[1]);
    let off_diagonal = |ms: &[Vec<T>]| ms.iter().map(|m| m[1]).collect::<Vec<_>>();
    let p1 = order_stat_pair_cdf(u1, u2, &off_diagonal(&instance.sigma1), instance.r)?;
    let p0 = order_stat_pair_cdf(u1, u2, &off_diagonal(&instance.sigma0), instance.r)?;
    Ok((p1 - p0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn normal_cdf_symmetry_and_tail() {
        assert_eq!(mills_tail(0.0f64), 0.5);
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            assert!((phi_cdf(x) + phi_cdf(-x) - 1.0).abs() <= 1e-15, "x={x}");
        }
        // 1 - Φ(8) against the leading Mills-ratio term; the next factor is 1 - 1/x².
        let ratio = mills_tail(8.0f64) * (2.0 * PI).sqrt() * 8.0 * 32.0f64.exp();
        assert!((0.97..=1.0).contains(&ratio), "{ratio}");
        assert_relative_eq!(ratio, 0.985_055_706_063_458_4, max_relative = 1e-12);
        assert_relative_eq!(phi_cdf(1.959964f64), 0.975_000_000_903_557_6, max_relative = 1e-14);
    }

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial::<f64>(5, 2), 10.0);
        assert_eq!(binomial::<f64>(3, 0), 1.0);
        assert_eq!(binomial::<f64>(3, 4), 0.0);
        assert_eq!(binomial::<f64>(10, 7), 120.0);
    }

    #[test]
    fn exceedance_at_zero() {
        assert_relative_eq!(order_stat_exceed_exact(0.0f64, 2, 1), 0.75, max_relative = 1e-15);
        assert_relative_eq!(order_stat_exceed_exact(0.0f64, 2, 2), 0.25, max_relative = 1e-15);
        assert_relative_eq!(order_stat_exceed_exact(0.0f64, 3, 2), 0.5, max_relative = 1e-15);
        assert_relative_eq!(order_stat_exceed_exact(1.3f64, 1, 1), mills_tail(1.3), max_relative = 1e-15);
    }

    #[test]
    fn exceedance_matches_leading_asymptotic_at_six() {
        let u = 6.0f64;
        let exact = order_stat_exceed_exact(u, 3, 2);
        let leading = binomial::<f64>(3, 2) * mills_tail(u).powi(2);
        assert!((exact / leading - 1.0).abs() < 1e-8);
    }

    #[test]
    fn below_and_exceed_are_complements() {
        for &(u, d, r) in &[(-2.0f64, 3, 1), (0.4, 4, 2), (3.0, 5, 5)] {
            let s = order_stat_exceed_exact(u, d, r) + order_stat_below_exact(u, d, r);
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert!((ln_order_stat_below(-5.0f64, 2, 1) - order_stat_below_exact(-5.0f64, 2, 1).ln()).abs() < 1e-12);
    }

    #[test]
    fn orthant_special_values() {
        assert_relative_eq!(bivariate_orthant(0.0f64, 0.0, 0.0).unwrap(), 0.25, max_relative = 1e-15);
        let third = bivariate_orthant(0.0f64, 0.0, 0.5).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-10, "{third}");
        for &delta in &[-0.9f64, -0.3, 0.2, 0.8, 0.999] {
            let closed = 0.25 + delta.asin() / (2.0 * PI);
            let quad = bivariate_orthant(0.0f64, 0.0, delta).unwrap();
            assert!((quad - closed).abs() < 1e-10, "delta={delta}: {quad} vs {closed}");
        }
        let independent = bivariate_orthant(1.2f64, -0.4, 0.0).unwrap();
        assert_relative_eq!(independent, mills_tail(1.2) * mills_tail(-0.4), max_relative = 1e-15);
        assert!(bivariate_orthant(0.0f64, 0.0, 1.0).is_err());
    }

    #[test]
    fn orthant_is_symmetric_in_thresholds() {
        for &(u, v, delta) in &[(0.3f64, 1.7, 0.6), (-1.0, 2.2, -0.4), (2.5, 2.0, 0.95)] {
            let a = bivariate_orthant(u, v, delta).unwrap();
            let b = bivariate_orthant(v, u, delta).unwrap();
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn orthant_matches_midpoint_grid_oracle() {
        // Independent oracle: 2-D midpoint rule over the joint density.
        let (u, v, delta) = (0.5f64, -0.25f64, 0.35f64);
        let s = (1.0 - delta * delta).sqrt();
        let h = 0.004;
        let mut total = 0.0;
        let mut x = u + h / 2.0;
        while x < 9.0 {
            let mut y = v + h / 2.0;
            while y < 9.0 {
                let q = (x * x - 2.0 * delta * x * y + y * y) / (s * s);
                total += (-0.5 * q).exp() / (2.0 * PI * s);
                y += h;
            }
            x += h;
        }
        let oracle = total * h * h;
        let value = bivariate_orthant(u, v, delta).unwrap();
        assert!((value - oracle).abs() < 2e-5, "{value} vs {oracle}");
    }

    #[test]
    fn slepian_direction_for_two_points() {
        let mut previous = 0.0;
        for k in 0..=18 {
            let delta = -0.9 + 0.1 * k as f64;
            let p = bivariate_cdf(1.1f64, 0.7, delta).unwrap();
            assert!(p >= previous - 1e-13, "delta={delta}");
            previous = p;
        }
    }

    fn pair(delta1: &[f64], delta0: &[f64], r: usize, u: (f64, f64)) -> ComparisonInstance<f64> {
        let m = |x: f64| vec![1.0, x, x, 1.0];
        ComparisonInstance::new(
            delta1.len(),
            r,
            vec![u.0, u.1],
            delta1.iter().map(|&x| m(x)).collect(),
            delta0.iter().map(|&x| m(x)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn comparison_bound_examples() {
        assert_eq!(comparison_bound_sum(&pair(&[0.4], &[0.4], 1, (1.0, 2.0))).unwrap(), 0.0);
        let one = comparison_bound_sum(&pair(&[0.3], &[0.0], 1, (1.0, 1.0))).unwrap();
        assert_relative_eq!(one, 0.139_010_810_769_352_59, max_relative = 1e-14);
        // linear in the covariance difference when sigma_bar is held fixed
        let base = comparison_bound_sum(&pair(&[0.25, 0.4], &[0.5, 0.5], 2, (1.5, 0.8))).unwrap();
        let doubled = comparison_bound_sum(&pair(&[0.0, 0.3], &[0.5, 0.5], 2, (1.5, 0.8))).unwrap();
        assert_relative_eq!(doubled, 2.0 * base, max_relative = 1e-14);
    }

    #[test]
    fn zero_threshold_rejected_for_higher_ranks() {
        let inst = pair(&[0.1, 0.2], &[0.0, 0.0], 2, (0.0, 1.0));
        assert_eq!(comparison_bound_sum(&inst), Err(Error::ZeroThreshold { index: 0 }));
        let rank_one = pair(&[0.1, 0.2], &[0.0, 0.0], 1, (0.0, 1.0));
        assert!(comparison_bound_sum(&rank_one).is_ok());
    }

    #[test]
    fn lhs_single_copy_is_bivariate_difference() {
        let (u1, u2) = (0.9f64, 1.4);
        let inst = pair(&[0.6], &[-0.2], 1, (u1, u2));
        let direct = (bivariate_cdf(u1, u2, 0.6).unwrap() - bivariate_cdf(u1, u2, -0.2).unwrap()).abs();
        assert!((comparison_lhs_exact(&inst).unwrap() - direct).abs() < 1e-12);
        assert_eq!(comparison_lhs_exact(&pair(&[0.3], &[0.3], 1, (u1, u2))).unwrap(), 0.0);
    }

    #[test]
    fn lhs_max_of_copies_factorizes() {
        let (u1, u2) = (0.5f64, 1.0);
        let inst = pair(&[0.5, -0.3], &[0.0, 0.0], 1, (u1, u2));
        let product = bivariate_cdf(u1, u2, 0.5).unwrap() * bivariate_cdf(u1, u2, -0.3).unwrap();
        let independent = phi_cdf(u1).powi(2) * phi_cdf(u2).powi(2);
        assert!((comparison_lhs_exact(&inst).unwrap() - (product - independent).abs()).abs() < 1e-12);
    }

    #[test]
    fn lhs_rejects_larger_arrays() {
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let inst = ComparisonInstance::new(1, 1, vec![1.0f64; 3], vec![eye.clone()], vec![eye]).unwrap();
        assert_eq!(comparison_lhs_exact(&inst), Err(Error::UnsupportedSize(3)));
    }

    #[test]
    fn instance_validation() {
        let bad = ComparisonInstance::new(1, 1, vec![1.0f64, 1.0], vec![vec![1.0, 1.0, 1.0, 1.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]);
        assert!(bad.is_err());
        let asym = ComparisonInstance::new(1, 1, vec![1.0f64, 1.0], vec![vec![1.0, 0.2, 0.3, 1.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]);
        assert!(asym.is_err());
        let rank = ComparisonInstance::new(1, 2, vec![1.0f64, 1.0], vec![vec![1.0, 0.2, 0.2, 1.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]);
        assert!(rank.is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let t: f32 = mills_tail(2.0f32);
        assert!((t as f64 - mills_tail(2.0f64)).abs() < 1e-7);
        let o: f32 = bivariate_orthant(0.0f32, 0.0, 0.5).unwrap();
        assert!((o as f64 - 1.0 / 3.0).abs() < 1e-5);
    }
}
