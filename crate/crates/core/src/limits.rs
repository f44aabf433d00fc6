//! Normalizing constants and limit laws for the first crossing point Υ and
//! the last exit time τ as the boundary slope β tends to zero.
//!
//! Four regimes are covered:
//!
//! - `Weak` (`r_n ln n -> 0`): product of Gumbel marginals, any rank `1 <= r <= d`.
//! - `StrongR1` (`r_n ln n -> γ`, maxima of `d` copies): Gaussian mixture of
//!   Gumbel kernels, one mixing variable per copy.
//! - `StrongRd` (same, minima of `d` copies): the copies share the mixing sum.
//! - `FullyMixed` (`r_n ln n -> ∞`, convex `r_n`, `d = 1`): `Φ(min(x, y))`.
//!
//! The mixture integrals over `R^d` collapse to one dimension: for `r = 1` the
//! integrand is a product over copies, for `r = d` it only depends on
//! `s = z_1 + ... + z_d ~ N(0, d)`. Both reductions are cross-checked against
//! plain `d`-dimensional Monte Carlo in the tests and the acceptance suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{binomial, ln_order_stat_below, order_stat_exceed_exact, phi_cdf, phi_pdf};
use crate::quadrature::AdaptiveQuadrature;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Weak,
    StrongR1,
    StrongRd,
    FullyMixed,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Weak => "weak",
            Regime::StrongR1 => "strong-r1",
            Regime::StrongRd => "strong-rd",
            Regime::FullyMixed => "fully-mixed",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

fn check_beta<T: Real>(beta: T) -> Result<()> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

fn check_rank(d: usize, r: usize) -> Result<()> {
    if d == 0 || r == 0 || r > d {
        return Err(Error::InvalidParameter(format!("need 1 <= r <= d, got r={r}, d={d}")));
    }
    Ok(())
}

/// `a(β, r)`: the level at which the scaled crossing times concentrate,
///
/// `sqrt((2/r) (ln β⁻¹ - (r+1)/2 ln((2/r) ln β⁻¹) + ln(C(d,r) r⁻¹ (2π)^{-r/2})))`.
pub fn a_of_beta<T: Real>(beta: T, r: usize, d: usize) -> Result<T> {
    check_beta(beta)?;
    check_rank(d, r)?;
    let rank = T::from_count(r);
    let two_over_r = T::c(2.0) / rank;
    let log_inv = -beta.ln();
    let constant = (binomial::<T>(d, r) / rank).ln() - rank * T::c(0.5) * T::TAU().ln();
    let radicand =
        two_over_r * (log_inv - (rank + T::one()) * T::c(0.5) * (two_over_r * log_inv).ln() + constant);
    if !(radicand > T::zero()) {
        return Err(Error::RadicandNonpositive {
            radicand: radicand.as_f64(),
        });
    }
    Ok(radicand.sqrt())
}

/// `b(β, ρ, r) = sqrt(1 - ρ) · a(β / sqrt(1 - ρ), r)`.
pub fn b_of_beta<T: Real>(beta: T, rho: T, r: usize, d: usize) -> Result<T> {
    if !(rho >= T::zero() && rho < T::one()) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    let shrink = (T::one() - rho).sqrt();
    Ok(shrink * a_of_beta(beta / shrink, r, d)?)
}

/// `[β⁻¹]`, the lag whose correlation sets `ρ_β` in the fully mixed regime.
pub fn lag_for_beta<T: Real>(beta: T) -> usize {
    // Guard against 1/0.002 = 499.999... style representation error.
    let inverse = T::one() / beta;
    (inverse + inverse * T::c(1e-12)).floor().to_usize().unwrap_or(usize::MAX)
}

/// Every constant needed to move between raw crossing times and limit-law
/// coordinates for one `(β, d, r)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams<T> {
    pub beta: T,
    pub d: usize,
    pub r: usize,
    /// `γ` in the strong regime, zero otherwise.
    pub gamma: T,
    pub regime: Regime,
    /// `a(β, r)`.
    pub a_beta_r: T,
    /// `ρ_β`: `γ / |ln β|` (strong), `r_{[1/β]}` (fully mixed), zero (weak).
    pub rho_beta: T,
    /// `b(β, ρ_β, r)`; equals `a(β, r)` in the weak regime.
    pub b_beta: T,
    /// Fully mixed only: the correlation `r_{[1/β]}` read off the model.
    pub rho_source: Option<T>,
}

impl<T: Real> NormalizationParams<T> {
    pub fn weak(beta: T, d: usize, r: usize) -> Result<Self> {
        let a = a_of_beta(beta, r, d)?;
        Ok(Self {
            beta,
            d,
            r,
            gamma: T::zero(),
            regime: Regime::Weak,
            a_beta_r: a,
            rho_beta: T::zero(),
            b_beta: a,
            rho_source: None,
        })
    }

    /// Strong dependence `r_n ln n -> γ`. Only `r = 1` and `r = d` have a
    /// known limit; intermediate ranks are rejected.
    pub fn strong(beta: T, d: usize, r: usize, gamma: T) -> Result<Self> {
        check_beta(beta)?;
        check_rank(d, r)?;
        if r != 1 && r != d {
            return Err(Error::InvalidParameter(format!(
                "strong dependence supports only the cases r = 1 and r = d (got r={r}, d={d})"
            )));
        }
        if !(gamma > T::zero()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let rho = gamma / beta.ln().abs();
        if rho >= T::one() {
            return Err(Error::InvalidParameter(format!(
                "rho_beta = gamma/|ln beta| = {rho} must be < 1; decrease beta"
            )));
        }
        let regime = if r == 1 { Regime::StrongR1 } else { Regime::StrongRd };
        Ok(Self {
            beta,
            d,
            r,
            gamma,
            regime,
            a_beta_r: a_of_beta(beta, r, d)?,
            rho_beta: rho,
            b_beta: b_of_beta(beta, rho, r, d)?,
            rho_source: None,
        })
    }

    /// Fully mixed regime for a single sequence, with `ρ_β = r_{[1/β]}`
    /// supplied by the caller from its covariance model.
    pub fn fully_mixed(beta: T, rho_at_inverse_beta: T) -> Result<Self> {
        check_beta(beta)?;
        if !(rho_at_inverse_beta > T::zero() && rho_at_inverse_beta < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "fully mixed rho must lie in (0, 1), got {rho_at_inverse_beta}"
            )));
        }
        Ok(Self {
            beta,
            d: 1,
            r: 1,
            gamma: T::zero(),
            regime: Regime::FullyMixed,
            a_beta_r: a_of_beta(beta, 1, 1)?,
            rho_beta: rho_at_inverse_beta,
            b_beta: b_of_beta(beta, rho_at_inverse_beta, 1, 1)?,
            rho_source: Some(rho_at_inverse_beta),
        })
    }

    /// Multiplier on `x` inside `β u_β(x)`.
    fn x_scale(&self) -> T {
        match self.regime {
            Regime::Weak => T::one() / (T::from_count(self.r) * self.a_beta_r),
            Regime::StrongR1 | Regime::FullyMixed => self.rho_beta.sqrt(),
            Regime::StrongRd => self.rho_beta.sqrt() / T::from_count(self.d),
        }
    }

    /// The threshold `u_β(x)` (a real number, never rounded).
    pub fn u_of_x(&self, x: T) -> T {
        (self.b_beta + self.x_scale() * x) / self.beta
    }

    /// Inverse of [`u_of_x`](Self::u_of_x): the `x` with `u_β(x) = t`.
    pub fn normalize_time(&self, t: T) -> T {
        (self.beta * t - self.b_beta) / self.x_scale()
    }

    /// Limit-law coordinates `(x̂_Υ, x̂_τ)` of a crossing pair. The event
    /// `Υ >= -u_β(x)` is `x̂_Υ <= x` and `τ <= u_β(y)` is `x̂_τ <= y`.
    pub fn normalize_crossings(&self, upsilon: i64, tau: i64) -> (T, T) {
        let to_t = |v: i64| T::from_i64(v).expect("index representable");
        (self.normalize_time(-to_t(upsilon)), self.normalize_time(to_t(tau)))
    }

    pub fn limit_law(&self) -> LimitLaw<T> {
        match self.regime {
            Regime::Weak => LimitLaw::ProductGumbel,
            Regime::StrongR1 => LimitLaw::StrongMixtureR1 {
                gamma: self.gamma,
                d: self.d,
            },
            Regime::StrongRd => LimitLaw::StrongMixtureRd {
                gamma: self.gamma,
                d: self.d,
            },
            Regime::FullyMixed => LimitLaw::FullyMixed,
        }
    }
}

/// `exp(-(e^{-x} + e^{-y}))`.
pub fn gumbel_joint_cdf<T: Real>(x: T, y: T) -> T {
    (-((-x).exp() + (-y).exp())).exp()
}

/// `exp(-e^{-x})`.
pub fn gumbel_cdf<T: Real>(x: T) -> T {
    (-(-x).exp()).exp()
}

/// `Φ(min(x, y))`.
pub fn fully_mixed_cdf<T: Real>(x: T, y: T) -> T {
    phi_cdf(x.min(y))
}

const MIXTURE_TOLERANCE: f64 = 1e-8;
// exp(-37) < 1e-16: beyond this the double exponential kills the integrand.
const LOG_NEGLIGIBLE: f64 = 37.0;
const NORMAL_CUTOFF: f64 = 12.0;

fn check_mixture<T: Real>(gamma: T, d: usize) -> Result<()> {
    if !(gamma > T::zero()) || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "mixture law needs gamma > 0 and d >= 1, got gamma={gamma}, d={d}"
        )));
    }
    Ok(())
}

/// `∫ exp(-w (e^{-k(x - c z)} + e^{-k(y - c z)})) dΦ(z)` over the range where
/// the integrand is not negligible.
fn gumbel_kernel_average<T: Real>(x: T, y: T, k: T, weight: T, stretch: T, abs_tol: T) -> Result<T> {
    let lowest = x.min(y);
    if lowest == T::neg_infinity() {
        return Ok(T::zero());
    }
    let cutoff = T::c(NORMAL_CUTOFF);
    let upper = ((lowest + (T::c(LOG_NEGLIGIBLE) / weight).ln() / k) / stretch).min(cutoff);
    if upper <= -cutoff {
        return Ok(T::zero());
    }
    let integrand = |z: T| {
        let shift = stretch * z;
        let load = (-(k * (x - shift))).exp() + (-(k * (y - shift))).exp();
        (-(weight * load)).exp() * phi_pdf(z)
    };
    let quad = AdaptiveQuadrature {
        abs_tol,
        rel_tol: T::zero(),
        max_subdivisions: 4000,
    };
    Ok(quad.integrate(integrand, -cutoff, upper)?.value.min(T::one()))
}

/// Joint limit for maxima (`r = 1`) under strong dependence:
/// `∫_{R^d} exp(-(1/d) Σ_j (e^{-√(2γ)(x - z_j)} + e^{-√(2γ)(y - z_j)})) dΦ(z_1)…dΦ(z_d)`,
/// evaluated as the `d`-th power of a one-dimensional integral.
pub fn strong_mixture_cdf_r1<T: Real>(x: T, y: T, gamma: T, d: usize) -> Result<T> {
    check_mixture(gamma, d)?;
    let dims = T::from_count(d);
    let k = (T::c(2.0) * gamma).sqrt();
    // (I ± e)^d moves by about d·e.
    let inner = gumbel_kernel_average(x, y, k, T::one() / dims, T::one(), T::c(MIXTURE_TOLERANCE) / (T::c(4.0) * dims))?;
    Ok(inner.powi(d as i32))
}

/// Joint limit for minima (`r = d`) under strong dependence:
/// `∫_{R^d} exp(-(e^{-√(2γ/d)(x - Σz_j)} + e^{-√(2γ/d)(y - Σz_j)})) dΦ(z_1)…dΦ(z_d)`,
/// reduced to one dimension through `Σ z_j = √d · Z`.
pub fn strong_mixture_cdf_rd<T: Real>(x: T, y: T, gamma: T, d: usize) -> Result<T> {
    check_mixture(gamma, d)?;
    let dims = T::from_count(d);
    let k = (T::c(2.0) * gamma / dims).sqrt();
    gumbel_kernel_average(x, y, k, T::one(), dims.sqrt(), T::c(MIXTURE_TOLERANCE) / T::c(4.0))
}

/// One of the four limit distributions of `(x̂_Υ, x̂_τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum LimitLaw<T> {
    ProductGumbel,
    StrongMixtureR1 { gamma: T, d: usize },
    StrongMixtureRd { gamma: T, d: usize },
    FullyMixed,
}

impl<T: Real> LimitLaw<T> {
    pub fn joint_cdf(&self, x: T, y: T) -> Result<T> {
        match *self {
            LimitLaw::ProductGumbel => Ok(gumbel_joint_cdf(x, y)),
            LimitLaw::StrongMixtureR1 { gamma, d } => strong_mixture_cdf_r1(x, y, gamma, d),
            LimitLaw::StrongMixtureRd { gamma, d } => strong_mixture_cdf_rd(x, y, gamma, d),
            LimitLaw::FullyMixed => Ok(fully_mixed_cdf(x, y)),
        }
    }

    /// Common marginal of both coordinates.
    pub fn marginal_cdf(&self, x: T) -> Result<T> {
        self.joint_cdf(x, T::infinity())
    }

    pub fn name(&self) -> &'static str {
        match self {
            LimitLaw::ProductGumbel => "product-gumbel",
            LimitLaw::StrongMixtureR1 { .. } => "strong-mixture-r1",
            LimitLaw::StrongMixtureRd { .. } => "strong-mixture-rd",
            LimitLaw::FullyMixed => "fully-mixed",
        }
    }
}

/// Norming constants for the maximum of `n` terms of an `r`-th order
/// statistics sequence: `a_n = sqrt(2 r ln n)` and
/// `b_n = a_n / r + a_n⁻¹ ln(a_n^{-r} C(d,r) (2π)^{-r/2})`.
pub fn maxima_normalization<T: Real>(n: T, r: usize, d: usize) -> Result<(T, T)> {
    check_rank(d, r)?;
    if !(n > T::one()) {
        return Err(Error::InvalidParameter(format!("maxima normalization needs n > 1, got {n}")));
    }
    let rank = T::from_count(r);
    let a_n = (T::c(2.0) * rank * n.ln()).sqrt();
    let inner = binomial::<T>(d, r).ln() - rank * a_n.ln() - rank * T::c(0.5) * T::TAU().ln();
    Ok((a_n, a_n / rank + inner / a_n))
}

/// `-ln P(Υ(O_ξ) >= -u_β(x))` for independent sequences, computed as the exact
/// product `-Σ_{i >= ⌈u_β(x)⌉} ln P(O^{(r)} <= iβ)` under the weak normalization.
///
/// The tail of the sum is dropped once a geometric bound on the remainder
/// falls below `1e-15` of the running total; terms decrease with a
/// nonincreasing ratio because the order-statistic survival function is
/// log-concave.
pub fn independent_case_exact<T: Real>(x: T, beta: T, d: usize, r: usize) -> Result<T> {
    let params = NormalizationParams::weak(beta, d, r)?;
    let u = params.u_of_x(x);
    if !(u >= T::one()) {
        return Err(Error::InvalidParameter(format!("u_beta(x) = {u} must be at least 1")));
    }
    let start = u.ceil().to_u64().expect("threshold index fits in u64");
    let mut total = T::zero();
    let mut previous_exceed = T::zero();
    for i in start.. {
        let level = T::from_u64(i).expect("index representable") * beta;
        let ln_below = ln_order_stat_below(level, d, r);
        if ln_below == T::neg_infinity() {
            return Err(Error::ProbabilityOne {
                threshold: level.as_f64(),
            });
        }
        total = total - ln_below;
        let exceed = order_stat_exceed_exact(level, d, r);
        if exceed == T::zero() {
            break;
        }
        if previous_exceed > T::zero() {
            let ratio = exceed / previous_exceed;
            if ratio < T::one() {
                // Σ_{j>i} -ln(1 - e_j) <= e_{i+1} / ((1 - q)(1 - e_i)) with e_{i+1} <= q e_i
                let remainder = exceed * ratio / ((T::one() - ratio) * (T::one() - exceed));
                if remainder <= T::c(1e-15) * total {
                    break;
                }
            }
        }
        previous_exceed = exceed;
    }
    Ok(total)
}
