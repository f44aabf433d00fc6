//! Stationary correlation sequences `r_n` for the three dependence regimes,
//! with numerical certificates for the regime condition, convexity and
//! positive semidefiniteness of the finite Toeplitz matrix.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot tolerance for the Toeplitz factorization and the circulant spectrum.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Largest value the strong family may take at positive lags.
pub const STRONG_CAP: f64 = 0.99;

const STRONG_RETRIES: usize = 4;

/// Which hypothesis on `r_n ln n` a family realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DependenceClass {
    Weak,
    Strong,
    FullyMixed,
}

/// Built-in correlation families. `r_0 = 1` for every family; the formulas
/// below apply to `n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovarianceKind {
    /// `r_n = 0`.
    Independent,
    /// `r_n = q^n`, `0 < q < 1`.
    Geometric { q: f64 },
    /// `r_n = (1 + n)^{-p}`, `p > 0`.
    Polynomial { p: f64 },
    /// `r_n = min(γ / ln(n + c), 0.99)`, `γ > 0`, `c >= e`.
    Strong {
        gamma: f64,
        #[serde(default = "default_strong_offset")]
        c: f64,
    },
    /// `r_n = (ln(n + c))^{-a}`, `0 < a < 1`, `c > e - 1`.
    FullyMixed {
        #[serde(default = "default_mixed_exponent")]
        a: f64,
        #[serde(default = "default_mixed_offset")]
        c: f64,
    },
}

fn default_strong_offset() -> f64 {
    20.0
}

fn default_mixed_exponent() -> f64 {
    0.5
}

fn default_mixed_offset() -> f64 {
    std::f64::consts::E
}

impl CovarianceKind {
    pub fn class(&self) -> DependenceClass {
        match self {
            CovarianceKind::Independent | CovarianceKind::Geometric { .. } | CovarianceKind::Polynomial { .. } => {
                DependenceClass::Weak
            }
            CovarianceKind::Strong { .. } => DependenceClass::Strong,
            CovarianceKind::FullyMixed { .. } => DependenceClass::FullyMixed,
        }
    }

    /// Correlation at lag `n` (absolute value taken for negative lags).
    pub fn correlation(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let lag = n as f64;
        match *self {
            CovarianceKind::Independent => 0.0,
            CovarianceKind::Geometric { q } => q.powf(lag),
            CovarianceKind::Polynomial { p } => (1.0 + lag).powf(-p),
            CovarianceKind::Strong { gamma, c } => (gamma / (lag + c).ln()).min(STRONG_CAP),
            CovarianceKind::FullyMixed { a, c } => (lag + c).ln().powf(-a),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            CovarianceKind::Independent => Ok(()),
            CovarianceKind::Geometric { q } if !(q > 0.0 && q < 1.0) => bad(format!("geometric rate q must lie in (0, 1), got {q}")),
            CovarianceKind::Polynomial { p } if !(p > 0.0 && p.is_finite()) => bad(format!("polynomial exponent p must be positive, got {p}")),
            CovarianceKind::Strong { gamma, .. } if !(gamma > 0.0 && gamma.is_finite()) => bad(format!("gamma must be positive, got {gamma}")),
            CovarianceKind::Strong { c, .. } if !(c >= std::f64::consts::E && c.is_finite()) => {
                bad(format!("strong offset c must be at least e, got {c}"))
            }
            CovarianceKind::FullyMixed { a, .. } if !(a > 0.0 && a < 1.0) => bad(format!("fully mixed exponent a must lie in (0, 1), got {a}")),
            CovarianceKind::FullyMixed { c, .. } if !(c > std::f64::consts::E - 1.0 && c.is_finite()) => {
                bad(format!("fully mixed offset c must exceed e - 1, got {c}"))
            }
            _ => Ok(()),
        }
    }
}

/// How positive semidefiniteness of a Toeplitz matrix was established.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PsdCertificate {
    /// The matrix is a principal block of a circulant with this smallest eigenvalue.
    Circulant { min_eigenvalue: f64 },
    /// Durbin–Levinson factorization; the pivots are the prediction variances.
    Factorization { min_pivot: f64 },
}

/// Smallest eigenvalue of the minimal symmetric circulant embedding of the
/// Toeplitz matrix with first row `r`.
pub fn circulant_min_eigenvalue(r: &[f64]) -> f64 {
    if r.len() <= 1 {
        return r.first().copied().unwrap_or(1.0);
    }
    let m = r.len() - 1;
    let size = 2 * m;
    let mut buffer: Vec<Complex<f64>> = (0..size).map(|k| Complex::new(r[k.min(size - k)], 0.0)).collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut buffer);
    buffer.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
}

/// Smallest Durbin–Levinson pivot of the Toeplitz matrix with first row `r`,
/// or the failing pivot as an error.
pub fn durbin_min_pivot(r: &[f64]) -> Result<f64> {
    let mut phi = vec![0.0; r.len()];
    let mut scratch = vec![0.0; r.len()];
    let mut variance = r[0];
    let mut smallest = variance;
    for k in 1..r.len() {
        if variance <= 1e-14 {
            return Err(Error::NotPsd(format!("pivot {variance:e} at order {k} leaves the matrix singular")));
        }
        let mut numerator = r[k];
        for j in 1..k {
            numerator -= phi[j] * r[k - j];
        }
        let reflection = numerator / variance;
        scratch[1..k].copy_from_slice(&phi[1..k]);
        for j in 1..k {
            phi[j] = scratch[j] - reflection * scratch[k - j];
        }
        phi[k] = reflection;
        variance *= 1.0 - reflection * reflection;
        if variance < PSD_TOLERANCE {
            return Err(Error::NotPsd(format!("negative pivot {variance:e} at order {k}")));
        }
        smallest = smallest.min(variance);
    }
    Ok(smallest)
}

/// Certifies that the Toeplitz matrix with first row `r` is positive
/// semidefinite: first by the circulant spectrum, then by factorization.
pub fn certify_toeplitz(r: &[f64]) -> Result<PsdCertificate> {
    let min_eigenvalue = circulant_min_eigenvalue(r);
    if min_eigenvalue >= PSD_TOLERANCE {
        return Ok(PsdCertificate::Circulant { min_eigenvalue });
    }
    durbin_min_pivot(r).map(|min_pivot| PsdCertificate::Factorization { min_pivot })
}

/// Summary of `r_n ln n` over `1 <= n <= max_lag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub min: f64,
    pub max: f64,
    pub last: f64,
    /// `r_n ln n` is nondecreasing over `2 <= n <= max_lag`.
    pub nondecreasing: bool,
}

/// A validated correlation family tabulated up to `max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub kind: CovarianceKind,
    pub max_lag: usize,
    #[serde(skip)]
    table: Vec<f64>,
    #[serde(skip)]
    certificate: Option<PsdCertificate>,
}

/// Declared bounds for the regime checks performed by [`build_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeTolerance {
    /// Weak models need `r_n ln n` below this at `n = max_lag`.
    pub weak_threshold: f64,
    /// Strong models need `r_n ln n / γ` in `[1 - band, 1 + band]` at `n = max_lag`.
    pub strong_band: f64,
}

impl Default for RegimeTolerance {
    fn default() -> Self {
        Self {
            weak_threshold: 0.5,
            strong_band: 0.5,
        }
    }
}

/// Builds and validates a model with the default regime tolerances.
pub fn build_model(kind: CovarianceKind, max_lag: usize) -> Result<CovarianceModel> {
    build_model_with(kind, max_lag, RegimeTolerance::default())
}

pub fn build_model_with(kind: CovarianceKind, max_lag: usize, tolerance: RegimeTolerance) -> Result<CovarianceModel> {
    kind.validate()?;
    if max_lag < 2 {
        return Err(Error::InvalidParameter(format!("max_lag must be at least 2, got {max_lag}")));
    }
    let mut kind = kind;
    let mut retries = 0;
    loop {
        let model = tabulate(kind, max_lag);
        model.check_shape()?;
        model.check_regime(tolerance)?;
        match certify_toeplitz(&model.table) {
            Ok(certificate) => {
                return Ok(CovarianceModel {
                    certificate: Some(certificate),
                    ..model
                })
            }
            Err(err) => match kind {
                CovarianceKind::Strong { gamma, c } if retries < STRONG_RETRIES => {
                    retries += 1;
                    kind = CovarianceKind::Strong { gamma, c: 2.0 * c };
                }
                _ => return Err(err),
            },
        }
    }
}

fn tabulate(kind: CovarianceKind, max_lag: usize) -> CovarianceModel {
    CovarianceModel {
        kind,
        max_lag,
        table: (0..=max_lag).map(|n| kind.correlation(n)).collect(),
        certificate: None,
    }
}

impl CovarianceModel {
    /// `r_0, ..., r_max_lag`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `r_n` for any lag; lags past the table use the closed form.
    pub fn correlation(&self, n: usize) -> f64 {
        self.table.get(n).copied().unwrap_or_else(|| self.kind.correlation(n))
    }

    pub fn class(&self) -> DependenceClass {
        self.kind.class()
    }

    pub fn certificate(&self) -> Option<PsdCertificate> {
        self.certificate
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.kind, CovarianceKind::Independent)
    }

    /// `r_n ln n`.
    pub fn berman_product(&self, n: usize) -> f64 {
        if n <= 1 {
            return 0.0;
        }
        self.correlation(n) * (n as f64).ln()
    }

    pub fn regime_diagnostic(&self) -> RegimeReport {
        let mut report = RegimeReport {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            last: 0.0,
            nondecreasing: true,
        };
        let mut previous = f64::NEG_INFINITY;
        for n in 1..=self.max_lag {
            let value = self.berman_product(n);
            report.min = report.min.min(value);
            report.max = report.max.max(value);
            if n >= 2 && value < previous {
                report.nondecreasing = false;
            }
            previous = value;
            report.last = value;
        }
        report
    }

    fn check_shape(&self) -> Result<()> {
        for n in 1..self.table.len() {
            let value = self.table[n];
            if !(value.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!("|r_{n}| = {value} is not below 1")));
            }
            if value > self.table[n - 1] {
                return Err(Error::InvalidParameter(format!("r_n increases at lag {n}")));
            }
        }
        if let CovarianceKind::FullyMixed { .. } = self.kind {
            for n in 1..self.max_lag {
                let second = self.table[n + 1] - 2.0 * self.table[n] + self.table[n - 1];
                // Rounding noise on differences of numbers near 1e-1.
                if second < -1e-15 {
                    return Err(Error::ConvexityViolated {
                        lag: n,
                        second_difference: second,
                    });
                }
            }
        }
        Ok(())
    }

    fn check_regime(&self, tolerance: RegimeTolerance) -> Result<()> {
        let report = self.regime_diagnostic();
        match self.kind {
            CovarianceKind::Strong { gamma, .. } => {
                let ratio = report.last / gamma;
                if (ratio - 1.0).abs() > tolerance.strong_band {
                    return Err(Error::RegimeViolated(format!(
                        "r_n ln n = {} at n = {} is not within {} of gamma = {gamma}; increase max_lag",
                        report.last, self.max_lag, tolerance.strong_band
                    )));
                }
            }
            CovarianceKind::FullyMixed { .. } => {
                if !report.nondecreasing {
                    return Err(Error::RegimeViolated("r_n ln n is not increasing on the tabulated range".into()));
                }
            }
            _ => {
                if report.last >= tolerance.weak_threshold {
                    return Err(Error::RegimeViolated(format!(
                        "r_n ln n = {} at n = {} is not below {}",
                        report.last, self.max_lag, tolerance.weak_threshold
                    )));
                }
            }
        }
        Ok(())
    }
}
