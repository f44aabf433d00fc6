//! Exact synthesis of stationary Gaussian windows on `[-N, N]`.
//!
//! Windows come from circulant embedding when the embedding spectrum is
//! nonnegative, and from a Durbin–Levinson innovations recursion otherwise.
//! Randomness is addressed by `(master_seed, replication, copy)`: each triple
//! owns a disjoint ChaCha8 keystream, so a replication produces the same
//! numbers no matter which worker runs it or in which order.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::covariance::{durbin_min_pivot, CovarianceModel};
use crate::error::{Error, Result};

/// Embedding eigenvalues below this make the circulant path unusable.
pub const EMBEDDING_TOLERANCE: f64 = -1e-8;

/// Largest half-width served by the quadratic-time Toeplitz fallback.
pub const FALLBACK_MAX_HALF_WIDTH: usize = 8000;

/// Address of one keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub replication_index: u64,
    pub copy_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, replication_index: u64) -> Self {
        Self {
            master_seed,
            replication_index,
            copy_index: 0,
        }
    }

    pub fn copy(self, copy_index: u64) -> Self {
        Self { copy_index, ..self }
    }

    /// The generator for this address. Copies of one replication share a
    /// ChaCha stream and start 2^48 words apart.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replication_index);
        rng.set_word_pos(u128::from(self.copy_index) << 48);
        rng
    }
}

/// One copy of the stationary sequence on `offset, offset + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianWindow {
    pub offset: i64,
    pub values: Vec<f64>,
    pub copy_index: u64,
}

impl GaussianWindow {
    /// Value at sequence index `i`, if inside the window.
    pub fn at(&self, i: i64) -> Option<f64> {
        usize::try_from(i - self.offset).ok().and_then(|k| self.values.get(k).copied())
    }
}

#[derive(Clone)]
enum Method {
    Iid,
    Circulant {
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Levinson {
        reflections: Vec<f64>,
        deviations: Vec<f64>,
    },
}

/// Precomputed synthesis for one covariance model and half-width.
#[derive(Clone)]
pub struct WindowSampler {
    half_width: usize,
    method: Method,
}

impl std::fmt::Debug for WindowSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WindowSampler")
            .field("half_width", &self.half_width)
            .field("method", &self.method_name())
            .finish()
    }
}

fn circulant_method(correlations: impl Fn(usize) -> f64, len: usize) -> Option<Method> {
    let size = (2 * len).next_power_of_two();
    let mut buffer: Vec<Complex<f64>> = (0..size)
        .map(|k| Complex::new(correlations(k.min(size - k)), 0.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(size);
    fft.process(&mut buffer);
    let smallest = buffer.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if smallest < EMBEDDING_TOLERANCE {
        return None;
    }
    let norm = size as f64;
    let scale = buffer.iter().map(|z| (z.re.max(0.0) / norm).sqrt()).collect();
    Some(Method::Circulant { scale, fft })
}

fn levinson_method(correlations: &[f64]) -> Result<Method> {
    durbin_min_pivot(correlations).map_err(|e| Error::EmbeddingFailed(e.to_string()))?;
    let n = correlations.len();
    let mut reflections = vec![0.0; n];
    let mut deviations = vec![0.0; n];
    let mut phi = vec![0.0; n];
    let mut previous = vec![0.0; n];
    let mut variance = correlations[0];
    deviations[0] = variance.sqrt();
    for k in 1..n {
        let mut numerator = correlations[k];
        for j in 1..k {
            numerator -= phi[j] * correlations[k - j];
        }
        let kappa = numerator / variance;
        previous[1..k].copy_from_slice(&phi[1..k]);
        for j in 1..k {
            phi[j] = previous[j] - kappa * previous[k - j];
        }
        phi[k] = kappa;
        variance *= 1.0 - kappa * kappa;
        reflections[k] = kappa;
        deviations[k] = variance.max(0.0).sqrt();
    }
    Ok(Method::Levinson {
        reflections,
        deviations,
    })
}

impl WindowSampler {
    pub fn new(model: &CovarianceModel, half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::InvalidParameter("window half-width N must be at least 1".into()));
        }
        let len = 2 * half_width + 1;
        if model.is_independent() {
            return Ok(Self {
                half_width,
                method: Method::Iid,
            });
        }
        if let Some(method) = circulant_method(|k| model.correlation(k), len) {
            return Ok(Self { half_width, method });
        }
        if half_width > FALLBACK_MAX_HALF_WIDTH {
            return Err(Error::EmbeddingFailed(format!(
                "embedding spectrum is negative and N = {half_width} exceeds the Toeplitz fallback limit {FALLBACK_MAX_HALF_WIDTH}"
            )));
        }
        let correlations: Vec<f64> = (0..len).map(|k| model.correlation(k)).collect();
        Ok(Self {
            half_width,
            method: levinson_method(&correlations)?,
        })
    }

    /// Forces the Toeplitz recursion; used to cross-check the two paths.
    pub fn toeplitz(model: &CovarianceModel, half_width: usize) -> Result<Self> {
        let correlations: Vec<f64> = (0..2 * half_width + 1).map(|k| model.correlation(k)).collect();
        Ok(Self {
            half_width,
            method: levinson_method(&correlations)?,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn method_name(&self) -> &'static str {
        match self.method {
            Method::Iid => "iid",
            Method::Circulant { .. } => "circulant",
            Method::Levinson { .. } => "toeplitz",
        }
    }

    /// Fills `out` (length `2N + 1`) with one window.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.len(), "output length must be 2N + 1");
        match &self.method {
            Method::Iid => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            Method::Circulant { scale, fft } => {
                let mut buffer: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buffer);
                for (o, z) in out.iter_mut().zip(&buffer) {
                    *o = z.re;
                }
            }
            Method::Levinson {
                reflections,
                deviations,
            } => {
                let n = out.len();
                let mut phi = vec![0.0; n];
                let mut previous = vec![0.0; n];
                out[0] = deviations[0] * rng.sample::<f64, _>(StandardNormal);
                for t in 1..n {
                    let kappa = reflections[t];
                    previous[1..t].copy_from_slice(&phi[1..t]);
                    for j in 1..t {
                        phi[j] = previous[j] - kappa * previous[t - j];
                    }
                    phi[t] = kappa;
                    let mean: f64 = (1..=t).map(|j| phi[j] * out[t - j]).sum();
                    out[t] = mean + deviations[t] * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }

    pub fn sample(&self, stream: RngStream) -> GaussianWindow {
        let mut values = vec![0.0; self.len()];
        self.fill(&mut stream.rng(), &mut values);
        GaussianWindow {
            offset: -(self.half_width as i64),
            values,
            copy_index: stream.copy_index,
        }
    }
}

/// One window of `model` on `[-N, N]`. Rebuilds the embedding on every call;
/// use [`WindowSampler`] in loops.
pub fn sample_window(model: &CovarianceModel, half_width: usize, stream: RngStream) -> Result<GaussianWindow> {
    Ok(WindowSampler::new(model, half_width)?.sample(stream))
}

/// `d` windows `Y_ij = sqrt(1 - ρ) ξ_ij + sqrt(ρ) U_j` with all `ξ_ij` and
/// `U_j` independent standard normals: every copy has constant correlation `ρ`
/// at all nonzero lags.
pub fn sample_mixture_window(rho: f64, d: usize, half_width: usize, stream: RngStream) -> Result<Vec<GaussianWindow>> {
    check_mixture(rho, d)?;
    Ok((0..d as u64)
        .map(|j| {
            let copy = stream.copy(j);
            let mut values = vec![0.0; 2 * half_width + 1];
            fill_mixture(rho, &mut copy.rng(), &mut values);
            GaussianWindow {
                offset: -(half_width as i64),
                values,
                copy_index: j,
            }
        })
        .collect())
}

fn check_mixture(rho: f64, d: usize) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("mixture correlation must lie in [0, 1), got {rho}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one copy".into()));
    }
    Ok(())
}

fn fill_mixture<R: Rng + ?Sized>(rho: f64, rng: &mut R, out: &mut [f64]) {
    let shared = rho.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let own = (1.0 - rho).sqrt();
    for v in out.iter_mut() {
        *v = own * rng.sample::<f64, _>(StandardNormal) + shared;
    }
}

/// Where the copies of an order-statistics window come from.
#[derive(Debug, Clone)]
pub enum WindowSource {
    Covariance(WindowSampler),
    Mixture { rho: f64, half_width: usize },
}

impl WindowSource {
    pub fn half_width(&self) -> usize {
        match self {
            WindowSource::Covariance(s) => s.half_width(),
            WindowSource::Mixture { half_width, .. } => *half_width,
        }
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            WindowSource::Covariance(s) => s.fill(rng, out),
            WindowSource::Mixture { rho, .. } => fill_mixture(*rho, rng, out),
        }
    }
}

/// Pointwise `r`-th largest of `d` independent copies.
#[derive(Debug, Clone)]
pub struct OrderStatSampler {
    source: WindowSource,
    d: usize,
    r: usize,
}

impl OrderStatSampler {
    pub fn new(source: WindowSource, d: usize, r: usize) -> Result<Self> {
        if d == 0 || r == 0 || r > d {
            return Err(Error::InvalidParameter(format!("need 1 <= r <= d, got r={r}, d={d}")));
        }
        if let WindowSource::Mixture { rho, .. } = source {
            check_mixture(rho, d)?;
        }
        Ok(Self { source, d, r })
    }

    pub fn half_width(&self) -> usize {
        self.source.half_width()
    }

    /// `O^{(r)}_i` for `i = -N..=N`, in that order.
    pub fn sample(&self, stream: RngStream) -> Vec<f64> {
        let len = 2 * self.half_width() + 1;
        if self.d == 1 {
            let mut out = vec![0.0; len];
            self.source.fill(&mut stream.copy(0).rng(), &mut out);
            return out;
        }
        let mut copies = vec![0.0; self.d * len];
        for (j, chunk) in copies.chunks_mut(len).enumerate() {
            self.source.fill(&mut stream.copy(j as u64).rng(), chunk);
        }
        let mut column = vec![0.0; self.d];
        (0..len)
            .map(|i| {
                for (j, c) in column.iter_mut().enumerate() {
                    *c = copies[j * len + i];
                }
                *column
                    .select_nth_unstable_by(self.r - 1, |a, b| b.total_cmp(a))
                    .1
            })
            .collect()
    }
}

/// Order-statistics window from `d` independent copies of `model`.
pub fn sample_order_stat_window(
    model: &CovarianceModel,
    d: usize,
    r: usize,
    half_width: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    let sampler = WindowSampler::new(model, half_width)?;
    Ok(OrderStatSampler::new(WindowSource::Covariance(sampler), d, r)?.sample(stream))
}
