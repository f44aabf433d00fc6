//! The eight acceptance criteria, each a deterministic function returning a
//! pass/fail verdict with the measured numbers. Thresholds are fixed here and
//! never relaxed by callers.

use std::fmt;
use std::fs;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::covariance::CovarianceKind;
use crate::error::Result;
use crate::experiment::{emit_results, run_experiment, ExperimentConfig, ExperimentRegime, OutputFormat, SamplerKind};
use crate::limits::{gumbel_cdf, independent_case_exact, maxima_normalization, strong_mixture_cdf_r1, strong_mixture_cdf_rd};
use crate::numerics::{comparison_bound_sum, comparison_lhs_exact, ComparisonInstance};
use crate::sampler::RngStream;
use crate::stats::ks_statistic;

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

impl CriterionReport {
    fn new(id: u8, title: &'static str) -> Self {
        Self {
            id,
            title,
            passed: true,
            details: Vec::new(),
        }
    }

    /// Records a check; any failing check fails the criterion.
    fn check(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        self.details.push(format!("[{}] {detail}", if ok { "ok" } else { "FAIL" }));
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} criterion {}: {}", self.verdict(), self.id, self.title)
    }
}

pub const CRITERIA: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

/// Runs criterion `id` (1 to 8).
pub fn run_criterion(id: u8) -> Result<CriterionReport> {
    match id {
        1 => independent_case_exactness(),
        2 => weak_joint_gumbel(),
        3 => strong_mixture_limits(),
        4 => mixture_quadrature_cross_check(),
        5 => fully_mixed_regime(),
        6 => comparison_bound_property(),
        7 => maxima_sanity(),
        8 => infrastructure(),
        other => Err(crate::error::Error::InvalidParameter(format!("no criterion {other}; expected 1 to 8"))),
    }
}

const SEED: u64 = 20_240_601;

/// Exact product for independent copies at β ∈ {1e-2, 1e-3, 1e-4}.
pub fn independent_case_exactness() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(1, "independent-case exact product tends to e^{-x}");
    for &(d, r) in &[(1usize, 1usize), (2, 1), (3, 2)] {
        for &x in &[-1.0f64, 0.0, 1.0] {
            let ratio = |beta: f64| -> Result<f64> { Ok(independent_case_exact(x, beta, d, r)? / (-x).exp()) };
            let (coarse, middle, fine) = (ratio(1e-2)?, ratio(1e-3)?, ratio(1e-4)?);
            report.check(
                (0.85..=1.15).contains(&middle),
                format!("d={d} r={r} x={x}: ratio at beta=1e-3 is {middle:.4} (target [0.85, 1.15])"),
            );
            report.check(
                (fine - 1.0).abs() < (coarse - 1.0).abs(),
                format!("d={d} r={r} x={x}: |ratio-1| {:.4} at 1e-4 vs {:.4} at 1e-2", (fine - 1.0).abs(), (coarse - 1.0).abs()),
            );
        }
    }
    Ok(report)
}

/// Criterion-2 cell: weak model q = 0.5, d = 2, r = 1, ε = 1e-4, M = 5000.
pub fn weak_config(betas: Vec<f64>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        regime: ExperimentRegime::Weak,
        d: 2,
        r: 1,
        gamma: None,
        covariance: Some(CovarianceKind::Geometric { q: 0.5 }),
        sampler: Some(SamplerKind::Covariance),
        betas,
        replications: 5000,
        epsilon: 1e-4,
        master_seed: seed,
        workers: 0,
        timing: false,
        out: None,
        format: None,
        grid: Default::default(),
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn weak_joint_gumbel() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(2, "weak regime converges to the product Gumbel law");
    let cell = run_experiment(&weak_config(vec![0.002], SEED))?.cells.remove(0);
    report.check(cell.ks_upsilon <= 0.08, format!("ks_upsilon = {:.4} (<= 0.08)", cell.ks_upsilon));
    report.check(cell.ks_tau <= 0.08, format!("ks_tau = {:.4} (<= 0.08)", cell.ks_tau));
    report.check(cell.joint_distance <= 0.10, format!("joint_distance = {:.4} (<= 0.10)", cell.joint_distance));
    report.check(cell.independence_gap <= 0.10, format!("independence_gap = {:.4} (<= 0.10)", cell.independence_gap));
    report.check(cell.exclusion_rate() <= 0.01, format!("exclusion rate = {:.4} (<= 0.01)", cell.exclusion_rate()));

    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    for seed in 1..=10 {
        let result = run_experiment(&weak_config(vec![0.02, 0.002], seed))?;
        coarse.push(result.cells[0].joint_distance);
        fine.push(result.cells[1].joint_distance);
    }
    let (mc, mf) = (median(coarse), median(fine));
    report.check(mf < mc, format!("median joint_distance over 10 seeds: {mf:.4} at beta=0.002 vs {mc:.4} at beta=0.02"));
    Ok(report)
}

fn strong_config(r: usize) -> ExperimentConfig {
    ExperimentConfig {
        regime: ExperimentRegime::Strong,
        d: 2,
        r,
        gamma: Some(1.0),
        covariance: None,
        sampler: Some(SamplerKind::Mixture),
        betas: vec![0.002],
        ..weak_config(vec![], SEED)
    }
}

pub fn strong_mixture_limits() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(3, "strong regime converges to the Gaussian-mixture limits");
    for r in [1usize, 2] {
        let cell = run_experiment(&strong_config(r))?.cells.remove(0);
        report.check(cell.ks_upsilon <= 0.08, format!("r={r}: ks_upsilon = {:.4} (<= 0.08)", cell.ks_upsilon));
        report.check(cell.ks_tau <= 0.08, format!("r={r}: ks_tau = {:.4} (<= 0.08)", cell.ks_tau));
        report.check(
            cell.independence_gap >= 0.02,
            format!("r={r}: independence_gap = {:.4} (>= 0.02)", cell.independence_gap),
        );
    }
    let weak = run_experiment(&weak_config(vec![0.002], SEED))?.cells.remove(0);
    report.check(
        weak.independence_gap <= 0.10,
        format!("weak contrast: independence_gap = {:.4} (<= 0.10)", weak.independence_gap),
    );
    Ok(report)
}

/// Plain Monte Carlo mean and standard error of `f` over `n` draws of `Z ∈ R^d`.
fn monte_carlo<F: Fn(&[f64]) -> f64 + Sync>(f: F, d: usize, n: usize, stream: RngStream) -> (f64, f64) {
    const CHUNK: usize = 50_000;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.copy(c as u64).rng();
            let mut z = vec![0.0; d];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..CHUNK.min(n - c * CHUNK) {
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let v = f(&z);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts.iter().fold((0.0, 0.0), |(a, b), &(c, e)| (a + c, b + e));
    let count = n as f64;
    let mean = s / count;
    let variance = (s2 / count - mean * mean).max(0.0) * count / (count - 1.0);
    (mean, (variance / count).sqrt())
}

pub fn mixture_quadrature_cross_check() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(4, "mixture CDF quadrature agrees with d-dimensional Monte Carlo");
    let mut rng = RngStream::new(SEED, 4).rng();
    const DRAWS: usize = 1_000_000;
    for t in 0..20u64 {
        let x: f64 = rng.random_range(-2.0..3.0);
        let y: f64 = rng.random_range(-2.0..3.0);
        let gamma: f64 = rng.random_range(0.2..3.0);
        let d = [1usize, 2, 3, 5][rng.random_range(0..4)];
        let dims = d as f64;

        let k1 = (2.0 * gamma).sqrt();
        let r1 = |z: &[f64]| {
            let load: f64 = z.iter().map(|&zj| (-k1 * (x - zj)).exp() + (-k1 * (y - zj)).exp()).sum();
            (-load / dims).exp()
        };
        let kd = (2.0 * gamma / dims).sqrt();
        let rd = |z: &[f64]| {
            let s: f64 = z.iter().sum();
            (-((-kd * (x - s)).exp() + (-kd * (y - s)).exp())).exp()
        };
        let (m1, se1) = monte_carlo(r1, d, DRAWS, RngStream::new(SEED, 1000 + 2 * t));
        let (md, sed) = monte_carlo(rd, d, DRAWS, RngStream::new(SEED, 1001 + 2 * t));
        let q1 = strong_mixture_cdf_r1(x, y, gamma, d)?;
        let qd = strong_mixture_cdf_rd(x, y, gamma, d)?;
        let label = format!("x={x:.3} y={y:.3} gamma={gamma:.3} d={d}");
        report.check(
            (q1 - m1).abs() <= 3.0 * se1 + 1e-8,
            format!("{label}: r1 quad {q1:.6} vs MC {m1:.6} (3 SE = {:.2e})", 3.0 * se1),
        );
        report.check(
            (qd - md).abs() <= 3.0 * sed + 1e-8,
            format!("{label}: rd quad {qd:.6} vs MC {md:.6} (3 SE = {:.2e})", 3.0 * sed),
        );
        let (a, b) = (strong_mixture_cdf_r1(x, y, gamma, 1)?, strong_mixture_cdf_rd(x, y, gamma, 1)?);
        report.check((a - b).abs() <= 1e-8, format!("{label}: d=1 evaluators differ by {:.1e}", (a - b).abs()));
    }
    Ok(report)
}

pub fn fully_mixed_regime() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(5, "fully mixed regime converges to Phi(min(x, y))");
    let config = ExperimentConfig {
        regime: ExperimentRegime::FullyMixed,
        d: 1,
        r: 1,
        covariance: Some(CovarianceKind::FullyMixed {
            a: 0.5,
            c: std::f64::consts::E,
        }),
        sampler: Some(SamplerKind::Mixture),
        ..weak_config(vec![0.002], SEED)
    };
    let cell = run_experiment(&config)?.cells.remove(0);
    report.check(
        cell.joint_distance <= 0.10,
        format!("joint_distance = {:.4} (<= 0.10), rho_beta = {:.5}", cell.joint_distance, cell.rho_beta),
    );
    report.check(cell.correlation >= 0.8, format!("correlation = {:.4} (>= 0.8)", cell.correlation));
    Ok(report)
}

pub fn comparison_bound_property() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(6, "normal comparison bound holds with one constant C <= 50");
    let mut rng = RngStream::new(SEED, 6).rng();
    let mut worst: f64 = 0.0;
    let mut degenerate = 0;
    for _ in 0..500 {
        let d = rng.random_range(1..=3usize);
        let r = if rng.random_bool(0.5) { 1 } else { d };
        let thresholds = vec![rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)];
        let mut matrices = || -> Vec<Vec<f64>> {
            (0..d)
                .map(|_| {
                    let s: f64 = rng.random_range(-0.8..0.8);
                    vec![1.0, s, s, 1.0]
                })
                .collect()
        };
        let (sigma1, sigma0) = (matrices(), matrices());
        let instance = ComparisonInstance::new(d, r, thresholds, sigma1, sigma0)?;
        let lhs = comparison_lhs_exact(&instance)?;
        let bound = comparison_bound_sum(&instance)?;
        if bound > 0.0 {
            worst = worst.max(lhs / bound);
        } else if lhs > 1e-12 {
            degenerate += 1;
        }
    }
    report.check(worst <= 50.0, format!("fitted constant C = {worst:.4} (<= 50) over 500 instances"));
    report.check(degenerate == 0, format!("{degenerate} instances with zero bound but nonzero difference"));
    Ok(report)
}

pub fn maxima_sanity() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(7, "normalized maxima of order statistics are Gumbel");
    let (n, d, replications) = (10_000usize, 2usize, 5000usize);
    let (a_n, b_n) = maxima_normalization(n as f64, 1, d)?;
    let mut values: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|m| {
            let mut rng = RngStream::new(SEED, m).rng();
            let mut best = f64::NEG_INFINITY;
            for _ in 0..n * d {
                best = best.max(rng.sample(StandardNormal));
            }
            a_n * (best - b_n)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let ks = ks_statistic(&values, &|x: f64| gumbel_cdf(x))?;
    report.check(ks <= 0.08, format!("KS of a_n(max - b_n) vs exp(-e^-x) = {ks:.4} (<= 0.08)"));
    Ok(report)
}

fn scratch_dir(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("crossing-acceptance-{}-{tag}", std::process::id()))
}

fn read_all(dir: &std::path::Path, files: &[PathBuf]) -> Result<Vec<(String, Vec<u8>)>> {
    files
        .iter()
        .map(|p| {
            let name = p.strip_prefix(dir).unwrap_or(p).display().to_string();
            Ok((name, fs::read(p)?))
        })
        .collect()
}

pub fn infrastructure() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(8, "determinism and certified truncation");
    let config = weak_config(vec![0.02, 0.002], SEED);
    let first = run_experiment(&config)?;
    let second = run_experiment(&ExperimentConfig { workers: 1, ..config.clone() })?;
    let (da, db) = (scratch_dir("a"), scratch_dir("b"));
    let files_a = emit_results(&first, &da, OutputFormat::Csv)?;
    let files_b = emit_results(&second, &db, OutputFormat::Csv)?;
    let identical = read_all(&da, &files_a)? == read_all(&db, &files_b)?;
    let _ = fs::remove_dir_all(&da);
    let _ = fs::remove_dir_all(&db);
    report.check(identical, format!("repeated run (default pool vs 1 worker) wrote {} byte-identical files", files_a.len()));

    let eps = config.epsilon;
    let m = config.replications as f64;
    let allowed = 2.0 * eps + 3.0 * (eps / m).sqrt();
    for cell in &first.cells {
        report.check(
            cell.truncation_rate() <= allowed,
            format!(
                "beta={}: truncation rate {:.2e} (<= {allowed:.2e}), N = {}, tail bound {:.2e}",
                cell.beta,
                cell.truncation_rate(),
                cell.horizon,
                cell.tail_bound
            ),
        );
    }
    Ok(report)
}
