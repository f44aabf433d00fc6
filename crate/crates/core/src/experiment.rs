//! β-sweeps: configuration, parallel replication, aggregation and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{build_model, CovarianceKind, DependenceClass};
use crate::crossing::{extract_crossings_on, truncation_horizon, CrossingSample};
use crate::error::{Error, Result};
use crate::limits::{lag_for_beta, LimitLaw, NormalizationParams};
use crate::sampler::{OrderStatSampler, RngStream, WindowSampler, WindowSource};
use crate::stats::{
    cdf_grid, independence_gap_on, joint_distance_on, ks_marginal, Coordinate, EmpiricalJointLaw, GridRow, GridSpec,
    Marginal,
};

/// Column order of `results.csv`.
pub const CSV_HEADER: [&str; 13] = [
    "regime",
    "d",
    "r",
    "gamma",
    "beta",
    "N",
    "M",
    "excluded",
    "ks_upsilon",
    "ks_tau",
    "joint_distance",
    "independence_gap",
    "seconds",
];

const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentRegime {
    Weak,
    Strong,
    FullyMixed,
}

/// How the copies are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Stationary windows with the configured covariance.
    Covariance,
    /// `sqrt(1 - ρ_β) ξ + sqrt(ρ_β) U` with `ρ_β` from the normalization.
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json-lines" => Ok(OutputFormat::JsonLines),
            other => Err(Error::Config(format!("unknown format {other:?}; expected csv or json-lines"))),
        }
    }
}

fn default_epsilon() -> f64 {
    1e-4
}

/// One β-sweep, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: ExperimentRegime,
    pub d: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerKind>,
    pub betas: Vec<f64>,
    pub replications: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Thread count (0 = all cores). Excluded from the echoed config so output
    /// does not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    #[serde(default)]
    pub timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(default)]
    pub grid: GridSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sampler_kind(&self) -> SamplerKind {
        self.sampler.unwrap_or(match self.regime {
            ExperimentRegime::Weak => SamplerKind::Covariance,
            _ => SamplerKind::Mixture,
        })
    }

    /// The covariance family, filling the regime's default when absent.
    pub fn covariance_kind(&self) -> CovarianceKind {
        self.covariance.unwrap_or(match self.regime {
            ExperimentRegime::Weak => CovarianceKind::Independent,
            ExperimentRegime::Strong => CovarianceKind::Strong {
                gamma: self.gamma.unwrap_or(1.0),
                c: 20.0,
            },
            ExperimentRegime::FullyMixed => CovarianceKind::FullyMixed {
                a: 0.5,
                c: std::f64::consts::E,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d == 0 || self.r == 0 || self.r > self.d {
            return fail(format!("need 1 <= r <= d, got r={}, d={}", self.r, self.d));
        }
        match self.regime {
            ExperimentRegime::Strong => {
                if self.r != 1 && self.r != self.d {
                    return fail(format!(
                        "strong dependence supports only the cases r = 1 and r = d (got r={}, d={})",
                        self.r, self.d
                    ));
                }
                match self.gamma {
                    Some(g) if g > 0.0 && g.is_finite() => {}
                    _ => return fail("strong regime needs gamma > 0".into()),
                }
            }
            ExperimentRegime::FullyMixed => {
                if self.d != 1 || self.r != 1 {
                    return fail("fully mixed regime needs d = 1 and r = 1".into());
                }
            }
            ExperimentRegime::Weak => {}
        }
        let expected = match self.regime {
            ExperimentRegime::Weak => DependenceClass::Weak,
            ExperimentRegime::Strong => DependenceClass::Strong,
            ExperimentRegime::FullyMixed => DependenceClass::FullyMixed,
        };
        let kind = self.covariance_kind();
        if kind.class() != expected {
            return fail(format!("covariance {kind:?} does not match regime {:?}", self.regime));
        }
        if let (CovarianceKind::Strong { gamma, .. }, Some(g)) = (kind, self.gamma) {
            if gamma != g {
                return fail(format!("covariance gamma {gamma} differs from experiment gamma {g}"));
            }
        }
        if self.regime == ExperimentRegime::Weak && self.sampler_kind() == SamplerKind::Mixture {
            return fail("the mixture sampler needs a strong or fully mixed regime".into());
        }
        if self.betas.is_empty() {
            return fail("betas must not be empty".into());
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return fail(format!("every beta must lie in (0, 1), got {b}"));
        }
        if self.betas.windows(2).any(|w| w[1] >= w[0]) {
            return fail("betas must be strictly decreasing".into());
        }
        if self.replications < MIN_REPLICATIONS {
            return fail(format!("replications must be at least {MIN_REPLICATIONS}, got {}", self.replications));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        self.grid.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Normalizing constants for one β of the sweep.
    pub fn normalization(&self, beta: f64) -> Result<NormalizationParams<f64>> {
        match self.regime {
            ExperimentRegime::Weak => NormalizationParams::weak(beta, self.d, self.r),
            ExperimentRegime::Strong => NormalizationParams::strong(beta, self.d, self.r, self.gamma.unwrap_or(0.0)),
            ExperimentRegime::FullyMixed => {
                NormalizationParams::fully_mixed(beta, self.covariance_kind().correlation(lag_for_beta(beta)))
            }
        }
    }
}

/// Everything measured for one β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub regime: String,
    pub d: usize,
    pub r: usize,
    pub gamma: f64,
    pub beta: f64,
    pub horizon: usize,
    pub replications: usize,
    pub excluded: usize,
    pub truncated: usize,
    pub no_exceedance: usize,
    pub ks_upsilon: f64,
    pub ks_tau: f64,
    pub joint_distance: f64,
    pub independence_gap: f64,
    pub correlation: f64,
    pub seconds: Option<f64>,
    pub tail_bound: f64,
    pub a_beta_r: f64,
    pub rho_beta: f64,
    pub b_beta: f64,
    pub method: String,
    pub law: String,
    #[serde(skip)]
    pub grid: Vec<GridRow<f64>>,
}

impl CellResult {
    pub fn exclusion_rate(&self) -> f64 {
        self.excluded as f64 / self.replications as f64
    }

    pub fn truncation_rate(&self) -> f64 {
        self.truncated as f64 / self.replications as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

/// Replication streams of cell `k` start at `k · 2^32`, so cells never share draws.
fn stream_for(config: &ExperimentConfig, cell: usize, replication: usize) -> RngStream {
    RngStream::new(config.master_seed, ((cell as u64) << 32) | replication as u64)
}

/// The raw crossing samples of one cell, in replication order.
pub fn simulate_cell(
    config: &ExperimentConfig,
    cell: usize,
    params: &NormalizationParams<f64>,
    half_width: usize,
) -> Result<(Vec<CrossingSample<f64>>, &'static str)> {
    let (source, method) = match config.sampler_kind() {
        SamplerKind::Mixture => (
            WindowSource::Mixture {
                rho: params.rho_beta,
                half_width,
            },
            "mixture",
        ),
        SamplerKind::Covariance => {
            let model = build_model(config.covariance_kind(), (2 * half_width).max(2))?;
            let sampler = WindowSampler::new(&model, half_width)?;
            let method = sampler.method_name();
            (WindowSource::Covariance(sampler), method)
        }
    };
    let sampler = OrderStatSampler::new(source, config.d, config.r)?;
    let samples = (0..config.replications)
        .into_par_iter()
        .map(|m| {
            let window = sampler.sample(stream_for(config, cell, m));
            extract_crossings_on(&window, params.beta, half_width).normalize(params)
        })
        .collect();
    Ok((samples, method))
}

fn run_cell(config: &ExperimentConfig, cell: usize, beta: f64) -> Result<CellResult> {
    let started = Instant::now();
    let params = config.normalization(beta)?;
    let certificate = truncation_horizon(beta, config.epsilon, config.d, config.r)?;
    let half_width = certificate.n.max(1);
    let (samples, method) = simulate_cell(config, cell, &params, half_width)?;

    let law = EmpiricalJointLaw::from_samples(&samples);
    let limit: LimitLaw<f64> = params.limit_law();
    let marginal = Marginal(&limit);
    let truncated = samples.iter().filter(|s| s.is_truncated()).count();
    let no_exceedance = samples.iter().filter(|s| s.no_exceedance).count();
    let grid = cdf_grid(&law, &limit, &config.grid)?;
    let result = CellResult {
        regime: params.regime.label().to_string(),
        d: config.d,
        r: config.r,
        gamma: params.gamma,
        beta,
        horizon: half_width,
        replications: config.replications,
        excluded: law.excluded_count,
        truncated,
        no_exceedance,
        ks_upsilon: ks_marginal(&law, Coordinate::Upsilon, &marginal)?,
        ks_tau: ks_marginal(&law, Coordinate::Tau, &marginal)?,
        joint_distance: joint_distance_on(&law, &limit, &config.grid)?,
        independence_gap: independence_gap_on(&law, &config.grid)?,
        correlation: law.correlation()?,
        seconds: None,
        tail_bound: certificate.tail_bound,
        a_beta_r: params.a_beta_r,
        rho_beta: params.rho_beta,
        b_beta: params.b_beta,
        method: method.to_string(),
        law: limit.name().to_string(),
        grid,
    };
    Ok(CellResult {
        seconds: config.timing.then(|| started.elapsed().as_secs_f64()),
        ..result
    })
}

fn run_cells(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    config
        .betas
        .iter()
        .enumerate()
        .map(|(k, &beta)| {
            run_cell(config, k, beta).map_err(|e| Error::Cell {
                beta,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Runs every β cell. Output depends only on the config, not on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let cells = if config.workers == 0 {
        run_cells(config)?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?
            .install(|| run_cells(config))?
    };
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
    })
}

fn csv_row(cell: &CellResult) -> String {
    let seconds = cell.seconds.map(|s| s.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        cell.regime,
        cell.d,
        cell.r,
        cell.gamma,
        cell.beta,
        cell.horizon,
        cell.replications,
        cell.excluded,
        cell.ks_upsilon,
        cell.ks_tau,
        cell.joint_distance,
        cell.independence_gap,
        seconds
    )
}

fn json_row(cell: &CellResult) -> String {
    let value = serde_json::json!({
        "regime": cell.regime,
        "d": cell.d,
        "r": cell.r,
        "gamma": cell.gamma,
        "beta": cell.beta,
        "N": cell.horizon,
        "M": cell.replications,
        "excluded": cell.excluded,
        "ks_upsilon": cell.ks_upsilon,
        "ks_tau": cell.ks_tau,
        "joint_distance": cell.joint_distance,
        "independence_gap": cell.independence_gap,
        "seconds": cell.seconds,
    });
    value.to_string()
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    cells: &'a [CellResult],
}

/// Writes the per-β table, `summary.toml` and one grid file per β into `dir`.
/// Returns the written paths; rewriting the same result gives the same bytes.
pub fn emit_results(result: &ExperimentResult, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut table = String::new();
    if format == OutputFormat::Csv {
        table.push_str(&CSV_HEADER.join(","));
        table.push('\n');
    }
    for cell in &result.cells {
        table.push_str(&match format {
            OutputFormat::Csv => csv_row(cell),
            OutputFormat::JsonLines => json_row(cell),
        });
        table.push('\n');
    }
    let path = dir.join(format!("results.{}", format.extension()));
    fs::write(&path, table)?;
    written.push(path);

    let summary = toml::to_string(&Summary {
        config: &result.config,
        cells: &result.cells,
    })
    .map_err(|e| Error::Io(e.to_string()))?;
    let path = dir.join("summary.toml");
    fs::write(&path, summary)?;
    written.push(path);

    for (k, cell) in result.cells.iter().enumerate() {
        let mut body = String::new();
        if format == OutputFormat::Csv {
            body.push_str("x,y,empirical,theoretical\n");
        }
        for row in &cell.grid {
            match format {
                OutputFormat::Csv => {
                    let _ = writeln!(body, "{},{},{},{}", row.x, row.y, row.empirical, row.theoretical);
                }
                OutputFormat::JsonLines => {
                    body.push_str(&serde_json::to_string(row).map_err(|e| Error::Io(e.to_string()))?);
                    body.push('\n');
                }
            }
        }
        let path = dir.join(format!("grid_{k:02}_beta_{}.{}", cell.beta, format.extension()));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
