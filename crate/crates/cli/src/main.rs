use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crossing_core::acceptance::{run_criterion, CRITERIA};
use crossing_core::covariance::{build_model, CovarianceKind};
use crossing_core::crossing::truncation_horizon;
use crossing_core::limits::{self, lag_for_beta, maxima_normalization};
use crossing_core::numerics::{bivariate_orthant, comparison_bound_sum, mills_tail};
use crossing_core::{emit_results, run_experiment, ComparisonInstance, Error, ExperimentConfig, NormalizationParams, OutputFormat};

#[derive(Parser)]
#[command(name = "crossing", version, about = "First crossing point and last exit time of Gaussian order-statistics sequences")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Fill the `seconds` column with wall-clock time (breaks byte-identical reruns).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::JsonLines => OutputFormat::JsonLines,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Weak,
    Strong,
    FullyMixed,
}

#[derive(Subcommand)]
enum Command {
    /// Print normalizing constants, thresholds and limit CDF values (no sampling).
    Limits {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, value_enum, default_value = "weak")]
        regime: RegimeArg,
        /// Required for the strong regime.
        #[arg(long)]
        gamma: Option<f64>,
        /// Fully mixed only: ρ_β; defaults to r_[1/β] of the family (ln(n + e))^{-1/2}.
        #[arg(long)]
        rho: Option<f64>,
        /// Points at which to tabulate u_β(x) and the CDFs.
        #[arg(long, value_delimiter = ',', default_values_t = vec![-2.0, -1.0, 0.0, 1.0, 2.0])]
        x: Vec<f64>,
    },
    /// Run a β-sweep and write results, summary and grid files.
    Simulate,
    /// Run acceptance criteria and print one PASS/FAIL line each.
    Verify {
        /// Criteria to run (default: all).
        #[arg(long, value_delimiter = ',')]
        criterion: Vec<u8>,
    },
    /// Print reference values computed by independent routes.
    Oracle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_validation() { 2 } else { 3 })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Limits {
            beta,
            r,
            d,
            regime,
            gamma,
            rho,
            x,
        } => {
            print_limits(*beta, *r, *d, *regime, *gamma, *rho, x)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate => simulate(cli),
        Command::Verify { criterion } => verify(cli, criterion),
        Command::Oracle => {
            print_oracles()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_limits(
    beta: f64,
    r: usize,
    d: usize,
    regime: RegimeArg,
    gamma: Option<f64>,
    rho: Option<f64>,
    xs: &[f64],
) -> Result<(), Error> {
    let params = match regime {
        RegimeArg::Weak => NormalizationParams::weak(beta, d, r)?,
        RegimeArg::Strong => {
            let gamma = gamma.ok_or_else(|| Error::InvalidParameter("--gamma is required for the strong regime".into()))?;
            NormalizationParams::strong(beta, d, r, gamma)?
        }
        RegimeArg::FullyMixed => {
            let rho = rho.unwrap_or_else(|| {
                CovarianceKind::FullyMixed {
                    a: 0.5,
                    c: std::f64::consts::E,
                }
                .correlation(lag_for_beta(beta))
            });
            NormalizationParams::fully_mixed(beta, rho)?
        }
    };
    let law = params.limit_law();
    println!("regime = {}", params.regime);
    println!("beta = {beta}");
    println!("d = {}", params.d);
    println!("r = {}", params.r);
    println!("gamma = {}", params.gamma);
    println!("a(beta, r) = {:.10}", params.a_beta_r);
    println!("rho_beta = {:.10}", params.rho_beta);
    println!("b(beta, rho_beta, r) = {:.10}", params.b_beta);
    println!("limit law = {}", law.name());
    println!();
    println!("x,u_beta(x),marginal_cdf(x),joint_cdf(x,x)");
    for &x in xs {
        println!(
            "{x},{:.6},{:.10},{:.10}",
            params.u_of_x(x),
            law.marginal_cdf(x)?,
            law.joint_cdf(x, x)?
        );
    }
    Ok(())
}

fn simulate(cli: &Cli) -> Result<ExitCode, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("simulate needs --config PATH".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    config.timing |= cli.timing;
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let format = cli.format.map(OutputFormat::from).or(config.format).unwrap_or(OutputFormat::Csv);

    let result = run_experiment(&config)?;
    for cell in &result.cells {
        eprintln!(
            "beta={} N={} excluded={} ks_upsilon={:.4} ks_tau={:.4} joint_distance={:.4} independence_gap={:.4}",
            cell.beta, cell.horizon, cell.excluded, cell.ks_upsilon, cell.ks_tau, cell.joint_distance, cell.independence_gap
        );
    }
    for path in emit_results(&result, &out, format)? {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(cli: &Cli, selected: &[u8]) -> Result<ExitCode, Error> {
    let ids: Vec<u8> = if selected.is_empty() { CRITERIA.to_vec() } else { selected.to_vec() };
    let run = || -> Result<bool, Error> {
        let mut all = true;
        for &id in &ids {
            let report = run_criterion(id)?;
            println!("{report}");
            for line in &report.details {
                println!("    {line}");
            }
            all &= report.passed;
        }
        Ok(all)
    };
    let passed = match cli.workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)?,
        _ => run()?,
    };
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn print_oracles() -> Result<(), Error> {
    let weak = NormalizationParams::weak(0.01, 1, 1)?;
    println!("a(0.01, r=1, d=1) = {:.16}", weak.a_beta_r);
    println!("a(0.01, r=1, d=2) = {:.16}", limits::a_of_beta(0.01, 1, 2)?);
    println!("u_0.01(1) [r=d=1] = {:.14}", weak.u_of_x(1.0));

    let strong = build_model(CovarianceKind::Strong { gamma: 1.0, c: 20.0 }, 100)?;
    println!("strong gamma=1 c=20: r_80 = {:.17}", strong.correlation(80));
    println!("strong gamma=1 c=20: r_80 ln 80 = {:.17}", strong.berman_product(80));
    let far = build_model(CovarianceKind::Strong { gamma: 2.0, c: 20.0 }, 10_000)?;
    println!("strong gamma=2 c=20: r_n ln n at n=1e4 = {:.10}", far.regime_diagnostic().last);
    let geometric = build_model(CovarianceKind::Geometric { q: 0.5 }, 60)?;
    println!("geometric q=0.5: r_50 ln 50 = {:e}", geometric.berman_product(50));
    let mixed = build_model(
        CovarianceKind::FullyMixed {
            a: 0.5,
            c: std::f64::consts::E,
        },
        10,
    )?;
    let t = mixed.table();
    println!("fully mixed a=0.5 c=e: second difference at n=1 = {:.13}", t[2] - 2.0 * t[1] + t[0]);
    println!("fully mixed a=0.5 c=e: second difference at n=2 = {:.13}", t[3] - 2.0 * t[2] + t[1]);

    let (a_n, b_n) = maxima_normalization(100.0, 1, 1)?;
    println!("maxima n=100 r=d=1: a_n = {a_n:.16}, b_n = {b_n:.16}");

    let cert = truncation_horizon(0.1, 1e-4, 1, 1)?;
    println!("horizon beta=0.1 eps=1e-4 d=r=1: N = {}, tail = {:e}", cert.n, cert.tail_bound);

    println!("orthant u=v=0 delta=0.5 = {:.15}", bivariate_orthant(0.0, 0.0, 0.5)?);
    println!("mills_tail(8) = {:e}", mills_tail(8.0));
    let instance = ComparisonInstance::new(1, 1, vec![1.0, 1.0], vec![vec![1.0, 0.3, 0.3, 1.0]], vec![vec![1.0, 0.0, 0.0, 1.0]])?;
    println!("comparison bound example = {:.17}", comparison_bound_sum(&instance)?);
    for beta in [1e-2, 1e-3, 1e-4] {
        println!(
            "independent exact -ln P at x=0, d=r=1, beta={beta:e}: {:.10}",
            limits::independent_case_exact(0.0, beta, 1, 1)?
        );
    }
    Ok(())
}
