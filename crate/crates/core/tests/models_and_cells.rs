use crossing_core::acceptance::weak_config;
use crossing_core::covariance::{durbin_min_pivot, CovarianceKind};
use crossing_core::experiment::simulate_cell;
use crossing_core::stats::{Cdf, Ecdf};
use crossing_core::{build_model, truncation_horizon, ExperimentConfig};

#[test]
fn builtin_models_admit_a_factorization() {
    let kinds = [
        CovarianceKind::Geometric { q: 0.7 },
        CovarianceKind::Polynomial { p: 1.5 },
        CovarianceKind::Strong { gamma: 1.0, c: 20.0 },
        CovarianceKind::Strong { gamma: 3.0, c: 20.0 },
        CovarianceKind::FullyMixed {
            a: 0.5,
            c: std::f64::consts::E,
        },
    ];
    for kind in kinds {
        for n in [16usize, 1 << 10, 1 << 14] {
            let model = build_model(kind, n).unwrap();
            let table = &model.table()[..=n];
            let pivot = durbin_min_pivot(table).unwrap();
            assert!(pivot > -1e-10, "{kind:?} at N={n}: pivot {pivot}");
            assert!(model.certificate().is_some());
        }
    }
}

fn two_sample_ks(a: Vec<f64>, b: Vec<f64>) -> f64 {
    let points: Vec<f64> = a.iter().chain(&b).copied().collect();
    let (fa, fb) = (Ecdf::new(a).unwrap(), Ecdf::new(b).unwrap());
    points
        .into_iter()
        .map(|x| (fa.cdf(x).unwrap() - fb.cdf(x).unwrap()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn crossing_coordinates_share_a_marginal_in_the_weak_regime() {
    let mut config = weak_config(vec![1e-3], 314);
    config.replications = 2000;
    let beta = config.betas[0];
    let params = config.normalization(beta).unwrap();
    let horizon = truncation_horizon(beta, config.epsilon, config.d, config.r).unwrap().n;
    let (samples, _) = simulate_cell(&config, 0, &params, horizon).unwrap();
    let (ups, taus): (Vec<f64>, Vec<f64>) = samples.iter().filter_map(|s| s.normalized).unzip();
    let (n, m) = (ups.len() as f64, taus.len() as f64);
    // c(α) = sqrt(-ln(α/2) / 2) at α = 10⁻³
    let critical = (-(5e-4f64).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt();
    let d = two_sample_ks(ups, taus);
    assert!(d < critical, "two-sample KS {d} >= {critical}");
}

#[test]
fn config_round_trips_through_toml() {
    let text = r#"
regime = "strong"
d = 3
r = 3
gamma = 1.5
betas = [0.01, 0.001]
replications = 500
master_seed = 42
format = "json-lines"

[grid]
lo = -2.0
hi = 2.0
points = 9
"#;
    let config = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(config.epsilon, 1e-4);
    let again = ExperimentConfig::from_toml(&config.to_toml()).unwrap();
    assert_eq!(config, again);
    assert!(ExperimentConfig::from_toml(&format!("{text}\nunknown = 1\n")).is_err());
}

#[test]
fn horizon_grows_as_beta_shrinks() {
    let mut last = 0;
    for beta in [0.1, 0.03, 0.01, 0.003, 0.001] {
        let cert = truncation_horizon(beta, 1e-4, 2, 1).unwrap();
        assert!(cert.n > last);
        assert!(cert.tail_bound <= 1e-4);
        last = cert.n;
    }
}
