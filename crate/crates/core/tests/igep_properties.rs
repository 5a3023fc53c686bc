mod common;

use igep_core::data::EnsembleForecast;
use igep_core::igep::{
    es_loss, generate, generate_batch, grad_es_loss, predict_scenarios, sample_latents, train, GeneratorParams,
    LatentMode, LatentSpec, LossItem, TrainConfig, TrainedGenerator, TrainingExample,
};
use igep_core::rng::seeded;
use igep_core::scoring::{energy_score, ScoringConfig};
use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

fn fd_check(theta: &GeneratorParams, batch: &[LossItem], lambda: f64) -> f64 {
    let d = theta.output_dim();
    let j = theta.independent_dim();
    let analytic = grad_es_loss(theta, batch, lambda).unwrap().to_flat();
    let flat = theta.to_flat();
    let h = 1e-6;
    let mut num = vec![0.0; flat.len()];
    for k in 0..flat.len() {
        let mut a = flat.clone();
        let mut b = flat.clone();
        a[k] += h;
        b[k] -= h;
        let fa = es_loss(&GeneratorParams::from_flat(d, j, &a).unwrap(), batch, lambda).unwrap();
        let fb = es_loss(&GeneratorParams::from_flat(d, j, &b).unwrap(), batch, lambda).unwrap();
        num[k] = (fa - fb) / (2.0 * h);
    }
    let diff: f64 = analytic.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = num.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

#[test]
fn gradient_matches_finite_differences_on_small_models() {
    let mut rng = seeded(100);
    for _ in 0..20 {
        let d = rng.gen_range(1..5);
        let j = rng.gen_range(0..3);
        let theta = common::random_params(&mut rng, d, j);
        let batch: Vec<LossItem> = (0..rng.gen_range(1..4))
            .map(|_| {
                let spec = LatentSpec::new((0..d).map(|_| rng.gen_range(0.1..2.0)).collect(), j).unwrap();
                LossItem {
                    xbar: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    y: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    latents: sample_latents(&spec, rng.gen_range(2..7), &mut rng),
                }
            })
            .collect();
        let lambda = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.1) };
        let err = fd_check(&theta, &batch, lambda);
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn loss_equals_mean_energy_score_of_generated_scenarios() {
    let mut rng = seeded(8);
    let (d, j) = (6, 3);
    let theta = common::random_params(&mut rng, d, j);
    let spec = LatentSpec::new(vec![0.7; d], j).unwrap();
    let items: Vec<LossItem> = (0..3)
        .map(|_| LossItem {
            xbar: (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            y: (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            latents: sample_latents(&spec, 10, &mut rng),
        })
        .collect();
    let cfg = ScoringConfig::default();
    let by_score: f64 = items
        .iter()
        .map(|it| {
            let scen = generate_batch(&theta, &it.xbar, it.latents.view()).unwrap();
            energy_score(scen.view(), &it.y, &cfg).unwrap()
        })
        .sum::<f64>()
        / 3.0;
    let loss = es_loss(&theta, &items, 0.0).unwrap();
    assert!((loss - by_score).abs() < 1e-12);
}

#[test]
fn initial_generator_passes_the_mean_through() {
    let theta = GeneratorParams::initial(24, 10);
    let xbar: Vec<f64> = (0..24).map(|h| 30.0 + h as f64 * 0.37).collect();
    assert_eq!(generate(&theta, &xbar, &vec![0.0; 34]).unwrap(), xbar);
    // with γ = I the adaptive latents simply shift each dimension
    let z: Vec<f64> = (0..34).map(|k| if k < 24 { 0.5 } else { 0.9 }).collect();
    let y = generate(&theta, &xbar, &z).unwrap();
    assert!(y.iter().zip(&xbar).all(|(a, b)| (a - b - 0.5).abs() < 1e-12));
}

#[test]
fn dimension_mismatch_is_reported() {
    let theta = GeneratorParams::initial(4, 2);
    assert!(generate(&theta, &[0.0; 3], &[0.0; 6]).is_err());
    assert!(generate(&theta, &[0.0; 4], &[0.0; 5]).is_err());
}

/// Synthetic standardized training data whose error scale is proportional
/// to the ensemble half-range.
fn heteroscedastic_examples(n: usize, seed: u64) -> Vec<TrainingExample> {
    let mut rng = seeded(seed);
    let d = 4;
    (0..n)
        .map(|_| {
            let spread = if rng.gen_bool(0.5) { 0.1 } else { 1.0 };
            let base: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = Array2::from_shape_fn((d, 5), |(h, m)| base[h] + spread * (m as f64 - 2.0) / 2.0);
            let common: f64 = rng.sample(StandardNormal);
            let y = (0..d).map(|h| base[h] + spread * (0.8 * common + 0.6 * rng.sample::<f64, _>(StandardNormal))).collect();
            TrainingExample::from_ensemble(x.view(), y).unwrap()
        })
        .collect()
}

#[test]
fn training_is_reproducible_and_reduces_the_loss() {
    let data = heteroscedastic_examples(120, 1);
    let cfg = TrainConfig {
        epochs: 40,
        j_independent: 3,
        seed: 77,
        ..TrainConfig::default()
    };
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.epoch_losses, b.epoch_losses);
    let early: f64 = a.epoch_losses[..5].iter().sum::<f64>() / 5.0;
    let late: f64 = a.epoch_losses[35..].iter().sum::<f64>() / 5.0;
    assert!(late < early, "{early} -> {late}");
    let c = train(&data, &TrainConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn adaptive_latents_track_ensemble_spread() {
    let data = heteroscedastic_examples(300, 2);
    let cfg = TrainConfig {
        epochs: 60,
        j_independent: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let model = train(&data, &cfg).unwrap().params;
    let mut rng = seeded(6);
    let width = |spread: f64, rng: &mut igep_core::rng::Rng| {
        let x = Array2::from_shape_fn((4, 5), |(_, m)| spread * (m as f64 - 2.0) / 2.0);
        let s = igep_core::igep::sample_standardized(&model, x.view(), LatentMode::Adaptive, 4000, rng).unwrap();
        let col = s.column(0).to_vec();
        igep_core::stats::population_std(&col)
    };
    let narrow = width(0.1, &mut rng);
    let wide = width(1.0, &mut rng);
    assert!(wide > 3.0 * narrow, "narrow {narrow}, wide {wide}");

    // the fixed-latent variant cannot tell the two regimes apart
    let ind = train(&data, &TrainConfig { latent: LatentMode::INDEPENDENT, ..cfg }).unwrap().params;
    let x_n = Array2::from_shape_fn((4, 5), |(_, m)| 0.1 * (m as f64 - 2.0) / 2.0);
    let x_w = Array2::from_shape_fn((4, 5), |(_, m)| (m as f64 - 2.0) / 2.0);
    let sn = igep_core::igep::sample_standardized(&ind, x_n.view(), LatentMode::INDEPENDENT, 4000, &mut rng).unwrap();
    let sw = igep_core::igep::sample_standardized(&ind, x_w.view(), LatentMode::INDEPENDENT, 4000, &mut rng).unwrap();
    let r = igep_core::stats::population_std(&sw.column(0).to_vec()) / igep_core::stats::population_std(&sn.column(0).to_vec());
    assert!((r - 1.0).abs() < 0.1, "ratio {r}");
}

#[test]
fn trained_generator_round_trips_through_json() {
    let mut rng = seeded(12);
    let day = chrono::NaiveDate::from_ymd_opt(2016, 5, 1).unwrap();
    let names: Vec<String> = (0..3).map(|m| format!("m{m}")).collect();
    let forecasts: Vec<EnsembleForecast> = (0..40)
        .map(|i| {
            let v = common::random_matrix(&mut rng, 24, 3, 20.0, 60.0);
            EnsembleForecast::new(day + chrono::Days::new(i), v, names.clone()).unwrap()
        })
        .collect();
    let actuals: Vec<Vec<f64>> = forecasts.iter().map(|f| f.mean().iter().map(|v| v + rng.gen_range(-3.0..3.0)).collect()).collect();
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let model = TrainedGenerator::fit(&forecasts, &actuals, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("igep.json");
    model.save(&path).unwrap();
    let back = TrainedGenerator::load(&path).unwrap();
    assert_eq!(back.params, model.params);
    assert_eq!(back.standardizer, model.standardizer);
    assert_eq!(back.config, model.config);
    let a = model.predict(&forecasts[0], 50, &mut seeded(1)).unwrap();
    let b = predict_scenarios(&back.params, &forecasts[0], back.config.latent, 50, &back.standardizer, &mut seeded(1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parameter_vector_has_the_documented_layout() {
    let theta = GeneratorParams::initial(24, 10);
    assert_eq!(theta.n_params(), 864);
    let flat = theta.to_flat();
    assert_eq!(&flat[..24], &[0.0; 24]);
    assert_eq!(&flat[24..48], &[1.0; 24]);
    assert_eq!(flat[48], 1.0);
    assert_eq!(flat[49], 0.0);
    assert_eq!(GeneratorParams::from_flat(24, 10, &flat).unwrap(), theta);
    assert!(GeneratorParams::from_flat(24, 10, &flat[1..]).is_err());
}
