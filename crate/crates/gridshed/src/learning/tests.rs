use super::*;
use crate::net_model::parse_case;
use crate::test_cases::CASE6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn case6_setup() -> (NetworkCase, Vec<Contingency>) {
    let case = parse_case(CASE6).unwrap();
    let contingencies = vec![
        Contingency::new("c1", vec![1]),
        Contingency::new("c7", vec![7]),
    ];
    (case, contingencies)
}

#[test]
fn feature_layout_length_and_outage_zeros() {
    let (case, contingencies) = case6_setup();
    let cfg = GenConfig {
        n_per_contingency: 2,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&case, &contingencies, &[3, 5], &cfg).unwrap();
    // bus 3 touches branches 2, 4, 6 (degree 3); bus 5 touches 5, 7
    assert_eq!(ds.samples[0].features[0].len(), feature_len(3));
    assert_eq!(ds.samples[0].features[1].len(), feature_len(2));
    assert_eq!(
        feature_names(&case, 3).unwrap().len(),
        feature_len(3)
    );
    // contingency c7 outages branch 7, incident to bus 5: its post-block
    // entries must be exactly zero while the pre-block entries are not
    let row = ds
        .samples
        .iter()
        .find(|r| r.contingency == "c7")
        .expect("c7 rows present");
    let names = feature_names(&case, 5).unwrap();
    let x5 = &row.features[1];
    for (j, name) in names.iter().enumerate() {
        if name.contains("post") && name.ends_with("br7") {
            assert_eq!(x5[j], 0.0, "{name}");
        }
        if name.contains("pre") && name.ends_with("br7") {
            assert_ne!(x5[j], 0.0, "{name}");
        }
    }
}

#[test]
fn dataset_is_seed_deterministic() {
    let (case, contingencies) = case6_setup();
    let cfg = GenConfig {
        n_per_contingency: 4,
        master_seed: 77,
        ..GenConfig::default()
    };
    let a = generate_dataset(&case, &contingencies, &[3, 4], &cfg).unwrap();
    let b = generate_dataset(&case, &contingencies, &[3, 4], &cfg).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.samples, b.samples);
    let cfg2 = GenConfig {
        master_seed: 78,
        ..cfg
    };
    let c = generate_dataset(&case, &contingencies, &[3, 4], &cfg2).unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn degenerate_perturb_range_repeats_samples() {
    let (case, contingencies) = case6_setup();
    let cfg = GenConfig {
        n_per_contingency: 3,
        perturb_lo: 1.0,
        perturb_hi: 1.0,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&case, &contingencies, &[3], &cfg).unwrap();
    let c1: Vec<&SampleRow> = ds.samples.iter().filter(|r| r.contingency == "c1").collect();
    assert_eq!(c1.len(), 3);
    for r in &c1[1..] {
        assert_eq!(r.features, c1[0].features);
        assert_eq!(r.labels, c1[0].labels);
    }
}

#[test]
fn islanding_contingency_rejected() {
    let (case, _) = case6_setup();
    // branches 2 and 3 are the only ties between the generators and loads
    let bad = vec![Contingency::new("cut", vec![2, 3])];
    assert!(matches!(
        generate_dataset(&case, &bad, &[3], &GenConfig::default()),
        Err(LearnError::Islanding(_))
    ));
}

#[test]
fn dataset_csv_round_trips_bit_exactly() {
    let (case, contingencies) = case6_setup();
    let cfg = GenConfig {
        n_per_contingency: 3,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&case, &contingencies, &[4], &cfg).unwrap();
    let csv = ds.to_csv(4).unwrap();
    let (bus, samples) = parse_dataset_csv(&csv).unwrap();
    assert_eq!(bus, 4);
    assert_eq!(samples, ds.bus_samples(4));
    // re-render from parsed rows: identical bytes
    let ds2 = Dataset {
        buses: vec![4],
        feature_names: vec![feature_names(&case, 4).unwrap()],
        layout_version: LAYOUT_VERSION,
        samples: samples
            .iter()
            .map(|s| SampleRow {
                contingency: s.contingency.clone(),
                sample_index: 0,
                seed: s.seed,
                features: vec![s.features.clone()],
                labels: vec![s.label],
            })
            .collect(),
        failures: Vec::new(),
    };
    assert_eq!(ds2.to_csv(4).unwrap(), csv);
}

fn synthetic_linear_samples(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = [1.5, -2.0, 0.7, 3.1, -0.3];
    (0..n)
        .map(|k| {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: f64 = 10.0 + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            LabeledSample {
                bus: 1,
                features: x,
                label: y,
                contingency: format!("c{}", k % 2),
                seed: k as u64,
            }
        })
        .collect()
}

#[test]
fn constant_labels_learned_to_machine_noise() {
    let mut samples = synthetic_linear_samples(200, 5);
    for s in &mut samples {
        s.label = 42.0;
    }
    let cfg = TrainConfig {
        hidden: vec![8],
        epochs: 400,
        learning_rate: 1e-2,
        patience: 400,
        ..TrainConfig::default()
    };
    let model = train_bus_model(&samples, &cfg).unwrap();
    assert!(model.meta.test_mse <= 1e-6, "test mse {}", model.meta.test_mse);
}

#[test]
fn linear_labels_reach_low_mape() {
    let samples = synthetic_linear_samples(2000, 9);
    let cfg = TrainConfig {
        hidden: vec![32, 16],
        epochs: 200,
        patience: 40,
        ..TrainConfig::default()
    };
    let model = train_bus_model(&samples, &cfg).unwrap();
    assert!(
        model.meta.mape <= 0.005,
        "mape {} test mse {}",
        model.meta.mape,
        model.meta.test_mse
    );
}

#[test]
fn too_few_samples_rejected() {
    let samples = synthetic_linear_samples(20, 1);
    assert!(matches!(
        train_bus_model(&samples, &TrainConfig::default()),
        Err(LearnError::TooFewSamples { .. })
    ));
}

#[test]
fn training_is_seed_deterministic() {
    let samples = synthetic_linear_samples(300, 13);
    let cfg = TrainConfig {
        hidden: vec![12],
        epochs: 30,
        ..TrainConfig::default()
    };
    let a = train_bus_model(&samples, &cfg).unwrap();
    let b = train_bus_model(&samples, &cfg).unwrap();
    assert_eq!(a.meta.test_mse, b.meta.test_mse);
    assert_eq!(model_to_text(&a), model_to_text(&b));
}

#[test]
fn predict_zero_weight_model_returns_bias() {
    let samples = synthetic_linear_samples(100, 3);
    let cfg = TrainConfig {
        hidden: vec![4],
        epochs: 1,
        ..TrainConfig::default()
    };
    let mut model = train_bus_model(&samples, &cfg).unwrap();
    let last = model.net.n_layers() - 1;
    for l in 0..model.net.n_layers() {
        let (r, c) = (model.net.weights[l].rows(), model.net.weights[l].cols());
        for i in 0..r {
            for j in 0..c {
                model.net.weights[l].set(i, j, 0.0);
            }
        }
    }
    model.net.biases[last][0] = 17.5;
    let x = vec![0.3; 5];
    assert_eq!(predict(&model, &x).unwrap(), 17.5);
}

#[test]
fn predict_checks_feature_layout() {
    let samples = synthetic_linear_samples(100, 3);
    let cfg = TrainConfig {
        hidden: vec![4],
        epochs: 1,
        ..TrainConfig::default()
    };
    let model = train_bus_model(&samples, &cfg).unwrap();
    assert!(matches!(
        predict(&model, &[1.0, 2.0]),
        Err(LearnError::LayoutMismatch {
            expected: 5,
            got: 2
        })
    ));
}

#[test]
fn predict_on_training_sample_within_error_band() {
    let samples = synthetic_linear_samples(500, 21);
    let cfg = TrainConfig {
        hidden: vec![16],
        epochs: 120,
        ..TrainConfig::default()
    };
    let model = train_bus_model(&samples, &cfg).unwrap();
    let band = (model.meta.test_mse.sqrt() * 10.0).max(0.2);
    let s = &samples[0];
    let pred = predict(&model, &s.features).unwrap();
    assert!(
        (pred - s.label).abs() <= band,
        "pred {pred} label {} band {band}",
        s.label
    );
}

#[test]
fn model_text_round_trip_is_exact() {
    let samples = synthetic_linear_samples(120, 31);
    let cfg = TrainConfig {
        hidden: vec![6, 4],
        epochs: 10,
        ..TrainConfig::default()
    };
    let model = train_bus_model(&samples, &cfg).unwrap();
    let text = model_to_text(&model);
    let back = model_from_text(&text).unwrap();
    assert_eq!(model_to_text(&back), text);
    let x = &samples[7].features;
    assert_eq!(predict(&model, x).unwrap(), predict(&back, x).unwrap());
}

#[test]
fn normalizer_survives_reload() {
    let samples = synthetic_linear_samples(120, 37);
    let cfg = TrainConfig {
        hidden: vec![6],
        epochs: 5,
        ..TrainConfig::default()
    };
    let model = train_bus_model(&samples, &cfg).unwrap();
    let back = model_from_text(&model_to_text(&model)).unwrap();
    for (a, b) in model.feat_mean.iter().zip(&back.feat_mean) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    for (a, b) in model.feat_std.iter().zip(&back.feat_std) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn single_class_classifier_is_trivially_perfect() {
    let mut samples = synthetic_linear_samples(120, 41);
    for s in &mut samples {
        s.contingency = "only".to_string();
    }
    let cfg = TrainConfig {
        hidden: vec![6],
        epochs: 10,
        ..TrainConfig::default()
    };
    let (model, acc) = train_classifier(&samples, &cfg).unwrap();
    assert_eq!(acc, 1.0);
    assert_eq!(model.classes, vec!["only".to_string()]);
}

#[test]
fn identical_classes_are_chance_level() {
    // class labels independent of the features: held-out accuracy on the
    // pair can only hover around a coin flip
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let samples: Vec<LabeledSample> = (0..600)
        .map(|k| LabeledSample {
            bus: 1,
            features: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            label: 0.0,
            contingency: if k % 2 == 0 { "a".into() } else { "b".into() },
            seed: k as u64,
        })
        .collect();
    let cfg = TrainConfig {
        hidden: vec![8],
        epochs: 40,
        ..TrainConfig::default()
    };
    let (_, acc) = train_classifier(&samples, &cfg).unwrap();
    assert!(
        (0.3..=0.7).contains(&acc),
        "indistinguishable classes gave accuracy {acc}"
    );
}

#[test]
fn classifier_separates_real_contingencies() {
    let (case, contingencies) = case6_setup();
    let cfg_gen = GenConfig {
        n_per_contingency: 60,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&case, &contingencies, &[4], &cfg_gen).unwrap();
    let samples = ds.bus_samples(4);
    let cfg = TrainConfig {
        hidden: vec![16],
        epochs: 60,
        ..TrainConfig::default()
    };
    let (model, acc) = train_classifier(&samples, &cfg).unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
    let s = &samples[0];
    let predicted = classify(&model, &s.features).unwrap();
    assert!(model.classes.contains(&predicted));
}
