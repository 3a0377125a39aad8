//! Contingency identification as classification: one softmax network per
//! bus maps local measurements to the contingency id that produced them.

use gridshed::learning::{classify, generate_dataset, train_classifier, GenConfig, TrainConfig};
use gridshed::net_model::parse_case;
use gridshed::power_flow::Contingency;
use gridshed::test_cases::CASE6;

fn main() {
    let case = parse_case(CASE6).expect("bundled case parses");
    let contingencies = vec![
        Contingency::new("c1", vec![1]),
        Contingency::new("c6", vec![6]),
        Contingency::new("c7", vec![7]),
    ];
    let bus = 4u32;

    let gen_cfg = GenConfig {
        n_per_contingency: 200,
        master_seed: 11,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&case, &contingencies, &[bus], &gen_cfg).expect("sampling runs");
    let samples = ds.bus_samples(bus);

    let train_cfg = TrainConfig {
        hidden: vec![16, 8],
        epochs: 80,
        seed: 11,
        ..TrainConfig::default()
    };
    let (model, accuracy) = train_classifier(&samples, &train_cfg).expect("training converges");
    println!(
        "bus {bus}: classes {:?}, held-out accuracy {:.1}%",
        model.classes,
        accuracy * 100.0
    );

    // confusion counts over the whole dataset
    let mut confusion = vec![vec![0usize; model.classes.len()]; model.classes.len()];
    for s in &samples {
        let truth = model.classes.iter().position(|c| *c == s.contingency).unwrap();
        let pred = classify(&model, &s.features).expect("layout matches");
        let pred = model.classes.iter().position(|c| *c == pred).unwrap();
        confusion[truth][pred] += 1;
    }
    println!("confusion (rows = truth):");
    for (i, row) in confusion.iter().enumerate() {
        println!("  {:>3}: {row:?}", model.classes[i]);
    }
}
