//! The full decentralized learning loop on the 6-bus case: sample
//! perturbed operating points, train one α regressor per monitored bus,
//! then recover the shedding decision from the predicted dual alone.

use gridshed::learning::{
    generate_dataset, model_from_text, model_to_text, predict, train_bus_model, GenConfig,
    TrainConfig,
};
use gridshed::net_model::parse_case;
use gridshed::ols::recover_shedding;
use gridshed::power_flow::Contingency;
use gridshed::test_cases::CASE6;

fn main() {
    let case = parse_case(CASE6).expect("bundled case parses");
    let contingencies = vec![
        Contingency::new("c1", vec![1]),
        Contingency::new("c7", vec![7]),
    ];
    let buses = [3u32, 4];

    let gen_cfg = GenConfig {
        n_per_contingency: 150,
        master_seed: 7,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&case, &contingencies, &buses, &gen_cfg).expect("sampling runs");
    println!(
        "dataset: {} samples x {} buses, hash {}",
        ds.samples.len(),
        ds.buses.len(),
        &ds.hash()[..16]
    );

    let train_cfg = TrainConfig {
        hidden: vec![24, 12],
        epochs: 150,
        seed: 7,
        ..TrainConfig::default()
    };
    for &bus in &buses {
        let samples = ds.bus_samples(bus);
        let model = train_bus_model(&samples, &train_cfg).expect("training converges");
        println!(
            "bus {bus}: {} epochs, test mse {:.2e}, relative |alpha| error {:.2}%",
            model.meta.epochs_run,
            model.meta.test_mse,
            model.meta.mape * 100.0
        );

        // models round-trip through their text format exactly
        let reloaded = model_from_text(&model_to_text(&model)).expect("model parses");
        let s = &samples[0];
        let alpha_hat = predict(&reloaded, &s.features).expect("layout matches");
        let cost = case.cost_for_bus(bus).expect("monitored bus is costed");
        println!(
            "  sample 0: alpha {:+.4} (true {:+.4}) -> shed decision {:+.3} MW",
            alpha_hat,
            s.label,
            recover_shedding(alpha_hat, cost)
        );
    }
}
