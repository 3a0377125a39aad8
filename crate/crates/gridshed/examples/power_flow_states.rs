//! Pre- and post-contingency AC power flow on the bundled 6-bus case,
//! plus the droop-style frequency proxy that feeds the feature extractor.

use gridshed::net_model::parse_case;
use gridshed::power_flow::{
    check_connectivity, frequency_proxy, solve_ac, solve_ac_loads, AcOptions, Contingency,
};
use gridshed::test_cases::CASE6;

fn main() {
    let case = parse_case(CASE6).expect("bundled case parses");

    let pre = solve_ac(&case, None).expect("base case solves");
    println!(
        "pre-contingency:  {} iterations, max mismatch {:.2e}",
        pre.iterations, pre.max_mismatch
    );
    for (i, b) in case.buses.iter().enumerate() {
        println!(
            "  bus {}: |V| = {:.4}, angle = {:+.4} rad",
            b.id, pre.v_mag[i], pre.v_ang[i]
        );
    }

    // outage of branch 1; the warm start from the pre state cuts iterations
    let c = Contingency::new("branch-1-out", vec![1]);
    assert!(check_connectivity(&case, Some(&c)));
    let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
    let qd: Vec<f64> = case.buses.iter().map(|b| b.q_demand).collect();
    let post = solve_ac_loads(&case, &pd, &qd, Some(&c), &AcOptions::default(), Some(&pre))
        .expect("contingency solves");
    println!(
        "post-contingency: {} iterations, max mismatch {:.2e}",
        post.iterations, post.max_mismatch
    );

    let base = case.base_mva;
    println!("branch active flows (from side, MW):");
    for (br, (f_pre, f_post)) in case
        .branches
        .iter()
        .zip(pre.branch_flows.iter().zip(&post.branch_flows))
    {
        println!(
            "  branch {} ({}->{}): {:+8.2} -> {:+8.2}",
            br.id,
            br.from_bus,
            br.to_bus,
            f_pre.p_from * base,
            f_post.p_from * base
        );
    }

    let omega = frequency_proxy(&pre, &post, 60.0, 0.5).expect("both states converged");
    println!(
        "generation {:.2} -> {:.2} MW, frequency proxy {omega:.5} Hz",
        pre.total_generation() * base,
        post.total_generation() * base
    );

    // cutting both ties between the generator and load sides must island
    let island = Contingency::new("split", vec![2, 3]);
    assert!(!check_connectivity(&case, Some(&island)));
    println!("outage set {{2, 3}} islands the network (rejected upstream)");
}
