//! Load a case file, print its structure, and show the canonical
//! round-trip serialization.
//!
//! Usage: `cargo run --example parse_case [-- path/to/file.case]`

use gridshed::net_model::{parse_case, serialize_case, BusKind};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/case6.case").to_string()
    });
    let text = std::fs::read_to_string(&path).expect("case file readable");
    let case = parse_case(&text).expect("case parses");

    println!("{path}");
    println!(
        "  {} buses / {} branches / {} generators, base {} MVA",
        case.n_buses(),
        case.n_branches(),
        case.generators.len(),
        case.base_mva
    );
    let slack = case.buses[case.slack_index()].id;
    let load: f64 = case.buses.iter().map(|b| b.p_demand).sum();
    println!("  slack bus {slack}, total load {load:.1} MW");

    println!("  buses:");
    for b in case.buses.iter().take(8) {
        let kind = match b.kind {
            BusKind::Slack => "slack",
            BusKind::Pv => "pv",
            BusKind::Pq => "pq",
        };
        let incident = &case.adjacency[case.bus_index(b.id).unwrap()];
        println!(
            "    bus {:>3} [{kind:>5}] Pd={:>6.1} MW, {} incident branches",
            b.id,
            b.p_demand,
            incident.len()
        );
    }
    if case.n_buses() > 8 {
        println!("    ... {} more", case.n_buses() - 8);
    }

    // flexibility costs: explicit rows plus synthesized defaults
    println!("  flexibility entries: {}", case.costs.len());
    if let Some(c) = case.costs.first() {
        println!(
            "    e.g. bus {}: reserve [{}, {}] MW, sheddable {} MW, a1={} a2={}",
            c.bus, c.reserve_down, c.reserve_up, c.sheddable_cap, c.a1, c.a2
        );
    }

    // serialization is bit-exact: parse(serialize(c)) == c
    let round = parse_case(&serialize_case(&case)).expect("round trip parses");
    assert_eq!(case, round);
    println!("  round-trip serialization: exact");
}
