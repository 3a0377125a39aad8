//! Regenerates `data/case118_synthetic.case`, the bundled 118-bus study
//! network.
//!
//! The topology is a 117-bus ring with 68 chords plus one degree-1 spur bus
//! (bus 118), giving 186 branches. Nineteen generator buses are spread
//! around the ring; every other bus carries load. Branch limits are set to
//! 1.3x the nominal DC flow (with a 40 MW floor), so the base case is
//! comfortably feasible while heavy-line outages create congestion that
//! forces load shedding.
//!
//! Bus 34 is the monitored load bus for the identifiability and learning
//! studies: it is given three extra chords so its neighborhood is genuinely
//! meshed. Bus 118 hangs off bus 60 on a single branch, a deliberately
//! degenerate measurement point.
//!
//! Everything is driven by a fixed seed; rerunning the example rewrites the
//! same bytes.

use gridshed::net_model::{parse_case, serialize_case, NetworkCase};
use gridshed::ols;
use gridshed::power_flow::{check_connectivity, solve_ac, solve_dc, Contingency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt::Write as _;

const SEED: u64 = 118_2026;
const RING: u32 = 117;
const N_CHORDS: usize = 68;
const GEN_BUSES: [u32; 19] = [
    1, 7, 13, 20, 26, 32, 40, 46, 52, 59, 65, 72, 78, 85, 91, 98, 104, 110, 116,
];
const SPUR_BUS: u32 = 118;
const SPUR_ANCHOR: u32 = 60;
const MONITORED: u32 = 34;

fn round(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn build_unlimited(rng: &mut ChaCha8Rng) -> String {
    // loads first so the dispatch can balance them exactly
    let mut loads = vec![0.0f64; SPUR_BUS as usize + 1];
    for bus in 1..=SPUR_BUS {
        if !GEN_BUSES.contains(&bus) {
            loads[bus as usize] = round(rng.gen_range(15.0..45.0), 1);
        }
    }
    let total: f64 = loads.iter().sum();
    let pv_out = round(total / GEN_BUSES.len() as f64, 1);
    let slack_out = total - pv_out * (GEN_BUSES.len() - 1) as f64;

    let mut text = String::from("baseMVA 100\nbus\n");
    for bus in 1..=SPUR_BUS {
        let (kind, vset) = if bus == 1 {
            (3, 1.02)
        } else if GEN_BUSES.contains(&bus) {
            (2, 1.01)
        } else {
            (1, 1.0)
        };
        let pd = loads[bus as usize];
        let qd = round(0.2 * pd, 1);
        let _ = writeln!(text, "{bus} {kind} {pd} {qd} {vset} 0.94 1.06 -1 1");
    }

    text.push_str("branch\n");
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    fn add(
        text: &mut String,
        edges: &mut BTreeSet<(u32, u32)>,
        id: u32,
        a: u32,
        b: u32,
        x: f64,
    ) {
        let key = (a.min(b), a.max(b));
        assert!(edges.insert(key), "duplicate edge {key:?}");
        let r = round(x / 10.0, 5);
        let _ = writeln!(text, "{id} {a} {b} {r} {x} 0 0 1");
    }
    let mut id = 0;
    for a in 1..=RING {
        id += 1;
        let b = a % RING + 1;
        let x = round(rng.gen_range(0.03..0.10), 4);
        add(&mut text, &mut edges, id, a, b, x);
    }
    id += 1;
    add(&mut text, &mut edges, id, SPUR_ANCHOR, SPUR_BUS, 0.06);
    // three chords pinned to the monitored bus, then random fill
    for far in [21u32, 44, 81] {
        id += 1;
        let x = round(rng.gen_range(0.05..0.15), 4);
        add(&mut text, &mut edges, id, MONITORED, far, x);
    }
    let mut placed = 3;
    while placed < N_CHORDS {
        let a = rng.gen_range(1..=RING);
        let k = rng.gen_range(4..=30u32);
        let b = (a - 1 + k) % RING + 1;
        let key = (a.min(b), a.max(b));
        if a == b || edges.contains(&key) {
            continue;
        }
        id += 1;
        let x = round(rng.gen_range(0.05..0.15), 4);
        add(&mut text, &mut edges, id, a, b, x);
        placed += 1;
    }

    text.push_str("gen\n");
    for &bus in &GEN_BUSES {
        let p = if bus == 1 { slack_out } else { pv_out };
        let pmax = round(1.3 * p, 1);
        let _ = writeln!(text, "{bus} {p} 0 0 {pmax} -300 300");
    }
    // generators get an explicit, wide redispatch band: post-contingency
    // shedding must be matched by generation backing off, so the default
    // 15%-of-headroom band would render heavy-line outages infeasible
    text.push_str("flexcost\n");
    for &bus in &GEN_BUSES {
        let p = if bus == 1 { slack_out } else { pv_out };
        let r_up = round(0.15 * p, 1);
        let r_down = -round(0.55 * p, 1);
        let (a1, a2) = (0.015, 0.06);
        let c2 = (a1 - a2) * r_up * r_up;
        let _ = writeln!(text, "{bus} {a1} {a2} 0 {c2} {r_down} {r_up} 0");
    }
    text
}

/// Branch ids ranked by nominal DC |flow|, heaviest first.
fn rank_by_flow(case: &NetworkCase) -> Vec<(u32, f64)> {
    let p: Vec<f64> = case
        .buses
        .iter()
        .map(|b| (case.gen_at_bus(b.id) - b.p_demand) / case.base_mva)
        .collect();
    let (_, flows) = solve_dc(case, &p, None).expect("base DC solves");
    let mut ranked: Vec<(u32, f64)> = case
        .branches
        .iter()
        .zip(&flows)
        .map(|(br, f)| (br.id, f.abs() * case.base_mva))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    ranked
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let draft = parse_case(&build_unlimited(&mut rng)).expect("draft case parses");
    assert_eq!(draft.n_buses(), 118);
    assert_eq!(draft.n_branches(), 186);

    // freeze limits at 1.25x nominal DC loading, 25 MW floor
    let ranked = rank_by_flow(&draft);
    let mut text = serialize_case(&draft);
    for (branch_id, mw) in &ranked {
        let br = &draft.branches[draft.branch_index(*branch_id).unwrap() as usize];
        let limit = round((1.3 * mw).max(40.0), 1);
        let old = format!(
            "{} {} {} {} {} {} 0 1",
            br.id, br.from_bus, br.to_bus, br.r, br.x, br.b_shunt
        );
        let new = format!(
            "{} {} {} {} {} {} {limit} 1",
            br.id, br.from_bus, br.to_bus, br.r, br.x, br.b_shunt
        );
        text = text.replacen(&format!("{old}\n"), &format!("{new}\n"), 1);
    }
    let case = parse_case(&text).expect("final case parses");
    let out = serialize_case(&case);

    // ---- diagnostics ----
    let ac = solve_ac(&case, None).expect("AC base runs");
    println!(
        "AC base: converged={} iters={} max_mismatch={:.2e}",
        ac.converged, ac.iterations, ac.max_mismatch
    );
    assert!(ac.converged);
    let vmin = ac.v_mag.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("min |V| = {vmin:.4}");

    let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
    let base_prob = ols::build_problem(&case, None, &pd).expect("base OLS builds");
    let base_sol = ols::solve(&base_prob).expect("base OLS solves");
    let base_shed: f64 = base_sol.s2.iter().sum();
    println!("base OLS: {:?}, total shed {base_shed:.3} MW", base_sol.status);

    println!("heaviest branches (nominal MW):");
    let ranked = rank_by_flow(&case);
    let mut singles = Vec::new();
    for (id, mw) in &ranked {
        if singles.len() == 5 {
            break;
        }
        let c = Contingency::new(format!("s{id}"), vec![*id]);
        if check_connectivity(&case, Some(&c)) {
            println!("  branch {id}: {mw:.1} MW");
            singles.push(*id);
        }
    }
    let mut picks: Vec<Contingency> = singles[..3]
        .iter()
        .map(|&b| Contingency::new(format!("s{b}"), vec![b]))
        .collect();
    for &second in &singles[1..3] {
        let c = Contingency::new(format!("d{}-{second}", singles[0]), vec![singles[0], second]);
        if check_connectivity(&case, Some(&c)) {
            picks.push(c);
        }
    }
    for c in &picks {
        let prob = ols::build_problem(&case, Some(c), &pd).expect("OLS builds");
        let sol = ols::solve(&prob).expect("OLS runs");
        let shed: f64 = sol.s2.iter().sum();
        let reserve: f64 = sol.s1.iter().map(|v| v.abs()).sum();
        println!(
            "contingency {}: {:?}, shed {shed:.2} MW, |reserve| {reserve:.2} MW, {} iters",
            c.id, sol.status, sol.iterations
        );
    }

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/case118_synthetic.case");
    std::fs::write(path, &out).expect("write case file");
    println!("wrote {path} ({} bytes)", out.len());
}
