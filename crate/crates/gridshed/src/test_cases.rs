//! Bundled case texts used by unit tests, integration tests, and examples.

#![doc(hidden)]

/// Hand-authored 6-bus system with explicit flexibility costs.
pub const CASE6: &str = include_str!("../data/case6.case");

/// 3-bus ring with equal reactances, used by DC flow and LODF tests.
pub const RING3: &str = "\
baseMVA 100
bus
1 3 0 0 1.0 0.95 1.05 -0.5 0.5
2 1 100 20 1.0 0.95 1.05 -0.5 0.5
3 1 0 0 1.0 0.95 1.05 -0.5 0.5
branch
1 1 2 0 0.1 0 0 1
2 2 3 0 0.1 0 0 1
3 1 3 0 0.1 0 0 1
gen
1 100 20 0 200 -100 100
";
