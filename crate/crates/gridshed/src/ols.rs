//! DC optimal load shedding as a convex quadratic program, solved by an
//! in-house primal-dual interior-point method, plus the closed-form
//! dual-to-primal recovery that the decentralized scheme relies on.
//!
//! Variables are `[θ (non-slack), s1 (reserve per flexible bus), s2 (shed
//! per sheddable bus)]` in p.u.; the piecewise cost is handled by the
//! two-segment split with a post-solve normalization that moves mass from
//! the shedding segment back into the reserve band when ties occur.

use crate::net_model::{build_bbus, CaseError, FlexibilityCost, NetworkCase};
use crate::numerics::{DenseMatrix, NumericsError};
use crate::power_flow::{connected_with, Contingency, PfError};
use thiserror::Error;

pub mod qp;

#[derive(Debug, Error)]
pub enum OlsError {
    #[error("contingency '{0}' islands the network")]
    Islanded(String),
    #[error("negative demand {demand} MW at bus {bus}")]
    NegativeDemand { bus: u32, demand: f64 },
    #[error("case has no flexible buses; the balance constraints are rank deficient")]
    NoFlexibility,
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Pf(#[from] PfError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OlsStatus {
    Optimal,
    Infeasible,
    MaxIter,
    Numerical,
}

/// Column bookkeeping for one flexible bus.
#[derive(Debug, Clone)]
struct FlexVar {
    bus_idx: usize,
    /// column of s1 in z, if the reserve band has width
    s1_col: Option<usize>,
    /// column of s2 in z, if the bus has sheddable load
    s2_col: Option<usize>,
    cost: FlexibilityCost,
}

/// Row bookkeeping for one thermally limited branch.
#[derive(Debug, Clone)]
struct LineRows {
    branch_row: usize,
    upper_row: usize,
    lower_row: usize,
}

/// Assembled DC-OLS quadratic program for one (case, contingency, demand
/// sample) triple. The matrix accessors expose the problem definition so
/// callers can recheck KKT conditions without trusting the solver.
pub struct OlsProblem {
    n_bus: usize,
    slack: usize,
    base_mva: f64,
    q: DenseMatrix,
    c: Vec<f64>,
    a_eq: DenseMatrix,
    b_eq: Vec<f64>,
    g: DenseMatrix,
    h: Vec<f64>,
    flex: Vec<FlexVar>,
    lines: Vec<LineRows>,
    n_branches: usize,
    z0: Vec<f64>,
}

impl OlsProblem {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }
    pub fn quadratic(&self) -> &DenseMatrix {
        &self.q
    }
    pub fn linear(&self) -> &[f64] {
        &self.c
    }
    pub fn eq_matrix(&self) -> &DenseMatrix {
        &self.a_eq
    }
    pub fn eq_rhs(&self) -> &[f64] {
        &self.b_eq
    }
    pub fn ineq_matrix(&self) -> &DenseMatrix {
        &self.g
    }
    pub fn ineq_rhs(&self) -> &[f64] {
        &self.h
    }
    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }
}

/// Per-bus result of one OLS solve, in physical units (MW, $/MWh).
#[derive(Debug, Clone)]
pub struct OlsSolution {
    /// Total flexibility used per bus, `s1 + s2`, MW.
    pub p_shed_total: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    /// Dual of the nodal balance, $/MWh, every bus.
    pub alpha: Vec<f64>,
    /// Duals of the (upper, lower) flow limits per branch, $/MWh.
    pub mu_line: Vec<(f64, f64)>,
    pub objective: f64,
    pub status: OlsStatus,
    /// (primal, dual, complementarity) residuals reported by the solver.
    pub kkt_residuals: (f64, f64, f64),
    pub iterations: usize,
    /// Bus angles of the DC optimum, radians (slack = 0).
    pub theta: Vec<f64>,
    /// Raw QP point for independent KKT rechecks: (z, y_eq, λ_ineq).
    pub raw: (Vec<f64>, Vec<f64>, Vec<f64>),
}

/// Assemble the DC-variant OLS problem.
///
/// `p_demand_sample` is in MW per bus; generation stays at the case nominal.
/// Line limits are imposed only on branches with a finite rating; transit
/// buses (no cost entry) carry no flexibility variables.
pub fn build_problem(
    case: &NetworkCase,
    contingency: Option<&Contingency>,
    p_demand_sample: &[f64],
) -> Result<OlsProblem, OlsError> {
    assert_eq!(p_demand_sample.len(), case.n_buses());
    if let Some(c) = contingency {
        c.validate(case)?;
    }
    let outages: Vec<u32> = contingency
        .map(|c| c.outaged_branches.clone())
        .unwrap_or_default();
    if !connected_with(case, &outages) {
        let id = contingency.map(|c| c.id.as_str()).unwrap_or("base");
        return Err(OlsError::Islanded(id.to_string()));
    }
    for (i, &d) in p_demand_sample.iter().enumerate() {
        if d < 0.0 {
            return Err(OlsError::NegativeDemand {
                bus: case.buses[i].id,
                demand: d,
            });
        }
    }

    let n = case.n_buses();
    let base = case.base_mva;
    let slack = case.slack_index();
    let theta_cols = n - 1;
    // θ column for each non-slack bus
    let mut theta_col = vec![usize::MAX; n];
    {
        let mut c = 0;
        for i in 0..n {
            if i != slack {
                theta_col[i] = c;
                c += 1;
            }
        }
    }

    let mut flex: Vec<FlexVar> = Vec::new();
    let mut next_col = theta_cols;
    for cost in &case.costs {
        let bus_idx = case.bus_index(cost.bus)?;
        let has_s1 = cost.reserve_up > cost.reserve_down;
        let has_s2 = cost.sheddable_cap > 0.0;
        if !has_s1 && !has_s2 {
            continue;
        }
        let s1_col = has_s1.then(|| {
            let c = next_col;
            next_col += 1;
            c
        });
        let s2_col = has_s2.then(|| {
            let c = next_col;
            next_col += 1;
            c
        });
        flex.push(FlexVar {
            bus_idx,
            s1_col,
            s2_col,
            cost: cost.clone(),
        });
    }
    if flex.is_empty() {
        return Err(OlsError::NoFlexibility);
    }
    let n_vars = next_col;

    // objective: segment costs in $ as functions of p.u. variables
    let mut q = DenseMatrix::zeros(n_vars, n_vars);
    let mut c_lin = vec![0.0; n_vars];
    for f in &flex {
        if let Some(col) = f.s1_col {
            q.set(col, col, 2.0 * f.cost.a1 * base * base);
        }
        if let Some(col) = f.s2_col {
            q.set(col, col, 2.0 * f.cost.a2 * base * base);
            c_lin[col] = (2.0 * f.cost.a2 * f.cost.reserve_up + f.cost.b2) * base;
        }
    }

    // nodal balance: B θ − s1 − s2 = p  (one row per bus, slack θ omitted)
    let (b_mat, k_mat) = build_bbus(case, &outages);
    let mut a_eq = DenseMatrix::zeros(n, n_vars);
    let mut b_eq = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != slack && b_mat.get(i, j) != 0.0 {
                a_eq.set(i, theta_col[j], b_mat.get(i, j));
            }
        }
        let bus = &case.buses[i];
        b_eq[i] = (case.gen_at_bus(bus.id) - p_demand_sample[i]) / base;
    }
    for f in &flex {
        if let Some(col) = f.s1_col {
            a_eq.set(f.bus_idx, col, -1.0);
        }
        if let Some(col) = f.s2_col {
            a_eq.set(f.bus_idx, col, -1.0);
        }
    }

    // inequalities: variable boxes then |K θ| ≤ limit for rated branches
    let mut g_rows: Vec<Vec<f64>> = Vec::new();
    let mut h_vec: Vec<f64> = Vec::new();
    let push_bound = |col: usize, sign: f64, bound: f64, n_vars: usize,
                          g_rows: &mut Vec<Vec<f64>>, h_vec: &mut Vec<f64>| {
        let mut row = vec![0.0; n_vars];
        row[col] = sign;
        g_rows.push(row);
        h_vec.push(bound);
    };
    for f in &flex {
        if let Some(col) = f.s1_col {
            push_bound(col, 1.0, f.cost.reserve_up / base, n_vars, &mut g_rows, &mut h_vec);
            push_bound(col, -1.0, -f.cost.reserve_down / base, n_vars, &mut g_rows, &mut h_vec);
        }
        if let Some(col) = f.s2_col {
            push_bound(col, 1.0, f.cost.sheddable_cap / base, n_vars, &mut g_rows, &mut h_vec);
            push_bound(col, -1.0, 0.0, n_vars, &mut g_rows, &mut h_vec);
        }
    }
    let mut lines = Vec::new();
    for (row, br) in case.branches.iter().enumerate() {
        if !br.in_service || outages.contains(&br.id) {
            continue;
        }
        let Some(limit) = br.flow_limit else { continue };
        let limit_pu = limit / base;
        let mut upper = vec![0.0; n_vars];
        let mut lower = vec![0.0; n_vars];
        for j in 0..n {
            let kv = k_mat.get(row, j);
            if j != slack && kv != 0.0 {
                upper[theta_col[j]] = kv;
                lower[theta_col[j]] = -kv;
            }
        }
        let upper_row = g_rows.len();
        g_rows.push(upper);
        h_vec.push(limit_pu);
        let lower_row = g_rows.len();
        g_rows.push(lower);
        h_vec.push(limit_pu);
        lines.push(LineRows {
            branch_row: row,
            upper_row,
            lower_row,
        });
    }
    let g = DenseMatrix::from_rows(&g_rows);

    // strictly interior start: θ = 0, s at box midpoints
    let mut z0 = vec![0.0; n_vars];
    for f in &flex {
        if let Some(col) = f.s1_col {
            z0[col] = 0.5 * (f.cost.reserve_down + f.cost.reserve_up) / base;
        }
        if let Some(col) = f.s2_col {
            z0[col] = 0.5 * f.cost.sheddable_cap / base;
        }
    }

    Ok(OlsProblem {
        n_bus: n,
        slack,
        base_mva: base,
        q,
        c: c_lin,
        a_eq,
        b_eq,
        g,
        h: h_vec,
        flex,
        lines,
        n_branches: case.n_branches(),
        z0,
    })
}

/// Solve the assembled problem to KKT residuals ≤ 1e-9 (scaled) and map the
/// QP point back to per-bus physical quantities. Infeasibility and iteration
/// exhaustion are reported through `status`, not as errors.
pub fn solve(problem: &OlsProblem) -> Result<OlsSolution, OlsError> {
    let qp_problem = qp::QpProblem {
        q: problem.q.clone(),
        c: problem.c.clone(),
        a_eq: problem.a_eq.clone(),
        b_eq: problem.b_eq.clone(),
        g: problem.g.clone(),
        h: problem.h.clone(),
    };
    let result = qp::solve_qp(&qp_problem, &problem.z0, &qp::QpParams::default())?;

    let n = problem.n_bus;
    let base = problem.base_mva;
    let status = match result.status {
        qp::QpStatus::Optimal => OlsStatus::Optimal,
        qp::QpStatus::Infeasible => OlsStatus::Infeasible,
        qp::QpStatus::MaxIter => OlsStatus::MaxIter,
        qp::QpStatus::Numerical => OlsStatus::Numerical,
    };

    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for f in &problem.flex {
        let s1_pu = f.s1_col.map(|c| result.x[c]).unwrap_or(0.0);
        let s2_pu = f.s2_col.map(|c| result.x[c]).unwrap_or(0.0);
        // normalization: fill the reserve band before attributing shedding;
        // the total is preserved and the objective cannot increase
        let total = s1_pu + s2_pu;
        let r_down = f.cost.reserve_down / base;
        let r_up = f.cost.reserve_up / base;
        let s1_norm = total.clamp(r_down, r_up);
        s1[f.bus_idx] = s1_norm * base;
        s2[f.bus_idx] = (total - s1_norm) * base;
    }
    let p_shed_total: Vec<f64> = (0..n).map(|i| s1[i] + s2[i]).collect();

    // α: equality duals, sign fixed so that marginal cost = α at interior
    // optima; $/p.u. → $/MWh on the system base
    let alpha: Vec<f64> = result.y.iter().map(|&y| y / base).collect();

    let mut mu_line = vec![(0.0, 0.0); problem.n_branches];
    for lr in &problem.lines {
        mu_line[lr.branch_row] = (
            result.lam[lr.upper_row] / base,
            result.lam[lr.lower_row] / base,
        );
    }

    let mut theta = vec![0.0; n];
    {
        let mut col = 0;
        for (i, t) in theta.iter_mut().enumerate() {
            if i != problem.slack {
                *t = result.x[col];
                col += 1;
            }
        }
    }

    let objective = qp::objective_value(&qp_problem, &result.x);

    Ok(OlsSolution {
        p_shed_total,
        s1,
        s2,
        alpha,
        mu_line,
        objective,
        status,
        kkt_residuals: result.residuals,
        iterations: result.iterations,
        theta,
        raw: (result.x, result.y, result.lam),
    })
}

/// Closed-form optimal flexibility for a given marginal cost, MW.
///
/// If `alpha` exceeds the shedding marginal at the segment break, the
/// shedding branch `(α − b2)/(2a2)` clamped to `[r_up, r_up + shed_cap]`
/// applies; otherwise the reserve branch `α/(2a1)` clamped to
/// `[r_down, r_up]`.
pub fn recover_shedding(alpha: f64, cost: &FlexibilityCost) -> f64 {
    let break_marginal = 2.0 * cost.a2 * cost.reserve_up + cost.b2;
    if alpha > break_marginal {
        ((alpha - cost.b2) / (2.0 * cost.a2))
            .clamp(cost.reserve_up, cost.reserve_up + cost.sheddable_cap)
    } else {
        (alpha / (2.0 * cost.a1)).clamp(cost.reserve_down, cost.reserve_up)
    }
}

/// A bus is dual-degenerate when its α sits on the segment-break kink, where
/// the closed-form recovery is set-valued.
pub fn is_degenerate(alpha: f64, cost: &FlexibilityCost, tol: f64) -> bool {
    (alpha - (2.0 * cost.a2 * cost.reserve_up + cost.b2)).abs() <= tol
}

/// Split a bus's total flexibility into (reserve_used, load_shed) MW.
/// Shedding active implies the reserve band is exhausted.
pub fn split_decision(solution: &OlsSolution, case: &NetworkCase, bus_id: u32) -> (f64, f64) {
    let idx = case.bus_index(bus_id).expect("bus exists");
    let cost = match case.cost_for_bus(bus_id) {
        Some(c) => c,
        None => return (0.0, 0.0),
    };
    let s2 = solution.s2[idx];
    if s2 > 1e-6 {
        (cost.reserve_up, s2)
    } else {
        (solution.s1[idx], 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net_model::parse_case;
    use crate::test_cases::CASE6;

    /// Exhaustive grid search over (s1, s2) per bus for tiny cases: for a
    /// fixed shedding pattern the network feasibility is checked by solving
    /// DC flow with the adjusted injections and testing line limits.
    pub(crate) fn grid_search_oracle(
        case: &NetworkCase,
        contingency: Option<&Contingency>,
        p_demand: &[f64],
        step_pu: f64,
    ) -> Option<f64> {
        use crate::power_flow::solve_dc;
        let base = case.base_mva;
        let flex: Vec<(usize, &FlexibilityCost)> = case
            .costs
            .iter()
            .map(|c| (case.bus_index(c.bus).unwrap(), c))
            .collect();
        // enumerate total per-bus flexibility on a grid; the split into
        // (s1, s2) follows the cheaper-first rule
        let grids: Vec<Vec<f64>> = flex
            .iter()
            .map(|(_, c)| {
                let lo = c.reserve_down / base;
                let hi = (c.reserve_up + c.sheddable_cap) / base;
                let steps = ((hi - lo) / step_pu).round() as usize;
                (0..=steps).map(|k| lo + k as f64 * step_pu).collect()
            })
            .collect();
        let p_nom: Vec<f64> = case
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (case.gen_at_bus(b.id) - p_demand[i]) / base)
            .collect();
        let mut best: Option<f64> = None;
        let mut idx = vec![0usize; flex.len()];
        loop {
            // candidate total flexibility
            let mut p = p_nom.clone();
            let mut cost_total = 0.0;
            for (fi, (bus_idx, c)) in flex.iter().enumerate() {
                let s_pu = grids[fi][idx[fi]];
                p[*bus_idx] += s_pu;
                cost_total += c.total(s_pu * base);
            }
            // feasibility: system balance + line limits under DC flow
            let imbalance: f64 = p.iter().sum();
            if imbalance.abs() < step_pu {
                // absorb the grid-quantization residue at the slack bus
                let slack = case.slack_index();
                p[slack] -= imbalance;
                if let Ok((_, flows)) = solve_dc(case, &p, contingency) {
                    let ok = case.branches.iter().enumerate().all(|(r, br)| {
                        br.flow_limit
                            .map(|lim| flows[r].abs() <= lim / base + 1e-9)
                            .unwrap_or(true)
                    });
                    if ok {
                        best = Some(best.map_or(cost_total, |b: f64| b.min(cost_total)));
                    }
                }
            }
            // odometer increment
            let mut k = 0;
            loop {
                if k == flex.len() {
                    return best;
                }
                idx[k] += 1;
                if idx[k] < grids[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn three_bus_congested() -> NetworkCase {
        // slack generator feeds a load bus over two paths, one of them
        // tightly limited; demand exceeds what the limits let through, so
        // shedding must happen at the load bus
        parse_case(
            "baseMVA 100
bus
1 3 0 0 1.0 0.95 1.05 -0.6 0.6
2 1 0 0 1.0 0.95 1.05 -0.6 0.6
3 1 100 20 1.0 0.95 1.05 -0.6 0.6
branch
1 1 2 0 0.1 0 50 1
2 2 3 0 0.1 0 50 1
3 1 3 0 0.1 0 40 1
gen
1 100 20 0 200 -100 100
flexcost
% bus a1 a2 b2 c2 r_down r_up shed_cap
1 0.01 0.04 0 -108 -60 60 0
3 0.02 0.08 0 -6 0 10 90
",
        )
        .unwrap()
    }

    #[test]
    fn unstressed_case_sheds_nothing() {
        let case = parse_case(CASE6).unwrap();
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        let problem = build_problem(&case, None, &pd).unwrap();
        let sol = solve(&problem).unwrap();
        assert_eq!(sol.status, OlsStatus::Optimal);
        for (i, &p) in sol.p_shed_total.iter().enumerate() {
            assert!(p.abs() < 1e-3, "bus {i} shed {p}");
        }
        assert!(sol.objective.abs() < 1e-4, "objective {}", sol.objective);
        // no congestion: duals are uniform across buses
        let a0 = sol.alpha[0];
        for &a in &sol.alpha {
            assert!((a - a0).abs() < 1e-5, "alpha spread {a} vs {a0}");
        }
    }

    #[test]
    fn islanding_contingency_is_error() {
        let case = three_bus_congested();
        let c = Contingency::new("cut", vec![2, 3]);
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        assert!(matches!(
            build_problem(&case, Some(&c), &pd),
            Err(OlsError::Islanded(_))
        ));
    }

    #[test]
    fn negative_demand_rejected() {
        let case = three_bus_congested();
        let pd = vec![0.0, 0.0, -5.0];
        assert!(matches!(
            build_problem(&case, None, &pd),
            Err(OlsError::NegativeDemand { bus: 3, .. })
        ));
    }

    #[test]
    fn congested_three_bus_sheds_downstream() {
        let case = three_bus_congested();
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        let problem = build_problem(&case, None, &pd).unwrap();
        let sol = solve(&problem).unwrap();
        assert_eq!(sol.status, OlsStatus::Optimal);
        // limits allow at most 90 MW into bus 3 (50 via the path, 40 direct)
        assert!(
            sol.p_shed_total[2] > 5.0,
            "expected shedding at bus 3, got {}",
            sol.p_shed_total[2]
        );
        // KKT hand-check: α at the shedding bus sits on the s2 marginal
        let cost = case.cost_for_bus(3).unwrap();
        let expected = 2.0 * cost.a2 * (cost.reserve_up + sol.s2[2]) + cost.b2;
        assert!(
            (sol.alpha[2] - expected).abs() < 1e-4,
            "alpha {} vs marginal {expected}",
            sol.alpha[2]
        );
    }

    #[test]
    fn three_bus_matches_grid_search() {
        let case = three_bus_congested();
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        let problem = build_problem(&case, None, &pd).unwrap();
        let sol = solve(&problem).unwrap();
        let oracle = grid_search_oracle(&case, None, &pd, 1e-3).unwrap();
        let rel = (sol.objective - oracle).abs() / oracle.abs().max(1.0);
        assert!(rel < 2e-3, "solver {} vs oracle {oracle}", sol.objective);
        assert!(
            sol.objective <= oracle + 1e-6,
            "grid search cannot beat the exact optimum"
        );
    }

    #[test]
    fn dual_recovery_consistency() {
        let case = three_bus_congested();
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        let problem = build_problem(&case, None, &pd).unwrap();
        let sol = solve(&problem).unwrap();
        for cost in &case.costs {
            let i = case.bus_index(cost.bus).unwrap();
            if is_degenerate(sol.alpha[i], cost, 1e-6) {
                continue;
            }
            let rec = recover_shedding(sol.alpha[i], cost);
            let err = (rec - sol.p_shed_total[i]).abs() / case.base_mva;
            assert!(err <= 1e-4, "bus {} recovery error {err} p.u.", cost.bus);
        }
    }

    #[test]
    fn recover_shedding_closed_form() {
        let cost = FlexibilityCost {
            bus: 1,
            a1: 0.02,
            a2: 0.08,
            b2: 0.0,
            c2: -0.06 * 25.0,
            reserve_down: -5.0,
            reserve_up: 5.0,
            sheddable_cap: 50.0,
            q_reserve_down: 0.0,
            q_reserve_up: 0.0,
        };
        // unstressed stationary point
        assert_eq!(recover_shedding(0.0, &cost), 0.0);
        // far above the full-shed marginal: clamps to r_up + cap
        assert_eq!(recover_shedding(1e6, &cost), 55.0);
        // interior of the reserve band: α = 2·a1·x
        let x = 3.0;
        let alpha = 2.0 * cost.a1 * x;
        assert!((recover_shedding(alpha, &cost) - x).abs() < 1e-12);
        // brute-force minimization of c(p) − αp on a fine grid agrees
        let mut best_p = 0.0;
        let mut best_v = f64::INFINITY;
        let mut p = cost.reserve_down;
        while p <= cost.reserve_up + cost.sheddable_cap {
            let v = cost.total(p) - alpha * p;
            if v < best_v {
                best_v = v;
                best_p = p;
            }
            p += 1e-4;
        }
        assert!((recover_shedding(alpha, &cost) - best_p).abs() < 1e-3);
    }

    #[test]
    fn split_decision_rules() {
        let case = three_bus_congested();
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        let problem = build_problem(&case, None, &pd).unwrap();
        let mut sol = solve(&problem).unwrap();
        // reserve-only bus
        sol.s1[0] = 3.0;
        sol.s2[0] = 0.0;
        assert_eq!(split_decision(&sol, &case, 1), (3.0, 0.0));
        // shedding active at bus 3: reserves pinned at the band edge
        let cost = case.cost_for_bus(3).unwrap();
        assert!(sol.s2[2] > 1e-6);
        let (res, shed) = split_decision(&sol, &case, 3);
        assert_eq!(res, cost.reserve_up);
        assert!((shed - sol.s2[2]).abs() < 1e-12);
        // bus without a cost entry has nothing to split
        assert_eq!(split_decision(&sol, &case, 2), (0.0, 0.0));
    }

    #[test]
    fn segment_ordering_after_normalization() {
        let case = three_bus_congested();
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        let problem = build_problem(&case, None, &pd).unwrap();
        let sol = solve(&problem).unwrap();
        for cost in &case.costs {
            let i = case.bus_index(cost.bus).unwrap();
            if sol.s2[i] > 1e-6 {
                assert!(
                    (sol.s1[i] - cost.reserve_up).abs() < 1e-6,
                    "bus {}: s2 active but s1 {} below band edge {}",
                    cost.bus,
                    sol.s1[i],
                    cost.reserve_up
                );
            }
        }
    }

    #[test]
    fn relaxing_limits_never_costs_more() {
        let case = three_bus_congested();
        let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
        let tight = solve(&build_problem(&case, None, &pd).unwrap()).unwrap();
        let mut relaxed_case = case.clone();
        for br in relaxed_case.branches.iter_mut() {
            br.flow_limit = br.flow_limit.map(|l| l * 2.0);
        }
        let relaxed = solve(&build_problem(&relaxed_case, None, &pd).unwrap()).unwrap();
        assert!(relaxed.objective <= tight.objective + 1e-6);
    }
}
