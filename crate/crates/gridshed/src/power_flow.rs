//! Pre/post-contingency steady states: AC Newton-Raphson, DC linear flow,
//! topology checks, and the droop-style frequency proxy.

use crate::net_model::{
    build_admittance_outaged, build_bbus, BusKind, CaseError, NetworkCase,
};
use crate::numerics::{lu_solve, DenseMatrix, NumericsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfError {
    #[error("contingency '{0}' islands the network")]
    Islanded(String),
    #[error("contingency '{id}' is invalid: {msg}")]
    BadContingency { id: String, msg: String },
    #[error("pre-contingency generation is zero; frequency proxy undefined")]
    ZeroPreGeneration,
    #[error("power flow state not converged")]
    NotConverged,
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A set of simultaneous branch outages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    pub id: String,
    pub outaged_branches: Vec<u32>,
}

impl Contingency {
    pub fn new(id: impl Into<String>, outaged_branches: Vec<u32>) -> Self {
        Contingency {
            id: id.into(),
            outaged_branches,
        }
    }

    /// Branches must exist, be in service, and the set must be non-empty.
    pub fn validate(&self, case: &NetworkCase) -> Result<(), PfError> {
        if self.outaged_branches.is_empty() {
            return Err(PfError::BadContingency {
                id: self.id.clone(),
                msg: "empty outage set".into(),
            });
        }
        for &id in &self.outaged_branches {
            let idx = case.branch_index(id).map_err(|_| PfError::BadContingency {
                id: self.id.clone(),
                msg: format!("branch {id} does not exist"),
            })?;
            if !case.branches[idx].in_service {
                return Err(PfError::BadContingency {
                    id: self.id.clone(),
                    msg: format!("branch {id} is already out of service"),
                });
            }
        }
        Ok(())
    }
}

fn outage_slice(contingency: Option<&Contingency>) -> &[u32] {
    contingency.map(|c| c.outaged_branches.as_slice()).unwrap_or(&[])
}

/// True iff the in-service-minus-outaged branch graph connects every bus.
pub fn check_connectivity(case: &NetworkCase, contingency: Option<&Contingency>) -> bool {
    connected_with(case, outage_slice(contingency))
}

pub(crate) fn connected_with(case: &NetworkCase, outages: &[u32]) -> bool {
    let n = case.n_buses();
    if n == 0 {
        return true;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for br in &case.branches {
        if !br.in_service || outages.contains(&br.id) {
            continue;
        }
        let f = case.bus_index(br.from_bus).unwrap();
        let t = case.bus_index(br.to_bus).unwrap();
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Per-branch flows in p.u. on the system base.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BranchFlow {
    pub p_from: f64,
    pub q_from: f64,
    pub p_to: f64,
    pub q_to: f64,
}

/// Converged (or not) AC operating point, all quantities in p.u.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowState {
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    /// Per-bus generation after the slack absorbed the imbalance.
    pub p_gen: Vec<f64>,
    pub branch_flows: Vec<BranchFlow>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowState {
    pub fn total_generation(&self) -> f64 {
        self.p_gen.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct AcOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    /// PV→PQ switching at generator reactive limits; off by default.
    pub enforce_q_limits: bool,
}

impl Default for AcOptions {
    fn default() -> Self {
        AcOptions {
            tolerance: 1e-8,
            max_iter: 20,
            enforce_q_limits: false,
        }
    }
}

/// Newton-Raphson AC power flow at the case's nominal demands.
///
/// Non-convergence is not an error: the state comes back with
/// `converged == false` and callers drop the sample.
pub fn solve_ac(
    case: &NetworkCase,
    contingency: Option<&Contingency>,
) -> Result<PowerFlowState, PfError> {
    let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
    let qd: Vec<f64> = case.buses.iter().map(|b| b.q_demand).collect();
    solve_ac_loads(case, &pd, &qd, contingency, &AcOptions::default(), None)
}

/// AC power flow with explicit per-bus demands (MW / MVAr) and an optional
/// warm start (post-contingency solves start from the pre-contingency state).
pub fn solve_ac_loads(
    case: &NetworkCase,
    p_demand_mw: &[f64],
    q_demand_mvar: &[f64],
    contingency: Option<&Contingency>,
    opts: &AcOptions,
    warm: Option<&PowerFlowState>,
) -> Result<PowerFlowState, PfError> {
    if let Some(c) = contingency {
        c.validate(case)?;
        if !check_connectivity(case, contingency) {
            return Err(PfError::Islanded(c.id.clone()));
        }
    }
    let n = case.n_buses();
    assert_eq!(p_demand_mw.len(), n);
    assert_eq!(q_demand_mvar.len(), n);
    let outages = outage_slice(contingency);
    let y = build_admittance_outaged(case, outages);
    let base = case.base_mva;
    let slack = case.slack_index();

    // scheduled injections, p.u.
    let p_spec: Vec<f64> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (case.gen_at_bus(b.id) - p_demand_mw[i]) / base)
        .collect();
    let mut q_spec: Vec<f64> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (case.q_gen_at_bus(b.id) - q_demand_mvar[i]) / base)
        .collect();

    let mut kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
    let mut v: Vec<f64> = match warm {
        Some(w) => w.v_mag.clone(),
        None => case
            .buses
            .iter()
            .map(|b| match b.kind {
                BusKind::Pq => 1.0,
                _ => b.v_setpoint,
            })
            .collect(),
    };
    // PV/slack magnitudes are pinned to their setpoints even on warm starts
    for (i, b) in case.buses.iter().enumerate() {
        if kinds[i] != BusKind::Pq {
            v[i] = b.v_setpoint;
        }
    }
    let mut ang: Vec<f64> = match warm {
        Some(w) => w.v_ang.clone(),
        None => vec![0.0; n],
    };
    ang[slack] = 0.0;

    let q_rounds = if opts.enforce_q_limits { 5 } else { 1 };
    let mut iterations = 0;
    let mut converged = false;
    let mut max_mis = f64::INFINITY;
    for round in 0..q_rounds {
        let (ok, iters, mis) =
            newton_iterations(case, &y, &kinds, &p_spec, &q_spec, &mut v, &mut ang, opts)?;
        iterations += iters;
        converged = ok;
        max_mis = mis;
        if !ok || !opts.enforce_q_limits || round + 1 == q_rounds {
            break;
        }
        // PV buses violating aggregated generator Q limits become PQ at the limit
        let mut switched = false;
        for i in 0..n {
            if kinds[i] != BusKind::Pv {
                continue;
            }
            let (q_min, q_max): (f64, f64) = case
                .generators
                .iter()
                .filter(|g| g.bus == case.buses[i].id)
                .fold((0.0, 0.0), |(lo, hi), g| (lo + g.q_min, hi + g.q_max));
            let q_calc = calc_injection(&y, &v, &ang, i).1;
            let q_gen = q_calc * base + q_demand_mvar[i];
            if q_gen > q_max + 1e-6 {
                kinds[i] = BusKind::Pq;
                q_spec[i] = (q_max - q_demand_mvar[i]) / base;
                switched = true;
            } else if q_gen < q_min - 1e-6 {
                kinds[i] = BusKind::Pq;
                q_spec[i] = (q_min - q_demand_mvar[i]) / base;
                switched = true;
            }
        }
        if !switched {
            break;
        }
    }

    // realized injections and branch flows from the final voltage profile
    let mut p_inj = vec![0.0; n];
    let mut q_inj = vec![0.0; n];
    for i in 0..n {
        let (p, q) = calc_injection(&y, &v, &ang, i);
        p_inj[i] = p;
        q_inj[i] = q;
    }
    let p_gen: Vec<f64> = (0..n).map(|i| p_inj[i] + p_demand_mw[i] / base).collect();
    let branch_flows = branch_flows(case, outages, &v, &ang);

    Ok(PowerFlowState {
        v_mag: v,
        v_ang: ang,
        p_inj,
        q_inj,
        p_gen,
        branch_flows,
        converged,
        iterations,
        max_mismatch: max_mis,
    })
}

#[allow(clippy::too_many_arguments)]
fn newton_iterations(
    case: &NetworkCase,
    y: &crate::net_model::Admittance,
    kinds: &[BusKind],
    p_spec: &[f64],
    q_spec: &[f64],
    v: &mut [f64],
    ang: &mut [f64],
    opts: &AcOptions,
) -> Result<(bool, usize, f64), PfError> {
    let n = case.n_buses();
    let p_idx: Vec<usize> = (0..n).filter(|&i| kinds[i] != BusKind::Slack).collect();
    let q_idx: Vec<usize> = (0..n).filter(|&i| kinds[i] == BusKind::Pq).collect();
    let m = p_idx.len() + q_idx.len();
    if m == 0 {
        return Ok((true, 0, 0.0));
    }

    for iter in 0..=opts.max_iter {
        let mut mismatch = vec![0.0; m];
        let mut max_mis = 0.0_f64;
        for (r, &i) in p_idx.iter().enumerate() {
            let (p, _) = calc_injection(y, v, ang, i);
            mismatch[r] = p_spec[i] - p;
            max_mis = max_mis.max(mismatch[r].abs());
        }
        for (r, &i) in q_idx.iter().enumerate() {
            let (_, q) = calc_injection(y, v, ang, i);
            mismatch[p_idx.len() + r] = q_spec[i] - q;
            max_mis = max_mis.max(mismatch[p_idx.len() + r].abs());
        }
        if max_mis <= opts.tolerance {
            return Ok((true, iter, max_mis));
        }
        if iter == opts.max_iter {
            return Ok((false, iter, max_mis));
        }

        let jac = jacobian(y, kinds, v, ang, &p_idx, &q_idx);
        let dx = match lu_solve(&jac, &DenseMatrix::column(&mismatch)) {
            Ok(x) => x,
            Err(NumericsError::Singular { .. }) => return Ok((false, iter, max_mis)),
            Err(e) => return Err(e.into()),
        };
        for (r, &i) in p_idx.iter().enumerate() {
            ang[i] += dx.get(r, 0);
        }
        for (r, &i) in q_idx.iter().enumerate() {
            v[i] += dx.get(p_idx.len() + r, 0);
        }
    }
    unreachable!()
}

/// Net complex injection (p, q) at bus `i` for the current voltage profile.
fn calc_injection(
    y: &crate::net_model::Admittance,
    v: &[f64],
    ang: &[f64],
    i: usize,
) -> (f64, f64) {
    let n = v.len();
    let mut p = 0.0;
    let mut q = 0.0;
    for j in 0..n {
        let g = y.g.get(i, j);
        let b = y.b.get(i, j);
        if g == 0.0 && b == 0.0 {
            continue;
        }
        let th = ang[i] - ang[j];
        let (s, c) = th.sin_cos();
        p += v[i] * v[j] * (g * c + b * s);
        q += v[i] * v[j] * (g * s - b * c);
    }
    (p, q)
}

fn jacobian(
    y: &crate::net_model::Admittance,
    kinds: &[BusKind],
    v: &[f64],
    ang: &[f64],
    p_idx: &[usize],
    q_idx: &[usize],
) -> DenseMatrix {
    let _ = kinds;
    let np = p_idx.len();
    let nq = q_idx.len();
    let mut jac = DenseMatrix::zeros(np + nq, np + nq);
    // P and Q at the mismatch buses, reused for the diagonal terms
    let pq: Vec<(f64, f64)> = (0..v.len()).map(|i| calc_injection(y, v, ang, i)).collect();
    for (r, &i) in p_idx.iter().enumerate() {
        let (pi, qi) = pq[i];
        for (c, &j) in p_idx.iter().enumerate() {
            let val = if i == j {
                -qi - y.b.get(i, i) * v[i] * v[i]
            } else {
                let th = ang[i] - ang[j];
                let (s, co) = th.sin_cos();
                v[i] * v[j] * (y.g.get(i, j) * s - y.b.get(i, j) * co)
            };
            jac.set(r, c, val);
        }
        for (c, &j) in q_idx.iter().enumerate() {
            let val = if i == j {
                pi / v[i] + y.g.get(i, i) * v[i]
            } else {
                let th = ang[i] - ang[j];
                let (s, co) = th.sin_cos();
                v[i] * (y.g.get(i, j) * co + y.b.get(i, j) * s)
            };
            jac.set(r, np + c, val);
        }
    }
    for (r, &i) in q_idx.iter().enumerate() {
        let (pi, qi) = pq[i];
        for (c, &j) in p_idx.iter().enumerate() {
            let val = if i == j {
                pi - y.g.get(i, i) * v[i] * v[i]
            } else {
                let th = ang[i] - ang[j];
                let (s, co) = th.sin_cos();
                -v[i] * v[j] * (y.g.get(i, j) * co + y.b.get(i, j) * s)
            };
            jac.set(np + r, c, val);
        }
        for (c, &j) in q_idx.iter().enumerate() {
            let val = if i == j {
                qi / v[i] - y.b.get(i, i) * v[i]
            } else {
                let th = ang[i] - ang[j];
                let (s, co) = th.sin_cos();
                v[i] * (y.g.get(i, j) * s - y.b.get(i, j) * co)
            };
            jac.set(np + r, np + c, val);
        }
    }
    jac
}

fn branch_flows(
    case: &NetworkCase,
    outages: &[u32],
    v: &[f64],
    ang: &[f64],
) -> Vec<BranchFlow> {
    case.branches
        .iter()
        .map(|br| {
            if !br.in_service || outages.contains(&br.id) {
                return BranchFlow::default();
            }
            let f = case.bus_index(br.from_bus).unwrap();
            let t = case.bus_index(br.to_bus).unwrap();
            let denom = br.r * br.r + br.x * br.x;
            let g = br.r / denom;
            let b = -br.x / denom;
            let th = ang[f] - ang[t];
            let (s, c) = th.sin_cos();
            let vf = v[f];
            let vt = v[t];
            BranchFlow {
                p_from: g * vf * vf - vf * vt * (g * c + b * s),
                q_from: -(b + br.b_shunt / 2.0) * vf * vf - vf * vt * (g * s - b * c),
                p_to: g * vt * vt - vf * vt * (g * c - b * s),
                q_to: -(b + br.b_shunt / 2.0) * vt * vt + vf * vt * (g * s + b * c),
            }
        })
        .collect()
}

/// DC power flow: θ from the slack-reduced susceptance system, flows `f = Kθ`.
///
/// `p_inj` is the full per-bus injection vector in p.u.; the slack entry is
/// ignored (the slack absorbs the residual imbalance).
pub fn solve_dc(
    case: &NetworkCase,
    p_inj: &[f64],
    contingency: Option<&Contingency>,
) -> Result<(Vec<f64>, Vec<f64>), PfError> {
    assert_eq!(p_inj.len(), case.n_buses());
    if let Some(c) = contingency {
        c.validate(case)?;
    }
    let outages = outage_slice(contingency);
    if !connected_with(case, outages) {
        let id = contingency.map(|c| c.id.clone()).unwrap_or_else(|| "base".into());
        return Err(PfError::Islanded(id));
    }
    let (b, k) = build_bbus(case, outages);
    let n = case.n_buses();
    let slack = case.slack_index();
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let b_red = DenseMatrix::from_fn(n - 1, n - 1, |i, j| b.get(keep[i], keep[j]));
    let rhs = DenseMatrix::column(&keep.iter().map(|&i| p_inj[i]).collect::<Vec<_>>());
    let sol = lu_solve(&b_red, &rhs).map_err(|e| match e {
        NumericsError::Singular { .. } => {
            let id = contingency.map(|c| c.id.clone()).unwrap_or_else(|| "base".into());
            PfError::Islanded(id)
        }
        other => PfError::Numerics(other),
    })?;
    let mut theta = vec![0.0; n];
    for (r, &i) in keep.iter().enumerate() {
        theta[i] = sol.get(r, 0);
    }
    let flows = k.matvec(&theta);
    Ok((theta, flows))
}

/// Droop-style frequency proxy from the pre/post generation imbalance:
/// `ω = f0 − k_sys·(ΣP_post − ΣP_pre)/ΣP_pre`. One scalar for the system.
pub fn frequency_proxy(
    pre: &PowerFlowState,
    post: &PowerFlowState,
    f0: f64,
    k_sys: f64,
) -> Result<f64, PfError> {
    if !pre.converged || !post.converged {
        return Err(PfError::NotConverged);
    }
    let gen_pre = pre.total_generation();
    if gen_pre.abs() < 1e-12 {
        return Err(PfError::ZeroPreGeneration);
    }
    let gen_post = post.total_generation();
    Ok(f0 - k_sys * (gen_post - gen_pre) / gen_pre)
}
