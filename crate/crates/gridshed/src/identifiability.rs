//! Can a bus tell contingencies apart from its own incident branches?
//!
//! The DC flow response to an outage set is linear in the pre-outage flows
//! of the outaged branches, with coefficients given by a generalized line
//! outage distribution factor matrix. Restricting that matrix to the
//! branches incident to one bus gives the local response subspace; two
//! outage sets are locally distinguishable exactly when those subspaces
//! differ, which principal angles make numerically testable.

use crate::net_model::{build_bbus, CaseError, NetworkCase};
use crate::numerics::{lu_solve, qr_orthonormal, svd_small, DenseMatrix, LuFactors, NumericsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdentError {
    #[error("outage set islands the network (I - P is singular)")]
    Islanding,
    #[error("empty outage set")]
    EmptyOutageSet,
    #[error("branch {0} is out of service and cannot be outaged")]
    BranchOutOfService(u32),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Injection shift factors: `n_branches × n_buses` matrix S with
/// `f = S · p` for DC flows under nodal injections `p` (slack column zero).
pub fn isf_matrix(case: &NetworkCase) -> Result<DenseMatrix, IdentError> {
    let n = case.n_buses();
    let nb = case.n_branches();
    let slack = case.slack_index();
    let (b_full, k_full) = build_bbus(case, &[]);
    // reduced B without the slack row/column
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let b_red = DenseMatrix::from_fn(n - 1, n - 1, |i, j| b_full.get(keep[i], keep[j]));
    // X = B_red⁻¹ · K_redᵀ, column per branch; B is symmetric
    let k_red_t = DenseMatrix::from_fn(n - 1, nb, |i, r| k_full.get(r, keep[i]));
    let x = lu_solve(&b_red, &k_red_t)?;
    let mut s = DenseMatrix::zeros(nb, n);
    for r in 0..nb {
        for (i, &bus) in keep.iter().enumerate() {
            s.set(r, bus, x.get(i, r));
        }
    }
    Ok(s)
}

/// Generalized line outage distribution factors for a simultaneous outage
/// set: `d` is `n_branches × n_out` with post-outage flows
/// `f_post = f_pre + d · f_pre[outaged]`. Rows of outaged branches are set
/// to minus the identity so their post-outage flow is exactly zero. A
/// singular `I − P` certifies that the set islands the network.
pub fn outage_sensitivity(case: &NetworkCase, outages: &[u32]) -> Result<DenseMatrix, IdentError> {
    if outages.is_empty() {
        return Err(IdentError::EmptyOutageSet);
    }
    let nb = case.n_branches();
    let s = isf_matrix(case)?;
    let rows: Vec<usize> = outages
        .iter()
        .map(|&id| case.branch_index(id).map_err(IdentError::from))
        .collect::<Result<_, _>>()?;
    for (&id, &r) in outages.iter().zip(&rows) {
        if !case.branches[r].in_service {
            return Err(IdentError::BranchOutOfService(id));
        }
    }
    let o = rows.len();
    // M[ℓ, m] = S[ℓ, from_m] − S[ℓ, to_m]: flow response on ℓ to a unit
    // transfer across outaged branch m
    let mut m = DenseMatrix::zeros(nb, o);
    for (col, &r_m) in rows.iter().enumerate() {
        let br = &case.branches[r_m];
        let from = case.bus_index(br.from_bus)?;
        let to = case.bus_index(br.to_bus)?;
        for l in 0..nb {
            m.set(l, col, s.get(l, from) - s.get(l, to));
        }
    }
    let i_minus_p = DenseMatrix::from_fn(o, o, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - m.get(rows[i], j)
    });
    let inv = match LuFactors::factor(&i_minus_p) {
        Ok(f) => f.solve(&DenseMatrix::identity(o))?,
        Err(NumericsError::Singular { .. }) => return Err(IdentError::Islanding),
        Err(e) => return Err(e.into()),
    };
    let mut d = m.matmul(&inv);
    for (col, &r_m) in rows.iter().enumerate() {
        let row = d.row_mut(r_m);
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j == col { -1.0 } else { 0.0 };
        }
    }
    Ok(d)
}

/// Rows of a branch-indexed sensitivity matrix restricted to the branches
/// incident to `bus_id`, in ascending branch-id order.
pub fn local_submatrix(
    case: &NetworkCase,
    bus_id: u32,
    sensitivity: &DenseMatrix,
) -> Result<DenseMatrix, IdentError> {
    let bus_idx = case.bus_index(bus_id)?;
    let incident = &case.adjacency[bus_idx];
    let mut out = DenseMatrix::zeros(incident.len(), sensitivity.cols());
    for (i, &branch_id) in incident.iter().enumerate() {
        let r = case.branch_index(branch_id)?;
        out.row_mut(i).copy_from_slice(sensitivity.row(r));
    }
    Ok(out)
}

/// Principal angles between the column spaces of `a` and `b`.
/// Returns the cosines (descending) and the angles in radians (ascending);
/// empty when either space is trivial.
pub fn principal_angles(
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<(Vec<f64>, Vec<f64>), IdentError> {
    let qa = qr_orthonormal(a);
    let qb = qr_orthonormal(b);
    if qa.cols() == 0 || qb.cols() == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let inner = qa.transpose().matmul(&qb);
    let (_, sigma, _) = svd_small(&inner)?;
    let cosines: Vec<f64> = sigma.iter().map(|s| s.clamp(0.0, 1.0)).collect();
    let angles: Vec<f64> = cosines.iter().map(|c| c.acos()).collect();
    Ok((cosines, angles))
}

/// Outcome of one pairwise local-identifiability check.
#[derive(Debug, Clone)]
pub struct PairCheck {
    /// Smallest cosine over the principal angles (1 ⇒ subspaces coincide).
    pub min_cosine: f64,
    /// Largest principal angle, radians.
    pub max_angle: f64,
    pub rank_a: usize,
    pub rank_b: usize,
    pub identifiable: bool,
}

/// Can `bus_id` distinguish outage set `a` from outage set `b` using only
/// its incident branch flows? Yes when the local response subspaces differ:
/// different ranks, or some principal angle bounded away from zero.
pub fn check_pair(
    case: &NetworkCase,
    bus_id: u32,
    a: &[u32],
    b: &[u32],
    tol: f64,
) -> Result<PairCheck, IdentError> {
    let d_a = outage_sensitivity(case, a)?;
    let d_b = outage_sensitivity(case, b)?;
    let l_a = local_submatrix(case, bus_id, &d_a)?;
    let l_b = local_submatrix(case, bus_id, &d_b)?;
    let rank_a = qr_orthonormal(&l_a).cols();
    let rank_b = qr_orthonormal(&l_b).cols();
    let (cosines, angles) = principal_angles(&l_a, &l_b)?;
    let min_cosine = cosines.last().copied().unwrap_or(1.0);
    let max_angle = angles.last().copied().unwrap_or(0.0);
    let identifiable = rank_a != rank_b || (!cosines.is_empty() && min_cosine < 1.0 - tol);
    Ok(PairCheck {
        min_cosine,
        max_angle,
        rank_a,
        rank_b,
        identifiable,
    })
}

/// One row of the pairwise report for a bus and a list of named outage sets.
#[derive(Debug, Clone)]
pub struct SetPairOutcome {
    pub bus: u32,
    pub set_a: String,
    pub set_b: String,
    pub min_cosine: f64,
    pub max_angle_deg: f64,
    pub identifiable: bool,
}

/// All pairwise checks for `bus_id` over named outage sets, default
/// tolerance 1e-6 on the cosine.
pub fn check_set(
    case: &NetworkCase,
    bus_id: u32,
    sets: &[(String, Vec<u32>)],
    tol: f64,
) -> Result<Vec<SetPairOutcome>, IdentError> {
    let mut out = Vec::new();
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            let check = check_pair(case, bus_id, &sets[i].1, &sets[j].1, tol)?;
            out.push(SetPairOutcome {
                bus: bus_id,
                set_a: sets[i].0.clone(),
                set_b: sets[j].0.clone(),
                min_cosine: check.min_cosine,
                max_angle_deg: check.max_angle.to_degrees(),
                identifiable: check.identifiable,
            });
        }
    }
    Ok(out)
}

/// CSV rendering of pairwise outcomes:
/// `bus,set_a,set_b,min_sigma,max_beta_deg,identifiable`.
pub fn report_csv(outcomes: &[SetPairOutcome]) -> String {
    let mut s = String::from("bus,set_a,set_b,min_sigma,max_beta_deg,identifiable\n");
    for o in outcomes {
        s.push_str(&format!(
            "{},{},{},{:.9},{:.6},{}\n",
            o.bus, o.set_a, o.set_b, o.min_cosine, o.max_angle_deg, o.identifiable
        ));
    }
    s
}
