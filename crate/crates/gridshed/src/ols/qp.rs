//! Dense convex-QP primal-dual interior-point solver.
//!
//! Solves `min ½ xᵀQx + cᵀx  s.t.  A x = b, G x ≤ h` with Q positive
//! semidefinite, using a Mehrotra predictor-corrector iteration on the
//! slacked system `G x + w = h, w > 0`. Each iteration factors the reduced
//! KKT matrix `[[Q + GᵀDG, Aᵀ], [A, 0]]` once and reuses the factors for
//! both the affine predictor and the centering corrector.

use crate::numerics::{DenseMatrix, LuFactors, NumericsError};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub q: DenseMatrix,
    pub c: Vec<f64>,
    pub a_eq: DenseMatrix,
    pub b_eq: Vec<f64>,
    pub g: DenseMatrix,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct QpParams {
    /// Scaled residual target for all three KKT blocks.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor for the final step lengths.
    pub boundary_frac: f64,
}

impl Default for QpParams {
    fn default() -> Self {
        QpParams {
            tol: 1e-11,
            max_iter: 100,
            boundary_frac: 0.995,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
    Numerical,
}

#[derive(Debug, Clone)]
pub struct QpResult {
    pub x: Vec<f64>,
    /// Equality duals, sign convention `Qx + c + Aᵀy + Gᵀλ = 0`.
    pub y: Vec<f64>,
    /// Inequality duals, λ ≥ 0.
    pub lam: Vec<f64>,
    pub w: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    /// Scaled (primal, dual, complementarity) residuals at exit.
    pub residuals: (f64, f64, f64),
}

pub fn objective_value(p: &QpProblem, x: &[f64]) -> f64 {
    let qx = p.q.matvec(x);
    0.5 * dot(&qx, x) + dot(&p.c, x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Largest α ≥ 0 with `v + α dv ≥ 0` (∞ if unconstrained).
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for (&vi, &di) in v.iter().zip(dv) {
        if di < 0.0 {
            a = a.min(-vi / di);
        }
    }
    a
}

/// `Gᵀ diag(d) G` accumulated into `m`, exploiting row sparsity of G.
fn add_gt_d_g(m: &mut DenseMatrix, g: &DenseMatrix, d: &[f64]) {
    let n = g.cols();
    let mut nz: Vec<usize> = Vec::with_capacity(8);
    for (r, &dr) in d.iter().enumerate() {
        if dr == 0.0 {
            continue;
        }
        let row = g.row(r);
        nz.clear();
        nz.extend((0..n).filter(|&j| row[j] != 0.0));
        for &j in &nz {
            let s = dr * row[j];
            for &k in &nz {
                m.add_to(j, k, s * row[k]);
            }
        }
    }
}

/// LU of a symmetrically equilibrated matrix. The raw KKT mixes barrier
/// weights of order 1e12 with O(1) structural entries; without scaling the
/// factorization's relative pivot tolerance misreads small-but-healthy
/// pivots as rank deficiency.
struct ScaledLu {
    factors: LuFactors,
    s: Vec<f64>,
}

impl ScaledLu {
    fn factor(k: &DenseMatrix) -> Result<ScaledLu, NumericsError> {
        let n = k.rows();
        let s: Vec<f64> = (0..n)
            .map(|i| {
                let m = inf_norm(k.row(i));
                if m > 0.0 {
                    1.0 / m.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let scaled = DenseMatrix::from_fn(n, n, |i, j| s[i] * k.get(i, j) * s[j]);
        Ok(ScaledLu {
            factors: LuFactors::factor(&scaled)?,
            s,
        })
    }

    fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let n = rhs.len();
        let mut b = DenseMatrix::zeros(n, 1);
        for i in 0..n {
            b.set(i, 0, self.s[i] * rhs[i]);
        }
        let u = self.factors.solve(&b)?;
        Ok((0..n).map(|i| self.s[i] * u.get(i, 0)).collect())
    }
}

/// `Gᵀ v` with row-sparsity scan.
fn gt_vec(g: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.cols()];
    for (r, &vr) in v.iter().enumerate() {
        if vr == 0.0 {
            continue;
        }
        for (j, &gj) in g.row(r).iter().enumerate() {
            if gj != 0.0 {
                out[j] += vr * gj;
            }
        }
    }
    out
}

/// True KKT residuals of a candidate point against the original problem
/// data: (primal, dual, complementarity), each scaled by the data norms.
pub fn kkt_residuals(p: &QpProblem, x: &[f64], y: &[f64], lam: &[f64]) -> (f64, f64, f64) {
    let qx = p.q.matvec(x);
    let aty = if p.b_eq.is_empty() {
        vec![0.0; x.len()]
    } else {
        p.a_eq.transpose().matvec(y)
    };
    let gtl = gt_vec(&p.g, lam);
    let rd = (0..x.len())
        .map(|j| (qx[j] + p.c[j] + aty[j] + gtl[j]).abs())
        .fold(0.0_f64, f64::max)
        / (1.0 + inf_norm(&p.c) + inf_norm(&qx));
    let ax = p.a_eq.matvec(x);
    let gx = p.g.matvec(x);
    let scale = 1.0 + inf_norm(&p.b_eq).max(inf_norm(&p.h));
    let rp_eq = ax
        .iter()
        .zip(&p.b_eq)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let rp_in = gx
        .iter()
        .zip(&p.h)
        .map(|(g, h)| (g - h).max(0.0))
        .fold(0.0_f64, f64::max);
    let rc = gx
        .iter()
        .zip(&p.h)
        .zip(lam)
        .map(|((g, h), l)| (l * (h - g)).abs())
        .fold(0.0_f64, f64::max)
        / scale.max(1.0);
    (rp_eq.max(rp_in) / scale, rd, rc)
}

/// Public entry: row-equilibrates the constraints and normalizes the
/// objective so the core iteration always sees O(1) data, then unscales
/// the duals. Power-system problems mix p.u. constraints with $-valued
/// objectives spanning four orders of magnitude; without this the barrier
/// iteration stalls against the boundary.
pub fn solve_qp(p: &QpProblem, x0: &[f64], params: &QpParams) -> Result<QpResult, NumericsError> {
    let n = p.c.len();
    let me = p.b_eq.len();
    let mi = p.h.len();
    assert_eq!(p.q.rows(), n);
    assert_eq!(p.a_eq.rows(), me);
    assert_eq!(p.g.rows(), mi);
    assert_eq!(x0.len(), n);

    if mi == 0 {
        return solve_equality_qp(p, params);
    }

    let kappa = 1.0 / (1.0 + p.q.max_abs().max(inf_norm(&p.c)));
    let rho_eq: Vec<f64> = (0..me)
        .map(|i| 1.0 / inf_norm(p.a_eq.row(i)).max(p.b_eq[i].abs()).max(1e-12))
        .collect();
    let rho_g: Vec<f64> = (0..mi)
        .map(|i| 1.0 / inf_norm(p.g.row(i)).max(p.h[i].abs()).max(1e-12))
        .collect();
    let scaled = QpProblem {
        q: p.q.scale(kappa),
        c: p.c.iter().map(|v| v * kappa).collect(),
        a_eq: DenseMatrix::from_fn(me, n, |i, j| rho_eq[i] * p.a_eq.get(i, j)),
        b_eq: (0..me).map(|i| rho_eq[i] * p.b_eq[i]).collect(),
        g: DenseMatrix::from_fn(mi, n, |i, j| rho_g[i] * p.g.get(i, j)),
        h: (0..mi).map(|i| rho_g[i] * p.h[i]).collect(),
    };
    let mut r = ipm_core(&scaled, x0, params)?;
    for (yi, &rho) in r.y.iter_mut().zip(&rho_eq) {
        *yi *= rho / kappa;
    }
    for ((li, wi), &rho) in r.lam.iter_mut().zip(r.w.iter_mut()).zip(&rho_g) {
        *li *= rho / kappa;
        *wi /= rho;
    }
    r.residuals = kkt_residuals(p, &r.x, &r.y, &r.lam);
    Ok(r)
}

fn ipm_core(p: &QpProblem, x0: &[f64], params: &QpParams) -> Result<QpResult, NumericsError> {
    let n = p.c.len();
    let me = p.b_eq.len();
    let mi = p.h.len();

    let a_t = p.a_eq.transpose();
    let scale_rhs = 1.0 + inf_norm(&p.b_eq).max(inf_norm(&p.h));
    let scale_c = 1.0 + inf_norm(&p.c);

    let mut x = x0.to_vec();
    let mut y = vec![0.0; me];
    let mut w: Vec<f64> = {
        let gx = p.g.matvec(&x);
        let floor = 1e-4 * scale_rhs;
        p.h.iter()
            .zip(&gx)
            .map(|(&hi, &gi)| (hi - gi).max(floor))
            .collect()
    };
    let mut lam = vec![1.0; mi];

    let mut residuals = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut iterations;

    for iter in 0..params.max_iter {
        iterations = iter;
        let qx = p.q.matvec(&x);
        let aty = if me > 0 { a_t.matvec(&y) } else { vec![0.0; n] };
        let gtlam = gt_vec(&p.g, &lam);
        let r_d: Vec<f64> = (0..n).map(|j| qx[j] + p.c[j] + aty[j] + gtlam[j]).collect();
        let ax = p.a_eq.matvec(&x);
        let r_p: Vec<f64> = (0..me).map(|i| ax[i] - p.b_eq[i]).collect();
        let gx = p.g.matvec(&x);
        let r_g: Vec<f64> = (0..mi).map(|i| gx[i] + w[i] - p.h[i]).collect();
        let mu = dot(&w, &lam) / mi as f64;

        let obj = 0.5 * dot(&qx, &x) + dot(&p.c, &x);
        let rp = inf_norm(&r_p).max(inf_norm(&r_g)) / scale_rhs;
        let rd = inf_norm(&r_d) / (scale_c + inf_norm(&qx));
        let rc = mu / (1.0 + obj.abs());
        residuals = (rp, rd, rc);
        if !rp.is_finite() || !rd.is_finite() || !rc.is_finite() {
            return Ok(QpResult {
                x, y, lam, w,
                status: QpStatus::Numerical,
                iterations,
                residuals,
            });
        }
        if rp <= params.tol && rd <= params.tol && rc <= params.tol {
            return Ok(QpResult {
                x, y, lam, w,
                status: QpStatus::Optimal,
                iterations,
                residuals,
            });
        }
        // complementarity converged while the primal is stuck: no feasible
        // point exists and the duals are diverging to certify it
        if rc <= params.tol && rp > 1e-6 && inf_norm(&lam).max(inf_norm(&y)) > 1e8 {
            return Ok(QpResult {
                x, y, lam, w,
                status: QpStatus::Infeasible,
                iterations,
                residuals,
            });
        }

        // reduced KKT with the barrier weights folded into the (1,1) block
        let d: Vec<f64> = w
            .iter()
            .zip(&lam)
            .map(|(&wi, &li)| (li / wi).clamp(1e-14, 1e14))
            .collect();
        let dim = n + me;
        let mut kkt = DenseMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                let v = p.q.get(i, j);
                if v != 0.0 {
                    kkt.set(i, j, v);
                }
            }
        }
        add_gt_d_g(&mut kkt, &p.g, &d);
        for i in 0..me {
            for j in 0..n {
                let v = p.a_eq.get(i, j);
                if v != 0.0 {
                    kkt.set(n + i, j, v);
                    kkt.set(j, n + i, v);
                }
            }
        }
        // a collapsing factorization late in the iteration means the duals
        // are diverging: certify infeasibility rather than erroring out
        let factors = match ScaledLu::factor(&kkt) {
            Ok(f) => f,
            Err(_) => {
                let status = if rp > 1e-6 && inf_norm(&lam).max(inf_norm(&y)) > 1e3 {
                    QpStatus::Infeasible
                } else {
                    QpStatus::Numerical
                };
                return Ok(QpResult {
                    x, y, lam, w,
                    status,
                    iterations: iter,
                    residuals,
                });
            }
        };

        // affine predictor: r_c = w ∘ λ, i.e. r_c / w = λ
        let solve_dir = |factors: &ScaledLu,
                         r_c_over_w: &[f64]|
         -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>), NumericsError> {
            let t: Vec<f64> = (0..mi).map(|i| d[i] * r_g[i] - r_c_over_w[i]).collect();
            let gt_t = gt_vec(&p.g, &t);
            let mut rhs = vec![0.0; dim];
            for j in 0..n {
                rhs[j] = -r_d[j] - gt_t[j];
            }
            for i in 0..me {
                rhs[n + i] = -r_p[i];
            }
            let sol = factors.solve_vec(&rhs)?;
            let dx: Vec<f64> = sol[..n].to_vec();
            let dy: Vec<f64> = sol[n..].to_vec();
            let gdx = p.g.matvec(&dx);
            let dlam: Vec<f64> = (0..mi)
                .map(|i| d[i] * (gdx[i] + r_g[i]) - r_c_over_w[i])
                .collect();
            let dw: Vec<f64> = (0..mi).map(|i| -r_g[i] - gdx[i]).collect();
            Ok((dx, dy, dlam, dw))
        };

        let rc_aff_over_w: Vec<f64> = lam.clone();
        let (dx_a, _dy_a, dlam_a, dw_a) = solve_dir(&factors, &rc_aff_over_w)?;
        let ap_aff = max_step(&w, &dw_a).min(1.0);
        let ad_aff = max_step(&lam, &dlam_a).min(1.0);
        let mu_aff = (0..mi)
            .map(|i| (w[i] + ap_aff * dw_a[i]) * (lam[i] + ad_aff * dlam_a[i]))
            .sum::<f64>()
            / mi as f64;
        let sigma = ((mu_aff / mu).powi(3)).clamp(0.1, 0.9);
        let _ = dx_a;

        // corrector with Mehrotra's second-order term
        let rc_over_w: Vec<f64> = (0..mi)
            .map(|i| lam[i] + (dw_a[i] * dlam_a[i] - sigma * mu) / w[i])
            .collect();
        let (dx, dy, dlam, dw) = solve_dir(&factors, &rc_over_w)?;

        let tau = params.boundary_frac;
        let ap = (tau * max_step(&w, &dw)).min(1.0);
        let ad = (tau * max_step(&lam, &dlam)).min(1.0);
        for j in 0..n {
            x[j] += ap * dx[j];
        }
        for i in 0..mi {
            w[i] += ap * dw[i];
            lam[i] += ad * dlam[i];
        }
        for i in 0..me {
            y[i] += ad * dy[i];
        }
        if x.iter().any(|v| !v.is_finite()) || lam.iter().any(|v| !v.is_finite()) {
            return Ok(QpResult {
                x, y, lam, w,
                status: QpStatus::Numerical,
                iterations: iter + 1,
                residuals,
            });
        }
    }

    let status = if residuals.0 > 1e-6 && inf_norm(&lam).max(inf_norm(&y)) > 1e8 {
        QpStatus::Infeasible
    } else {
        QpStatus::MaxIter
    };
    Ok(QpResult {
        x, y, lam, w,
        status,
        iterations: params.max_iter,
        residuals,
    })
}

/// Equality-constrained case: one KKT solve.
fn solve_equality_qp(p: &QpProblem, params: &QpParams) -> Result<QpResult, NumericsError> {
    let n = p.c.len();
    let me = p.b_eq.len();
    let dim = n + me;
    let mut kkt = DenseMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            kkt.set(i, j, p.q.get(i, j));
        }
    }
    for i in 0..me {
        for j in 0..n {
            let v = p.a_eq.get(i, j);
            kkt.set(n + i, j, v);
            kkt.set(j, n + i, v);
        }
    }
    let mut rhs = DenseMatrix::zeros(dim, 1);
    for j in 0..n {
        rhs.set(j, 0, -p.c[j]);
    }
    for i in 0..me {
        rhs.set(n + i, 0, p.b_eq[i]);
    }
    let sol = LuFactors::factor(&kkt)?.solve(&rhs)?;
    let x: Vec<f64> = (0..n).map(|j| sol.get(j, 0)).collect();
    let y: Vec<f64> = (0..me).map(|i| sol.get(n + i, 0)).collect();
    let qx = p.q.matvec(&x);
    let aty = p.a_eq.transpose().matvec(&y);
    let r_d: Vec<f64> = (0..n).map(|j| qx[j] + p.c[j] + aty[j]).collect();
    let ax = p.a_eq.matvec(&x);
    let r_p: Vec<f64> = (0..me).map(|i| ax[i] - p.b_eq[i]).collect();
    let residuals = (
        inf_norm(&r_p) / (1.0 + inf_norm(&p.b_eq)),
        inf_norm(&r_d) / (1.0 + inf_norm(&p.c) + inf_norm(&qx)),
        0.0,
    );
    let status = if residuals.0 <= params.tol.max(1e-9) * 10.0 {
        QpStatus::Optimal
    } else {
        QpStatus::Numerical
    };
    Ok(QpResult {
        x,
        y,
        lam: Vec::new(),
        w: Vec::new(),
        status,
        iterations: 1,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty_eq(n: usize) -> (DenseMatrix, Vec<f64>) {
        (DenseMatrix::zeros(0, n), Vec::new())
    }

    #[test]
    fn scalar_bound_becomes_active() {
        // min ½x² − x  s.t. x ≤ 0  → x = 0, λ = 1
        let (a_eq, b_eq) = empty_eq(1);
        let p = QpProblem {
            q: DenseMatrix::from_rows(&[vec![1.0]]),
            c: vec![-1.0],
            a_eq,
            b_eq,
            g: DenseMatrix::from_rows(&[vec![1.0]]),
            h: vec![0.0],
        };
        let r = solve_qp(&p, &[-1.0], &QpParams::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!(r.x[0].abs() < 1e-8);
        assert!((r.lam[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn equality_only_projection() {
        // min x² + y²  s.t. x + y = 2  → (1, 1), dual −2
        let p = QpProblem {
            q: DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]),
            c: vec![0.0, 0.0],
            a_eq: DenseMatrix::from_rows(&[vec![1.0, 1.0]]),
            b_eq: vec![2.0],
            g: DenseMatrix::zeros(0, 2),
            h: Vec::new(),
        };
        let r = solve_qp(&p, &[0.0, 0.0], &QpParams::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-10);
        assert!((r.x[1] - 1.0).abs() < 1e-10);
        assert!((r.y[0] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn box_and_equality_mix() {
        // min (x−3)² + (y+1)²  s.t. x + y = 1, 0 ≤ x ≤ 2, 0 ≤ y ≤ 2
        // unconstrained-on-the-line optimum x = 3 clips at x = 2, y = −1 … no:
        // x + y = 1 with x ∈ [0,2] → minimize (x−3)² + (1−x+1)² = (x−3)² + (2−x)²
        // → x* = 2.5 clipped to 2, y = −1 infeasible (y ≥ 0) → x = 1, y = 0.
        let p = QpProblem {
            q: DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]),
            c: vec![-6.0, 2.0],
            a_eq: DenseMatrix::from_rows(&[vec![1.0, 1.0]]),
            b_eq: vec![1.0],
            g: DenseMatrix::from_rows(&[
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ]),
            h: vec![2.0, 0.0, 2.0, 0.0],
        };
        let r = solve_qp(&p, &[0.5, 0.5], &QpParams::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-7, "x = {}", r.x[0]);
        assert!(r.x[1].abs() < 1e-7, "y = {}", r.x[1]);
    }

    #[test]
    fn contradictory_bounds_flagged() {
        // x ≤ −1 and −x ≤ −1 (x ≥ 1) cannot both hold
        let (a_eq, b_eq) = empty_eq(1);
        let p = QpProblem {
            q: DenseMatrix::from_rows(&[vec![2.0]]),
            c: vec![0.0],
            a_eq,
            b_eq,
            g: DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]]),
            h: vec![-1.0, -1.0],
        };
        let r = solve_qp(&p, &[0.0], &QpParams::default()).unwrap();
        assert_ne!(r.status, QpStatus::Optimal);
    }

    #[test]
    fn unreachable_balance_flagged() {
        // x1 + x2 = 3 with both variables boxed in [0, 1]
        let p = QpProblem {
            q: DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]),
            c: vec![0.0, 0.0],
            a_eq: DenseMatrix::from_rows(&[vec![1.0, 1.0]]),
            b_eq: vec![3.0],
            g: DenseMatrix::from_rows(&[
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ]),
            h: vec![1.0, 0.0, 1.0, 0.0],
        };
        let r = solve_qp(&p, &[0.5, 0.5], &QpParams::default()).unwrap();
        assert_ne!(r.status, QpStatus::Optimal);
    }

    /// Random strictly convex QPs: verify the returned point against the KKT
    /// conditions computed from scratch, independent of solver internals.
    #[test]
    fn random_qps_satisfy_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let n = 4 + trial % 4;
            let me = 1 + trial % 2;
            let mi = 2 * n;
            // Q = RᵀR + I is strictly PD
            let r_mat =
                DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let mut q = r_mat.transpose().matmul(&r_mat);
            for i in 0..n {
                q.add_to(i, i, 1.0);
            }
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x_feas: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a_eq =
                DenseMatrix::from_fn(me, n, |_, _| rng.gen_range(-1.0..1.0));
            let b_eq = a_eq.matvec(&x_feas);
            let g = DenseMatrix::from_fn(mi, n, |_, _| rng.gen_range(-1.0..1.0));
            let h: Vec<f64> = g
                .matvec(&x_feas)
                .iter()
                .map(|v| v + rng.gen_range(0.1..1.0))
                .collect();
            let p = QpProblem { q, c, a_eq, b_eq, g, h };
            let r = solve_qp(&p, &x_feas, &QpParams::default()).unwrap();
            assert_eq!(r.status, QpStatus::Optimal, "trial {trial}");
            // stationarity
            let qx = p.q.matvec(&r.x);
            let aty = p.a_eq.transpose().matvec(&r.y);
            let gtl = p.g.transpose().matvec(&r.lam);
            for j in 0..n {
                assert!(
                    (qx[j] + p.c[j] + aty[j] + gtl[j]).abs() < 1e-6,
                    "trial {trial} stationarity"
                );
            }
            // feasibility + complementarity
            let ax = p.a_eq.matvec(&r.x);
            for i in 0..me {
                assert!((ax[i] - p.b_eq[i]).abs() < 1e-6);
            }
            let gx = p.g.matvec(&r.x);
            for i in 0..mi {
                let slack = p.h[i] - gx[i];
                assert!(slack > -1e-7, "trial {trial} primal ineq");
                assert!(r.lam[i] > -1e-9, "trial {trial} dual sign");
                assert!(r.lam[i] * slack.abs() < 1e-6, "trial {trial} compl");
            }
        }
    }
}
