//! Dense linear-algebra kernels used by every other module.
//!
//! Everything here is small-matrix dense work: the largest systems in scope
//! are a few hundred rows, so no sparsity or blocking is attempted. Each
//! factorization carries an explicit accuracy contract checked by the tests.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is singular to working tolerance at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal mass {offdiag:.3e})")]
    SvdNoConvergence { sweeps: usize, offdiag: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        DenseMatrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * other`, cache-friendly i-k-j loop order.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow.iter()) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// In-place LU factorization with partial pivoting.
///
/// Stores L (unit lower) and U in `lu`; `perm[i]` is the source row of row `i`.
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &DenseMatrix) -> Result<LuFactors, NumericsError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(NumericsError::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = 1e-13 * a.max_abs().max(1e-300);
        for k in 0..n {
            // pivot search in column k
            let mut p = k;
            let mut pmax = lu.get(k, k).abs();
            for i in (k + 1)..n {
                let v = lu.get(i, k).abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax <= tol {
                return Err(NumericsError::Singular { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
            }
            let pivot = lu.get(k, k);
            for i in (k + 1)..n {
                let m = lu.get(i, k) / pivot;
                lu.set(i, k, m);
                if m != 0.0 {
                    let (upper, lower) = lu.data.split_at_mut(i * n);
                    let urow = &upper[k * n..(k + 1) * n];
                    let irow = &mut lower[..n];
                    for j in (k + 1)..n {
                        irow[j] -= m * urow[j];
                    }
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    /// Solve `A X = rhs` for a multi-column right-hand side.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
        let n = self.lu.rows();
        if rhs.rows() != n {
            return Err(NumericsError::Dimension(format!(
                "rhs has {} rows, expected {}",
                rhs.rows(),
                n
            )));
        }
        let m = rhs.cols();
        let mut x = DenseMatrix::zeros(n, m);
        // apply permutation
        for i in 0..n {
            for j in 0..m {
                x.set(i, j, rhs.get(self.perm[i], j));
            }
        }
        // forward substitution (unit lower)
        for i in 0..n {
            for k in 0..i {
                let l = self.lu.get(i, k);
                if l != 0.0 {
                    for j in 0..m {
                        let v = x.get(i, j) - l * x.get(k, j);
                        x.set(i, j, v);
                    }
                }
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.lu.get(i, k);
                if u != 0.0 {
                    for j in 0..m {
                        let v = x.get(i, j) - u * x.get(k, j);
                        x.set(i, j, v);
                    }
                }
            }
            let d = self.lu.get(i, i);
            for j in 0..m {
                x.set(i, j, x.get(i, j) / d);
            }
        }
        Ok(x)
    }
}

/// Solve `A X = rhs` by LU with partial pivoting.
///
/// For well-conditioned inputs the residual satisfies
/// `‖A·X − rhs‖∞ ≤ 1e-10·(1 + ‖rhs‖∞)`.
pub fn lu_solve(a: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
    LuFactors::factor(a)?.solve(rhs)
}

/// Orthonormal basis of the column span of `a` via modified Gram-Schmidt
/// with one reorthogonalization pass. Columns whose remainder falls below
/// `1e-10·‖a‖` are treated as dependent and dropped, so the returned matrix
/// has `r = rank` columns. A zero input yields zero columns.
pub fn qr_orthonormal(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let k = a.cols();
    let scale = a.max_abs();
    let drop_tol = 1e-10 * scale.max(1e-300) * (n as f64).sqrt();
    let mut q: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        let mut v = a.col_vec(j);
        // two MGS passes keep Q'Q within 1e-12 of identity
        for _ in 0..2 {
            for qc in &q {
                let dot: f64 = qc.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(qc.iter()) {
                    *vi -= dot * qi;
                }
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > drop_tol {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            q.push(v);
        }
    }
    let r = q.len();
    DenseMatrix::from_fn(n, r, |i, j| q[j][i])
}

/// Thin singular value decomposition `A = U Σ Vᵀ` by one-sided Jacobi.
///
/// For an m×n input with m ≥ n this returns U (m×n, orthonormal columns),
/// the singular values in non-increasing order, and V (n×n orthogonal).
/// Inputs with m < n are handled by factoring the transpose.
pub fn svd_small(
    a: &DenseMatrix,
) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix), NumericsError> {
    if a.rows() < a.cols() {
        let (u, s, v) = svd_small(&a.transpose())?;
        return Ok((v, s, u));
    }
    let m = a.rows();
    let n = a.cols();
    if n == 0 {
        return Ok((DenseMatrix::zeros(m, 0), Vec::new(), DenseMatrix::zeros(0, 0)));
    }
    // columns of `u` are rotated in place; `v` accumulates the rotations
    let mut u: Vec<Vec<f64>> = (0..n).map(|j| a.col_vec(j)).collect();
    let mut v = DenseMatrix::identity(n);
    let eps = 1e-15;
    let max_sweeps = 60;
    let mut converged = false;
    let mut last_off = 0.0;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    app += u[p][i] * u[p][i];
                    aqq += u[q][i] * u[q][i];
                    apq += u[p][i] * u[q][i];
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(1e-300));
                // Jacobi rotation zeroing the (p,q) Gram entry
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[p][i];
                    let uq = u[q][i];
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        last_off = off;
        if off <= 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericsError::SvdNoConvergence {
            sweeps: max_sweeps,
            offdiag: last_off,
        });
    }
    // singular values are the column norms of the rotated matrix
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = u
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut u_out = DenseMatrix::zeros(m, n);
    let mut v_out = DenseMatrix::zeros(n, n);
    let zero_tol = 1e-14 * sigma.first().copied().unwrap_or(0.0).max(1e-300);
    let mut fill: Vec<usize> = Vec::new();
    for (jj, &col) in order.iter().enumerate() {
        if norms[col] > zero_tol {
            for i in 0..m {
                u_out.set(i, jj, u[col][i] / norms[col]);
            }
        } else {
            fill.push(jj);
        }
        for i in 0..n {
            v_out.set(i, jj, v.get(i, col));
        }
    }
    // zero singular values leave U columns undefined; complete to an
    // orthonormal set so the orthogonality contract still holds
    for jj in fill {
        for cand in 0..m {
            let mut col = vec![0.0; m];
            col[cand] = 1.0;
            for j2 in 0..n {
                if j2 == jj {
                    continue;
                }
                let dot: f64 = (0..m).map(|i| u_out.get(i, j2) * col[i]).sum();
                for (i, c) in col.iter_mut().enumerate() {
                    *c -= dot * u_out.get(i, j2);
                }
            }
            let norm: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for i in 0..m {
                    u_out.set(i, jj, col[i] / norm);
                }
                break;
            }
        }
    }
    Ok((u_out, sigma, v_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn lu_identity_returns_rhs() {
        let a = DenseMatrix::identity(3);
        let rhs = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let x = lu_solve(&a, &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn lu_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let rhs = DenseMatrix::from_rows(&[vec![2.0], vec![8.0]]);
        let x = lu_solve(&a, &rhs).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((x.get(1, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lu_residual_bound_random_20x20() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // diagonally dominant, hence well conditioned
        let mut a = DenseMatrix::from_fn(20, 20, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..20 {
            a.add_to(i, i, 25.0);
        }
        let rhs = DenseMatrix::from_fn(20, 3, |_, _| rng.gen_range(-10.0..10.0));
        let x = lu_solve(&a, &rhs).unwrap();
        let resid = max_abs_diff(&a.matmul(&x), &rhs);
        assert!(resid <= 1e-10 * (1.0 + rhs.max_abs()), "residual {resid}");
    }

    #[test]
    fn lu_singular_reports_pivot() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let rhs = DenseMatrix::zeros(2, 1);
        match lu_solve(&a, &rhs) {
            Err(NumericsError::Singular { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn qr_idempotent_on_orthonormal_input() {
        let s = 1.0 / 2.0_f64.sqrt();
        let a = DenseMatrix::from_rows(&[vec![s, s], vec![s, -s], vec![0.0, 0.0]]);
        let q = qr_orthonormal(&a);
        assert_eq!(q.cols(), 2);
        for j in 0..2 {
            let dot: f64 = (0..3).map(|i| q.get(i, j) * a.get(i, j)).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-12, "column {j} changed span");
        }
    }

    #[test]
    fn qr_drops_duplicate_columns() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]);
        let q = qr_orthonormal(&a);
        assert_eq!(q.cols(), 1);
    }

    #[test]
    fn qr_zero_matrix_has_rank_zero() {
        let q = qr_orthonormal(&DenseMatrix::zeros(4, 2));
        assert_eq!(q.cols(), 0);
    }

    #[test]
    fn qr_defining_properties_random_6x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DenseMatrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0));
        let q = qr_orthonormal(&a);
        let qtq = q.transpose().matmul(&q);
        assert!(max_abs_diff(&qtq, &DenseMatrix::identity(q.cols())) <= 1e-12);
        // (I - QQ')A == 0: column span preserved
        let proj = q.matmul(&q.transpose().matmul(&a));
        assert!(max_abs_diff(&proj, &a) <= 1e-10);
    }

    #[test]
    fn svd_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let (_, s, _) = svd_small(&a).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-12);
        assert!((s[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_identical_subspaces_all_ones() {
        // Q'Q for identical orthonormal bases is the identity
        let a = DenseMatrix::identity(3);
        let (_, s, _) = svd_small(&a).unwrap();
        for v in s {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_reconstruction_random_4x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::from_fn(4, 3, |_, _| rng.gen_range(-2.0..2.0));
        let (u, s, v) = svd_small(&a).unwrap();
        let mut us = u.clone();
        for j in 0..3 {
            for i in 0..4 {
                us.set(i, j, u.get(i, j) * s[j]);
            }
        }
        let recon = us.matmul(&v.transpose());
        assert!(max_abs_diff(&recon, &a) <= 1e-10 * a.max_abs().max(1.0));
        let utu = u.transpose().matmul(&u);
        assert!(max_abs_diff(&utu, &DenseMatrix::identity(3)) <= 1e-12);
        let vtv = v.transpose().matmul(&v);
        assert!(max_abs_diff(&vtv, &DenseMatrix::identity(3)) <= 1e-12);
    }

    #[test]
    fn svd_wide_matrix() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, -1.0, 1.0]]);
        let (u, s, v) = svd_small(&a).unwrap();
        let mut us = u.clone();
        for j in 0..s.len() {
            for i in 0..u.rows() {
                us.set(i, j, u.get(i, j) * s[j]);
            }
        }
        let recon = us.matmul(&v.transpose());
        assert!(max_abs_diff(&recon, &a) <= 1e-10 * a.max_abs());
    }

    #[test]
    fn svd_rank_deficient_keeps_u_orthonormal() {
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![3.0, 6.0],
        ]);
        let (u, s, _) = svd_small(&a).unwrap();
        assert!(s[1] < 1e-12 * s[0]);
        let utu = u.transpose().matmul(&u);
        assert!(max_abs_diff(&utu, &DenseMatrix::identity(2)) <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn prop_lu_recovers_x(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..9);
            let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            for i in 0..n {
                a.add_to(i, i, n as f64 + 2.0);
            }
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let rhs = DenseMatrix::column(&a.matvec(&x_true));
            let x = lu_solve(&a, &rhs).unwrap();
            let scale = x_true.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                prop_assert!((x.get(i, 0) - x_true[i]).abs() <= 1e-8 * scale);
            }
        }

        #[test]
        fn prop_qr_svd_bounds(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b9));
            let m = rng.gen_range(1..8);
            let n = rng.gen_range(1..8);
            let a = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-3.0..3.0));

            let q = qr_orthonormal(&a);
            if q.cols() > 0 {
                let qtq = q.transpose().matmul(&q);
                prop_assert!(qtq.sub(&DenseMatrix::identity(q.cols())).max_abs() <= 1e-12);
                let proj = q.matmul(&q.transpose().matmul(&a));
                prop_assert!(proj.sub(&a).max_abs() <= 1e-9 * a.max_abs().max(1.0));
            }

            let (u, s, v) = svd_small(&a).unwrap();
            for w in s.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-12);
            }
            prop_assert!(s.iter().all(|&x| x >= 0.0));
            let k = s.len();
            let mut us = u.clone();
            for j in 0..k {
                for i in 0..u.rows() {
                    us.set(i, j, u.get(i, j) * s[j]);
                }
            }
            let recon = us.matmul(&v.transpose());
            prop_assert!(recon.sub(&a).max_abs() <= 1e-10 * a.max_abs().max(1.0));
        }

        #[test]
        fn prop_svd_row_permutation_invariant(seed in 0u64..2_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(42));
            let m = rng.gen_range(2..7);
            let n = rng.gen_range(1..7);
            let a = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-2.0..2.0));
            let mut perm: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let b = DenseMatrix::from_fn(m, n, |i, j| a.get(perm[i], j));
            let (_, sa, _) = svd_small(&a).unwrap();
            let (_, sb, _) = svd_small(&b).unwrap();
            for (x, y) in sa.iter().zip(sb.iter()) {
                prop_assert!((x - y).abs() <= 1e-10 * sa[0].max(1.0));
            }
        }
    }
}
