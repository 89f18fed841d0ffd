//! Dense real linear algebra used by every bound and defense.
//!
//! Matrices are row-major `f64`. The SVD is a one-sided (Hestenes) Jacobi
//! iteration, which gives singular values to high relative accuracy and is
//! plenty fast for the Jacobian sizes this crate works with (a few thousand
//! rows by at most a few hundred columns).

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value tolerance used by the pseudoinverse and rank tests.
pub const PINV_TOL: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Matrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ · v` without materializing the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::Shape(format!(
                "transpose of {}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("matrix subtraction with different shapes".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense real array with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("tensor dimensions must be positive, got {shape:?}")));
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::DimensionOverflow)?;
        if len != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {len} values, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor element {i}")));
        }
        Ok(Tensor { shape, data })
    }

    /// Stacks equal-length vectors into an `n × m` tensor.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Tensor::new(vec![rows.len(), m], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Splits along the leading axis. A 1-D tensor is a single row.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        match self.shape.len() {
            0 => vec![self.data.clone()],
            1 => vec![self.data.clone()],
            _ => {
                let width = self.data.len() / self.shape[0];
                self.data.chunks(width).map(<[f64]>::to_vec).collect()
            }
        }
    }
}

/// Thin singular value decomposition `a = u · diag(sigma) · vt`.
#[derive(Debug, Clone)]
pub struct SvdBundle {
    /// `p × d`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// `d × m`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdBundle {
    pub fn d(&self) -> usize {
        self.sigma.len()
    }

    /// Number of rows of the decomposed matrix.
    pub fn p(&self) -> usize {
        self.u.rows()
    }

    /// Number of columns of the decomposed matrix.
    pub fn m(&self) -> usize {
        self.vt.cols()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut out = Matrix::zeros(self.p(), self.m());
        for (k, &s) in self.sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let v = self.vt.row(k);
            for i in 0..self.p() {
                let a = self.u[(i, k)] * s;
                for (o, &vj) in out.row_mut(i).iter_mut().zip(v) {
                    *o += a * vj;
                }
            }
        }
        out
    }
}

/// Thin SVD with exactly `min(p, m)` triplets.
///
/// Each right singular vector is signed so that its largest-magnitude entry
/// is positive, which makes the output deterministic.
pub fn svd(a: &Matrix) -> Result<SvdBundle> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Shape("svd of an empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    let mut bundle = if a.rows() >= a.cols() {
        let (u, sigma, v) = jacobi_tall(a)?;
        SvdBundle { u, sigma, vt: v.transpose() }
    } else {
        // a = (aᵀ)ᵀ = (U' Σ V'ᵀ)ᵀ = V' Σ U'ᵀ
        let (u_t, sigma, v_t) = jacobi_tall(&a.transpose())?;
        SvdBundle { u: v_t, sigma, vt: u_t.transpose() }
    };
    fix_signs(&mut bundle);
    Ok(bundle)
}

/// One-sided Jacobi on a tall matrix (rows ≥ cols). Returns `(U, σ, V)` with
/// `U` of shape rows × cols and `V` of shape cols × cols, sorted by σ.
fn jacobi_tall(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (p, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns whose squared norm falls below this are numerically zero;
    // rotating them against each other only shuffles roundoff.
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (alpha, beta, gamma) = {
                    let (ci, cj) = (&cols[i], &cols[j]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in ci.iter().zip(cj) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if alpha <= negligible || beta <= negligible || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi SVD did not converge within {JACOBI_MAX_SWEEPS} sweeps on a {p}x{n} matrix"
        )));
    }

    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u_cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| {
            let s = norms[j];
            if s > 0.0 {
                cols[j].iter().map(|x| x / s).collect()
            } else {
                vec![0.0; p]
            }
        })
        .collect();
    orthonormalize(&mut u_cols, p);

    let mut u = Matrix::zeros(p, n);
    for (k, col) in u_cols.iter().enumerate() {
        for i in 0..p {
            u[(i, k)] = col[i];
        }
    }
    let mut vm = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
    }
    Ok((u, sigma, vm))
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Modified Gram-Schmidt in place. Columns that collapse (zero singular
/// values, or directions lost to roundoff) are replaced by the first standard
/// basis vector keeping more than half its norm orthogonal to the columns kept
/// so far, or failing that the one keeping the most.
fn orthonormalize(cols: &mut [Vec<f64>], dim: usize) {
    for k in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(k);
        let c = &mut rest[0];
        let before = norm(c);
        for _ in 0..2 {
            for q in done.iter() {
                let proj = dot(q, c);
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci -= proj * qi;
                }
            }
        }
        let after = norm(c);
        if before > 0.0 && after > 0.5 * before {
            for ci in c.iter_mut() {
                *ci /= after;
            }
            continue;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..dim {
            let mut cand = vec![0.0; dim];
            cand[e] = 1.0;
            for _ in 0..2 {
                for q in done.iter() {
                    let proj = dot(q, &cand);
                    for (ci, qi) in cand.iter_mut().zip(q) {
                        *ci -= proj * qi;
                    }
                }
            }
            let n = norm(&cand);
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, cand));
            }
            if n > 0.5 {
                break;
            }
        }
        if let Some((n, cand)) = best {
            *c = cand.into_iter().map(|v| v / n).collect();
        }
    }
}

fn fix_signs(s: &mut SvdBundle) {
    for k in 0..s.d() {
        let row = s.vt.row(k);
        let mut pivot = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[pivot].abs() {
                pivot = j;
            }
        }
        if row[pivot] < 0.0 {
            for v in s.vt.row_mut(k) {
                *v = -*v;
            }
            for i in 0..s.u.rows() {
                s.u[(i, k)] = -s.u[(i, k)];
            }
        }
    }
}

/// Number of singular values strictly above `tol · σ_1`.
pub fn effective_rank(s: &SvdBundle, tol: f64) -> usize {
    let Some(&top) = s.sigma.first() else { return 0 };
    if top <= 0.0 {
        return 0;
    }
    s.sigma.iter().take_while(|&&v| v > tol * top).count()
}

/// Rank-`k` truncated Moore-Penrose inverse `V_{1:k} Σ_k^{-1} U_{1:k}ᵀ` (m × p).
pub fn truncated_pinv(s: &SvdBundle, k: usize) -> Result<Matrix> {
    let effective = effective_rank(s, PINV_TOL);
    if k > effective {
        return Err(Error::RankExceeded { requested: k, effective });
    }
    let (m, p) = (s.m(), s.p());
    let mut out = Matrix::zeros(m, p);
    for i in 0..k {
        let inv = 1.0 / s.sigma[i];
        let v = s.vt.row(i);
        for (r, &vr) in v.iter().enumerate() {
            let a = vr * inv;
            if a == 0.0 {
                continue;
            }
            for (c, o) in out.row_mut(r).iter_mut().enumerate() {
                *o += a * s.u[(c, i)];
            }
        }
    }
    Ok(out)
}

/// Coordinates of `v` along each row of `basis_rows`.
pub fn project(basis_rows: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    basis_rows.matvec(v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn max_dev_from_identity(m: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m[(i, j)] - target).abs());
            }
        }
        worst
    }

    fn check_invariants(a: &Matrix, s: &SvdBundle) {
        let d = a.rows().min(a.cols());
        assert_eq!(s.d(), d);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.sigma.iter().all(|&v| v >= 0.0));
        let utu = s.u.transpose().matmul(&s.u).unwrap();
        assert!(max_dev_from_identity(&utu) < 1e-8);
        let vvt = s.vt.matmul(&s.vt.transpose()).unwrap();
        assert!(max_dev_from_identity(&vvt) < 1e-8);
        let err = s.reconstruct().sub(a).unwrap().frobenius_norm();
        let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
        assert!(err / scale < 1e-8 || err < 1e-14, "reconstruction error {err}");
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let s = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(s.sigma, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_is_its_own_decomposition() {
        let a = Matrix::from_diag(&[3.0, 2.0, 1.0]);
        let s = svd(&a).unwrap();
        assert_eq!(s.sigma, vec![3.0, 2.0, 1.0]);
        assert_eq!(s.u, Matrix::identity(3));
        assert_eq!(s.vt, Matrix::identity(3));
    }

    #[test]
    fn unsorted_diagonal_is_sorted() {
        let a = Matrix::from_diag(&[1.0, -3.0, 2.0]);
        let s = svd(&a).unwrap();
        assert_eq!(s.sigma, vec![3.0, 2.0, 1.0]);
        check_invariants(&a, &s);
    }

    #[test]
    fn invariants_hold_for_assorted_shapes() {
        for (seed, (r, c)) in [(1, 1), (1, 5), (5, 1), (4, 3), (3, 4), (17, 9), (9, 17), (64, 64), (200, 12)]
            .into_iter()
            .enumerate()
        {
            let a = random_matrix(r, c, seed as u64);
            let s = svd(&a).unwrap();
            check_invariants(&a, &s);
        }
    }

    #[test]
    fn rank_deficient_and_zero_matrices() {
        let zero = Matrix::zeros(4, 3);
        let s = svd(&zero).unwrap();
        assert!(s.sigma.iter().all(|&v| v == 0.0));
        check_invariants(&zero, &s);
        assert_eq!(effective_rank(&s, 1e-10), 0);

        // rank 2 product of 6x2 and 2x5
        let a = random_matrix(6, 2, 10).matmul(&random_matrix(2, 5, 11)).unwrap();
        let s = svd(&a).unwrap();
        check_invariants(&a, &s);
        assert_eq!(effective_rank(&s, 1e-10), 2);
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let a = random_matrix(7, 5, 3);
        let s = svd(&a).unwrap();
        for k in 0..s.d() {
            let row = s.vt.row(k);
            let pivot = row.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = Matrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn effective_rank_examples() {
        let s = svd(&Matrix::from_diag(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(effective_rank(&s, 1e-10), 3);
        let s = svd(&Matrix::from_diag(&[1.0, 1e-15])).unwrap();
        assert_eq!(effective_rank(&s, 1e-10), 1);
    }

    #[test]
    fn pinv_of_identity_and_rank_zero() {
        let s = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(truncated_pinv(&s, 3).unwrap(), Matrix::identity(3));
        let a = random_matrix(4, 3, 5);
        let s = svd(&a).unwrap();
        assert_eq!(truncated_pinv(&s, 0).unwrap(), Matrix::zeros(3, 4));
    }

    #[test]
    fn pinv_rejects_rank_beyond_effective() {
        let s = svd(&Matrix::from_diag(&[1.0, 0.0])).unwrap();
        match truncated_pinv(&s, 2) {
            Err(Error::RankExceeded { requested: 2, effective: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pinv_satisfies_penrose_identity() {
        let a = random_matrix(6, 4, 8);
        let s = svd(&a).unwrap();
        let pinv = truncated_pinv(&s, 4).unwrap();
        let apa = a.matmul(&pinv).unwrap().matmul(&a).unwrap();
        assert!(apa.sub(&a).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn truncation_residual_is_non_increasing_in_k() {
        let a = random_matrix(8, 6, 21);
        let s = svd(&a).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=6 {
            let pinv = truncated_pinv(&s, k).unwrap();
            let resid = a.matmul(&pinv).unwrap().matmul(&a).unwrap().sub(&a).unwrap().frobenius_norm();
            assert!(resid <= prev + 1e-12);
            prev = resid;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn project_examples() {
        let v = vec![0.3, -1.2, 2.0];
        assert_eq!(project(&Matrix::identity(3), &v).unwrap(), v);
        let s = svd(&random_matrix(3, 3, 4)).unwrap();
        let coords = project(&s.vt, &v).unwrap();
        assert!((norm(&coords) - norm(&v)).abs() < 1e-12);
        for (i, c) in coords.iter().enumerate() {
            let naive: f64 = (0..3).map(|j| s.vt[(i, j)] * v[j]).sum();
            assert!((c - naive).abs() < 1e-15);
        }
        assert!(matches!(project(&Matrix::identity(2), &v), Err(Error::Shape(_))));
    }

    #[test]
    fn tensor_rejects_bad_shapes_and_values() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(Tensor::new(vec![2, 3], vec![0.0; 5]), Err(Error::Shape(_))));
        assert!(matches!(Tensor::new(vec![0], vec![]), Err(Error::Shape(_))));
        assert!(matches!(Tensor::new(vec![1], vec![f64::INFINITY]), Err(Error::NonFinite(_))));
        assert!(matches!(Tensor::new(vec![usize::MAX, 3], vec![]), Err(Error::DimensionOverflow)));
    }
}
