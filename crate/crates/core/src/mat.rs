//! Dense row-major matrices, the singular value decomposition, and the
//! Schatten-family norms.
//!
//! Everything here is sized for small dense problems (a few thousand entries
//! per side at most). The SVD is a cyclic one-sided Jacobi: slower than
//! blocked bidiagonalization but deterministic, simple, and accurate enough
//! that downstream golden-trajectory tests can rely on bit-stable output.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Relative threshold below which a singular value counts as zero wherever
/// rank matters (effective-p, pseudo-inverses). Norm values are unaffected.
pub const SV_ZERO_REL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// Dense real matrix with row-major storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// 1x1 matrix, handy for scalar problems.
    pub fn scalar(x: f64) -> Self {
        Mat { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "need {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Build from explicit rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty());
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat { rows: rows.len(), cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Mat::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
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

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// In-place `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Mat) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape(), "add shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape(), "sub shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Mat {
    type Output = Mat;
    fn mul(self, s: f64) -> Mat {
        self.scale(s)
    }
}

/// Norm selector. Governs both LMO geometry and reported metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Frobenius,
    Spectral,
    Trace,
    Schatten(f64),
    EuclideanVec,
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormKind::Frobenius => write!(f, "frobenius"),
            NormKind::Spectral => write!(f, "spectral"),
            NormKind::Trace => write!(f, "trace"),
            NormKind::Schatten(p) => write!(f, "schatten({p})"),
            NormKind::EuclideanVec => write!(f, "euclidean_vec"),
        }
    }
}

/// Compact SVD: `u` is rows x k, `s` has k = min(rows, cols) non-increasing
/// non-negative entries, `vt` is k x cols.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Mat,
    pub s: Vec<f64>,
    pub vt: Mat,
}

impl SvdResult {
    /// Singular values above the relative zero threshold.
    pub fn nonzero_singular_values(&self) -> Vec<f64> {
        nonzero_values(&self.s)
    }

    pub fn reconstruct(&self) -> Mat {
        let k = self.s.len();
        let mut scaled = self.vt.clone();
        for i in 0..k {
            for j in 0..scaled.cols() {
                scaled[(i, j)] *= self.s[i];
            }
        }
        self.u.matmul(&scaled)
    }
}

/// The norm-equivalence constant sup ||X||_trace / ||X||_F over d1 x d2
/// matrices: sqrt(min(d1, d2)). This is the factor by which dual-norm
/// guarantees can beat Frobenius ones.
pub fn trace_frobenius_ratio_bound(rows: usize, cols: usize) -> f64 {
    (rows.min(cols) as f64).sqrt()
}

/// Filter a singular-value list down to the entries that count as non-zero.
pub fn nonzero_values(s: &[f64]) -> Vec<f64> {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Vec::new();
    }
    s.iter().cloned().filter(|&x| x > SV_ZERO_REL * smax).collect()
}

/// Sum of elementwise products.
pub fn inner(a: &Mat, b: &Mat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "inner product of {}x{} with {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum())
}

/// Compact SVD via cyclic one-sided Jacobi on the smaller Gram dimension.
///
/// Deterministic sign convention: within each left singular vector the entry
/// of largest magnitude is made non-negative and the matching row of `vt` is
/// flipped with it, so equal inputs yield bit-equal factors.
pub fn svd(a: &Mat) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::Dimension("svd input has non-finite entries".into()));
    }
    let mut out = if a.rows() >= a.cols() {
        svd_tall(a)?
    } else {
        let r = svd_tall(&a.transpose())?;
        SvdResult { u: r.vt.transpose(), s: r.s, vt: r.u.transpose() }
    };
    apply_sign_convention(&mut out);
    Ok(out)
}

fn svd_tall(a: &Mat) -> Result<SvdResult> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut u = a.clone();
    let mut v = Mat::eye(n);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                if jacobi_rotate(&mut u, &mut v, p, q) {
                    rotated = true;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            residual: worst_off_diagonal(&u),
        });
    }

    // Column norms are the singular values; sort them non-increasing.
    let mut norms: Vec<f64> = (0..n).map(|j| col_norm(&u, j)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let mut u_sorted = Mat::zeros(m, n);
    let mut vt = Mat::zeros(n, n);
    let mut s = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        if norms[src] > 0.0 {
            for i in 0..m {
                u_sorted[(i, dst)] = u[(i, src)] / norms[src];
            }
        }
        for j in 0..n {
            vt[(dst, j)] = v[(j, src)];
        }
    }
    norms.sort_by(|a, b| b.partial_cmp(a).unwrap());

    complete_zero_columns(&mut u_sorted, &s);
    Ok(SvdResult { u: u_sorted, s, vt })
}

/// One Jacobi rotation orthogonalizing columns p and q. Returns false when
/// the pair already meets the relative off-diagonal tolerance.
fn jacobi_rotate(u: &mut Mat, v: &mut Mat, p: usize, q: usize) -> bool {
    let m = u.rows();
    let mut app = 0.0;
    let mut aqq = 0.0;
    let mut apq = 0.0;
    for i in 0..m {
        let x = u[(i, p)];
        let y = u[(i, q)];
        app += x * x;
        aqq += y * y;
        apq += x * y;
    }
    if apq * apq <= JACOBI_REL_TOL * JACOBI_REL_TOL * app * aqq || apq == 0.0 {
        return false;
    }

    let zeta = (aqq - app) / (2.0 * apq);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = c * t;

    for i in 0..m {
        let x = u[(i, p)];
        let y = u[(i, q)];
        u[(i, p)] = c * x - s * y;
        u[(i, q)] = s * x + c * y;
    }
    let n = v.rows();
    for i in 0..n {
        let x = v[(i, p)];
        let y = v[(i, q)];
        v[(i, p)] = c * x - s * y;
        v[(i, q)] = s * x + c * y;
    }
    true
}

fn worst_off_diagonal(u: &Mat) -> f64 {
    let n = u.cols();
    let mut worst: f64 = 0.0;
    for p in 0..n.saturating_sub(1) {
        for q in (p + 1)..n {
            let mut app = 0.0;
            let mut aqq = 0.0;
            let mut apq = 0.0;
            for i in 0..u.rows() {
                app += u[(i, p)] * u[(i, p)];
                aqq += u[(i, q)] * u[(i, q)];
                apq += u[(i, p)] * u[(i, q)];
            }
            if app > 0.0 && aqq > 0.0 {
                worst = worst.max(apq.abs() / (app * aqq).sqrt());
            }
        }
    }
    worst
}

fn col_norm(m: &Mat, j: usize) -> f64 {
    (0..m.rows()).map(|i| m[(i, j)] * m[(i, j)]).sum::<f64>().sqrt()
}

/// Columns for exactly-zero singular values carry no information from the
/// input; fill them with a deterministic orthonormal completion so `u` always
/// has orthonormal columns.
fn complete_zero_columns(u: &mut Mat, s: &[f64]) {
    let (m, n) = u.shape();
    for j in 0..n {
        if s[j] > 0.0 {
            continue;
        }
        'candidates: for cand in 0..m {
            let mut col = vec![0.0; m];
            col[cand] = 1.0;
            for other in 0..n {
                if other == j {
                    continue;
                }
                let dot: f64 = (0..m).map(|i| col[i] * u[(i, other)]).sum();
                for i in 0..m {
                    col[i] -= dot * u[(i, other)];
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for i in 0..m {
                    u[(i, j)] = col[i] / norm;
                }
                break 'candidates;
            }
        }
    }
}

fn apply_sign_convention(out: &mut SvdResult) {
    let (m, k) = out.u.shape();
    for j in 0..k {
        let mut best = 0usize;
        let mut best_abs = out.u[(0, j)].abs();
        for i in 1..m {
            let a = out.u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if out.u[(best, j)] < 0.0 {
            for i in 0..m {
                out.u[(i, j)] = -out.u[(i, j)];
            }
            for c in 0..out.vt.cols() {
                out.vt[(j, c)] = -out.vt[(j, c)];
            }
        }
    }
}

/// Norm of a matrix under the selected geometry.
pub fn norm(a: &Mat, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::Frobenius => Ok(a.frobenius()),
        NormKind::EuclideanVec => {
            if a.rows() != 1 && a.cols() != 1 {
                return Err(Error::Dimension(format!(
                    "euclidean_vec norm needs a vector shape, got {}x{}",
                    a.rows(),
                    a.cols()
                )));
            }
            Ok(a.frobenius())
        }
        NormKind::Spectral => Ok(svd(a)?.s.first().copied().unwrap_or(0.0)),
        NormKind::Trace => Ok(svd(a)?.s.iter().sum()),
        NormKind::Schatten(p) => {
            if p < 1.0 {
                return Err(Error::UnsupportedNorm(format!("schatten p must be >= 1, got {p}")));
            }
            Ok(schatten_from_singular_values(&svd(a)?.s, p))
        }
    }
}

/// Schatten p-norm evaluated directly on a singular-value list.
pub fn schatten_from_singular_values(s: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return s.iter().cloned().fold(0.0, f64::max);
    }
    s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Dual geometry of a norm: spectral and trace swap, the self-dual kinds map
/// to themselves. General Schatten duals are out of scope.
pub fn dual_norm_kind(kind: NormKind) -> Result<NormKind> {
    match kind {
        NormKind::Frobenius => Ok(NormKind::Frobenius),
        NormKind::Spectral => Ok(NormKind::Trace),
        NormKind::Trace => Ok(NormKind::Spectral),
        NormKind::EuclideanVec => Ok(NormKind::EuclideanVec),
        NormKind::Schatten(p) => {
            Err(Error::UnsupportedNorm(format!("dual of schatten({p}) is not provided")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_mat, stream_rng};
    use rand::Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn inner_identity_and_trace_selection() {
        let i2 = Mat::eye(2);
        assert_eq!(inner(&i2, &i2).unwrap(), 2.0);
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(inner(&a, &i2).unwrap(), 5.0);
    }

    #[test]
    fn inner_rejects_shape_mismatch() {
        let a = Mat::zeros(2, 3);
        let b = Mat::zeros(3, 2);
        assert!(matches!(inner(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn inner_of_self_is_squared_frobenius() {
        let mut rng = stream_rng(11, &[0]);
        for _ in 0..20 {
            let a = gaussian_mat(&mut rng, 3, 3, 1.0);
            let f = norm(&a, NormKind::Frobenius).unwrap();
            assert_close(inner(&a, &a).unwrap(), f * f, 1e-12 * (1.0 + f * f));
        }
    }

    #[test]
    fn svd_diagonal() {
        let a = Mat::diag(&[3.0, 4.0]);
        let r = svd(&a).unwrap();
        assert_eq!(r.s, vec![4.0, 3.0]);
    }

    #[test]
    fn svd_zero_matrix() {
        let a = Mat::zeros(2, 3);
        let r = svd(&a).unwrap();
        assert_eq!(r.s, vec![0.0, 0.0]);
        // completion keeps the factors orthonormal even for the zero matrix
        check_orthonormal(&r);
    }

    fn check_orthonormal(r: &SvdResult) {
        let utu = r.u.transpose().matmul(&r.u);
        let vvt = r.vt.matmul(&r.vt.transpose());
        for i in 0..utu.rows() {
            for j in 0..utu.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(utu[(i, j)], want, 1e-8);
                assert_close(vvt[(i, j)], want, 1e-8);
            }
        }
    }

    #[test]
    fn svd_reconstruction_random() {
        let mut rng = stream_rng(5, &[1]);
        for (rows, cols) in [(5, 3), (3, 5), (4, 4), (1, 6), (7, 1)] {
            let a = gaussian_mat(&mut rng, rows, cols, 1.0);
            let r = svd(&a).unwrap();
            let delta = &r.reconstruct() - &a;
            assert!(delta.frobenius() <= 1e-8 * a.frobenius().max(1.0));
            check_orthonormal(&r);
            for w in r.s.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(r.s.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn svd_rank_deficient_reconstruction() {
        let mut rng = stream_rng(6, &[2]);
        let p = gaussian_mat(&mut rng, 5, 2, 1.0);
        let q = gaussian_mat(&mut rng, 2, 4, 1.0);
        let a = p.matmul(&q);
        let r = svd(&a).unwrap();
        let delta = &r.reconstruct() - &a;
        assert!(delta.frobenius() <= 1e-8 * a.frobenius());
        check_orthonormal(&r);
        assert_eq!(r.nonzero_singular_values().len(), 2);
    }

    #[test]
    fn svd_sign_convention_is_deterministic() {
        let mut rng = stream_rng(9, &[3]);
        let a = gaussian_mat(&mut rng, 6, 4, 1.0);
        let r1 = svd(&a).unwrap();
        let r2 = svd(&a).unwrap();
        assert_eq!(r1.u, r2.u);
        assert_eq!(r1.vt, r2.vt);
        for j in 0..r1.u.cols() {
            let mut best = 0;
            for i in 0..r1.u.rows() {
                if r1.u[(i, j)].abs() > r1.u[(best, j)].abs() {
                    best = i;
                }
            }
            assert!(r1.u[(best, j)] >= 0.0);
        }
    }

    #[test]
    fn norm_examples() {
        let a = Mat::diag(&[3.0, 4.0]);
        assert_close(norm(&a, NormKind::Trace).unwrap(), 7.0, 1e-12);
        assert_close(norm(&a, NormKind::Spectral).unwrap(), 4.0, 1e-12);
        assert_close(norm(&a, NormKind::Schatten(2.0)).unwrap(), 5.0, 1e-12);
        assert_close(norm(&a, NormKind::Frobenius).unwrap(), 5.0, 1e-12);
    }

    #[test]
    fn schatten_two_matches_frobenius_on_random_input() {
        let mut rng = stream_rng(13, &[4]);
        for _ in 0..25 {
            let a = gaussian_mat(&mut rng, 4, 6, 1.0);
            let s2 = norm(&a, NormKind::Schatten(2.0)).unwrap();
            let f = norm(&a, NormKind::Frobenius).unwrap();
            assert_close(s2, f, 1e-10 * f.max(1.0));
        }
    }

    #[test]
    fn euclidean_vec_requires_vector_shape() {
        let v = Mat::from_rows(&[vec![3.0], vec![4.0]]);
        assert_close(norm(&v, NormKind::EuclideanVec).unwrap(), 5.0, 1e-15);
        let m = Mat::zeros(2, 2);
        assert!(norm(&m, NormKind::EuclideanVec).is_err());
    }

    #[test]
    fn dual_kinds() {
        assert_eq!(dual_norm_kind(NormKind::Spectral).unwrap(), NormKind::Trace);
        assert_eq!(dual_norm_kind(NormKind::Trace).unwrap(), NormKind::Spectral);
        assert_eq!(dual_norm_kind(NormKind::Frobenius).unwrap(), NormKind::Frobenius);
        assert_eq!(dual_norm_kind(NormKind::EuclideanVec).unwrap(), NormKind::EuclideanVec);
        assert!(dual_norm_kind(NormKind::Schatten(1.5)).is_err());
    }

    #[test]
    fn frobenius_trace_sandwich() {
        let mut rng = stream_rng(17, &[5]);
        for _ in 0..50 {
            let rows = 2 + (rng.gen::<u64>() % 6) as usize;
            let cols = 2 + (rng.gen::<u64>() % 6) as usize;
            let a = gaussian_mat(&mut rng, rows, cols, 1.0);
            let f = norm(&a, NormKind::Frobenius).unwrap();
            let t = norm(&a, NormKind::Trace).unwrap();
            let bound = (rows.min(cols) as f64).sqrt() * f;
            assert!(f <= t + 1e-10, "frobenius {f} > trace {t}");
            assert!(t <= bound + 1e-10, "trace {t} > sqrt(min dim) * frobenius {bound}");
        }
    }

    #[test]
    fn schatten_monotone_in_p() {
        let mut rng = stream_rng(19, &[6]);
        for _ in 0..30 {
            let a = gaussian_mat(&mut rng, 5, 4, 1.0);
            let mut prev = f64::INFINITY;
            for p in [1.0, 1.3, 1.7, 2.0, 3.0, 6.0] {
                let v = norm(&a, NormKind::Schatten(p)).unwrap();
                assert!(v <= prev + 1e-10, "schatten not monotone: p={p}, {v} > {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn holder_pairing() {
        let mut rng = stream_rng(23, &[7]);
        for _ in 0..30 {
            let rows = 2 + rng.gen_range(0..5);
            let cols = 2 + rng.gen_range(0..5);
            let a = gaussian_mat(&mut rng, rows, cols, 1.0);
            let b = gaussian_mat(&mut rng, rows, cols, 1.0);
            for kind in [NormKind::Frobenius, NormKind::Spectral, NormKind::Trace] {
                let lhs = inner(&a, &b).unwrap();
                let rhs = norm(&a, kind).unwrap()
                    * norm(&b, dual_norm_kind(kind).unwrap()).unwrap();
                assert!(lhs <= rhs + 1e-8, "holder violated for {kind:?}: {lhs} > {rhs}");
            }
        }
    }
}
