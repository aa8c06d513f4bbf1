//! Dense complex-matrix routines for the small Hermitian systems that appear
//! throughout the simulator: spatial correlation matrices, pilot correlation
//! matrices and LSFD weighting systems.
//!
//! Matrices are stored column-major in a flat buffer. All dimensions here are
//! small (antenna blocks of size N, per-UE decoding blocks of size |M_k|), so
//! plain O(n^3) kernels with tight loops are the right tool.

use num_complex::Complex64;

pub type C64 = Complex64;

/// Dense complex matrix, column-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// `self += factor * other`, matching shapes required.
    pub fn add_scaled(&mut self, other: &CMatrix, factor: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diagonal(&mut self, value: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += value;
        }
    }

    pub fn trace(&self) -> C64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn conj_transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Hermitian check within an absolute entrywise tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for j in 0..self.cols {
            for i in 0..=j {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b.norm_sqr() == 0.0 {
                    continue;
                }
                let a_col = &self.data[k * self.rows..(k + 1) * self.rows];
                let out_col = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (o, a) in out_col.iter_mut().zip(a_col) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `out = self * x` for a vector `x`.
    pub fn mul_vec(&self, x: &[C64], out: &mut [C64]) {
        assert_eq!(self.cols, x.len());
        assert_eq!(self.rows, out.len());
        out.fill(C64::new(0.0, 0.0));
        for (k, xv) in x.iter().enumerate() {
            let col = &self.data[k * self.rows..(k + 1) * self.rows];
            for (o, a) in out.iter_mut().zip(col) {
                *o += a * xv;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

/// tr(A * B) without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    assert_eq!(a.cols(), b.rows());
    assert_eq!(b.cols(), a.rows());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Inner product `sum conj(a_i) b_i`.
#[inline]
pub fn conj_dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Cholesky factor L of a Hermitian positive-definite matrix, A = L L^H.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: CMatrix,
    min_pivot: f64,
    max_pivot: f64,
}

impl CholeskyFactor {
    /// Fails when a pivot is not strictly positive.
    pub fn new(a: &CMatrix) -> Option<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut l = CMatrix::zeros(n, n);
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for j in 0..n {
            let mut sum = a[(j, j)].re;
            for k in 0..j {
                sum -= l[(j, k)].norm_sqr();
            }
            if !(sum > 0.0) || !sum.is_finite() {
                return None;
            }
            let piv = sum.sqrt();
            min_pivot = min_pivot.min(piv);
            max_pivot = max_pivot.max(piv);
            l[(j, j)] = C64::new(piv, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / piv;
            }
        }
        Some(Self {
            l,
            min_pivot,
            max_pivot,
        })
    }

    /// Ratio of the extreme pivots; small values flag near-singularity.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.l.rows();
        assert_eq!(x.len(), n);
        // forward: L y = b
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)].re;
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)].conj() * x[k];
            }
            x[i] = s / self.l[(i, i)].re;
        }
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves A X = B column by column.
    pub fn solve_mat(&self, b: &CMatrix) -> CMatrix {
        let mut out = b.clone();
        let rows = out.rows();
        for j in 0..out.cols() {
            let col = &mut out.data_mut()[j * rows..(j + 1) * rows];
            self.solve_in_place(col);
        }
        out
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve_mat(&CMatrix::identity(self.l.rows()))
    }
}

/// Pivot-ratio threshold below which a factorization counts as singular
/// (condition number beyond ~1e12).
const PIVOT_RATIO_FLOOR: f64 = 1e-6;

/// Factors a Hermitian PSD matrix, adding a ridge `1e-12 * trace/dim`
/// (escalated if needed) whenever the plain factorization fails or is
/// numerically singular. Returns the factor and the ridge that was used.
pub fn factor_hermitian_guarded(a: &CMatrix) -> (CholeskyFactor, f64) {
    if let Some(f) = CholeskyFactor::new(a) {
        if f.pivot_ratio() > PIVOT_RATIO_FLOOR {
            return (f, 0.0);
        }
    }
    let n = a.rows();
    let scale = (a.trace().re / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut ridge = 1e-12 * scale;
    for _ in 0..20 {
        let mut shifted = a.clone();
        shifted.add_diagonal(ridge);
        if let Some(f) = CholeskyFactor::new(&shifted) {
            if f.pivot_ratio() > PIVOT_RATIO_FLOOR {
                return (f, ridge);
            }
        }
        ridge *= 100.0;
    }
    // Last resort: a ridge comparable to the trace always factors.
    let mut shifted = a.clone();
    shifted.add_diagonal(scale);
    let f = CholeskyFactor::new(&shifted).expect("trace-level ridge must factor");
    (f, scale)
}

/// Regularized Hermitian inverse; returns the inverse and the ridge used.
pub fn hermitian_inverse_guarded(a: &CMatrix) -> (CMatrix, f64) {
    let (f, ridge) = factor_hermitian_guarded(a);
    (f.inverse(), ridge)
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns, so that `A = V diag(lambda) V^H`.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut w = a.clone();
    let mut v = CMatrix::identity(n);
    let scale = w.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for q in 0..n {
            for p in 0..q {
                off += w[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for q in 0..n {
            for p in 0..q {
                let apq = w[(p, q)];
                let m = apq.norm();
                if m <= tol / (n as f64) {
                    continue;
                }
                let phase = apq / m;
                let app = w[(p, p)].re;
                let aqq = w[(q, q)].re;
                let tau = (aqq - app) / (2.0 * m);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let spe = phase * s; // s*e^{i phi}
                // right multiply: W <- W J, V <- V J
                for r in 0..n {
                    let wp = w[(r, p)];
                    let wq = w[(r, q)];
                    w[(r, p)] = wp * c - wq * spe.conj();
                    w[(r, q)] = wp * spe + wq * c;
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * c - vq * spe.conj();
                    v[(r, q)] = vp * spe + vq * c;
                }
                // left multiply: W <- J^H W
                for r in 0..n {
                    let wp = w[(p, r)];
                    let wq = w[(q, r)];
                    w[(p, r)] = wp * c - wq * spe;
                    w[(q, r)] = wp * spe.conj() + wq * c;
                }
                w[(p, q)] = C64::new(0.0, 0.0);
                w[(q, p)] = C64::new(0.0, 0.0);
                w[(p, p)] = C64::new(w[(p, p)].re, 0.0);
                w[(q, q)] = C64::new(w[(q, q)].re, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].re.partial_cmp(&w[(j, j)].re).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| w[(i, i)].re).collect();
    let eigvecs = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (eigvals, eigvecs)
}

/// Factor F of a Hermitian PSD matrix with `F F^H = A`; negative eigenvalues
/// from roundoff are clamped to zero. Columns are scaled eigenvectors.
pub fn psd_factor(a: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(a);
    let n = a.rows();
    CMatrix::from_fn(n, n, |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = crate::rng::derive_rng(seed, &[0xABCD]);
        let g = CMatrix::from_fn(n, n, |_, _| crate::rng::complex_gaussian(&mut rng));
        let mut a = g.mul(&g.conj_transpose());
        a.add_diagonal(0.5);
        a
    }

    #[test]
    fn cholesky_solves_known_system() {
        // A = [[4, 2i], [-2i, 3]] (Hermitian PD), b = [2, 1].
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = C64::new(4.0, 0.0);
        a[(0, 1)] = C64::new(0.0, 2.0);
        a[(1, 0)] = C64::new(0.0, -2.0);
        a[(1, 1)] = C64::new(3.0, 0.0);
        let f = CholeskyFactor::new(&a).unwrap();
        let x = f.solve_vec(&[C64::new(2.0, 0.0), C64::new(1.0, 0.0)]);
        // verify A x = b
        let mut b = vec![C64::new(0.0, 0.0); 2];
        a.mul_vec(&x, &mut b);
        assert!((b[0] - C64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((b[1] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = CMatrix::identity(2);
        a[(1, 1)] = C64::new(-1.0, 0.0);
        assert!(CholeskyFactor::new(&a).is_none());
    }

    #[test]
    fn inverse_matches_identity() {
        let a = random_hermitian(5, 7);
        let f = CholeskyFactor::new(&a).unwrap();
        let inv = f.inverse();
        let prod = a.mul(&inv);
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigen_two_by_two_analytic() {
        // [[1, rho], [conj(rho), 1]] has eigenvalues 1 +- |rho|.
        let rho = C64::new(0.3, 0.4); // |rho| = 0.5
        let mut a = CMatrix::identity(2);
        a[(0, 1)] = rho;
        a[(1, 0)] = rho.conj();
        let (vals, vecs) = hermitian_eigen(&a);
        assert!(approx(vals[0], 0.5, 1e-12));
        assert!(approx(vals[1], 1.5, 1e-12));
        // reconstruction
        let lam = CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(vals[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let rec = vecs.mul(&lam).mul(&vecs.conj_transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec[(i, j)] - a[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let a = random_hermitian(6, 3);
        let (vals, vecs) = hermitian_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        // V unitary
        let vhv = vecs.conj_transpose().mul(&vecs);
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vhv[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
        let lam = CMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                C64::new(vals[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let rec = vecs.mul(&lam).mul(&vecs.conj_transpose());
        let mut diff = rec.clone();
        diff.add_scaled(&a, -1.0);
        assert!(diff.frobenius_norm() < 1e-9 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn psd_factor_reproduces_matrix() {
        let a = random_hermitian(4, 11);
        let f = psd_factor(&a);
        let rec = f.mul(&f.conj_transpose());
        let mut diff = rec;
        diff.add_scaled(&a, -1.0);
        assert!(diff.frobenius_norm() < 1e-9 * a.frobenius_norm());
    }

    #[test]
    fn psd_factor_rank_one() {
        // R = u u^H has a factor with a single nonzero column.
        let u = [C64::new(1.0, 0.5), C64::new(-0.3, 0.2), C64::new(0.0, 1.0)];
        let a = CMatrix::from_fn(3, 3, |i, j| u[i] * u[j].conj());
        let f = psd_factor(&a);
        // Spurious eigenvalues from roundoff sit at the 1e-16 * trace level.
        let floor = 1e-12 * a.trace().re;
        let mut nonzero_cols = 0;
        for j in 0..3 {
            let norm: f64 = f.column(j).iter().map(|v| v.norm_sqr()).sum();
            if norm > floor {
                nonzero_cols += 1;
            }
        }
        assert_eq!(nonzero_cols, 1);
    }

    #[test]
    fn trace_product_matches_full_product() {
        let a = random_hermitian(4, 21);
        let b = random_hermitian(4, 22);
        let direct = a.mul(&b).trace();
        let fast = trace_product(&a, &b);
        assert!((direct - fast).norm() < 1e-10);
    }

    #[test]
    fn guarded_factor_handles_singular() {
        // Rank-deficient PSD matrix.
        let u = [C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
        let a = CMatrix::from_fn(2, 2, |i, j| u[i] * u[j].conj());
        let (f, ridge) = factor_hermitian_guarded(&a);
        assert!(ridge > 0.0);
        let x = f.solve_vec(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        assert!(x.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    }
}
