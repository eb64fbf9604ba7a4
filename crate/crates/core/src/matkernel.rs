//! Minimal dense complex Hermitian linear-algebra kernel.
//!
//! Everything the detector needs reduces to complex GEMM plus Cholesky
//! factorizations of Hermitian positive definite matrices. Eigenvalues of
//! Hermitian matrices (used for matrix square roots and spectral checks)
//! are delegated to `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c));
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

/// Matrix product with optional adjoints applied to either factor.
pub fn gemm(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    adjoint_a: bool,
    adjoint_b: bool,
) -> Result<ComplexMatrix> {
    let (m, ka) = if adjoint_a {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let (kb, n) = if adjoint_b {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    if ka != kb {
        return Err(Error::Dimension(format!(
            "gemm inner dimensions {ka} and {kb} do not conform"
        )));
    }
    let k = ka;
    let mut c = ComplexMatrix::zeros(m, n);
    match (adjoint_a, adjoint_b) {
        (false, false) => {
            // C[i,j] = sum_k A[i,k] B[k,j]; inner loop over j is contiguous.
            for i in 0..m {
                for p in 0..k {
                    let av = a.data[i * a.cols + p];
                    let brow = &b.data[p * b.cols..p * b.cols + n];
                    let crow = &mut c.data[i * n..(i + 1) * n];
                    for (cv, bv) in crow.iter_mut().zip(brow) {
                        *cv += av * bv;
                    }
                }
            }
        }
        (false, true) => {
            // C[i,j] = sum_k A[i,k] conj(B[j,k]); both rows contiguous.
            for i in 0..m {
                let arow = &a.data[i * a.cols..i * a.cols + k];
                for j in 0..n {
                    let brow = &b.data[j * b.cols..j * b.cols + k];
                    let mut s = Complex64::new(0.0, 0.0);
                    for (av, bv) in arow.iter().zip(brow) {
                        s += av * bv.conj();
                    }
                    c.data[i * n + j] = s;
                }
            }
        }
        (true, false) => {
            // C[i,j] = sum_k conj(A[k,i]) B[k,j].
            for p in 0..k {
                for i in 0..m {
                    let av = a.data[p * a.cols + i].conj();
                    let brow = &b.data[p * b.cols..p * b.cols + n];
                    let crow = &mut c.data[i * n..(i + 1) * n];
                    for (cv, bv) in crow.iter_mut().zip(brow) {
                        *cv += av * bv;
                    }
                }
            }
        }
        (true, true) => {
            // A* B* = (B A)*.
            let ba = gemm(b, a, false, false)?;
            c = ba.adjoint();
        }
    }
    Ok(c)
}

/// Hermitian matrix; constructed by symmetrizing a general square matrix.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

/// Relative asymmetry allowed when constructing a `HermitianMatrix`.
const HERMITIAN_TOL: f64 = 1e-12;

impl HermitianMatrix {
    /// Symmetrizes `(A + A*)/2`; rejects input whose asymmetry exceeds
    /// `1e-12` relative to its Frobenius norm.
    pub fn from_matrix(a: &ComplexMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Dimension(format!(
                "hermitian matrix must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let norm = a.frobenius_norm().max(1.0);
        let mut asym = 0.0f64;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let v = a.get(i, j);
                let w = a.get(j, i).conj();
                asym += 0.25 * (v - w).norm_sqr();
                data[i * n + j] = 0.5 * (v + w);
            }
        }
        if asym.sqrt() > HERMITIAN_TOL * norm {
            return Err(Error::Precondition(format!(
                "matrix asymmetry {:.3e} exceeds {:.0e} relative",
                asym.sqrt() / norm,
                HERMITIAN_TOL
            )));
        }
        Ok(Self { dim: n, data })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(&ComplexMatrix::identity(n)).unwrap()
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_matrix(&ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
        .unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn as_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    fn cholesky(&self) -> Result<Vec<Complex64>> {
        let n = self.dim;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(l)
    }

    fn eigen(&self) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
        let m = self.as_matrix().to_nalgebra();
        let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(Error::Eigen)?;
        let mut idx: Vec<usize> = (0..self.dim).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(self.dim, self.dim, |i, j| eig.eigenvectors[(i, idx[j])]);
        Ok((vals, vecs))
    }

    /// Applies `f` to the eigenvalues and reassembles `U f(D) U*`.
    fn spectral_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<ComplexMatrix> {
        let (vals, vecs) = self.eigen()?;
        let n = self.dim;
        let mut fd = Vec::with_capacity(n);
        for &v in &vals {
            fd.push(f(v)?);
        }
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += vecs[(i, k)] * fd[k] * vecs[(j, k)].conj();
                }
                out.set(i, j, s);
            }
        }
        Ok(out)
    }

    /// Symmetric square root `A^{1/2}` of a positive definite matrix.
    pub fn sqrt_hpd(&self) -> Result<ComplexMatrix> {
        self.spectral_map(|v| {
            if v <= 0.0 {
                Err(Error::NotPositiveDefinite { index: 0, pivot: v })
            } else {
                Ok(v.sqrt())
            }
        })
    }

    /// Symmetric inverse square root `A^{-1/2}` of a positive definite matrix.
    pub fn inv_sqrt_hpd(&self) -> Result<ComplexMatrix> {
        self.spectral_map(|v| {
            if v <= 0.0 {
                Err(Error::NotPositiveDefinite { index: 0, pivot: v })
            } else {
                Ok(1.0 / v.sqrt())
            }
        })
    }

    /// Lower Cholesky factor `G` with `G G* = A`.
    pub fn cholesky_factor(&self) -> Result<ComplexMatrix> {
        let l = self.cholesky()?;
        let n = self.dim;
        Ok(ComplexMatrix::from_fn(n, n, |i, j| l[i * n + j]))
    }
}

/// `log det A` of a Hermitian positive definite matrix via Cholesky.
pub fn logdet_hpd(a: &HermitianMatrix) -> Result<f64> {
    let l = a.cholesky()?;
    let n = a.dim;
    Ok((0..n).map(|j| 2.0 * l[j * n + j].re.ln()).sum())
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &HermitianMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.dim;
    if b.rows() != n {
        return Err(Error::Dimension(format!(
            "solve_hpd: A is {n}x{n} but B has {} rows",
            b.rows()
        )));
    }
    let l = a.cholesky()?;
    let ncols = b.cols();
    let mut x = b.clone();
    // Forward substitution L y = b, column by column.
    for c in 0..ncols {
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l[i * n + k] * x.get(k, c);
            }
            x.set(i, c, s / l[i * n + i].re);
        }
        // Back substitution L* x = y.
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in (i + 1)..n {
                s -= l[k * n + i].conj() * x.get(k, c);
            }
            x.set(i, c, s / l[i * n + i].re);
        }
    }
    Ok(x)
}

/// Ascending real eigenvalues of a Hermitian matrix.
pub fn eigvalsh(a: &HermitianMatrix) -> Result<Vec<f64>> {
    Ok(a.eigen()?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    fn random_hpd(rng: &mut StdRng, n: usize) -> HermitianMatrix {
        let b = random_matrix(rng, n, n);
        let g = gemm(&b, &b, false, true).unwrap();
        HermitianMatrix::from_matrix(&g.add(&ComplexMatrix::identity(n))).unwrap()
    }

    #[test]
    fn gemm_identity() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 2, 3);
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(gemm(&i2, &a, false, false).unwrap(), a);
    }

    #[test]
    fn gemm_adjoint_row_vector() {
        // A = [1 i]; A* A = [[1, i], [-i, 1]].
        let a = ComplexMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.0, 1.0)]]);
        let p = gemm(&a, &a, true, false).unwrap();
        assert_eq!(p.get(0, 0), c(1.0, 0.0));
        assert_eq!(p.get(0, 1), c(0.0, 1.0));
        assert_eq!(p.get(1, 0), c(0.0, -1.0));
        assert_eq!(p.get(1, 1), c(1.0, 0.0));
    }

    #[test]
    fn gemm_zero_annihilates() {
        let mut rng = StdRng::seed_from_u64(2);
        let b = random_matrix(&mut rng, 3, 4);
        let z = ComplexMatrix::zeros(2, 3);
        let p = gemm(&z, &b, false, false).unwrap();
        assert_eq!(p.frobenius_norm(), 0.0);
    }

    #[test]
    fn gemm_dimension_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(4, 2);
        assert!(matches!(
            gemm(&a, &b, false, false),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn gemm_associativity() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 10, 10);
        let b = random_matrix(&mut rng, 10, 10);
        let cm = random_matrix(&mut rng, 10, 10);
        let ab_c = gemm(&gemm(&a, &b, false, false).unwrap(), &cm, false, false).unwrap();
        let a_bc = gemm(&a, &gemm(&b, &cm, false, false).unwrap(), false, false).unwrap();
        let rel = ab_c.sub(&a_bc).frobenius_norm() / ab_c.frobenius_norm();
        assert!(rel < 1e-10, "associativity violated: {rel}");
    }

    #[test]
    fn gemm_double_adjoint() {
        let mut rng = StdRng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 4, 6);
        let b = random_matrix(&mut rng, 5, 4);
        let lhs = gemm(&a, &b, true, true).unwrap();
        let rhs = gemm(&a.adjoint(), &b.adjoint(), false, false).unwrap();
        assert!(lhs.sub(&rhs).frobenius_norm() < 1e-12);
    }

    #[test]
    fn adjoint_involution() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 3, 7);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn hermitian_rejects_asymmetric() {
        let a = ComplexMatrix::from_rows(vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        assert!(matches!(
            HermitianMatrix::from_matrix(&a),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn logdet_identity_is_zero() {
        let i5 = HermitianMatrix::identity(5);
        assert_abs_diff_eq!(logdet_hpd(&i5).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn logdet_diagonal() {
        let d = HermitianMatrix::from_real_diagonal(&[2.0, 3.0]);
        assert_abs_diff_eq!(logdet_hpd(&d).unwrap(), 6.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn logdet_matches_eigenvalue_sum() {
        let mut rng = StdRng::seed_from_u64(6);
        let a = random_hpd(&mut rng, 12);
        let ld = logdet_hpd(&a).unwrap();
        let sum: f64 = eigvalsh(&a).unwrap().iter().map(|v| v.ln()).sum();
        assert_abs_diff_eq!(ld, sum, epsilon = 1e-9);
    }

    #[test]
    fn logdet_rejects_indefinite() {
        let d = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            logdet_hpd(&d),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn solve_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        let b = random_matrix(&mut rng, 4, 2);
        let x = solve_hpd(&HermitianMatrix::identity(4), &b).unwrap();
        assert!(x.sub(&b).frobenius_norm() < 1e-14);
    }

    #[test]
    fn solve_diagonal() {
        let a = HermitianMatrix::from_real_diagonal(&[2.0, 4.0]);
        let b = ComplexMatrix::from_rows(vec![vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]]);
        let x = solve_hpd(&a, &b).unwrap();
        assert_abs_diff_eq!(x.get(0, 0).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x.get(1, 0).re, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn solve_residual_small() {
        let mut rng = StdRng::seed_from_u64(8);
        let a = random_hpd(&mut rng, 20);
        let b = random_matrix(&mut rng, 20, 3);
        let x = solve_hpd(&a, &b).unwrap();
        let r = gemm(&a.as_matrix(), &x, false, false).unwrap().sub(&b);
        assert!(r.frobenius_norm() / b.frobenius_norm() < 1e-9);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let mut rng = StdRng::seed_from_u64(9);
        let a = random_hpd(&mut rng, 15);
        let x_true = random_matrix(&mut rng, 15, 2);
        let b = gemm(&a.as_matrix(), &x_true, false, false).unwrap();
        let x = solve_hpd(&a, &b).unwrap();
        let rel = x.sub(&x_true).frobenius_norm() / x_true.frobenius_norm();
        assert!(rel < 1e-8, "recovery error {rel}");
    }

    #[test]
    fn eigvalsh_identity() {
        let vals = eigvalsh(&HermitianMatrix::identity(3)).unwrap();
        for v in vals {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigvalsh_2x2() {
        let a = ComplexMatrix::from_rows(vec![
            vec![c(2.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(2.0, 0.0)],
        ]);
        let vals = eigvalsh(&HermitianMatrix::from_matrix(&a).unwrap()).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigvalsh_spectral_reconstruction() {
        // Build U diag(d) U* from a random unitary (QR-free: use eigvecs of a
        // random Hermitian matrix) and check the spectrum comes back sorted.
        let mut rng = StdRng::seed_from_u64(10);
        let seed = random_hpd(&mut rng, 8);
        let (_, u) = seed.eigen().unwrap();
        let d: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() * 5.0 + 0.1).collect();
        let n = 8;
        let a = ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| u[(i, k)] * d[k] * u[(j, k)].conj()).sum()
        });
        let vals = eigvalsh(&HermitianMatrix::from_matrix(&a).unwrap()).unwrap();
        let mut expect = d.clone();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (v, e) in vals.iter().zip(&expect) {
            assert_abs_diff_eq!(v, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn eigvalsh_trace_consistency() {
        let mut rng = StdRng::seed_from_u64(11);
        let a = random_hpd(&mut rng, 9);
        let sum: f64 = eigvalsh(&a).unwrap().iter().sum();
        let tr = a.trace();
        assert!((sum - tr).abs() <= 1e-9 * tr.abs().max(1.0));
    }

    #[test]
    fn inv_sqrt_round_trip() {
        let mut rng = StdRng::seed_from_u64(12);
        let a = random_hpd(&mut rng, 6);
        let s = a.inv_sqrt_hpd().unwrap();
        let p = gemm(&gemm(&s, &a.as_matrix(), false, false).unwrap(), &s, false, false).unwrap();
        let rel = p.sub(&ComplexMatrix::identity(6)).frobenius_norm();
        assert!(rel < 1e-10, "A^{{-1/2}} A A^{{-1/2}} != I: {rel}");
    }

    #[test]
    fn cholesky_factor_reconstructs() {
        let mut rng = StdRng::seed_from_u64(13);
        let a = random_hpd(&mut rng, 7);
        let g = a.cholesky_factor().unwrap();
        let p = gemm(&g, &g, false, true).unwrap();
        let rel = p.sub(&a.as_matrix()).frobenius_norm() / a.as_matrix().frobenius_norm();
        assert!(rel < 1e-12);
    }
}
