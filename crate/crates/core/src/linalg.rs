//! Dense row-major matrices, slice-based vector helpers and a cyclic Jacobi
//! eigensolver for symmetric matrices.
//!
//! Everything here is deterministic: summation order is fixed and the
//! eigensolver returns sign-normalized eigenvectors, so repeated runs produce
//! bit-identical output.

use crate::error::{Error, Result};

/// Sweep cap for the Jacobi eigensolver.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Convergence threshold on the largest off-diagonal magnitude, relative to
/// the Frobenius norm of the input.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::contract(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("matrix entry {bad} is not finite")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::contract(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map(|c| c.as_ref().len()).unwrap_or(0);
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::contract(format!(
                    "column {j} has length {}, expected {rows}",
                    c.len()
                )));
            }
            for (i, v) in c.iter().enumerate() {
                m.data[i * cols + j] = *v;
            }
        }
        if let Some(bad) = m.data.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("matrix entry {bad} is not finite")));
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        let mut out = Matrix::zeros(self.rows, k);
        for i in 0..self.rows {
            out.data[i * k..(i + 1) * k].copy_from_slice(&self.row(i)[..k]);
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// `self · x` for a vector `x` of length `cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::contract(format!(
                "matrix-vector product: {}x{} matrix with vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `xᵀ · self` for a vector `x` of length `rows`.
    pub fn vec_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::contract(format!(
                "vector-matrix product: vector of length {} with {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        Ok(out)
    }
}

/// Matrix product with a fixed accumulation order: every output entry sums its
/// terms in ascending inner index.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::contract(format!(
            "matmul dimension mismatch: {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for l in 0..a.cols {
            let ail = a.data[i * a.cols + l];
            for (o, blj) in out.iter_mut().zip(b.row(l)) {
                *o += ail * blj;
            }
        }
    }
    Ok(c)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Eigenpairs of a symmetric matrix, sorted by non-increasing eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

/// Top-`k` eigenpairs of the symmetric matrix `s` by cyclic Jacobi rotation.
///
/// Iterates full sweeps over the upper triangle until the largest
/// off-diagonal magnitude drops to `JACOBI_TOLERANCE · ‖s‖_F` or
/// `MAX_JACOBI_SWEEPS` is reached. Eigenvalues come back non-increasing, with
/// equal values kept in their original diagonal order. Each eigenvector is
/// flipped so that its largest-magnitude component is positive; components
/// within a relative 1e-9 of the maximum count as tied and the lowest index
/// wins.
pub fn sym_eig(s: &Matrix, k: usize) -> Result<SymEigen> {
    if !s.is_square() {
        return Err(Error::contract(format!(
            "sym_eig requires a square matrix, got {}x{}",
            s.rows, s.cols
        )));
    }
    let n = s.rows;
    if k == 0 || k > n {
        return Err(Error::contract(format!(
            "sym_eig: k = {k} outside 1..={n}"
        )));
    }
    if !all_finite(&s.data) {
        return Err(Error::contract("sym_eig input has non-finite entries"));
    }
    let scale = s.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            let (aij, aji) = (s.get(i, j), s.get(j, i));
            if (aij - aji).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(Error::contract(format!(
                    "sym_eig input is not symmetric: s[{i},{j}] = {aij}, s[{j},{i}] = {aji}"
                )));
            }
        }
    }

    let mut a = s.data.clone();
    // Work on the exactly-symmetric average.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
    let mut v = Matrix::identity(n).data;
    let tol = JACOBI_TOLERANCE * s.frobenius_norm();

    let mut converged = false;
    let mut residual = max_off_diagonal(&a, n);
    for _ in 0..MAX_JACOBI_SWEEPS {
        if residual <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, n, p, q, c, sn);
            }
        }
        residual = max_off_diagonal(&a, n);
    }
    if !converged && residual > tol {
        return Err(Error::Convergence {
            sweeps: MAX_JACOBI_SWEEPS,
            residual,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable: equal eigenvalues keep diagonal order.
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));

    let values: Vec<f64> = order[..k].iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, k);
    for (col, &src) in order[..k].iter().enumerate() {
        let mut vec: Vec<f64> = (0..n).map(|r| v[r * n + src]).collect();
        fix_sign(&mut vec);
        for (r, x) in vec.into_iter().enumerate() {
            vectors.data[r * k + col] = x;
        }
    }
    Ok(SymEigen { values, vectors })
}

fn max_off_diagonal(a: &[f64], n: usize) -> f64 {
    let mut m = 0.0_f64;
    for p in 0..n {
        for q in (p + 1)..n {
            m = m.max(a[p * n + q].abs());
        }
    }
    m
}

#[allow(clippy::too_many_arguments)]
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    // A ← Pᵀ A P with P the (p, q) Givens rotation.
    for r in 0..n {
        let arp = a[r * n + p];
        let arq = a[r * n + q];
        a[r * n + p] = c * arp - s * arq;
        a[r * n + q] = s * arp + c * arq;
    }
    for r in 0..n {
        let apr = a[p * n + r];
        let aqr = a[q * n + r];
        a[p * n + r] = c * apr - s * aqr;
        a[q * n + r] = s * apr + c * aqr;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for r in 0..n {
        let vrp = v[r * n + p];
        let vrq = v[r * n + q];
        v[r * n + p] = c * vrp - s * vrq;
        v[r * n + q] = s * vrp + c * vrq;
    }
}

fn fix_sign(vec: &mut [f64]) {
    let max = vec.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let lead = vec
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    if vec[lead] < 0.0 {
        for x in vec.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
        assert_eq!(
            matmul(&a, &Matrix::zeros(2, 2)).unwrap(),
            Matrix::zeros(2, 2)
        );
        let b = m(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(
            matmul(&a, &b).unwrap(),
            m(&[&[19.0, 22.0], &[43.0, 50.0]])
        );
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &a), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_diagonal() {
        let e = sym_eig(&Matrix::diagonal(&[3.0, 2.0, 1.0]), 2).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0]);
        assert_eq!(e.vectors.column(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(e.vectors.column(1), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn eig_two_by_two_closed_form() {
        let e = sym_eig(&m(&[&[2.0, 1.0], &[1.0, 2.0]]), 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v0 = e.vectors.column(0);
        let v1 = e.vectors.column(1);
        assert!((v0[0] - h).abs() < 1e-14 && (v0[1] - h).abs() < 1e-14);
        assert!((v1[0] - h).abs() < 1e-14 && (v1[1] + h).abs() < 1e-14);
    }

    #[test]
    fn eig_zero_matrix() {
        let e = sym_eig(&Matrix::zeros(3, 3), 1).unwrap();
        assert_eq!(e.values, vec![0.0]);
        assert_eq!(e.vectors.column(0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn eig_rejects_asymmetric_and_bad_k() {
        let a = m(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(sym_eig(&a, 1), Err(Error::Contract(_))));
        let s = Matrix::identity(2);
        assert!(sym_eig(&s, 0).is_err());
        assert!(sym_eig(&s, 3).is_err());
    }

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::Rng::new(seed);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.normal();
                a.set(i, j, x);
                a.set(j, i, x);
            }
        }
        a
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn eig_orthonormal_and_reconstructs(n in 1usize..12, seed in any::<u64>()) {
            let s = random_symmetric(n, seed);
            let e = sym_eig(&s, n).unwrap();
            let vtv = matmul(&e.vectors.transpose(), &e.vectors).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((vtv.get(i, j) - want).abs() < 1e-9);
                }
            }
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let lambda = Matrix::diagonal(&e.values);
            let rec = matmul(&matmul(&e.vectors, &lambda).unwrap(), &e.vectors.transpose()).unwrap();
            let diff: f64 = rec.as_slice().iter().zip(s.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(diff / s.frobenius_norm().max(f64::MIN_POSITIVE) < 1e-8);
        }

        #[test]
        fn matmul_associative(seed in any::<u64>()) {
            let mut rng = crate::rng::Rng::new(seed);
            let mut gen = || Matrix::new(4, 4, (0..16).map(|_| rng.normal()).collect()).unwrap();
            let (a, b, c) = (gen(), gen(), gen());
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eig_is_bit_deterministic() {
        let s = random_symmetric(16, 7);
        assert_eq!(sym_eig(&s, 16).unwrap(), sym_eig(&s, 16).unwrap());
    }
}
