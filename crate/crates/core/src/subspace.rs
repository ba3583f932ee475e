//! Source principal subspace: the mean of the source latents and the top-k
//! right singular vectors of the centered source matrix.
//!
//! Coordinates of a latent `z` are `(z − μ)·V`, and a correction `p` moves a
//! latent by `p·Vᵀ`. Because `VᵀV = I`, shifting a latent by `p·Vᵀ` shifts its
//! coordinates by exactly `p` and leaves the orthogonal complement alone.

use crate::error::{Error, Result};
use crate::linalg::{self, matmul, sym_eig, Matrix};

/// Tolerance on `‖VᵀV − I‖_max` accepted when assembling a subspace from parts.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

/// Relative eigenvalue floor below which a fit is flagged rank deficient.
pub const RANK_DEFICIENCY_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalSubspace {
    mean: Vec<f64>,
    basis: Matrix,
    singular_values: Vec<f64>,
    source_count: usize,
    rank_deficient: bool,
}

impl PrincipalSubspace {
    /// Fits the subspace to the rows of `source` (N×D).
    ///
    /// The basis comes from the eigendecomposition of the raw scatter matrix
    /// `Z_cᵀZ_c` (not divided by N), so `singular_values[j] = √λ_j` are the
    /// singular values of `Z_c` itself. A fit whose k-th eigenvalue falls below
    /// `RANK_DEFICIENCY_RATIO · λ_1` succeeds but is flagged via
    /// [`rank_deficient`](Self::rank_deficient).
    pub fn fit(source: &Matrix, k: usize) -> Result<Self> {
        let (n, d) = (source.rows(), source.cols());
        if n < 2 {
            return Err(Error::contract(format!(
                "subspace fit needs at least 2 source rows, got {n}"
            )));
        }
        let max_k = (n - 1).min(d);
        if k == 0 || k > max_k {
            return Err(Error::contract(format!(
                "k = {k} outside 1..={max_k} (N = {n}, D = {d})"
            )));
        }

        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(source.row(i)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }

        let mut centered = Vec::with_capacity(n * d);
        for i in 0..n {
            centered.extend(source.row(i).iter().zip(&mean).map(|(v, m)| v - m));
        }
        let centered = Matrix::new(n, d, centered)?;
        let scatter = matmul(&centered.transpose(), &centered)?;
        let eig = sym_eig(&scatter, k)?;

        let lead = eig.values[0];
        let last = eig.values[k - 1];
        let rank_deficient = lead <= 0.0 || last < RANK_DEFICIENCY_RATIO * lead;
        let singular_values = eig.values.iter().map(|l| l.max(0.0).sqrt()).collect();

        Ok(Self {
            mean,
            basis: eig.vectors,
            singular_values,
            source_count: n,
            rank_deficient,
        })
    }

    /// Reassembles a subspace from stored parts, checking every invariant.
    pub fn from_parts(
        mean: Vec<f64>,
        basis: Matrix,
        singular_values: Vec<f64>,
        source_count: usize,
        rank_deficient: bool,
    ) -> Result<Self> {
        let (d, k) = (basis.rows(), basis.cols());
        if mean.len() != d {
            return Err(Error::contract(format!(
                "mean has length {}, basis has {d} rows",
                mean.len()
            )));
        }
        if k == 0 || singular_values.len() != k {
            return Err(Error::contract(format!(
                "{} singular values for a basis with {k} columns",
                singular_values.len()
            )));
        }
        if !linalg::all_finite(&mean) || !linalg::all_finite(&singular_values) {
            return Err(Error::contract("subspace parts contain non-finite values"));
        }
        if singular_values.iter().any(|s| *s < 0.0)
            || singular_values.windows(2).any(|w| w[0] < w[1])
        {
            return Err(Error::contract(
                "singular values must be non-negative and non-increasing",
            ));
        }
        let gram = matmul(&basis.transpose(), &basis)?;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram.get(i, j) - want).abs() >= ORTHONORMALITY_TOLERANCE {
                    return Err(Error::contract("basis columns are not orthonormal"));
                }
            }
        }
        Ok(Self {
            mean,
            basis,
            singular_values,
            source_count,
            rank_deficient,
        })
    }

    /// Latent dimension D.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Subspace dimension k.
    pub fn k(&self) -> usize {
        self.basis.cols()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// D×k matrix with orthonormal columns.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    /// Restriction to the leading `k` directions. Identical to refitting with
    /// the smaller `k` because the eigensolver always resolves the full
    /// spectrum before truncating.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(Error::contract(format!(
                "cannot truncate a {}-dimensional subspace to k = {k}",
                self.k()
            )));
        }
        let singular_values = self.singular_values[..k].to_vec();
        let last = singular_values[k - 1].powi(2);
        let lead = singular_values[0].powi(2);
        Ok(Self {
            mean: self.mean.clone(),
            basis: self.basis.leading_columns(k),
            singular_values,
            source_count: self.source_count,
            rank_deficient: lead <= 0.0 || last < RANK_DEFICIENCY_RATIO * lead,
        })
    }

    /// Subspace coordinates `(z − μ)·V`.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_latent(z)?;
        let centered = linalg::sub(z, &self.mean);
        self.basis.vec_mul(&centered)
    }

    /// `μ + p·Vᵀ`.
    pub fn reconstruct(&self, p: &[f64]) -> Result<Vec<f64>> {
        let offset = self.offset(p)?;
        Ok(linalg::add(&self.mean, &offset))
    }

    /// The corrected latent `z_t + p·Vᵀ`.
    pub fn apply_correction(&self, z_t: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.check_latent(z_t)?;
        let offset = self.offset(p)?;
        Ok(linalg::add(z_t, &offset))
    }

    fn offset(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.k() {
            return Err(Error::contract(format!(
                "coordinate vector has length {}, subspace has k = {}",
                p.len(),
                self.k()
            )));
        }
        self.basis.mul_vec(p)
    }

    fn check_latent(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::contract(format!(
                "latent has length {}, subspace has D = {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}
