//! Synthetic latent-space tasks: an isotropic Gaussian mixture standing in for
//! source encoder features, its Bayes-optimal linear decoder, and controlled
//! mean/covariance shifts for the target domain.

use crate::decoder::LinearDecoder;
use crate::error::{Error, Result};
use crate::linalg::{self, matmul, Matrix};
use crate::rng::{derive_seed, Rng};

/// Defaults of the desk-scale benchmark task.
pub const DEFAULT_CLASSES: usize = 10;
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_RADIUS: f64 = 4.0;
pub const DEFAULT_STD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    class_means: Matrix,
    within_class_std: f64,
    seed: u64,
    min_separation: f64,
}

impl SyntheticTask {
    pub fn new(class_means: Matrix, within_class_std: f64, seed: u64) -> Result<Self> {
        let c = class_means.rows();
        if c < 2 || class_means.cols() == 0 {
            return Err(Error::contract("a task needs at least 2 classes and 1 dimension"));
        }
        if !(within_class_std >= 0.0 && within_class_std.is_finite()) {
            return Err(Error::contract(format!(
                "within-class std {within_class_std} must be finite and non-negative"
            )));
        }
        let mut min_separation = f64::INFINITY;
        for a in 0..c {
            for b in (a + 1)..c {
                let d = linalg::norm(&linalg::sub(class_means.row(a), class_means.row(b)));
                min_separation = min_separation.min(d);
            }
        }
        if min_separation == 0.0 {
            return Err(Error::contract("class means must be pairwise distinct"));
        }
        Ok(Self {
            class_means,
            within_class_std,
            seed,
            min_separation,
        })
    }

    /// Class means drawn uniformly on the sphere of the given radius.
    pub fn on_sphere(classes: usize, dim: usize, radius: f64, std: f64, seed: u64) -> Result<Self> {
        let mut rng = Rng::new(derive_seed(seed, 0));
        let rows: Vec<Vec<f64>> = (0..classes)
            .map(|_| random_direction(&mut rng, dim).into_iter().map(|x| x * radius).collect())
            .collect();
        Self::new(Matrix::from_rows(&rows)?, std, seed)
    }

    /// 10 classes in 64 dimensions, means on the radius-4 sphere, unit noise.
    pub fn default_task(seed: u64) -> Result<Self> {
        Self::on_sphere(DEFAULT_CLASSES, DEFAULT_DIM, DEFAULT_RADIUS, DEFAULT_STD, seed)
    }

    pub fn class_count(&self) -> usize {
        self.class_means.rows()
    }

    pub fn dim(&self) -> usize {
        self.class_means.cols()
    }

    pub fn class_means(&self) -> &Matrix {
        &self.class_means
    }

    pub fn within_class_std(&self) -> f64 {
        self.within_class_std
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// `n_per_class` draws per class, class-major, from stream 0.
    pub fn gen_source(&self, n_per_class: usize) -> Result<(Matrix, Vec<u32>)> {
        self.sample(n_per_class, 0)
    }

    /// Like [`gen_source`](Self::gen_source) but from an independent numbered
    /// stream, so train and test splits never share noise.
    pub fn sample(&self, n_per_class: usize, stream: u64) -> Result<(Matrix, Vec<u32>)> {
        if n_per_class == 0 {
            return Err(Error::contract("n_per_class must be at least 1"));
        }
        let mut rng = Rng::new(derive_seed(self.seed, stream + 1));
        let (c, d) = (self.class_count(), self.dim());
        let mut data = Vec::with_capacity(c * n_per_class * d);
        let mut labels = Vec::with_capacity(c * n_per_class);
        for class in 0..c {
            let mean = self.class_means.row(class);
            for _ in 0..n_per_class {
                data.extend(mean.iter().map(|m| m + self.within_class_std * rng.normal()));
                labels.push(class as u32);
            }
        }
        Ok((Matrix::new(c * n_per_class, d, data)?, labels))
    }

    /// Posterior log-odds decoder for equal isotropic class covariances:
    /// `W_c = μ_c / s²`, `b_c = −‖μ_c‖² / (2s²)`.
    pub fn make_decoder(&self) -> Result<LinearDecoder> {
        let s2 = self.within_class_std * self.within_class_std;
        if s2 == 0.0 {
            return Err(Error::contract("decoder needs a positive within-class std"));
        }
        let (c, d) = (self.class_count(), self.dim());
        let mut weights = Matrix::zeros(c, d);
        let mut bias = Vec::with_capacity(c);
        for class in 0..c {
            let mean = self.class_means.row(class);
            for (j, m) in mean.iter().enumerate() {
                weights.set(class, j, m / s2);
            }
            bias.push(-linalg::dot(mean, mean) / (2.0 * s2));
        }
        LinearDecoder::new(weights, bias)
    }
}

fn random_direction(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let g = rng.normal_vec(dim);
        let n = linalg::norm(&g);
        if n > 1e-12 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Haar-random orthogonal matrix: modified Gram–Schmidt on a Gaussian matrix.
fn random_orthogonal(rng: &mut Rng, dim: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = rng.normal_vec(dim);
        for q in &cols {
            let proj = linalg::dot(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        let n = linalg::norm(&v);
        if n > 1e-8 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Matrix::from_columns(&cols).expect("orthonormal columns are finite")
}

/// A target-domain distortion: deviations from the source mean are mapped by
/// `A` and the centroid moves by `Δμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    pub mean_shift: Vec<f64>,
    pub covariance_transform: Matrix,
    pub label: String,
}

impl ShiftSpec {
    pub fn identity(dim: usize, label: impl Into<String>) -> Self {
        Self {
            mean_shift: vec![0.0; dim],
            covariance_transform: Matrix::identity(dim),
            label: label.into(),
        }
    }
}

/// Maps every row `z` to `A·(z − μ_s) + μ_s + Δμ`.
pub fn apply_shift(features: &Matrix, source_mean: &[f64], spec: &ShiftSpec) -> Result<Matrix> {
    let d = features.cols();
    let a = &spec.covariance_transform;
    if source_mean.len() != d || spec.mean_shift.len() != d || a.rows() != d || a.cols() != d {
        return Err(Error::contract(format!(
            "shift '{}' does not match feature dimension {d}",
            spec.label
        )));
    }
    let mut out = Vec::with_capacity(features.rows() * d);
    if *a == Matrix::identity(d) {
        // Pure translation; exact, and the identity when Δμ = 0.
        for i in 0..features.rows() {
            out.extend(features.row(i).iter().zip(&spec.mean_shift).map(|(z, dm)| z + dm));
        }
        return Matrix::new(features.rows(), d, out);
    }
    for i in 0..features.rows() {
        let dev = linalg::sub(features.row(i), source_mean);
        let mapped = a.mul_vec(&dev)?;
        out.extend(
            mapped
                .iter()
                .zip(source_mean)
                .zip(&spec.mean_shift)
                .map(|((m, mu), dm)| m + mu + dm),
        );
    }
    Matrix::new(features.rows(), d, out)
}

/// Preset shifts `mean-only`, `cov-only` and `combined`.
///
/// The mean shift points in a uniformly random direction with norm
/// `severity·√D·std`. The covariance transform is `Q·diag(s)·Qᵀ` for a random
/// orthogonal `Q`, with log-uniform scales `s_i ∈ [1/(1+severity), 1+severity]`.
/// `combined` uses both. Severity 0 gives three identity shifts.
pub fn preset_shifts(dim: usize, severity: f64, std: f64, seed: u64) -> Result<Vec<ShiftSpec>> {
    if !(severity >= 0.0 && severity.is_finite()) {
        return Err(Error::contract(format!("severity {severity} must be finite and >= 0")));
    }
    if dim == 0 {
        return Err(Error::contract("dimension must be at least 1"));
    }
    let mut rng = Rng::new(derive_seed(seed, 0x5417));
    let dir = random_direction(&mut rng, dim);
    let norm = severity * (dim as f64).sqrt() * std;
    let mean_shift: Vec<f64> = dir.iter().map(|x| x * norm).collect();

    let q = random_orthogonal(&mut rng, dim);
    let log_top = (1.0 + severity).ln();
    let scales: Vec<f64> = (0..dim)
        .map(|_| ((2.0 * rng.uniform() - 1.0) * log_top).exp())
        .collect();
    let transform = if severity == 0.0 {
        Matrix::identity(dim)
    } else {
        matmul(&matmul(&q, &Matrix::diagonal(&scales))?, &q.transpose())?
    };

    Ok(vec![
        ShiftSpec {
            mean_shift: mean_shift.clone(),
            covariance_transform: Matrix::identity(dim),
            label: "mean-only".into(),
        },
        ShiftSpec {
            mean_shift: vec![0.0; dim],
            covariance_transform: transform.clone(),
            label: "cov-only".into(),
        },
        ShiftSpec {
            mean_shift,
            covariance_transform: transform,
            label: "combined".into(),
        },
    ])
}
