//! (μ/μ_w, λ)-CMA-ES with an ask/tell interface and a fixed-budget driver.
//!
//! Strategy constants are the standard defaults: log-linear positive
//! recombination weights, cumulative step-size adaptation, and a combined
//! rank-one / rank-μ covariance update. The search always starts at the
//! origin with identity covariance.

use crate::error::{Error, Result};
use crate::linalg::{self, sym_eig, Matrix, SymEigen};
use crate::rng::Rng;

/// `4 + ⌊3 ln k⌋`.
pub fn default_lambda(k: usize) -> usize {
    assert!(k >= 1, "dimension must be at least 1");
    4 + (3.0 * (k as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaEsParams {
    pub dim: usize,
    pub population: usize,
    pub parent_count: usize,
    /// Positive, strictly decreasing, summing to one.
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// E‖N(0, I)‖ approximation used by step-size control.
    pub chi_n: f64,
    pub initial_sigma: f64,
    pub seed: u64,
}

impl CmaEsParams {
    /// Default strategy constants for `dim` with population `λ` (`None` for
    /// [`default_lambda`]).
    pub fn new(dim: usize, population: Option<usize>, initial_sigma: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("CMA-ES dimension must be at least 1"));
        }
        let lambda = population.unwrap_or_else(|| default_lambda(dim));
        if lambda < 2 {
            return Err(Error::contract(format!("population {lambda} < 2")));
        }
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let n = dim as f64;
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        let params = Self {
            dim,
            population: lambda,
            parent_count: mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            initial_sigma,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.population < 2 {
            return Err(Error::contract("CMA-ES needs dim >= 1 and population >= 2"));
        }
        if self.parent_count == 0
            || self.parent_count > self.population
            || self.weights.len() != self.parent_count
        {
            return Err(Error::contract("parent count and weights disagree with population"));
        }
        if self.weights.iter().any(|w| *w <= 0.0)
            || self.weights.windows(2).any(|w| w[0] <= w[1])
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::contract(
                "recombination weights must be positive, strictly decreasing and sum to 1",
            ));
        }
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        // c_mu is exactly 0 when μ = 1 (λ ∈ {2, 3}); no rank-μ update then.
        if !in_unit(self.c_sigma)
            || !in_unit(self.c_c)
            || !in_unit(self.c_1)
            || !(0.0..=1.0).contains(&self.c_mu)
            || self.c_1 + self.c_mu > 1.0
        {
            return Err(Error::contract("CMA-ES learning rates out of range"));
        }
        if self.d_sigma < 1.0 {
            return Err(Error::contract("d_sigma must be at least 1"));
        }
        if !(self.initial_sigma.is_finite() && self.initial_sigma > 0.0) {
            return Err(Error::contract(format!(
                "initial sigma {} must be positive and finite",
                self.initial_sigma
            )));
        }
        Ok(())
    }
}

/// Search distribution and evolution paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaEsState {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub covariance: Matrix,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub generation: u64,
    rng: Rng,
    /// `(x, y)` pairs from the last `ask`, with `x = m + σ·y`.
    asked: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Ask/tell optimizer driven by [`run`].
pub trait AskTell {
    fn dim(&self) -> usize;
    fn population(&self) -> usize;
    fn sigma(&self) -> f64;
    fn ask(&mut self) -> Result<Vec<Vec<f64>>>;
    fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()>;
    /// Numerical warnings accumulated so far (fixed-point saturation, clamps).
    fn warnings(&self) -> Warnings {
        Warnings::default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Warnings {
    pub saturations: u64,
    pub sigma_clamps: u64,
}

#[derive(Debug, Clone)]
pub struct CmaEs {
    params: CmaEsParams,
    state: CmaEsState,
}

impl CmaEs {
    pub fn new(params: CmaEsParams) -> Result<Self> {
        params.validate()?;
        let k = params.dim;
        let state = CmaEsState {
            mean: vec![0.0; k],
            sigma: params.initial_sigma,
            covariance: Matrix::identity(k),
            path_sigma: vec![0.0; k],
            path_c: vec![0.0; k],
            generation: 0,
            rng: Rng::new(params.seed),
            asked: Vec::new(),
        };
        Ok(Self { params, state })
    }

    pub fn params(&self) -> &CmaEsParams {
        &self.params
    }

    pub fn state(&self) -> &CmaEsState {
        &self.state
    }

    /// Overwrites the distribution (mean, σ, covariance) and clears the paths.
    /// Intended for tests that need a specific starting distribution.
    pub fn set_distribution(&mut self, mean: Vec<f64>, sigma: f64, covariance: Matrix) -> Result<()> {
        let k = self.params.dim;
        if mean.len() != k || covariance.rows() != k || covariance.cols() != k {
            return Err(Error::contract("distribution dimensions do not match the optimizer"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::contract("sigma must be positive and finite"));
        }
        self.state.mean = mean;
        self.state.sigma = sigma;
        self.state.covariance = covariance;
        self.state.path_sigma = vec![0.0; k];
        self.state.path_c = vec![0.0; k];
        self.state.asked.clear();
        Ok(())
    }
}

/// `B·diag(√λ)` and `B·diag(1/√λ)·Bᵀ` for a covariance matrix.
pub(crate) struct CovarianceFactors {
    pub sqrt: Matrix,
    pub inv_sqrt: Matrix,
}

/// With `floor > 0` every eigenvalue below `floor` is raised to it; with
/// `floor == 0` a materially negative eigenvalue is an error.
pub(crate) fn covariance_factors(c: &Matrix, floor: f64) -> Result<CovarianceFactors> {
    let k = c.rows();
    let SymEigen { values, vectors } = sym_eig(c, k)?;
    let scale = values[0].abs().max(f64::MIN_POSITIVE);
    if floor <= 0.0 && values[k - 1] < -1e-10 * scale {
        return Err(Error::contract(format!(
            "covariance is not positive definite (smallest eigenvalue {:e})",
            values[k - 1]
        )));
    }
    let root: Vec<f64> = values.iter().map(|&l| l.max(floor).max(0.0).sqrt()).collect();
    let mut sqrt = Matrix::zeros(k, k);
    let mut inv_sqrt = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            sqrt.set(i, j, vectors.get(i, j) * root[j]);
            let mut acc = 0.0;
            for (l, r) in root.iter().enumerate() {
                if *r > 0.0 {
                    acc += vectors.get(i, l) * vectors.get(j, l) / r;
                }
            }
            inv_sqrt.set(i, j, acc);
        }
    }
    Ok(CovarianceFactors { sqrt, inv_sqrt })
}

/// Largest admissible condition number of the covariance matrix.
pub const MAX_CONDITION: f64 = 1e14;

/// Lifts the spectrum of a symmetric covariance so that its smallest
/// eigenvalue is at least `λ_max / MAX_CONDITION`. A covariance that has lost
/// all scale is reset to the identity. Returns whether anything changed.
pub(crate) fn condition(c: &mut Matrix) -> Result<bool> {
    let k = c.rows();
    let eig = sym_eig(c, k)?;
    let (max, min) = (eig.values[0], eig.values[k - 1]);
    if !(max > 0.0) || !max.is_normal() {
        *c = Matrix::identity(k);
        return Ok(true);
    }
    let floor = max / MAX_CONDITION;
    if min >= floor {
        return Ok(false);
    }
    let lift = floor - min;
    for i in 0..k {
        c.set(i, i, c.get(i, i) + lift);
    }
    Ok(true)
}

/// Candidate indices ordered by ascending fitness, ties by index.
pub(crate) fn rank(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    order
}

pub(crate) fn check_tell_inputs(candidates: &[Vec<f64>], fitness: &[f64], lambda: usize, dim: usize) -> Result<()> {
    if candidates.len() != lambda || fitness.len() != lambda {
        return Err(Error::contract(format!(
            "tell expects {lambda} candidates and fitnesses, got {} and {}",
            candidates.len(),
            fitness.len()
        )));
    }
    if let Some(f) = fitness.iter().find(|f| f.is_nan() || **f == f64::NEG_INFINITY) {
        return Err(Error::contract(format!("fitness value {f} is not allowed")));
    }
    if candidates.iter().any(|c| c.len() != dim || !linalg::all_finite(c)) {
        return Err(Error::contract("candidate has wrong length or non-finite entries"));
    }
    Ok(())
}

impl AskTell for CmaEs {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn population(&self) -> usize {
        self.params.population
    }

    fn sigma(&self) -> f64 {
        self.state.sigma
    }

    /// λ samples `m + σ·B·diag(√λ_j)·n`, `n` standard normal.
    fn ask(&mut self) -> Result<Vec<Vec<f64>>> {
        let k = self.params.dim;
        let factors = covariance_factors(&self.state.covariance, 0.0)?;
        let st = &mut self.state;
        st.asked.clear();
        let mut out = Vec::with_capacity(self.params.population);
        for _ in 0..self.params.population {
            let noise = st.rng.normal_vec(k);
            let y = factors.sqrt.mul_vec(&noise)?;
            let x: Vec<f64> = st.mean.iter().zip(&y).map(|(m, yi)| m + st.sigma * yi).collect();
            st.asked.push((x.clone(), y));
            out.push(x);
        }
        Ok(out)
    }

    fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
        let p = &self.params;
        let k = p.dim;
        check_tell_inputs(candidates, fitness, p.population, k)?;
        let factors = covariance_factors(&self.state.covariance, 0.0)?;
        let st = &mut self.state;

        // Steps y = (x − m)/σ. Reuse the sampled step when the candidate is
        // exactly what ask produced, so that steps stay meaningful after σ
        // has shrunk below the resolution of m.
        let steps: Vec<Vec<f64>> = candidates
            .iter()
            .enumerate()
            .map(|(i, x)| match st.asked.get(i) {
                Some((asked_x, y)) if asked_x == x => y.clone(),
                _ => x.iter().zip(&st.mean).map(|(xi, m)| (xi - m) / st.sigma).collect(),
            })
            .collect();
        st.asked.clear();

        let order = rank(fitness);
        let mut y_w = vec![0.0; k];
        for (w, &idx) in p.weights.iter().zip(&order) {
            for (acc, y) in y_w.iter_mut().zip(&steps[idx]) {
                *acc += w * y;
            }
        }
        for (m, y) in st.mean.iter_mut().zip(&y_w) {
            *m += st.sigma * y;
        }

        let whitened = factors.inv_sqrt.mul_vec(&y_w)?;
        let cs_norm = (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();
        for (ps, w) in st.path_sigma.iter_mut().zip(&whitened) {
            *ps = (1.0 - p.c_sigma) * *ps + cs_norm * w;
        }
        let ps_norm = linalg::norm(&st.path_sigma);
        let decay = 1.0 - (1.0 - p.c_sigma).powf(2.0 * (st.generation as f64 + 1.0));
        let h_sigma = ps_norm / decay.sqrt() < (1.4 + 2.0 / (k as f64 + 1.0)) * p.chi_n;

        let cc_norm = (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt();
        for (pc, y) in st.path_c.iter_mut().zip(&y_w) {
            *pc = (1.0 - p.c_c) * *pc + if h_sigma { cc_norm * y } else { 0.0 };
        }
        let delta_h = if h_sigma { 0.0 } else { p.c_c * (2.0 - p.c_c) };

        let keep = 1.0 + p.c_1 * delta_h - p.c_1 - p.c_mu;
        let mut next = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut rank_mu = 0.0;
                for (w, &idx) in p.weights.iter().zip(&order) {
                    rank_mu += w * steps[idx][i] * steps[idx][j];
                }
                let v = keep * st.covariance.get(i, j)
                    + p.c_1 * st.path_c[i] * st.path_c[j]
                    + p.c_mu * rank_mu;
                next.set(i, j, v);
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let avg = 0.5 * (next.get(i, j) + next.get(j, i));
                next.set(i, j, avg);
                next.set(j, i, avg);
            }
        }
        condition(&mut next)?;
        st.covariance = next;
        st.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        st.generation += 1;

        if !(st.sigma.is_finite() && st.sigma > 0.0) || !linalg::all_finite(st.covariance.as_slice()) {
            return Err(Error::contract("CMA-ES state became non-finite"));
        }
        Ok(())
    }
}

/// Result of a fixed-budget minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    /// Best point over every evaluated candidate and the baseline.
    pub best_point: Vec<f64>,
    pub best_fitness: f64,
    /// Best-so-far fitness after each generation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    /// Objective values that were NaN or infinite and replaced by `+∞`.
    pub nonfinite_evaluations: usize,
    pub warnings: Warnings,
}

/// Maps a raw candidate to the point actually handed to the objective,
/// given the optimizer's current σ.
pub type CandidateMap<'a> = &'a dyn Fn(&[f64], f64) -> Vec<f64>;

/// How candidates are presented to the objective and fed back to `tell`.
#[derive(Clone, Copy, Default)]
pub struct Search<'a> {
    pub iterations: usize,
    pub baseline: Option<&'a [f64]>,
    pub transform: Option<CandidateMap<'a>>,
    /// Give `tell` the transformed candidates instead of the raw samples.
    pub tell_transformed: bool,
}

impl<'a> Search<'a> {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            ..Self::default()
        }
    }

    pub fn with_baseline(mut self, baseline: &'a [f64]) -> Self {
        self.baseline = Some(baseline);
        self
    }
}

/// Runs `search.iterations` ask/evaluate/tell generations on `optimizer`.
///
/// The baseline, when present, is evaluated first and only replaced by a
/// strictly better candidate.
pub fn run<O, F>(optimizer: &mut O, mut objective: F, search: &Search<'_>) -> Result<Minimum>
where
    O: AskTell + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    if search.iterations == 0 {
        return Err(Error::contract("iteration count must be at least 1"));
    }
    let dim = optimizer.dim();
    let mut nonfinite = 0;
    let mut evaluations = 0;
    let mut eval = |x: &[f64], nonfinite: &mut usize| {
        let f = objective(x);
        if f.is_finite() {
            f
        } else {
            *nonfinite += 1;
            f64::INFINITY
        }
    };

    let mut best_point = vec![0.0; dim];
    let mut best_fitness = f64::INFINITY;
    let mut have_best = false;
    if let Some(b) = search.baseline {
        if b.len() != dim {
            return Err(Error::contract(format!(
                "baseline has length {}, optimizer dimension is {dim}",
                b.len()
            )));
        }
        best_fitness = eval(b, &mut nonfinite);
        best_point = b.to_vec();
        have_best = true;
        evaluations += 1;
    }

    let mut trace = Vec::with_capacity(search.iterations);
    for _ in 0..search.iterations {
        let raw = optimizer.ask()?;
        let sigma = optimizer.sigma();
        let shown: Vec<Vec<f64>> = match search.transform {
            Some(t) => raw.iter().map(|x| t(x, sigma)).collect(),
            None => raw.clone(),
        };
        let mut fitness = Vec::with_capacity(shown.len());
        for x in &shown {
            let f = eval(x, &mut nonfinite);
            evaluations += 1;
            if !have_best || f < best_fitness {
                best_fitness = f;
                best_point = x.clone();
                have_best = true;
            }
            fitness.push(f);
        }
        let fed = if search.tell_transformed { &shown } else { &raw };
        optimizer.tell(fed, &fitness)?;
        trace.push(best_fitness);
    }

    Ok(Minimum {
        best_point,
        best_fitness,
        trace,
        evaluations,
        nonfinite_evaluations: nonfinite,
        warnings: optimizer.warnings(),
    })
}

/// Floating-point CMA-ES over `iterations` generations, optionally seeded with
/// a baseline point that competes for the final answer.
pub fn minimize<F>(
    objective: F,
    params: &CmaEsParams,
    iterations: usize,
    baseline: Option<&[f64]>,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut opt = CmaEs::new(params.clone())?;
    let search = Search {
        iterations,
        baseline,
        ..Search::default()
    };
    run(&mut opt, objective, &search)
}
