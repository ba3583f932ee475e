//! Single-sample adaptation: search a k-dimensional correction `p` that
//! minimizes the decoder's output entropy at `z_t + p·Vᵀ`.
//!
//! The no-correction point `p = 0` always takes part in the final selection,
//! so the adapted entropy never exceeds the unadapted one. Neither the decoder
//! nor the subspace is touched; each call is a pure function of its inputs.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cmaes::{self, default_lambda, CmaEs, CmaEsParams, Search, Warnings};
use crate::decoder::{LinearDecoder, Prediction};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::quant::{self, FixedCmaEs, FixedPointFormat};
use crate::rng::derive_seed;
use crate::subspace::PrincipalSubspace;

/// Default subspace dimension and iteration count of the image benchmark setting.
pub const DEFAULT_K: usize = 16;
pub const DEFAULT_ITERATIONS: usize = 8;
pub const DEFAULT_SIGMA0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Floating-point CMA-ES.
    Float,
    /// 1-bit corrections: each coordinate of `p` is `±α`.
    Binary,
    /// CMA-ES state and updates in fixed point.
    Fixed(FixedPointFormat),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Float => f.write_str("ted"),
            Mode::Binary => f.write_str("qted-v1"),
            Mode::Fixed(fmt) => write!(f, "fixed:{fmt}"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    /// Accepts `ted`/`float`, `qted-v1`/`binary`, or a format such as `8b4`
    /// (also `fixed:8b4`).
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ted" | "float" => Ok(Mode::Float),
            "qted-v1" | "binary" => Ok(Mode::Binary),
            other => other
                .strip_prefix("fixed:")
                .unwrap_or(other)
                .parse()
                .map(Mode::Fixed),
        }
    }
}

/// What `tell` sees in 1-bit mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinaryFeedback {
    /// The raw Gaussian samples; the objective alone sees quantized points.
    #[default]
    Unquantized,
    /// The quantized points themselves.
    Quantized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub k: usize,
    pub iterations: usize,
    /// `None` means [`default_lambda`]`(k)`.
    pub population: Option<usize>,
    pub sigma0: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Fixed 1-bit magnitude; `None` uses the current CMA-ES σ.
    pub binary_magnitude: Option<f64>,
    pub binary_feedback: BinaryFeedback,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            iterations: DEFAULT_ITERATIONS,
            population: None,
            sigma0: DEFAULT_SIGMA0,
            seed: 0,
            mode: Mode::Float,
            binary_magnitude: None,
            binary_feedback: BinaryFeedback::default(),
        }
    }
}

impl AdaptationConfig {
    pub fn lambda(&self) -> usize {
        self.population.unwrap_or_else(|| default_lambda(self.k.max(1)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iteration count n must be at least 1"));
        }
        if self.lambda() < 2 {
            return Err(Error::config("population lambda must be at least 2"));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::config(format!("sigma0 {} must be positive", self.sigma0)));
        }
        if let Some(a) = self.binary_magnitude {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config(format!("binary magnitude {a} must be positive")));
            }
        }
        Ok(())
    }

    /// Evaluations per adapted sample: `n·λ` candidates plus the baseline.
    pub fn evaluations(&self) -> usize {
        self.iterations * self.lambda() + 1
    }

    fn params(&self, seed: u64) -> Result<CmaEsParams> {
        CmaEsParams::new(self.k, Some(self.lambda()), self.sigma0, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationResult {
    pub p_star: Vec<f64>,
    pub z_adapted: Vec<f64>,
    pub prediction: Prediction,
    pub baseline_prediction: Prediction,
    /// Best entropy so far after each generation.
    pub entropy_trace: Vec<f64>,
    pub evaluations: usize,
    pub warnings: Warnings,
}

/// Adapts one latent with `cfg.seed` as the optimizer seed.
pub fn adapt(
    z_t: &[f64],
    decoder: &LinearDecoder,
    subspace: &PrincipalSubspace,
    cfg: &AdaptationConfig,
) -> Result<AdaptationResult> {
    let s = restrict(subspace, cfg)?;
    adapt_with_seed(z_t, decoder, &s, cfg, cfg.seed)
}

/// Adapts every row independently. Row `i` uses seed
/// `derive_seed(cfg.seed, i)`, so results do not depend on processing order
/// and rows run in parallel. Errors are reported per row.
pub fn adapt_batch(
    latents: &Matrix,
    decoder: &LinearDecoder,
    subspace: &PrincipalSubspace,
    cfg: &AdaptationConfig,
) -> Vec<Result<AdaptationResult>> {
    let s = match restrict(subspace, cfg) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return (0..latents.rows())
                .map(|_| Err(Error::Config(msg.clone())))
                .collect();
        }
    };
    (0..latents.rows())
        .into_par_iter()
        .map(|i| adapt_with_seed(latents.row(i), decoder, &s, cfg, derive_seed(cfg.seed, i as u64)))
        .collect()
}

fn restrict<'a>(subspace: &'a PrincipalSubspace, cfg: &AdaptationConfig) -> Result<Cow<'a, PrincipalSubspace>> {
    cfg.validate()?;
    if cfg.k == subspace.k() {
        Ok(Cow::Borrowed(subspace))
    } else if cfg.k < subspace.k() {
        Ok(Cow::Owned(subspace.truncate(cfg.k)?))
    } else {
        Err(Error::config(format!(
            "k = {} exceeds the fitted subspace dimension {}",
            cfg.k,
            subspace.k()
        )))
    }
}

fn adapt_with_seed(
    z_t: &[f64],
    decoder: &LinearDecoder,
    subspace: &PrincipalSubspace,
    cfg: &AdaptationConfig,
    seed: u64,
) -> Result<AdaptationResult> {
    if z_t.len() != subspace.dim() || decoder.dim() != subspace.dim() {
        return Err(Error::contract(format!(
            "latent length {}, subspace D = {}, decoder D = {}",
            z_t.len(),
            subspace.dim(),
            decoder.dim()
        )));
    }
    if !linalg::all_finite(z_t) {
        return Err(Error::contract("latent contains non-finite values"));
    }

    let baseline_prediction = decoder.decode(z_t)?;
    let zero = vec![0.0; subspace.k()];
    let objective = |p: &[f64]| match decoder.fitness(subspace, z_t, p) {
        Ok((h, _)) => h,
        Err(_) => f64::NAN,
    };
    let params = cfg.params(seed)?;

    let minimum = match cfg.mode {
        Mode::Float => {
            let mut opt = CmaEs::new(params)?;
            cmaes::run(&mut opt, objective, &Search::new(cfg.iterations).with_baseline(&zero))?
        }
        Mode::Binary => {
            let fixed = cfg.binary_magnitude;
            let to_bits = move |x: &[f64], sigma: f64| {
                quant::quantize_binary(x, fixed.unwrap_or(sigma)).expect("magnitude is positive")
            };
            let search = Search {
                iterations: cfg.iterations,
                baseline: Some(&zero),
                transform: Some(&to_bits),
                tell_transformed: cfg.binary_feedback == BinaryFeedback::Quantized,
            };
            let mut opt = CmaEs::new(params)?;
            cmaes::run(&mut opt, objective, &search)?
        }
        Mode::Fixed(fmt) => {
            let mut opt = FixedCmaEs::new(params, fmt)?;
            cmaes::run(&mut opt, objective, &Search::new(cfg.iterations).with_baseline(&zero))?
        }
    };

    let (_, prediction) = decoder.fitness(subspace, z_t, &minimum.best_point)?;
    let z_adapted = subspace.apply_correction(z_t, &minimum.best_point)?;
    Ok(AdaptationResult {
        p_star: minimum.best_point,
        z_adapted,
        prediction,
        baseline_prediction,
        entropy_trace: minimum.trace,
        evaluations: minimum.evaluations,
        warnings: minimum.warnings,
    })
}
