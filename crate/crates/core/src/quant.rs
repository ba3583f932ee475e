//! Quantized execution: signed fixed-point arithmetic, 1-bit correction
//! vectors, and a CMA-ES whose state and update arithmetic run entirely in a
//! fixed-point format.
//!
//! A format `xby` has `x` total bits in two's complement: one sign bit, `y`
//! integer bits and `f = x − 1 − y` fractional bits. Every conversion and
//! product rounds to nearest with ties to even and saturates at the ends of
//! the representable range.

use std::fmt;
use std::str::FromStr;

use crate::cmaes::{self, covariance_factors, AskTell, CmaEsParams, Minimum, Search, Warnings};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointFormat {
    total_bits: u32,
    integer_bits: u32,
}

impl FixedPointFormat {
    pub const MIN_BITS: u32 = 4;
    pub const MAX_BITS: u32 = 32;

    pub fn new(total_bits: u32, integer_bits: u32) -> Result<Self> {
        if !(Self::MIN_BITS..=Self::MAX_BITS).contains(&total_bits) {
            return Err(Error::config(format!(
                "fixed-point width {total_bits} outside {}..={}",
                Self::MIN_BITS,
                Self::MAX_BITS
            )));
        }
        if integer_bits > total_bits - 1 {
            return Err(Error::config(format!(
                "{integer_bits} integer bits leave no room for the sign bit in a {total_bits}-bit format"
            )));
        }
        Ok(Self {
            total_bits,
            integer_bits,
        })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn integer_bits(&self) -> u32 {
        self.integer_bits
    }

    pub fn fractional_bits(&self) -> u32 {
        self.total_bits - 1 - self.integer_bits
    }

    /// Quantization step `2^(−f)`.
    pub fn step(&self) -> f64 {
        (-(self.fractional_bits() as f64)).exp2()
    }

    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn max_value(&self) -> f64 {
        self.max_raw() as f64 * self.step()
    }

    pub fn min_value(&self) -> f64 {
        self.min_raw() as f64 * self.step()
    }

    /// Raw value of 1.0, saturated if the format cannot hold it.
    pub fn one(&self) -> FixedPointValue {
        to_fixed(1.0, *self)
    }

    fn saturate(&self, raw: i128) -> (i64, bool) {
        if raw > self.max_raw() as i128 {
            (self.max_raw(), true)
        } else if raw < self.min_raw() as i128 {
            (self.min_raw(), true)
        } else {
            (raw as i64, false)
        }
    }

    /// Every representable value, lowest first.
    pub fn all_values(&self) -> impl Iterator<Item = FixedPointValue> + '_ {
        (self.min_raw()..=self.max_raw()).map(move |raw| FixedPointValue { raw, format: *self })
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}b{}", self.total_bits, self.integer_bits)
    }
}

impl FromStr for FixedPointFormat {
    type Err = Error;

    /// Parses `"<total>b<integer>"`, e.g. `"8b4"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("fixed-point format '{s}' is not of the form <bits>b<int>"));
        let (total, int) = s.trim().split_once('b').ok_or_else(bad)?;
        let total: u32 = total.parse().map_err(|_| bad())?;
        let int: u32 = int.parse().map_err(|_| bad())?;
        Self::new(total, int)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointValue {
    raw: i64,
    format: FixedPointFormat,
}

impl PartialOrd for FixedPointValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        (self.format == other.format).then(|| self.raw.cmp(&other.raw))
    }
}

impl FixedPointValue {
    pub fn from_raw(raw: i64, format: FixedPointFormat) -> Result<Self> {
        if raw < format.min_raw() || raw > format.max_raw() {
            return Err(Error::contract(format!("raw value {raw} does not fit {format}")));
        }
        Ok(Self { raw, format })
    }

    pub fn raw(&self) -> i64 {
        self.raw
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn to_f64(&self) -> f64 {
        self.raw as f64 * self.format.step()
    }

    fn same_format(&self, other: &Self) -> Result<()> {
        if self.format != other.format {
            return Err(Error::contract(format!(
                "fixed-point format mismatch: {} vs {}",
                self.format, other.format
            )));
        }
        Ok(())
    }

    /// Saturating sum; the flag reports whether saturation occurred.
    pub fn add_flagged(self, other: Self) -> Result<(Self, bool)> {
        self.same_format(&other)?;
        let (raw, sat) = self.format.saturate(self.raw as i128 + other.raw as i128);
        Ok((Self { raw, ..self }, sat))
    }

    /// Saturating product rounded back to the format.
    pub fn mul_flagged(self, other: Self) -> Result<(Self, bool)> {
        self.same_format(&other)?;
        let product = self.raw as i128 * other.raw as i128;
        let shifted = shift_round_even(product, self.format.fractional_bits());
        let (raw, sat) = self.format.saturate(shifted);
        Ok((Self { raw, ..self }, sat))
    }

    pub fn add(self, other: Self) -> Result<Self> {
        self.add_flagged(other).map(|(v, _)| v)
    }

    pub fn mul(self, other: Self) -> Result<Self> {
        self.mul_flagged(other).map(|(v, _)| v)
    }
}

/// `x / 2^shift`, rounded to nearest with ties to even.
fn shift_round_even(x: i128, shift: u32) -> i128 {
    if shift == 0 {
        return x;
    }
    let q = x >> shift; // floor
    let r = x - (q << shift);
    let half = 1i128 << (shift - 1);
    if r > half || (r == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// `num / den` rounded to nearest with ties to even (`den > 0`).
fn div_round_even(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    let twice = 2 * r;
    if twice > den || (twice == den && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// Nearest representable value (ties to even), saturating. The flag reports
/// saturation.
pub fn to_fixed_flagged(v: f64, fmt: FixedPointFormat) -> (FixedPointValue, bool) {
    debug_assert!(!v.is_nan());
    let scaled = (v * (fmt.fractional_bits() as f64).exp2()).round_ties_even();
    let (raw, sat) = if scaled > fmt.max_raw() as f64 {
        (fmt.max_raw(), true)
    } else if scaled < fmt.min_raw() as f64 {
        (fmt.min_raw(), true)
    } else {
        (scaled as i64, false)
    };
    (FixedPointValue { raw, format: fmt }, sat)
}

pub fn to_fixed(v: f64, fmt: FixedPointFormat) -> FixedPointValue {
    to_fixed_flagged(v, fmt).0
}

pub fn from_fixed(v: FixedPointValue) -> f64 {
    v.to_f64()
}

pub fn fixed_add(a: FixedPointValue, b: FixedPointValue) -> Result<FixedPointValue> {
    a.add(b)
}

pub fn fixed_mul(a: FixedPointValue, b: FixedPointValue) -> Result<FixedPointValue> {
    a.mul(b)
}

/// 1-bit correction: each element becomes `+α` or `−α` by sign, zero mapping
/// to `+α`.
pub fn quantize_binary(p: &[f64], magnitude: f64) -> Result<Vec<f64>> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::contract(format!(
            "binary magnitude {magnitude} must be positive and finite"
        )));
    }
    Ok(p.iter()
        .map(|x| if *x < 0.0 { -magnitude } else { magnitude })
        .collect())
}

/// Raw-integer arithmetic in one format with a running saturation count.
#[derive(Debug, Clone)]
struct Arith {
    fmt: FixedPointFormat,
    saturations: u64,
}

impl Arith {
    fn q(&mut self, v: f64) -> i64 {
        let (x, sat) = to_fixed_flagged(v, self.fmt);
        self.saturations += sat as u64;
        x.raw
    }

    fn real(&self, raw: i64) -> f64 {
        raw as f64 * self.fmt.step()
    }

    fn clamp(&mut self, raw: i128) -> i64 {
        let (r, sat) = self.fmt.saturate(raw);
        self.saturations += sat as u64;
        r
    }

    fn add(&mut self, a: i64, b: i64) -> i64 {
        self.clamp(a as i128 + b as i128)
    }

    fn sub(&mut self, a: i64, b: i64) -> i64 {
        self.clamp(a as i128 - b as i128)
    }

    fn mul(&mut self, a: i64, b: i64) -> i64 {
        let shifted = shift_round_even(a as i128 * b as i128, self.fmt.fractional_bits());
        self.clamp(shifted)
    }

    fn div(&mut self, a: i64, b: i64) -> i64 {
        if b == 0 {
            self.saturations += 1;
            return if a < 0 { self.fmt.min_raw() } else { self.fmt.max_raw() };
        }
        let num = (a as i128) << self.fmt.fractional_bits();
        let (num, den) = if b < 0 { (-num, -(b as i128)) } else { (num, b as i128) };
        let q = div_round_even(num, den);
        self.clamp(q)
    }

    fn dot(&mut self, a: &[i64], b: &[i64]) -> i64 {
        let mut acc = 0;
        for (x, y) in a.iter().zip(b) {
            let p = self.mul(*x, *y);
            acc = self.add(acc, p);
        }
        acc
    }

    fn mat_vec(&mut self, m: &[i64], k: usize, v: &[i64]) -> Vec<i64> {
        (0..k).map(|i| self.dot(&m[i * k..(i + 1) * k], v)).collect()
    }

    fn matrix(&mut self, m: &Matrix) -> Vec<i64> {
        m.as_slice().iter().map(|v| self.q(*v)).collect()
    }
}

/// Strategy constants of [`CmaEsParams`] quantized to the working format.
#[derive(Debug, Clone)]
struct FixedConstants {
    weights: Vec<i64>,
    one_minus_c_sigma: i64,
    c_sigma_norm: i64,
    one_minus_c_c: i64,
    c_c_norm: i64,
    c_1: i64,
    c_mu: i64,
    c_c_variance: i64,
}

/// CMA-ES whose mean, σ, covariance and evolution paths are fixed-point
/// values, with every update step executed in fixed-point arithmetic.
///
/// The Gaussian noise is drawn in floating point and quantized. The
/// eigendecomposition behind the sampling transform and the whitening matrix,
/// and the scalar `sqrt`/`exp` of step-size control, are computed in floating
/// point from the dequantized state and their results quantized before they
/// enter the fixed-point update.
#[derive(Debug, Clone)]
pub struct FixedCmaEs {
    params: CmaEsParams,
    ar: Arith,
    consts: FixedConstants,
    mean: Vec<i64>,
    sigma: i64,
    covariance: Vec<i64>,
    path_sigma: Vec<i64>,
    path_c: Vec<i64>,
    generation: u64,
    rng: Rng,
    asked: Vec<(Vec<f64>, Vec<i64>)>,
    sigma_clamps: u64,
}

impl FixedCmaEs {
    pub fn new(params: CmaEsParams, fmt: FixedPointFormat) -> Result<Self> {
        params.validate()?;
        let k = params.dim;
        let mut ar = Arith { fmt, saturations: 0 };
        let consts = FixedConstants {
            weights: params.weights.iter().map(|w| ar.q(*w)).collect(),
            one_minus_c_sigma: ar.q(1.0 - params.c_sigma),
            c_sigma_norm: ar.q((params.c_sigma * (2.0 - params.c_sigma) * params.mu_eff).sqrt()),
            one_minus_c_c: ar.q(1.0 - params.c_c),
            c_c_norm: ar.q((params.c_c * (2.0 - params.c_c) * params.mu_eff).sqrt()),
            c_1: ar.q(params.c_1),
            c_mu: ar.q(params.c_mu),
            c_c_variance: ar.q(params.c_c * (2.0 - params.c_c)),
        };
        let one = ar.q(1.0);
        let mut covariance = vec![0; k * k];
        for i in 0..k {
            covariance[i * k + i] = one;
        }
        let mut sigma_clamps = 0;
        let mut sigma = ar.q(params.initial_sigma);
        if sigma <= 0 {
            sigma = 1;
            sigma_clamps += 1;
        }
        let rng = Rng::new(params.seed);
        Ok(Self {
            params,
            ar,
            consts,
            mean: vec![0; k],
            sigma,
            covariance,
            path_sigma: vec![0; k],
            path_c: vec![0; k],
            generation: 0,
            rng,
            asked: Vec::new(),
            sigma_clamps,
        })
    }

    pub fn format(&self) -> FixedPointFormat {
        self.ar.fmt
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.iter().map(|r| self.ar.real(*r)).collect()
    }

    pub fn covariance(&self) -> Matrix {
        let k = self.params.dim;
        let data = self.covariance.iter().map(|r| self.ar.real(*r)).collect();
        Matrix::new(k, k, data).expect("dequantized covariance is finite")
    }

    fn factors(&mut self) -> Result<(Vec<i64>, Vec<i64>)> {
        let floor = self.ar.fmt.step();
        let f = covariance_factors(&self.covariance(), floor)?;
        Ok((self.ar.matrix(&f.sqrt), self.ar.matrix(&f.inv_sqrt)))
    }
}

impl AskTell for FixedCmaEs {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn population(&self) -> usize {
        self.params.population
    }

    fn sigma(&self) -> f64 {
        self.ar.real(self.sigma)
    }

    fn ask(&mut self) -> Result<Vec<Vec<f64>>> {
        let k = self.params.dim;
        let (sqrt, _) = self.factors()?;
        self.asked.clear();
        let mut out = Vec::with_capacity(self.params.population);
        for _ in 0..self.params.population {
            let noise: Vec<i64> = (0..k).map(|_| {
                let n = self.rng.normal();
                self.ar.q(n)
            }).collect();
            let y = self.ar.mat_vec(&sqrt, k, &noise);
            let x: Vec<i64> = (0..k)
                .map(|i| {
                    let step = self.ar.mul(self.sigma, y[i]);
                    self.ar.add(self.mean[i], step)
                })
                .collect();
            let real: Vec<f64> = x.iter().map(|r| self.ar.real(*r)).collect();
            self.asked.push((real.clone(), y));
            out.push(real);
        }
        Ok(out)
    }

    fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
        let k = self.params.dim;
        cmaes::check_tell_inputs(candidates, fitness, self.params.population, k)?;
        let (_, inv_sqrt) = self.factors()?;
        let asked = std::mem::take(&mut self.asked);
        let steps: Vec<Vec<i64>> = candidates
            .iter()
            .enumerate()
            .map(|(i, x)| match asked.get(i) {
                Some((asked_x, y)) if asked_x == x => y.clone(),
                _ => (0..k)
                    .map(|j| {
                        let xj = self.ar.q(x[j]);
                        let d = self.ar.sub(xj, self.mean[j]);
                        self.ar.div(d, self.sigma)
                    })
                    .collect(),
            })
            .collect();

        let order = cmaes::rank(fitness);
        let weights = self.consts.weights.clone();
        let parents: Vec<&Vec<i64>> = order.iter().take(weights.len()).map(|&i| &steps[i]).collect();

        let mut y_w = vec![0; k];
        for (w, y) in weights.iter().zip(&parents) {
            for j in 0..k {
                let t = self.ar.mul(*w, y[j]);
                y_w[j] = self.ar.add(y_w[j], t);
            }
        }
        for j in 0..k {
            let t = self.ar.mul(self.sigma, y_w[j]);
            self.mean[j] = self.ar.add(self.mean[j], t);
        }

        let whitened = self.ar.mat_vec(&inv_sqrt, k, &y_w);
        for j in 0..k {
            let decayed = self.ar.mul(self.consts.one_minus_c_sigma, self.path_sigma[j]);
            let push = self.ar.mul(self.consts.c_sigma_norm, whitened[j]);
            self.path_sigma[j] = self.ar.add(decayed, push);
        }
        let ps_sq = self.ar.dot(&self.path_sigma.clone(), &self.path_sigma.clone());
        let ps_norm = self.ar.real(ps_sq).max(0.0).sqrt();

        let p = &self.params;
        let decay = 1.0 - (1.0 - p.c_sigma).powf(2.0 * (self.generation as f64 + 1.0));
        let h_sigma = ps_norm / decay.sqrt() < (1.4 + 2.0 / (k as f64 + 1.0)) * p.chi_n;

        for j in 0..k {
            let decayed = self.ar.mul(self.consts.one_minus_c_c, self.path_c[j]);
            let push = if h_sigma { self.ar.mul(self.consts.c_c_norm, y_w[j]) } else { 0 };
            self.path_c[j] = self.ar.add(decayed, push);
        }

        // keep = 1 + c1·δ(h) − c1 − cμ
        let one = self.ar.q(1.0);
        let mut keep = self.ar.sub(one, self.consts.c_1);
        keep = self.ar.sub(keep, self.consts.c_mu);
        if !h_sigma {
            let extra = self.ar.mul(self.consts.c_1, self.consts.c_c_variance);
            keep = self.ar.add(keep, extra);
        }
        let mut next = vec![0; k * k];
        for i in 0..k {
            for j in i..k {
                let old = self.ar.mul(keep, self.covariance[i * k + j]);
                let outer = self.ar.mul(self.path_c[i], self.path_c[j]);
                let rank_one = self.ar.mul(self.consts.c_1, outer);
                let mut rank_mu = 0;
                for (w, y) in weights.iter().zip(&parents) {
                    let yy = self.ar.mul(y[i], y[j]);
                    let t = self.ar.mul(*w, yy);
                    rank_mu = self.ar.add(rank_mu, t);
                }
                let rank_mu = self.ar.mul(self.consts.c_mu, rank_mu);
                let v = self.ar.add(old, rank_one);
                let v = self.ar.add(v, rank_mu);
                next[i * k + j] = v;
                next[j * k + i] = v;
            }
        }
        self.covariance = next;

        let factor = ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        let factor = self.ar.q(factor);
        self.sigma = self.ar.mul(self.sigma, factor);
        if self.sigma <= 0 {
            self.sigma = 1;
            self.sigma_clamps += 1;
        }
        self.generation += 1;
        Ok(())
    }

    fn warnings(&self) -> Warnings {
        Warnings {
            saturations: self.ar.saturations,
            sigma_clamps: self.sigma_clamps,
        }
    }
}

/// Fixed-budget minimization with [`FixedCmaEs`]; same contract as
/// [`cmaes::minimize`].
pub fn fixed_cmaes_minimize<F>(
    objective: F,
    params: &CmaEsParams,
    iterations: usize,
    fmt: FixedPointFormat,
    baseline: Option<&[f64]>,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut opt = FixedCmaEs::new(params.clone(), fmt)?;
    let search = Search {
        iterations,
        baseline,
        ..Search::default()
    };
    cmaes::run(&mut opt, objective, &search)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fmt(s: &str) -> FixedPointFormat {
        s.parse().unwrap()
    }

    #[test]
    fn format_parsing_and_bounds() {
        let f = fmt("8b4");
        assert_eq!(f.fractional_bits(), 3);
        assert_eq!(f.step(), 0.125);
        assert_eq!(f.max_value(), 15.875);
        assert_eq!(f.min_value(), -16.0);
        assert_eq!(f.to_string(), "8b4");
        assert_eq!(fmt("32b8").fractional_bits(), 23);
        assert!("4b4".parse::<FixedPointFormat>().is_err());
        assert!("3b1".parse::<FixedPointFormat>().is_err());
        assert!("33b1".parse::<FixedPointFormat>().is_err());
        assert!("8x4".parse::<FixedPointFormat>().is_err());
        assert!("b4".parse::<FixedPointFormat>().is_err());
    }

    #[test]
    fn conversion_examples() {
        let f = fmt("8b4");
        assert_eq!(to_fixed(0.0, f).raw(), 0);
        assert_eq!(to_fixed(0.0, fmt("4b2")).raw(), 0);
        let v = to_fixed(1.3, f);
        assert_eq!(v.raw(), 10);
        assert_eq!(v.to_f64(), 1.25);
        let s = to_fixed(100.0, f);
        assert_eq!(s.raw(), 127);
        assert_eq!(s.to_f64(), 15.875);
        assert!(to_fixed_flagged(100.0, f).1);
        assert_eq!(to_fixed(-100.0, f).raw(), -128);
        // 0.0625 / 0.125 = 0.5 → ties to even → 0; 0.1875 → 1.5 → 2.
        assert_eq!(to_fixed(0.0625, f).raw(), 0);
        assert_eq!(to_fixed(0.1875, f).raw(), 2);
    }

    #[test]
    fn arithmetic_examples() {
        let f = fmt("8b4");
        let a = to_fixed(1.25, f);
        assert_eq!(a.mul(a).unwrap().to_f64(), 1.5);
        assert_eq!(a.add(to_fixed(0.0, f)).unwrap(), a);
        let one = f.one();
        for v in f.all_values() {
            let prod = v.mul(one).unwrap();
            assert!((prod.to_f64() - v.to_f64()).abs() <= f.step());
        }
        let max = to_fixed(f.max_value(), f);
        assert_eq!(max.mul(max).unwrap(), max);
        assert!(max.mul_flagged(max).unwrap().1);
        assert_eq!(max.add(max).unwrap(), max);
        let min = to_fixed(f.min_value(), f);
        assert_eq!(min.add(min).unwrap(), min);
        assert!(a.add(to_fixed(1.0, fmt("8b3"))).is_err());
        assert!(a.mul(to_fixed(1.0, fmt("16b4"))).is_err());
    }

    #[test]
    fn shift_rounding() {
        assert_eq!(shift_round_even(100, 3), 12); // 12.5 → 12
        assert_eq!(shift_round_even(108, 3), 14); // 13.5 → 14
        assert_eq!(shift_round_even(-100, 3), -12); // −12.5 → −12
        assert_eq!(shift_round_even(-108, 3), -14);
        assert_eq!(shift_round_even(-99, 3), -12); // −12.375
        assert_eq!(div_round_even(5, 2), 2);
        assert_eq!(div_round_even(7, 2), 4);
        assert_eq!(div_round_even(-5, 2), -2);
    }

    #[test]
    fn fixed_division() {
        let mut ar = Arith { fmt: fmt("16b4"), saturations: 0 };
        let a = ar.q(3.0);
        let b = ar.q(1.5);
        let q = ar.div(a, b);
        assert_eq!(ar.real(q), 2.0);
        let q = ar.div(-a, b);
        assert_eq!(ar.real(q), -2.0);
        assert_eq!(ar.div(a, 0), ar.fmt.max_raw());
        assert_eq!(ar.saturations, 1);
    }

    #[test]
    fn binary_quantization() {
        assert_eq!(quantize_binary(&[0.3, -2.0, 0.0], 1.0).unwrap(), vec![1.0, -1.0, 1.0]);
        let q = vec![0.5, -0.5, 0.5];
        assert_eq!(quantize_binary(&q, 0.5).unwrap(), q);
        assert!(quantize_binary(&q, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn binary_output_is_two_valued(p in proptest::collection::vec(-10.0f64..10.0, 1..20), a in 0.01f64..5.0) {
            let q = quantize_binary(&p, a).unwrap();
            prop_assert!(q.iter().all(|x| *x == a || *x == -a));
        }

        #[test]
        fn conversion_monotone(bits in 4u32..=32, int_frac in 0.0f64..1.0, a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let int = ((bits - 1) as f64 * int_frac) as u32;
            let f = FixedPointFormat::new(bits, int).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(to_fixed(lo, f).raw() <= to_fixed(hi, f).raw());
        }
    }

    #[test]
    fn fixed_cmaes_respects_budget_and_baseline() {
        let params = CmaEsParams::new(2, None, 1.0, 5).unwrap();
        let mut calls = 0;
        let m = fixed_cmaes_minimize(
            |x| {
                calls += 1;
                (x[0] - 1.0).powi(2) + x[1].powi(2)
            },
            &params,
            3,
            fmt("8b4"),
            Some(&[1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(calls, 3 * params.population + 1);
        assert_eq!(m.evaluations, calls);
        assert_eq!(m.best_fitness, 0.0);
    }

    #[test]
    fn candidates_lie_on_the_grid() {
        let params = CmaEsParams::new(3, None, 1.0, 8).unwrap();
        let f = fmt("8b4");
        let mut opt = FixedCmaEs::new(params, f).unwrap();
        for _ in 0..5 {
            let cands = opt.ask().unwrap();
            for c in &cands {
                for x in c {
                    assert_eq!((x / f.step()).fract(), 0.0);
                }
            }
            let fit: Vec<f64> = cands.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
            opt.tell(&cands, &fit).unwrap();
        }
    }
}
