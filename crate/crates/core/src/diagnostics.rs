//! Monte Carlo checks of the analytical facts the tester relies on.
//!
//! All quantities are normalized by `k!` (or `sqrt(k!)`) so that different
//! dimensions are comparable. Standard errors come from batch means over
//! [`DEFAULT_BATCHES`] contiguous batches; `|Per|^4` is heavy-tailed and
//! batching keeps its error bars honest.
//!
//! Sample `i` is drawn from `sampler.derive_substream(i)`, so estimates do not
//! depend on the number of workers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSampler;
use crate::error::{MatrixError, OracleError, ParamError};
use crate::matrix::ComplexMatrix;
use crate::oracle::OracleFamily;
use crate::permanent::{factorial, ryser_unchecked};
use crate::stats::{batch_means, proportion_std_error, trimmed_rms, Estimate, DEFAULT_BATCHES};
use crate::tester::{linearity_given_top, TesterParams};

/// Largest dimension the Monte Carlo diagnostics accept.
pub const DIAGNOSTIC_MAX_DIM: usize = 10;
pub const MIN_MOMENT_SAMPLES: usize = 100;

fn check_dim(k: usize) -> Result<(), ParamError> {
    if k == 0 {
        return Err(MatrixError::DimensionTooSmall { dim: 0, min: 1 }.into());
    }
    if k > DIAGNOSTIC_MAX_DIM {
        return Err(MatrixError::DimensionTooLarge {
            dim: k,
            max: DIAGNOSTIC_MAX_DIM,
        }
        .into());
    }
    Ok(())
}

fn sample(sampler: &EnsembleSampler, i: usize, k: usize) -> ComplexMatrix {
    sampler
        .derive_substream(i as u64)
        .sample_matrix(k)
        .expect("k checked by caller")
}

fn permanents(k: usize, num_samples: usize, sampler: &EnsembleSampler) -> Vec<Complex64> {
    (0..num_samples)
        .into_par_iter()
        .map(|i| ryser_unchecked(&sample(sampler, i, k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    pub mean_re: f64,
    pub mean_im: f64,
    pub second_moment: f64,
    pub fourth_moment: f64,
}

/// Empirical `E[Per_k]`, `E|Per_k|^2` and `E|Per_k|^4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: usize,
    pub samples: usize,
    pub mean: Complex64,
    pub second_moment: f64,
    pub fourth_moment: f64,
    pub std_errors: MomentErrors,
}

impl MomentEstimate {
    /// `E|Per|^2 / k!` with its standard error; 1 in expectation.
    pub fn normalized_second(&self) -> Estimate {
        let scale = factorial(self.k);
        Estimate {
            mean: self.second_moment / scale,
            std_error: self.std_errors.second_moment / scale,
        }
    }

    /// `E|Per|^4 / ((k+1) (k!)^2)` with its standard error; 1 in expectation.
    pub fn normalized_fourth(&self) -> Estimate {
        let f = factorial(self.k);
        let scale = (self.k as f64 + 1.0) * f * f;
        Estimate {
            mean: self.fourth_moment / scale,
            std_error: self.std_errors.fourth_moment / scale,
        }
    }
}

pub fn estimate_moments(k: usize, num_samples: usize, sampler: &EnsembleSampler) -> Result<MomentEstimate, ParamError> {
    check_dim(k)?;
    if num_samples < MIN_MOMENT_SAMPLES {
        return Err(ParamError::InvalidParams(format!(
            "need at least {MIN_MOMENT_SAMPLES} samples, got {num_samples}"
        )));
    }
    let pers = permanents(k, num_samples, sampler);
    let re: Vec<f64> = pers.iter().map(|p| p.re).collect();
    let im: Vec<f64> = pers.iter().map(|p| p.im).collect();
    let second: Vec<f64> = pers.iter().map(|p| p.norm_sqr()).collect();
    let fourth: Vec<f64> = second.iter().map(|s| s * s).collect();
    let (re, im) = (batch_means(&re, DEFAULT_BATCHES), batch_means(&im, DEFAULT_BATCHES));
    let (second, fourth) = (
        batch_means(&second, DEFAULT_BATCHES),
        batch_means(&fourth, DEFAULT_BATCHES),
    );
    Ok(MomentEstimate {
        k,
        samples: num_samples,
        mean: Complex64::new(re.mean, im.mean),
        second_moment: second.mean,
        fourth_moment: fourth.mean,
        std_errors: MomentErrors {
            mean_re: re.std_error,
            mean_im: im.std_error,
            second_moment: second.std_error,
            fourth_moment: fourth.std_error,
        },
    })
}

/// Empirical `Pr[|Per_k(X)| > T sqrt(k!)]` next to the bound `(k+1)/T^4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub k: usize,
    pub t: f64,
    pub samples: usize,
    pub probability: f64,
    pub std_error: f64,
    pub bound: f64,
}

impl TailEstimate {
    /// Whether the estimate exceeds the bound by more than `sigmas` standard errors.
    pub fn violates_bound(&self, sigmas: f64) -> bool {
        self.probability > self.bound + sigmas * self.std_error
    }
}

pub fn tail_probability(
    k: usize,
    t: f64,
    num_samples: usize,
    sampler: &EnsembleSampler,
) -> Result<TailEstimate, ParamError> {
    Ok(tail_probabilities(k, &[t], num_samples, sampler)?.remove(0))
}

/// Tail estimates for several thresholds from one set of samples.
pub fn tail_probabilities(
    k: usize,
    thresholds: &[f64],
    num_samples: usize,
    sampler: &EnsembleSampler,
) -> Result<Vec<TailEstimate>, ParamError> {
    check_dim(k)?;
    if num_samples == 0 {
        return Err(ParamError::InvalidParams("need at least one sample".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(ParamError::InvalidParams(format!("T must be non-negative, got {t}")));
    }
    let abs: Vec<f64> = permanents(k, num_samples, sampler).iter().map(|p| p.norm()).collect();
    let scale = factorial(k).sqrt();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let cut = t * scale;
            let hits = abs.iter().filter(|&&a| a > cut).count();
            let p = hits as f64 / num_samples as f64;
            TailEstimate {
                k,
                t,
                samples: num_samples,
                probability: p,
                std_error: proportion_std_error(p, num_samples),
                bound: (k as f64 + 1.0) / t.powi(4),
            }
        })
        .collect())
}

/// The three per-matrix predicates of the soundness analysis and their conjunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorFlags {
    pub lin: bool,
    pub tail: bool,
    pub perm: bool,
    pub combined: bool,
}

impl IndicatorFlags {
    pub fn new(lin: bool, tail: bool, perm: bool) -> Self {
        Self {
            lin,
            tail,
            perm,
            combined: lin && tail && perm,
        }
    }
}

struct Evaluation {
    flags: IndicatorFlags,
    oracle: Complex64,
    permanent: Complex64,
}

fn evaluate(oracles: &OracleFamily, x: &ComplexMatrix, params: &TesterParams) -> Result<Evaluation, OracleError> {
    let k = x.dim();
    let oracle = oracles.query(k, x)?;
    let permanent = ryser_unchecked(x);
    let lin = linearity_given_top(oracles, params.n, params.delta, x, oracle)?.pass;
    let limit = params.tail_threshold(k);
    let tail = oracle.norm_sqr() <= limit;
    let perm = permanent.norm_sqr() <= limit;
    Ok(Evaluation {
        flags: IndicatorFlags::new(lin, tail, perm),
        oracle,
        permanent,
    })
}

/// Evaluates the linearity, oracle-tail and permanent-tail predicates on `x`.
pub fn indicator_flags(
    oracles: &OracleFamily,
    k: usize,
    x: &ComplexMatrix,
    params: &TesterParams,
) -> Result<IndicatorFlags, ParamError> {
    if x.dim() != k {
        return Err(OracleError::DimensionMismatch {
            declared: k,
            actual: x.dim(),
        }
        .into());
    }
    Ok(evaluate(oracles, x, params)?.flags)
}

/// Indicator expectation and error conditioned on the indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalError {
    pub k: usize,
    pub samples: usize,
    /// `E[1_k |O_k - Per_k|^2] / k!`.
    pub estimate: f64,
    pub std_error: f64,
    /// `(2 n k delta)^2`.
    pub ceiling: f64,
    /// `E[1_k]`.
    pub indicator_mean: f64,
    pub indicator_std_error: f64,
    /// `1 - delta^4 c / (64 n)`.
    pub indicator_floor: f64,
    /// Per-flag pass rates: lin, tail, perm.
    pub flag_rates: [f64; 3],
}

impl ConditionalError {
    pub fn within_ceiling(&self, sigmas: f64) -> bool {
        self.estimate <= self.ceiling + sigmas * self.std_error
    }

    pub fn above_floor(&self, sigmas: f64) -> bool {
        self.indicator_mean >= self.indicator_floor - sigmas * self.indicator_std_error
    }
}

pub fn conditional_sq_error(
    oracles: &OracleFamily,
    k: usize,
    num_samples: usize,
    params: &TesterParams,
    sampler: &EnsembleSampler,
) -> Result<ConditionalError, ParamError> {
    check_dim(k)?;
    if num_samples == 0 {
        return Err(ParamError::InvalidParams("need at least one sample".into()));
    }
    let evals: Vec<Result<Evaluation, OracleError>> = (0..num_samples)
        .into_par_iter()
        .map(|i| evaluate(oracles, &sample(sampler, i, k), params))
        .collect();
    let scale = factorial(k);
    let mut weighted = Vec::with_capacity(num_samples);
    let mut indicator = Vec::with_capacity(num_samples);
    let mut flag_counts = [0usize; 3];
    for e in evals {
        let e = e?;
        let on = e.flags.combined;
        indicator.push(if on { 1.0 } else { 0.0 });
        weighted.push(if on {
            (e.oracle - e.permanent).norm_sqr() / scale
        } else {
            0.0
        });
        for (count, flag) in flag_counts.iter_mut().zip([e.flags.lin, e.flags.tail, e.flags.perm]) {
            *count += flag as usize;
        }
    }
    let err = batch_means(&weighted, DEFAULT_BATCHES);
    let ind = batch_means(&indicator, DEFAULT_BATCHES);
    let nkd = 2.0 * params.n as f64 * k as f64 * params.delta;
    Ok(ConditionalError {
        k,
        samples: num_samples,
        estimate: err.mean,
        std_error: err.std_error,
        ceiling: nkd * nkd,
        indicator_mean: ind.mean,
        indicator_std_error: ind.std_error,
        indicator_floor: 1.0 - params.delta.powi(4) * params.c / (64.0 * params.n as f64),
        flag_rates: flag_counts.map(|c| c as f64 / num_samples as f64),
    })
}

/// Normalized squared oracle errors `|O_k(X) - Per_k(X)|^2 / k!` over fresh samples.
pub fn squared_errors(
    oracles: &OracleFamily,
    k: usize,
    num_samples: usize,
    sampler: &EnsembleSampler,
) -> Result<Vec<f64>, ParamError> {
    check_dim(k)?;
    let scale = factorial(k);
    let values: Result<Vec<f64>, OracleError> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let x = sample(sampler, i, k);
            let o = oracles.query(k, &x)?;
            Ok((o - ryser_unchecked(&x)).norm_sqr() / scale)
        })
        .collect();
    Ok(values?)
}

/// Empirical RMS error after discarding the worst `eta`-fraction of inputs,
/// normalized by `sqrt(k!)`.
///
/// For an empirical measure the infimum over sets of mass `>= 1 - eta` is
/// attained by dropping the largest deviations.
pub fn trimmed_rms_error(
    oracles: &OracleFamily,
    k: usize,
    eta: f64,
    num_samples: usize,
    sampler: &EnsembleSampler,
) -> Result<f64, ParamError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(ParamError::InvalidParams(format!("eta must lie in [0, 1), got {eta}")));
    }
    if num_samples == 0 {
        return Err(ParamError::InvalidParams("need at least one sample".into()));
    }
    Ok(trimmed_rms(&squared_errors(oracles, k, num_samples, sampler)?, eta))
}
