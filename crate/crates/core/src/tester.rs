//! The stage-by-stage tester for approximate permanent oracles.
//!
//! For each dimension `k = 1..=n` the tester runs `d` linearity tests, which
//! compare `O_k(X)` with the first-row expansion `sum_i x_1i * O_{k-1}(X_i)`
//! (or with `X` itself at `k = 1`), followed by `d` tail tests, which bound
//! `|O_k(X)|^2 <= T^2 k!`. It accepts iff no sub-test fails.
//!
//! Every sub-test draws its matrix from a sub-stream keyed by
//! `(k, test kind, iteration)`, so results are identical for any number of
//! workers. Sub-tests run in fixed-size chunks; in short-circuit mode the run
//! stops after the chunk holding the first failure, which keeps the query
//! count independent of scheduling as well.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSampler;
use crate::error::{OracleError, ParamError};
use crate::matrix::ComplexMatrix;
use crate::oracle::{OracleFamily, OracleSpec};
use crate::permanent::{factorial, first_row_expansion, MAX_DIM};
use crate::stats::Summary;

/// Sub-tests evaluated per parallel batch.
pub const CHUNK: u64 = 1024;

/// Tester parameters with the derived threshold `T` and repetition count `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterParams {
    pub n: usize,
    pub delta: f64,
    pub c: f64,
    /// Tail threshold actually used (override if given).
    pub t: f64,
    /// Repetitions per test and stage actually used (override if given).
    pub d: u64,
    pub override_d: Option<u64>,
    pub override_t: Option<f64>,
    /// Set when `n < sqrt(ln(1/(c*delta)))`, i.e. the size precondition of
    /// the completeness/soundness guarantees is not met.
    pub precondition_warning: bool,
}

/// `T = 4n / (delta sqrt(c))` and `d = ceil(192 n^2 / (delta^4 c))`.
pub fn compute_parameters(n: usize, delta: f64, c: f64) -> Result<(f64, u64), ParamError> {
    if n == 0 {
        return Err(ParamError::InvalidParams("n must be at least 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(ParamError::InvalidParams(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(ParamError::InvalidParams(format!("c must lie in (0, 1], got {c}")));
    }
    let nf = n as f64;
    let t = 4.0 * nf / (delta * c.sqrt());
    let raw = 192.0 * nf * nf / (delta.powi(4) * c);
    // Absorb rounding noise when the exact value is an integer.
    let nearest = raw.round();
    let d = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    if !(d.is_finite() && d < u64::MAX as f64) {
        return Err(ParamError::InvalidParams(format!("d = {raw} is not representable")));
    }
    Ok((t, d as u64))
}

impl TesterParams {
    pub fn new(n: usize, delta: f64, c: f64) -> Result<Self, ParamError> {
        Self::with_overrides(n, delta, c, None, None)
    }

    pub fn with_overrides(
        n: usize,
        delta: f64,
        c: f64,
        override_d: Option<u64>,
        override_t: Option<f64>,
    ) -> Result<Self, ParamError> {
        let (t, d) = compute_parameters(n, delta, c)?;
        if n > MAX_DIM {
            return Err(ParamError::InvalidParams(format!("n = {n} exceeds {MAX_DIM}")));
        }
        if override_d == Some(0) {
            return Err(ParamError::InvalidParams("override d must be at least 1".into()));
        }
        if let Some(t) = override_t {
            if !(t.is_finite() && t > 0.0) {
                return Err(ParamError::InvalidParams(format!(
                    "override T must be positive, got {t}"
                )));
            }
        }
        let precondition_warning = (n as f64) < (1.0 / (c * delta)).ln().max(0.0).sqrt();
        Ok(Self {
            n,
            delta,
            c,
            t: override_t.unwrap_or(t),
            d: override_d.unwrap_or(d),
            override_d,
            override_t,
            precondition_warning,
        })
    }

    /// False when any override replaced the derived `T` or `d`.
    pub fn theorem_parameters(&self) -> bool {
        self.override_d.is_none() && self.override_t.is_none()
    }

    /// Linearity threshold `n^2 delta^2 k!` (no factorial at `k = 1`).
    pub fn linearity_threshold(&self, k: usize) -> f64 {
        linearity_threshold(self.n, self.delta, k)
    }

    /// Tail threshold `T^2 k!`.
    pub fn tail_threshold(&self, k: usize) -> f64 {
        self.t * self.t * factorial(k)
    }
}

fn linearity_threshold(n: usize, delta: f64, k: usize) -> f64 {
    let base = (n as f64 * delta).powi(2);
    if k == 1 {
        base
    } else {
        base * factorial(k)
    }
}

/// Worst-case number of oracle queries a full run makes.
///
/// A linearity test queries once at `k = 1` and `k + 1` times above; a tail
/// test queries once.
pub fn query_budget(params: &TesterParams) -> u64 {
    budget(params.n, params.d)
}

pub fn budget(n: usize, d: u64) -> u64 {
    (1..=n as u64)
        .map(|k| {
            let linearity = if k == 1 { 1 } else { k + 1 };
            d * linearity + d
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Linearity,
    Tail,
}

impl TestKind {
    fn label(self) -> u64 {
        match self {
            TestKind::Linearity => 0,
            TestKind::Tail => 1,
        }
    }
}

/// The sampler a given sub-test draws its matrix from.
pub fn subtest_sampler(root: &EnsembleSampler, k: usize, kind: TestKind, iteration: u64) -> EnsembleSampler {
    root.derive_substream(k as u64)
        .derive_substream(kind.label())
        .derive_substream(iteration)
}

/// Result of one linearity or tail test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtestOutcome {
    pub pass: bool,
    /// The tested quantity divided by its threshold; pass iff `<= 1`.
    /// Infinite or NaN when the oracle returned a non-finite value.
    pub normalized: f64,
}

fn judge(value: f64, threshold: f64) -> SubtestOutcome {
    // NaN compares false, so non-finite oracle answers fail.
    SubtestOutcome {
        pass: value <= threshold,
        normalized: value / threshold,
    }
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Linearity predicate on a given matrix.
pub fn linearity_check(
    oracles: &OracleFamily,
    n: usize,
    delta: f64,
    x: &ComplexMatrix,
) -> Result<SubtestOutcome, OracleError> {
    let top = oracles.query(x.dim(), x)?;
    linearity_given_top(oracles, n, delta, x, top)
}

/// Linearity predicate when `O_k(X)` is already known; queries only the minors.
pub(crate) fn linearity_given_top(
    oracles: &OracleFamily,
    n: usize,
    delta: f64,
    x: &ComplexMatrix,
    top: Complex64,
) -> Result<SubtestOutcome, OracleError> {
    let k = x.dim();
    let deviation = if k == 1 {
        top - x.get(0, 0)
    } else {
        let mut minor_values = Vec::with_capacity(k);
        for col in 0..k {
            minor_values.push(oracles.query(k - 1, &x.first_row_minor(col))?);
        }
        if !minor_values.iter().all(|&v| finite(v)) {
            return Ok(judge(f64::NAN, 1.0));
        }
        top - first_row_expansion(x, &minor_values)
    };
    if !finite(top) {
        return Ok(judge(f64::NAN, 1.0));
    }
    Ok(judge(deviation.norm_sqr(), linearity_threshold(n, delta, k)))
}

/// Tail predicate `|O_k(X)|^2 <= T^2 k!` on a given matrix.
pub fn tail_check(oracles: &OracleFamily, t: f64, x: &ComplexMatrix) -> Result<SubtestOutcome, OracleError> {
    let k = x.dim();
    let value = oracles.query(k, x)?;
    if !finite(value) {
        return Ok(judge(f64::NAN, 1.0));
    }
    Ok(judge(value.norm_sqr(), t * t * factorial(k)))
}

/// Samples `X` from `sampler` and runs one linearity test at dimension `k`.
pub fn linearity_test(
    oracles: &OracleFamily,
    n: usize,
    k: usize,
    delta: f64,
    sampler: &EnsembleSampler,
) -> Result<SubtestOutcome, ParamError> {
    if k == 0 || k > n {
        return Err(ParamError::InvalidParams(format!("k = {k} outside 1..={n}")));
    }
    let x = sampler.sample_matrix(k)?;
    Ok(linearity_check(oracles, n, delta, &x)?)
}

/// Samples `X` from `sampler` and runs one tail test at dimension `k`.
pub fn tail_test(
    oracles: &OracleFamily,
    k: usize,
    t: f64,
    sampler: &EnsembleSampler,
) -> Result<SubtestOutcome, ParamError> {
    if k == 0 {
        return Err(ParamError::InvalidParams("k must be at least 1".into()));
    }
    if t.is_nan() || t <= 0.0 {
        return Err(ParamError::InvalidParams(format!("T must be positive, got {t}")));
    }
    let x = sampler.sample_matrix(k)?;
    Ok(tail_check(oracles, t, &x)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Stop at the first failing chunk of sub-tests.
    #[default]
    ShortCircuit,
    /// Run all `2dn` sub-tests and record every failure.
    RunToCompletion,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mode: RunMode,
    /// Size of a dedicated worker pool; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Keep every normalized statistic in the report.
    pub record_residuals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum FailureReason {
    /// The statistic exceeded its threshold.
    Threshold,
    /// The oracle answered with NaN or infinity.
    NonFinite,
    /// The oracle could not be queried (protocol failure, timeout, ...).
    OracleError(String),
}

/// The first failing sub-test, enough to regenerate its matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectCause {
    pub k: usize,
    pub test: TestKind,
    pub iteration: u64,
    /// Stream id of the sub-test sampler; with the report seed this
    /// reproduces the offending matrix.
    pub stream_id: u64,
    /// Normalized statistic (value / threshold) when finite.
    pub residual: Option<f64>,
    pub reason: FailureReason,
}

impl RejectCause {
    /// The matrix the failing sub-test sampled.
    pub fn regenerate(&self, seed: u64) -> ComplexMatrix {
        let sampler = EnsembleSampler {
            seed,
            stream_id: self.stream_id,
        };
        sampler
            .sample_matrix(self.k)
            .expect("k was valid when the cause was recorded")
    }
}

/// Per-stage summary of a normalized statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub k: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedValues {
    pub k: usize,
    pub test: TestKind,
    /// Normalized statistics in iteration order; `None` for non-finite.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// ISO-8601 UTC start time, when the caller supplies one.
    pub started_at: Option<String>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub verdict: Verdict,
    pub reject_cause: Option<RejectCause>,
    pub seed: u64,
    pub params: TesterParams,
    pub theorem_parameters: bool,
    pub oracle: Option<OracleSpec>,
    pub mode: RunMode,
    /// `|O_k(X) - sum_i x_1i O_{k-1}(X_i)|^2 / (n^2 delta^2 k!)` per stage.
    pub linearity_residuals: Vec<StageSummary>,
    /// `|O_k(X)|^2 / (T^2 k!)` per stage.
    pub tail_magnitudes: Vec<StageSummary>,
    /// Failures in iteration order (all of them in run-to-completion mode).
    pub failures: u64,
    pub total_queries: u64,
    pub queries_per_dim: Vec<u64>,
    pub query_budget: u64,
    pub warnings: Vec<String>,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<RecordedValues>>,
    pub timing: Timing,
}

impl TestReport {
    /// The report with timing removed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.timing = Timing {
            started_at: None,
            wall_seconds: 0.0,
        };
        r
    }
}

#[derive(Debug, Clone)]
struct Record {
    normalized: f64,
    failure: Option<FailureReason>,
}

fn run_one(
    oracles: &OracleFamily,
    params: &TesterParams,
    kind: TestKind,
    sampler: &EnsembleSampler,
    k: usize,
) -> Record {
    let x = sampler.sample_matrix(k).expect("k <= n <= MAX_DIM");
    let outcome = match kind {
        TestKind::Linearity => linearity_check(oracles, params.n, params.delta, &x),
        TestKind::Tail => tail_check(oracles, params.t, &x),
    };
    match outcome {
        Ok(o) if o.pass => Record {
            normalized: o.normalized,
            failure: None,
        },
        Ok(o) if o.normalized.is_finite() => Record {
            normalized: o.normalized,
            failure: Some(FailureReason::Threshold),
        },
        Ok(o) => Record {
            normalized: o.normalized,
            failure: Some(FailureReason::NonFinite),
        },
        Err(err) => Record {
            normalized: f64::NAN,
            failure: Some(FailureReason::OracleError(err.to_string())),
        },
    }
}

/// Runs the full tester against `oracles`.
pub fn run_ptest(
    oracles: &OracleFamily,
    params: &TesterParams,
    sampler: &EnsembleSampler,
    options: &RunOptions,
) -> Result<TestReport, ParamError> {
    if oracles.max_dim() < params.n {
        return Err(ParamError::InvalidParams(format!(
            "oracle covers dimensions up to {} but n = {}",
            oracles.max_dim(),
            params.n
        )));
    }
    match options.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| ParamError::InvalidParams(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(|| run_stages(oracles, params, sampler, options)))
        }
        None => Ok(run_stages(oracles, params, sampler, options)),
    }
}

fn run_stages(
    oracles: &OracleFamily,
    params: &TesterParams,
    root: &EnsembleSampler,
    options: &RunOptions,
) -> TestReport {
    let start = Instant::now();
    let counts_before = oracles.query_counts();
    let mut cause: Option<RejectCause> = None;
    let mut failures = 0u64;
    let mut linearity_residuals = Vec::new();
    let mut tail_magnitudes = Vec::new();
    let mut recorded = Vec::new();

    'stages: for k in 1..=params.n {
        for kind in [TestKind::Linearity, TestKind::Tail] {
            let mut values = Vec::with_capacity(params.d.min(1 << 20) as usize);
            let mut stage_failures = 0u64;
            let mut stop = false;
            let mut lo = 0u64;
            while lo < params.d {
                let hi = (lo + CHUNK).min(params.d);
                let chunk: Vec<Record> = (lo..hi)
                    .into_par_iter()
                    .map(|i| run_one(oracles, params, kind, &subtest_sampler(root, k, kind, i), k))
                    .collect();
                for (offset, rec) in chunk.into_iter().enumerate() {
                    if let Some(reason) = rec.failure {
                        stage_failures += 1;
                        if cause.is_none() {
                            let iteration = lo + offset as u64;
                            cause = Some(RejectCause {
                                k,
                                test: kind,
                                iteration,
                                stream_id: subtest_sampler(root, k, kind, iteration).stream_id,
                                residual: rec.normalized.is_finite().then_some(rec.normalized),
                                reason,
                            });
                        }
                    }
                    values.push(rec.normalized);
                }
                lo = hi;
                if stage_failures > 0 && options.mode == RunMode::ShortCircuit {
                    stop = true;
                    break;
                }
            }
            failures += stage_failures;
            let summary = StageSummary {
                k,
                summary: Summary::from_values(&values, stage_failures),
            };
            match kind {
                TestKind::Linearity => linearity_residuals.push(summary),
                TestKind::Tail => tail_magnitudes.push(summary),
            }
            if options.record_residuals {
                recorded.push(RecordedValues {
                    k,
                    test: kind,
                    values: values.iter().map(|v| v.is_finite().then_some(*v)).collect(),
                });
            }
            if stop {
                break 'stages;
            }
        }
    }

    let counts_after = oracles.query_counts();
    let queries_per_dim: Vec<u64> = counts_after
        .iter()
        .zip(counts_before.iter().chain(std::iter::repeat(&0)))
        .map(|(a, b)| a - b)
        .take(params.n + 1)
        .collect();
    let total_queries = counts_after.iter().sum::<u64>() - counts_before.iter().sum::<u64>();

    let mut warnings = Vec::new();
    if !params.theorem_parameters() {
        warnings.push("theorem-parameters: false (d or T overridden)".to_string());
    }
    if params.precondition_warning {
        warnings.push(format!(
            "n = {} is below sqrt(ln(1/(c*delta))); completeness and soundness guarantees do not apply",
            params.n
        ));
    }

    TestReport {
        verdict: if cause.is_some() {
            Verdict::Reject
        } else {
            Verdict::Accept
        },
        reject_cause: cause,
        seed: root.seed,
        params: params.clone(),
        theorem_parameters: params.theorem_parameters(),
        oracle: oracles.spec().cloned(),
        mode: options.mode,
        linearity_residuals,
        tail_magnitudes,
        failures,
        total_queries,
        queries_per_dim,
        query_budget: query_budget(params),
        warnings,
        version: env!("CARGO_PKG_VERSION").to_string(),
        residuals: options.record_residuals.then_some(recorded),
        timing: Timing {
            started_at: None,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::make_oracle;

    fn family(spec: OracleSpec) -> OracleFamily {
        make_oracle(&spec, EnsembleSampler::new(0)).unwrap()
    }

    #[test]
    fn parameters_from_formulas() {
        let (t, d) = compute_parameters(6, 0.5, 0.5).unwrap();
        // 24 / (0.5 * sqrt(0.5)) = 48 * sqrt(2)
        assert!((t - 48.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((t - 67.8823).abs() < 1e-4);
        assert_eq!(d, 221_184);
        assert_eq!(compute_parameters(1, 1.0, 1.0).unwrap(), (4.0, 192));
        // 192 * 16 / (0.6^4 * 0.5) = 47407.4...
        assert_eq!(compute_parameters(4, 0.6, 0.5).unwrap().1, 47_408);
    }

    #[test]
    fn parameter_domain() {
        for (n, delta, c) in [
            (0, 0.5, 0.5),
            (2, 0.0, 0.5),
            (2, 1.5, 0.5),
            (2, 0.5, 0.0),
            (2, 0.5, f64::NAN),
        ] {
            assert!(matches!(
                compute_parameters(n, delta, c),
                Err(ParamError::InvalidParams(_))
            ));
        }
        assert!(TesterParams::with_overrides(2, 0.5, 0.5, Some(0), None).is_err());
        assert!(TesterParams::with_overrides(2, 0.5, 0.5, None, Some(-1.0)).is_err());
    }

    #[test]
    fn overrides_and_warning() {
        let p = TesterParams::with_overrides(4, 0.6, 0.5, Some(2000), None).unwrap();
        assert_eq!(p.d, 2000);
        assert!(!p.theorem_parameters());
        assert!(TesterParams::new(4, 0.6, 0.5).unwrap().theorem_parameters());
        // sqrt(ln(1 / (0.01 * 0.01))) = 3.03 > 2
        assert!(TesterParams::new(2, 0.01, 0.01).unwrap().precondition_warning);
        assert!(!TesterParams::new(4, 0.5, 0.5).unwrap().precondition_warning);
    }

    #[test]
    fn budget_counts() {
        assert_eq!(budget(1, 192), 384);
        assert_eq!(budget(2, 10), 60);
        let p = TesterParams::with_overrides(3, 0.5, 0.5, Some(7), None).unwrap();
        assert_eq!(query_budget(&p), 7 * (1 + 3 + 4) + 3 * 7);
    }

    #[test]
    fn exact_oracle_passes_linearity() {
        let f = family(OracleSpec::Exact);
        let root = EnsembleSampler::new(77);
        for k in 1..=8 {
            for i in 0..20 {
                let out = linearity_test(&f, 8, k, 0.5, &root.derive_substream(i)).unwrap();
                assert!(out.pass);
                assert!(out.normalized <= 1e-18, "k={k}: {}", out.normalized);
            }
        }
    }

    #[test]
    fn zero_oracle_fails_k1_for_large_entry() {
        let f = family(OracleSpec::Zero);
        let root = EnsembleSampler::new(3);
        // find a sample with |x| > n delta
        let (n, delta) = (2, 0.3);
        let s = (0..)
            .map(|i| root.derive_substream(i))
            .find(|s| s.sample_matrix(1).unwrap().get(0, 0).norm() > n as f64 * delta)
            .unwrap();
        let out = linearity_test(&f, n, 1, delta, &s).unwrap();
        assert!(!out.pass);
        assert!(out.normalized > 1.0);
    }

    #[test]
    fn ties_pass() {
        // O_1(X) = X + n*delta exactly on the threshold
        let f = OracleFamily::from_fn(2, |m| m.get(0, 0) + Complex64::new(0.5, 0.0));
        let out = linearity_test(&f, 1, 1, 0.5, &EnsembleSampler::new(1)).unwrap();
        assert!(out.pass);
        assert_eq!(out.normalized, 1.0);
    }

    #[test]
    fn zero_oracle_tail_always_passes() {
        let f = family(OracleSpec::Zero);
        for i in 0..100 {
            let out = tail_test(&f, 3, 1.0, &EnsembleSampler::new(i)).unwrap();
            assert!(out.pass);
            assert_eq!(out.normalized, 0.0);
        }
    }

    #[test]
    fn nan_oracle_is_a_failure_not_a_crash() {
        let f = OracleFamily::from_fn(4, |_| Complex64::new(f64::NAN, 0.0));
        let p = TesterParams::with_overrides(3, 0.5, 0.5, Some(10), None).unwrap();
        let report = run_ptest(&f, &p, &EnsembleSampler::new(1), &RunOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Reject);
        let cause = report.reject_cause.unwrap();
        assert_eq!((cause.k, cause.test, cause.iteration), (1, TestKind::Linearity, 0));
        assert_eq!(cause.reason, FailureReason::NonFinite);
        assert_eq!(cause.residual, None);
    }

    #[test]
    fn oracle_errors_become_reject_causes() {
        struct Broken;
        impl crate::oracle::Oracle for Broken {
            fn max_dim(&self) -> usize {
                4
            }
            fn evaluate(&self, _: &ComplexMatrix) -> Result<Complex64, OracleError> {
                Err(crate::error::ProtocolError::Closed.into())
            }
        }
        let f = OracleFamily::new(Box::new(Broken), None);
        let p = TesterParams::with_overrides(2, 0.5, 0.5, Some(5), None).unwrap();
        let report = run_ptest(&f, &p, &EnsembleSampler::new(1), &RunOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Reject);
        assert!(matches!(
            report.reject_cause.unwrap().reason,
            FailureReason::OracleError(_)
        ));
    }

    #[test]
    fn refuses_oracle_smaller_than_n() {
        let f = OracleFamily::from_fn(2, |_| Complex64::new(0.0, 0.0));
        let p = TesterParams::with_overrides(3, 0.5, 0.5, Some(5), None).unwrap();
        assert!(run_ptest(&f, &p, &EnsembleSampler::new(1), &RunOptions::default()).is_err());
    }

    #[test]
    fn exact_oracle_accepts_small_run() {
        let f = family(OracleSpec::Exact);
        let p = TesterParams::with_overrides(4, 0.5, 0.5, Some(300), None).unwrap();
        let report = run_ptest(&f, &p, &EnsembleSampler::new(42), &RunOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Accept);
        assert!(report.reject_cause.is_none());
        assert_eq!(report.total_queries, query_budget(&p));
        assert_eq!(report.total_queries, f.total_queries());
        // dim j is queried by linearity and tail at stage j and by the minors at stage j + 1
        assert_eq!(report.queries_per_dim, vec![0, 4 * 300, 5 * 300, 6 * 300, 2 * 300]);
        assert!(report.warnings.iter().any(|w| w.contains("theorem-parameters: false")));
    }

    #[test]
    fn reject_cause_regenerates_matrix() {
        let f = family(OracleSpec::Zero);
        let p = TesterParams::with_overrides(4, 0.5, 0.5, Some(100), None).unwrap();
        let root = EnsembleSampler::new(42);
        let report = run_ptest(&f, &p, &root, &RunOptions::default()).unwrap();
        let cause = report.reject_cause.unwrap();
        assert_eq!(cause.k, 1);
        let x = cause.regenerate(report.seed);
        assert_eq!(
            x,
            subtest_sampler(&root, 1, cause.test, cause.iteration)
                .sample_matrix(1)
                .unwrap()
        );
        assert!(x.get(0, 0).norm_sqr() > 4.0);
    }
}
