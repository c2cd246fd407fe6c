//! Oracle families `{O_k}` queried by the tester.
//!
//! Every built-in oracle is a pure function of `(k, X, spec, seed)`: any
//! randomness it needs (noise direction, which inputs to corrupt) comes from
//! hashing the bits of the queried matrix, so repeated queries agree.

mod builtin;
mod remote;
mod spec;

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::ensemble::EnsembleSampler;
use crate::error::OracleError;
use crate::matrix::ComplexMatrix;

pub use builtin::BuiltinOracle;
pub use remote::{remote_query, Endpoint, RemoteOracle, DEFAULT_TIMEOUT};
pub use spec::OracleSpec;

/// A single approximate-permanent oracle covering dimensions `1..=max_dim`.
pub trait Oracle: Send + Sync {
    fn max_dim(&self) -> usize;

    /// Evaluates `O_k(m)` where `k = m.dim()`.
    fn evaluate(&self, m: &ComplexMatrix) -> Result<Complex64, OracleError>;
}

struct FnOracle<F> {
    max_dim: usize,
    f: F,
}

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&ComplexMatrix) -> Complex64 + Send + Sync,
{
    fn max_dim(&self) -> usize {
        self.max_dim
    }

    fn evaluate(&self, m: &ComplexMatrix) -> Result<Complex64, OracleError> {
        Ok((self.f)(m))
    }
}

struct Capped {
    inner: Box<dyn Oracle>,
    max_dim: usize,
}

impl Oracle for Capped {
    fn max_dim(&self) -> usize {
        self.max_dim
    }

    fn evaluate(&self, m: &ComplexMatrix) -> Result<Complex64, OracleError> {
        self.inner.evaluate(m)
    }
}

/// An oracle together with per-dimension query accounting.
pub struct OracleFamily {
    inner: Box<dyn Oracle>,
    spec: Option<OracleSpec>,
    // index k, slot 0 unused
    counts: Vec<AtomicU64>,
}

impl OracleFamily {
    pub fn new(inner: Box<dyn Oracle>, spec: Option<OracleSpec>) -> Self {
        let counts = (0..=inner.max_dim()).map(|_| AtomicU64::new(0)).collect();
        Self { inner, spec, counts }
    }

    /// Wraps an arbitrary function; useful for ad-hoc adversaries in tests.
    pub fn from_fn<F>(max_dim: usize, f: F) -> Self
    where
        F: Fn(&ComplexMatrix) -> Complex64 + Send + Sync + 'static,
    {
        Self::new(Box::new(FnOracle { max_dim, f }), None)
    }

    pub fn max_dim(&self) -> usize {
        self.inner.max_dim()
    }

    /// Restricts the family to dimensions `<= max_dim` (never widens it).
    pub fn with_max_dim(self, max_dim: usize) -> Self {
        let max_dim = max_dim.min(self.max_dim());
        Self::new(
            Box::new(Capped {
                inner: self.inner,
                max_dim,
            }),
            self.spec,
        )
    }

    pub fn spec(&self) -> Option<&OracleSpec> {
        self.spec.as_ref()
    }

    /// Queries `O_k(m)`. Every call that passes the range checks is counted,
    /// whether or not the oracle itself succeeds.
    pub fn query(&self, k: usize, m: &ComplexMatrix) -> Result<Complex64, OracleError> {
        let max_dim = self.max_dim();
        if k == 0 || k > max_dim {
            return Err(OracleError::DimensionOutOfRange { k, max_dim });
        }
        if m.dim() != k {
            return Err(OracleError::DimensionMismatch {
                declared: k,
                actual: m.dim(),
            });
        }
        self.counts[k].fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(m)
    }

    /// Number of queries made at dimension `k`.
    pub fn query_count(&self, k: usize) -> u64 {
        self.counts.get(k).map_or(0, |c| c.load(Ordering::Relaxed))
    }

    /// Per-dimension tallies, index `k` for `k` in `0..=max_dim` (slot 0 is always 0).
    pub fn query_counts(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c.load(Ordering::Relaxed)).collect()
    }

    pub fn total_queries(&self) -> u64 {
        self.counts.iter().map(|c| c.load(Ordering::Relaxed)).sum()
    }

    pub fn reset_counts(&self) {
        for c in &self.counts {
            c.store(0, Ordering::Relaxed);
        }
    }
}

impl std::fmt::Debug for OracleFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleFamily")
            .field("max_dim", &self.max_dim())
            .field("spec", &self.spec)
            .field("total_queries", &self.total_queries())
            .finish()
    }
}

/// Builds the oracle family described by `spec`.
///
/// Built-in kinds use `sampler.seed` as their construction seed for the
/// input hash. Remote kinds connect and complete the handshake eagerly so
/// an unreachable endpoint fails here, not mid-run.
pub fn make_oracle(spec: &OracleSpec, sampler: EnsembleSampler) -> Result<OracleFamily, OracleError> {
    spec.validate()?;
    let inner: Box<dyn Oracle> = match spec {
        OracleSpec::Remote { endpoint, timeout_ms } => {
            let endpoint: Endpoint = endpoint.parse()?;
            let timeout = timeout_ms.map_or(DEFAULT_TIMEOUT, std::time::Duration::from_millis);
            Box::new(RemoteOracle::connect(endpoint, timeout)?)
        }
        _ => Box::new(BuiltinOracle::new(spec.clone(), sampler.seed)?),
    };
    Ok(OracleFamily::new(inner, Some(spec.clone())))
}
