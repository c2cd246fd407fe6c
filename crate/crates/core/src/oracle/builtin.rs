use num_complex::Complex64;

use super::{Oracle, OracleSpec};
use crate::ensemble::mix64;
use crate::error::OracleError;
use crate::matrix::ComplexMatrix;
use crate::permanent::{factorial, ryser_unchecked, MAX_DIM};

const NOISE_SALT: u64 = 0x6e6f_6973_6500_0001;
const SELECT_SALT: u64 = 0x7365_6c65_6374_0002;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// The in-process oracle zoo: exact, noisy and adversarial kinds.
#[derive(Debug, Clone)]
pub struct BuiltinOracle {
    spec: OracleSpec,
    seed: u64,
}

impl BuiltinOracle {
    pub fn new(spec: OracleSpec, seed: u64) -> Result<Self, OracleError> {
        spec.validate()?;
        if spec.is_remote() {
            return Err(OracleError::InvalidSpec("remote is not a built-in oracle".into()));
        }
        Ok(Self { spec, seed })
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    /// 64-bit digest of `(seed, salt, dim, entry bits)`.
    fn digest(&self, m: &ComplexMatrix, salt: u64) -> u64 {
        let mut h = mix64(self.seed ^ salt) ^ m.dim() as u64;
        for z in m.entries() {
            h = mix64(h ^ z.re.to_bits());
            h = mix64(h.wrapping_add(z.im.to_bits()));
        }
        h
    }

    /// A value in [0, 1) determined by the matrix bits.
    fn uniform(&self, m: &ComplexMatrix, salt: u64) -> f64 {
        (self.digest(m, salt) >> 11) as f64 * TWO_POW_M53
    }

    /// Point in the closed unit disk (on the unit circle when `boundary`).
    fn disk_point(&self, m: &ComplexMatrix, boundary: bool) -> Complex64 {
        let h = self.digest(m, NOISE_SALT);
        let u1 = (mix64(h ^ 1) >> 11) as f64 * TWO_POW_M53;
        let u2 = (mix64(h ^ 2) >> 11) as f64 * TWO_POW_M53;
        let r = if boundary { 1.0 } else { u1.sqrt() };
        let (s, c) = libm::sincos(std::f64::consts::TAU * u2);
        Complex64::new(r * c, r * s)
    }

    /// Whether the hash-selected corruption event fires for `m`.
    pub fn selected(&self, m: &ComplexMatrix, rate: f64) -> bool {
        self.uniform(m, SELECT_SALT) < rate
    }
}

impl Oracle for BuiltinOracle {
    fn max_dim(&self) -> usize {
        MAX_DIM
    }

    fn evaluate(&self, m: &ComplexMatrix) -> Result<Complex64, OracleError> {
        let k = m.dim();
        let scale = factorial(k).sqrt();
        let per = || ryser_unchecked(m);
        let value = match self.spec {
            OracleSpec::Exact => per(),
            OracleSpec::Zero => Complex64::new(0.0, 0.0),
            OracleSpec::AdditiveNoise { delta, worst_case } => per() + self.disk_point(m, worst_case) * (delta * scale),
            OracleSpec::Scaled { alpha } => per() * alpha,
            OracleSpec::CorruptedFraction { eta, magnitude } => {
                if self.selected(m, eta) {
                    Complex64::new(magnitude * scale, 0.0)
                } else {
                    per()
                }
            }
            OracleSpec::HeavyTail {
                p,
                magnitude,
                threshold,
            } => {
                // validate() guarantees the threshold is present
                let t = threshold.unwrap_or(f64::NAN);
                if self.selected(m, p) {
                    Complex64::new(magnitude * t * scale, 0.0)
                } else {
                    per()
                }
            }
            OracleSpec::AffineShift { beta } => per() + Complex64::new(beta * scale, 0.0),
            OracleSpec::Remote { .. } => unreachable!("rejected in BuiltinOracle::new"),
        };
        Ok(value)
    }
}
