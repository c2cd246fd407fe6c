use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::OracleError;

/// Declarative description of an oracle family.
///
/// The compact string form used on the command line is
///
/// | form                         | kind                                     |
/// |------------------------------|------------------------------------------|
/// | `exact`                      | `O_k = Per_k`                            |
/// | `noise:D` / `noise-worst:D`  | `Per_k + D*sqrt(k!)*u`, `|u| <= 1` / `= 1` |
/// | `zero`                       | `O_k = 0`                                |
/// | `scaled:A`                   | `A * Per_k`                              |
/// | `corrupt:ETA:M`              | `M*sqrt(k!)` on an ETA-fraction of inputs |
/// | `heavy-tail:P:M[:T]`         | `M*T*sqrt(k!)` with probability P        |
/// | `shift:B`                    | `Per_k + B*sqrt(k!)`                     |
/// | `remote:ENDPOINT`            | see [`Endpoint`](super::Endpoint)        |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    Exact,
    AdditiveNoise {
        delta: f64,
        #[serde(default)]
        worst_case: bool,
    },
    Zero,
    Scaled {
        alpha: f64,
    },
    CorruptedFraction {
        eta: f64,
        magnitude: f64,
    },
    HeavyTail {
        p: f64,
        magnitude: f64,
        /// Tail threshold `T`; filled from the tester parameters when omitted.
        threshold: Option<f64>,
    },
    AffineShift {
        beta: f64,
    },
    Remote {
        endpoint: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_ms: Option<u64>,
    },
}

fn invalid(msg: impl Into<String>) -> OracleError {
    OracleError::InvalidSpec(msg.into())
}

fn finite(name: &str, v: f64) -> Result<(), OracleError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

fn unit_interval(name: &str, v: f64) -> Result<(), OracleError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl OracleSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        match *self {
            OracleSpec::Exact | OracleSpec::Zero => Ok(()),
            OracleSpec::AdditiveNoise { delta, .. } => {
                finite("delta", delta)?;
                if delta < 0.0 {
                    return Err(invalid(format!("delta must be non-negative, got {delta}")));
                }
                Ok(())
            }
            OracleSpec::Scaled { alpha } => finite("alpha", alpha),
            OracleSpec::CorruptedFraction { eta, magnitude } => {
                unit_interval("eta", eta)?;
                finite("magnitude", magnitude)
            }
            OracleSpec::HeavyTail {
                p,
                magnitude,
                threshold,
            } => {
                unit_interval("p", p)?;
                finite("magnitude", magnitude)?;
                match threshold {
                    Some(t) if t.is_finite() && t > 0.0 => Ok(()),
                    Some(t) => Err(invalid(format!("threshold must be positive, got {t}"))),
                    None => Err(invalid("heavy_tail needs a threshold T")),
                }
            }
            OracleSpec::AffineShift { beta } => finite("beta", beta),
            OracleSpec::Remote { ref endpoint, .. } => {
                if endpoint.is_empty() {
                    Err(invalid("remote endpoint is empty"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Supplies the tail threshold to a heavy-tail spec that left it open.
    pub fn with_default_threshold(self, t: f64) -> Self {
        match self {
            OracleSpec::HeavyTail {
                p,
                magnitude,
                threshold: None,
            } => OracleSpec::HeavyTail {
                p,
                magnitude,
                threshold: Some(t),
            },
            other => other,
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, OracleSpec::Remote { .. })
    }
}

fn num(field: &str, s: Option<&str>) -> Result<f64, OracleError> {
    let s = s.ok_or_else(|| invalid(format!("missing {field}")))?;
    s.parse::<f64>()
        .map_err(|_| invalid(format!("{field}: cannot parse {s:?} as a number")))
}

impl FromStr for OracleSpec {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(endpoint) = s.strip_prefix("remote:") {
            return Ok(OracleSpec::Remote {
                endpoint: endpoint.to_string(),
                timeout_ms: None,
            });
        }
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let spec = match kind {
            "exact" => OracleSpec::Exact,
            "zero" => OracleSpec::Zero,
            "noise" | "additive_noise" => OracleSpec::AdditiveNoise {
                delta: num("delta", parts.next())?,
                worst_case: false,
            },
            "noise-worst" => OracleSpec::AdditiveNoise {
                delta: num("delta", parts.next())?,
                worst_case: true,
            },
            "scaled" => OracleSpec::Scaled {
                alpha: num("alpha", parts.next())?,
            },
            "corrupt" | "corrupted_fraction" => OracleSpec::CorruptedFraction {
                eta: num("eta", parts.next())?,
                magnitude: num("magnitude", parts.next())?,
            },
            "heavy-tail" | "heavy_tail" => OracleSpec::HeavyTail {
                p: num("p", parts.next())?,
                magnitude: num("magnitude", parts.next())?,
                threshold: parts.next().map(|t| num("threshold", Some(t))).transpose()?,
            },
            "shift" | "affine_shift" => OracleSpec::AffineShift {
                beta: num("beta", parts.next())?,
            },
            other => return Err(invalid(format!("unknown oracle kind {other:?}"))),
        };
        if let Some(extra) = parts.next() {
            return Err(invalid(format!("unexpected trailing field {extra:?}")));
        }
        Ok(spec)
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Exact => write!(f, "exact"),
            OracleSpec::Zero => write!(f, "zero"),
            OracleSpec::AdditiveNoise {
                delta,
                worst_case: false,
            } => write!(f, "noise:{delta}"),
            OracleSpec::AdditiveNoise {
                delta,
                worst_case: true,
            } => write!(f, "noise-worst:{delta}"),
            OracleSpec::Scaled { alpha } => write!(f, "scaled:{alpha}"),
            OracleSpec::CorruptedFraction { eta, magnitude } => write!(f, "corrupt:{eta}:{magnitude}"),
            OracleSpec::HeavyTail {
                p,
                magnitude,
                threshold,
            } => {
                write!(f, "heavy-tail:{p}:{magnitude}")?;
                if let Some(t) = threshold {
                    write!(f, ":{t}")?;
                }
                Ok(())
            }
            OracleSpec::AffineShift { beta } => write!(f, "shift:{beta}"),
            OracleSpec::Remote { endpoint, .. } => write!(f, "remote:{endpoint}"),
        }
    }
}
