//! Switching functions: the ideal relay and its smooth replacements.

use std::fmt;
use std::str::FromStr;

use crate::error::{positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SmoothingKind {
    /// The discontinuous relay `sgn(s)`.
    Sign,
    /// `sat(s/φ)`; identical to `sgn(s)` outside the layer.
    #[default]
    Saturation,
    /// `tanh(s/φ)`; only approaches `sgn(s)` outside the layer.
    HyperbolicTangent,
}

impl SmoothingKind {
    pub const ALL: [SmoothingKind; 3] = [
        SmoothingKind::Sign,
        SmoothingKind::Saturation,
        SmoothingKind::HyperbolicTangent,
    ];

    /// Whether the function equals `sgn(s)` exactly for `|s| ≥ φ`.
    pub fn exact_outside_layer(self) -> bool {
        !matches!(self, SmoothingKind::HyperbolicTangent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SmoothingKind::Sign => "sign",
            SmoothingKind::Saturation => "sat",
            SmoothingKind::HyperbolicTangent => "tanh",
        }
    }

    /// Evaluates the switching function; see [`evaluate`].
    pub fn eval(self, s: f64, phi: f64) -> Result<f64> {
        evaluate(self, s, phi)
    }

    #[inline]
    pub(crate) fn eval_unchecked(self, s: f64, phi: f64) -> f64 {
        match self {
            SmoothingKind::Sign => sign_fn(s),
            SmoothingKind::Saturation => {
                let r = s / phi;
                if r.abs() >= 1.0 {
                    sign_fn(s)
                } else {
                    r
                }
            }
            SmoothingKind::HyperbolicTangent => (s / phi).tanh(),
        }
    }
}

impl fmt::Display for SmoothingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SmoothingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign" => Ok(SmoothingKind::Sign),
            "sat" => Ok(SmoothingKind::Saturation),
            "tanh" => Ok(SmoothingKind::HyperbolicTangent),
            other => Err(Error::InvalidParameter {
                name: "smoothing",
                reason: format!("expected one of sign, sat, tanh; got `{other}`"),
            }),
        }
    }
}

/// Three-valued sign: −1, 0 or 1. NaN maps to 0.
#[inline]
pub fn sign_fn(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `φ(s, φ)` for the given kind. `Sign` ignores `phi` but still requires it
/// to be positive so every kind shares one contract.
pub fn evaluate(kind: SmoothingKind, s: f64, phi: f64) -> Result<f64> {
    let phi = positive("phi", phi)?;
    Ok(kind.eval_unchecked(s, phi))
}
