//! Sliding surface `s = (d/dt + λ)^{n-1} x̃` and the boundary-layer distance.
//!
//! Coefficient layout follows the error vector `x̃ = [x̃, ẋ̃, …, x̃^{(n-1)}]`:
//! `coeffs_c[k]` multiplies `x̃^{(k)}`, so the highest power of λ comes first
//! and the last entry is always exactly 1.

use std::ops::Deref;

use crate::error::{check_len, positive, Error, Result};

/// Largest supported system order.
pub const MAX_ORDER: usize = 20;

/// Row `n - 1` of Pascal's triangle, `[C(n-1, 0), …, C(n-1, n-1)]`.
///
/// Uses the multiplicative recurrence `c_i = c_{i-1} (n - i) / i` with checked
/// arithmetic; the division is always exact.
pub fn binomial_coefficients(n: usize) -> Result<Vec<u64>> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::OrderOutOfRange(n));
    }
    let m = (n - 1) as u64;
    let mut out = Vec::with_capacity(n);
    let mut c: u64 = 1;
    out.push(c);
    for i in 1..=m {
        c = c.checked_mul(m - i + 1).ok_or(Error::OrderOutOfRange(n))? / i;
        out.push(c);
    }
    Ok(out)
}

/// Binomial coefficient `C(n, k)` in exact arithmetic, `None` on overflow.
pub(crate) fn choose(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 1..=k {
        c = c.checked_mul(n - k + i)? / i;
    }
    Some(c)
}

/// The sliding surface of order `n` with slope `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    order_n: usize,
    lambda: f64,
    coeffs_c: Vec<f64>,
    coeffs_cbar: Vec<f64>,
}

/// Builds the surface `s = c·x̃` with `c = [c_{n-1}λ^{n-1}, …, c_1λ, c_0]`.
pub fn make_surface(n: usize, lambda: f64) -> Result<SurfaceSpec> {
    SurfaceSpec::new(n, lambda)
}

impl SurfaceSpec {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        let lambda = positive("lambda", lambda)?;
        let binom = binomial_coefficients(n)?;
        let coeffs_c: Vec<f64> = (0..n)
            .map(|k| {
                let p = n - 1 - k;
                binom[p] as f64 * lambda.powi(p as i32)
            })
            .collect();
        let mut coeffs_cbar = Vec::with_capacity(n);
        coeffs_cbar.push(0.0);
        coeffs_cbar.extend_from_slice(&coeffs_c[..n - 1]);
        Ok(Self {
            order_n: n,
            lambda,
            coeffs_c,
            coeffs_cbar,
        })
    }

    pub fn order(&self) -> usize {
        self.order_n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coeffs_c(&self) -> &[f64] {
        &self.coeffs_c
    }

    pub fn coeffs_cbar(&self) -> &[f64] {
        &self.coeffs_cbar
    }

    /// `s(x̃) = c·x̃`.
    pub fn value(&self, err: &[f64]) -> Result<f64> {
        check_len(self.order_n, err.len())?;
        Ok(dot(&self.coeffs_c, err))
    }

    /// `ṡ = x̃^{(n)} + c̄·x̃`.
    pub fn rate(&self, err: &[f64], err_n: f64) -> Result<f64> {
        check_len(self.order_n, err.len())?;
        Ok(err_n + dot(&self.coeffs_cbar, err))
    }

    /// `c̄·x̃`, the part of `ṡ` that does not involve `x̃^{(n)}`.
    pub fn cbar_dot(&self, err: &[f64]) -> Result<f64> {
        check_len(self.order_n, err.len())?;
        Ok(dot(&self.coeffs_cbar, err))
    }
}

pub fn surface_value(spec: &SurfaceSpec, err: &ErrorVector) -> Result<f64> {
    spec.value(err)
}

pub fn surface_rate(spec: &SurfaceSpec, err: &ErrorVector, err_n: f64) -> Result<f64> {
    spec.rate(err, err_n)
}

/// Distance of `s` to the boundary layer `|s| ≤ φ`: `s − φ·sat(s/φ)`.
pub fn boundary_distance(s: f64, phi: f64) -> Result<f64> {
    let phi = positive("phi", phi)?;
    Ok(layer_distance(s, phi))
}

/// Unchecked version of [`boundary_distance`] for hot loops where `phi` is
/// already validated.
#[inline]
pub(crate) fn layer_distance(s: f64, phi: f64) -> f64 {
    if s > phi {
        s - phi
    } else if s < -phi {
        s + phi
    } else {
        0.0
    }
}

/// Tracking error vector `x̃ = x − x_d`, entry `i` holding `x̃^{(i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector(Vec<f64>);

impl ErrorVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn between(state: &[f64], desired: &[f64]) -> Result<Self> {
        check_len(state.len(), desired.len())?;
        Ok(Self(
            state.iter().zip(desired).map(|(x, d)| x - d).collect(),
        ))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ErrorVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ErrorVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
