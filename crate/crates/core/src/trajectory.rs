//! Desired trajectories with analytic derivatives up to order `n`.

use std::fmt;
use std::sync::Arc;

use crate::controller::DesiredState;
use crate::error::{positive, Error, Result};

/// `x_d(t)` together with its first `n` derivatives.
#[derive(Clone)]
pub struct DesiredTrajectory {
    order_n: usize,
    name: String,
    eval: Arc<dyn Fn(f64) -> DesiredState + Send + Sync>,
}

impl DesiredTrajectory {
    /// Wraps an arbitrary generator. `eval(t).vector` must have length `n`.
    pub fn from_fn<F>(name: impl Into<String>, order_n: usize, eval: F) -> Self
    where
        F: Fn(f64) -> DesiredState + Send + Sync + 'static,
    {
        Self {
            order_n,
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// Regulation to the origin.
    pub fn zero(n: usize) -> Self {
        Self::from_fn("zero", n, move |_| DesiredState::zero(n))
    }

    /// `x_d = offset + amplitude·sin(ω t)`.
    pub fn sine(n: usize, amplitude: f64, omega: f64, offset: f64) -> Result<Self> {
        let omega = positive("omega", omega)?;
        finite("amplitude", amplitude)?;
        finite("offset", offset)?;
        Ok(Self::from_fn("sine", n, move |t| {
            let (sin, cos) = (omega * t).sin_cos();
            let d = |k: usize| {
                let base = match k % 4 {
                    0 => sin,
                    1 => cos,
                    2 => -sin,
                    _ => -cos,
                };
                amplitude * omega.powi(k as i32) * base
            };
            let mut vector: Vec<f64> = (0..n).map(d).collect();
            vector[0] += offset;
            DesiredState {
                vector,
                nth_derivative: d(n),
            }
        }))
    }

    /// Smooth step `x_d = amplitude·(1 − e^{−rt} Σ_{k<m} (rt)^k / k!)`, the
    /// response of an m-fold real pole at `−r`. Derivatives up to order
    /// `m − 1` vanish at `t = 0`.
    pub fn smooth_step(n: usize, amplitude: f64, rate: f64, poles: usize) -> Result<Self> {
        let rate = positive("rate", rate)?;
        finite("amplitude", amplitude)?;
        if poles == 0 {
            return Err(Error::InvalidParameter {
                name: "poles",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self::from_fn("smooth_step", n, move |t| {
            let t = t.max(0.0);
            let vals: Vec<f64> = (0..=n)
                .map(|j| amplitude * smooth_step_derivative(j, rate, poles, t))
                .collect();
            DesiredState {
                vector: vals[..n].to_vec(),
                nth_derivative: vals[n],
            }
        }))
    }

    pub fn order(&self) -> usize {
        self.order_n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> DesiredState {
        (self.eval)(t)
    }
}

impl fmt::Debug for DesiredTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DesiredTrajectory")
            .field("name", &self.name)
            .field("order_n", &self.order_n)
            .finish_non_exhaustive()
    }
}

fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {v}"),
        })
    }
}

// j-th derivative of g(t) = 1 − e^{−rt} Σ_{k<m} (rt)^k/k!.
// For j ≥ 1, g^{(j)} = r^m/(m−1)! · d^{j−1}/dt^{j−1} [t^{m−1} e^{−rt}].
fn smooth_step_derivative(j: usize, r: f64, m: usize, t: f64) -> f64 {
    let e = (-r * t).exp();
    if j == 0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..m {
            if k > 0 {
                term *= r * t / k as f64;
            }
            sum += term;
        }
        return 1.0 - e * sum;
    }
    let p = m - 1;
    let q = j - 1;
    let mut acc = 0.0;
    let mut binom = 1.0; // C(q, i)
    let mut falling = 1.0; // p! / (p − i)!
    for i in 0..=q.min(p) {
        if i > 0 {
            binom *= (q - i + 1) as f64 / i as f64;
            falling *= (p - i + 1) as f64;
        }
        acc += binom * falling * t.powi((p - i) as i32) * (-r).powi((q - i) as i32);
    }
    let fact: f64 = (1..=p).map(|k| k as f64).product();
    r.powi(m as i32) / fact * acc * e
}
