//! Ground-truth plants `x^{(n)} = f(t, x) + b(x) u` and a fixed-step RK4
//! integrator for them.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, positive, Error, Result, StateDump};

pub type DriftFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type GainFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The true plant, seen only by the simulator. The drift may depend on time
/// so that external disturbances can be folded into `f`.
#[derive(Clone)]
pub struct PlantModel {
    order_n: usize,
    name: String,
    f_true: DriftFn,
    b_true: GainFn,
}

impl PlantModel {
    pub fn new<F, B>(name: impl Into<String>, order_n: usize, f_true: F, b_true: B) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        B: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            order_n,
            name: name.into(),
            f_true: Arc::new(f_true),
            b_true: Arc::new(b_true),
        }
    }

    pub fn order(&self) -> usize {
        self.order_n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn f(&self, t: f64, x: &[f64]) -> f64 {
        (self.f_true)(t, x)
    }

    pub fn b(&self, x: &[f64]) -> f64 {
        (self.b_true)(x)
    }

    /// `x^{(n)}` for the given input.
    pub fn highest_derivative(&self, t: f64, x: &[f64], u: f64) -> f64 {
        self.f(t, x) + self.b(x) * u
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("name", &self.name)
            .field("order_n", &self.order_n)
            .finish_non_exhaustive()
    }
}

/// One classical RK4 step of `ẏ = rhs(t, y)`, writing into `out`.
pub(crate) fn rk4<F>(y: &[f64], t: f64, dt: f64, out: &mut Vec<f64>, mut rhs: F) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    rhs(t, y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    rhs(t + 0.5 * dt, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    rhs(t + 0.5 * dt, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    rhs(t + dt, &tmp, &mut k4)?;

    out.clear();
    out.extend((0..n).map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])));
    Ok(())
}

/// Chain-of-integrators right-hand side with the top derivative supplied.
#[inline]
pub(crate) fn chain_rhs(x: &[f64], top: f64, dx: &mut [f64]) {
    let n = x.len();
    dx[..n - 1].copy_from_slice(&x[1..]);
    dx[n - 1] = top;
}

/// Advances the plant by `dt` with `u` held constant over the step.
pub fn step(plant: &PlantModel, t: f64, state: &[f64], u: f64, dt: f64) -> Result<Vec<f64>> {
    positive("dt", dt)?;
    check_len(plant.order(), state.len())?;
    let mut out = Vec::with_capacity(state.len());
    rk4(state, t, dt, &mut out, |tt, x, dx| {
        let top = plant.highest_derivative(tt, x, u);
        if !top.is_finite() {
            return Err(Error::NonFinite {
                what: "plant derivative",
                state: StateDump(x.to_vec()),
            });
        }
        chain_rhs(x, top, dx);
        Ok(())
    })?;
    Ok(out)
}
