//! Monte-Carlo check that the robust gain enforces the sliding condition
//! for every admissible plant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{control, ControllerConfig, DesiredState};
use crate::error::{positive, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GainSamplingReport {
    pub draws: usize,
    /// Draws with `s_φ ≠ 0`, the only ones the condition applies to.
    pub outside_layer: usize,
    /// `max (sign(s_φ)·ṡ + η)` over outside draws; `-inf` when there are none.
    pub max_violation: f64,
    /// State, desired vector, `x_d^{(n)}`, `f`, `b` of the worst draw.
    pub worst_draw: Option<Vec<f64>>,
    pub tol: f64,
    pub pass: bool,
}

fn endpoint_biased(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..8) {
        0 => -1.0,
        1 => 1.0,
        _ => rng.random_range(-1.0..=1.0),
    }
}

/// Draws states and desired values uniformly in `[−radius, radius]`, the true
/// drift anywhere in `f̂ ± F` and the true gain anywhere in `[b_min, b_max]`
/// (a quarter of the draws pinned to the endpoints), and checks
/// `s_φ ṡ ≤ −η|s_φ|` outside the layer up to `tol`.
pub fn sample_gain_sufficiency(
    cfg: &ControllerConfig,
    draws: usize,
    radius: f64,
    seed: u64,
    tol: f64,
) -> Result<GainSamplingReport> {
    let radius = positive("radius", radius)?;
    let n = cfg.order();
    let unc = cfg.uncertainty();
    let spec = cfg.surface();
    let eta = cfg.eta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outside = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_draw = None;
    for _ in 0..draws {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
        let xd: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
        let xd_n = rng.random_range(-radius..=radius);
        let desired = DesiredState::new(xd, xd_n)?;
        let f = unc.f_hat(&x)? + endpoint_biased(&mut rng) * unc.f_bound(&x)?;
        let b = unc.b_min() + 0.5 * (1.0 + endpoint_biased(&mut rng)) * (unc.b_max() - unc.b_min());
        let out = control(cfg, &x, &desired)?;
        let s_phi = out.diagnostics.s_phi;
        if s_phi == 0.0 {
            continue;
        }
        outside += 1;
        let err: Vec<f64> = x.iter().zip(&desired.vector).map(|(a, d)| a - d).collect();
        let sdot = f + b * out.u - desired.nth_derivative + spec.cbar_dot(&err)?;
        let v = s_phi.signum() * sdot + eta;
        if v > worst {
            worst = v;
            let mut d = x.clone();
            d.extend(&desired.vector);
            d.extend([desired.nth_derivative, f, b]);
            worst_draw = Some(d);
        }
    }
    Ok(GainSamplingReport {
        draws,
        outside_layer: outside,
        max_violation: worst,
        worst_draw,
        tol,
        pass: worst <= tol,
    })
}
