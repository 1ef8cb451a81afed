//! Equivalent control, robust gain and the (smooth) sliding mode law
//! `u = b̂⁻¹(−f̂ + x_d^{(n)} − c̄·x̃) − K φ(s, φ)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, positive, Error, Result, StateDump};
use crate::smoothing::SmoothingKind;
use crate::surface::{layer_distance, SurfaceSpec};

/// A scalar function of the state vector.
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// What the controller knows about the plant: the nominal drift `f̂`, its
/// error bound `F`, and the input-gain interval `[b_min, b_max]`.
#[derive(Clone)]
pub struct UncertaintyModel {
    f_hat: StateFn,
    f_bound: StateFn,
    b_min: f64,
    b_max: f64,
    b_hat: f64,
    beta: f64,
}

impl UncertaintyModel {
    pub fn new<F, G>(f_hat: F, f_bound: G, b_min: f64, b_max: f64) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_arcs(Arc::new(f_hat), Arc::new(f_bound), b_min, b_max)
    }

    pub fn from_arcs(f_hat: StateFn, f_bound: StateFn, b_min: f64, b_max: f64) -> Result<Self> {
        let b_min = positive("b_min", b_min)?;
        let b_max = positive("b_max", b_max)?;
        if b_min > b_max {
            return Err(Error::InvalidParameter {
                name: "b_max",
                reason: format!("must satisfy b_min <= b_max (b_min = {b_min}, b_max = {b_max})"),
            });
        }
        Ok(Self {
            f_hat,
            f_bound,
            b_min,
            b_max,
            b_hat: (b_max * b_min).sqrt(),
            beta: (b_max / b_min).sqrt(),
        })
    }

    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    /// Geometric-mean gain estimate `√(b_max b_min)`.
    pub fn b_hat(&self) -> f64 {
        self.b_hat
    }

    /// Gain margin `√(b_max / b_min) ≥ 1`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn f_hat(&self, x: &[f64]) -> Result<f64> {
        let v = (self.f_hat)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                what: "f_hat",
                state: StateDump(x.to_vec()),
            })
        }
    }

    pub fn f_bound(&self, x: &[f64]) -> Result<f64> {
        let v = (self.f_bound)(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "f_bound",
                state: StateDump(x.to_vec()),
            });
        }
        if v < 0.0 {
            return Err(Error::InvalidParameter {
                name: "f_bound",
                reason: format!("F(x) must be nonnegative, got {v} at {:?}", x),
            });
        }
        Ok(v)
    }
}

impl fmt::Debug for UncertaintyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UncertaintyModel")
            .field("b_min", &self.b_min)
            .field("b_max", &self.b_max)
            .field("b_hat", &self.b_hat)
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    surface: SurfaceSpec,
    uncertainty: UncertaintyModel,
    eta: f64,
    phi: f64,
    smoothing: SmoothingKind,
    gain_scale: f64,
}

impl ControllerConfig {
    pub fn new(
        surface: SurfaceSpec,
        uncertainty: UncertaintyModel,
        eta: f64,
        phi: f64,
        smoothing: SmoothingKind,
    ) -> Result<Self> {
        Ok(Self {
            surface,
            uncertainty,
            eta: positive("eta", eta)?,
            phi: positive("phi", phi)?,
            smoothing,
            gain_scale: 1.0,
        })
    }

    /// Multiplies the minimal admissible gain by `scale`. Values below 1
    /// deliberately break the reaching condition.
    pub fn with_gain_scale(mut self, scale: f64) -> Result<Self> {
        self.gain_scale = positive("gain_scale", scale)?;
        Ok(self)
    }

    pub fn with_smoothing(mut self, smoothing: SmoothingKind) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn surface(&self) -> &SurfaceSpec {
        &self.surface
    }

    pub fn uncertainty(&self) -> &UncertaintyModel {
        &self.uncertainty
    }

    pub fn order(&self) -> usize {
        self.surface.order()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn smoothing(&self) -> SmoothingKind {
        self.smoothing
    }

    pub fn gain_scale(&self) -> f64 {
        self.gain_scale
    }
}

/// Desired state `[x_d, ẋ_d, …, x_d^{(n-1)}]` together with `x_d^{(n)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredState {
    pub vector: Vec<f64>,
    pub nth_derivative: f64,
}

impl DesiredState {
    pub fn new(vector: Vec<f64>, nth_derivative: f64) -> Result<Self> {
        if vector
            .iter()
            .chain([&nth_derivative])
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                what: "desired trajectory",
                state: StateDump(vector),
            });
        }
        Ok(Self {
            vector,
            nth_derivative,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            vector: vec![0.0; n],
            nth_derivative: 0.0,
        }
    }
}

/// Intermediate quantities of one control evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub s: f64,
    pub s_phi: f64,
    pub k: f64,
    pub u_eq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub diagnostics: Diagnostics,
}

// Shared front half of every law: validates dimensions, builds x̃ and
// evaluates the model-based part once.
struct Evaluated {
    err: Vec<f64>,
    u_eq: f64,
    f_bound: f64,
}

fn evaluate_model(
    cfg: &ControllerConfig,
    state: &[f64],
    desired: &DesiredState,
) -> Result<Evaluated> {
    let n = cfg.order();
    check_len(n, state.len())?;
    check_len(n, desired.vector.len())?;
    let err: Vec<f64> = state
        .iter()
        .zip(&desired.vector)
        .map(|(x, d)| x - d)
        .collect();
    let f_hat = cfg.uncertainty.f_hat(state)?;
    let f_bound = cfg.uncertainty.f_bound(state)?;
    let cbar = cfg.surface.cbar_dot(&err)?;
    let u_eq = (-f_hat + desired.nth_derivative - cbar) / cfg.uncertainty.b_hat;
    Ok(Evaluated { err, u_eq, f_bound })
}

fn gain_from(cfg: &ControllerConfig, u_eq: f64, f_bound: f64) -> f64 {
    let unc = &cfg.uncertainty;
    let minimal = unc.beta * (cfg.eta + f_bound) / unc.b_hat + (unc.beta - 1.0) * u_eq.abs();
    cfg.gain_scale * minimal
}

/// `û = b̂⁻¹(−f̂(x) + x_d^{(n)} − c̄·x̃)`.
pub fn equivalent_control(
    cfg: &ControllerConfig,
    state: &[f64],
    desired: &DesiredState,
) -> Result<f64> {
    Ok(evaluate_model(cfg, state, desired)?.u_eq)
}

/// Smallest gain satisfying `K ≥ β b̂⁻¹(η + F) + (β − 1)|û|`, times the
/// configured safety factor.
pub fn robust_gain(cfg: &ControllerConfig, state: &[f64], desired: &DesiredState) -> Result<f64> {
    let m = evaluate_model(cfg, state, desired)?;
    Ok(gain_from(cfg, m.u_eq, m.f_bound))
}

/// The control law with the configured switching function.
pub fn control(
    cfg: &ControllerConfig,
    state: &[f64],
    desired: &DesiredState,
) -> Result<ControlOutput> {
    let m = evaluate_model(cfg, state, desired)?;
    let k = gain_from(cfg, m.u_eq, m.f_bound);
    let s = cfg.surface.value(&m.err)?;
    let switching = cfg.smoothing.eval_unchecked(s, cfg.phi);
    Ok(ControlOutput {
        u: m.u_eq - k * switching,
        diagnostics: Diagnostics {
            s,
            s_phi: layer_distance(s, cfg.phi),
            k,
            u_eq: m.u_eq,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::make_surface;
    use proptest::prelude::*;

    fn model(f_bound: f64, b_min: f64, b_max: f64) -> UncertaintyModel {
        UncertaintyModel::new(|_| 0.0, move |_| f_bound, b_min, b_max).unwrap()
    }

    fn cfg(n: usize, lam: f64, unc: UncertaintyModel, eta: f64, phi: f64) -> ControllerConfig {
        ControllerConfig::new(
            make_surface(n, lam).unwrap(),
            unc,
            eta,
            phi,
            SmoothingKind::Saturation,
        )
        .unwrap()
    }

    #[test]
    fn derived_gain_constants() {
        let m = model(0.0, 2.0, 8.0);
        assert_eq!(m.b_hat(), 4.0);
        assert_eq!(m.beta(), 2.0);
        let m = model(0.0, 0.3, 0.7);
        assert!((m.b_hat().powi(2) - 0.21).abs() < 1e-15);
        assert!((m.beta().powi(2) - 0.7 / 0.3).abs() < 1e-14);
    }

    #[test]
    fn model_rejects_bad_gain_interval() {
        assert!(UncertaintyModel::new(|_| 0.0, |_| 0.0, 0.0, 1.0).is_err());
        assert!(UncertaintyModel::new(|_| 0.0, |_| 0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn config_rejects_nonpositive_eta_and_phi() {
        let s = make_surface(2, 1.0).unwrap();
        let m = model(0.0, 1.0, 1.0);
        let mk =
            |eta, phi| ControllerConfig::new(s.clone(), m.clone(), eta, phi, SmoothingKind::Sign);
        assert!(matches!(
            mk(0.0, 1.0),
            Err(Error::InvalidParameter { name: "eta", .. })
        ));
        assert!(matches!(
            mk(1.0, 0.0),
            Err(Error::InvalidParameter { name: "phi", .. })
        ));
        assert!(mk(1.0, 1.0).unwrap().with_gain_scale(0.0).is_err());
    }

    #[test]
    fn equivalent_control_examples() {
        let c = cfg(2, 1.0, model(0.0, 1.0, 1.0), 0.1, 0.1);
        assert_eq!(
            equivalent_control(&c, &[0.0, 0.0], &DesiredState::zero(2)).unwrap(),
            0.0
        );

        let c = cfg(2, 1.0, model(0.0, 2.0, 2.0), 0.1, 0.1);
        let d = DesiredState::new(vec![0.0, 0.0], 4.0).unwrap();
        assert_eq!(equivalent_control(&c, &[0.0, 0.0], &d).unwrap(), 2.0);

        let unc = UncertaintyModel::new(|x| x[0], |_| 0.0, 1.0, 1.0).unwrap();
        let c = cfg(2, 3.0, unc, 0.1, 0.1);
        assert_eq!(
            equivalent_control(&c, &[1.0, 0.0], &DesiredState::zero(2)).unwrap(),
            -1.0
        );
    }

    #[test]
    fn robust_gain_examples() {
        let c = cfg(1, 1.0, model(0.5, 1.0, 1.0), 0.1, 0.1);
        let d = DesiredState::new(vec![0.0], 7.0).unwrap();
        assert!((robust_gain(&c, &[3.0], &d).unwrap() - 0.6).abs() < 1e-15);

        // β = 2, b̂ = 1, η = 1, F = 0, |û| = 3.
        let c = cfg(1, 1.0, model(0.0, 0.5, 2.0), 1.0, 0.1);
        let d = DesiredState::new(vec![0.0], 3.0).unwrap();
        assert_eq!(equivalent_control(&c, &[0.0], &d).unwrap(), 3.0);
        assert_eq!(robust_gain(&c, &[0.0], &d).unwrap(), 5.0);

        let c = cfg(1, 1.0, model(0.0, 1.0, 1.0), 1e-12, 0.1);
        let k = robust_gain(&c, &[0.0], &DesiredState::zero(1)).unwrap();
        assert!(k > 0.0 && k <= 1e-12);
    }

    #[test]
    fn control_examples() {
        for kind in SmoothingKind::ALL {
            let c = cfg(2, 1.5, model(0.4, 1.0, 3.0), 0.2, 0.1).with_smoothing(kind);
            let out = control(
                &c,
                &[0.3, -0.2],
                &DesiredState::new(vec![0.3, -0.2], 0.0).unwrap(),
            )
            .unwrap();
            assert_eq!(out.u, 0.0);
            assert_eq!(out.diagnostics.s, 0.0);
        }

        // n = 1 makes c̄·x̃ = 0 and s = x̃.
        let c = cfg(1, 1.0, model(0.5, 1.0, 1.0), 0.1, 1.0);
        let out = control(&c, &[0.5], &DesiredState::zero(1)).unwrap();
        assert!((out.u + 0.3).abs() < 1e-15);
        assert_eq!(out.diagnostics.s_phi, 0.0);
    }

    #[test]
    fn saturation_matches_sign_outside_layer() {
        let base = cfg(2, 1.0, model(0.4, 1.0, 2.0), 0.3, 0.25);
        let sat = base.clone().with_smoothing(SmoothingKind::Saturation);
        let sgn = base.with_smoothing(SmoothingKind::Sign);
        // s = x̃ + ẋ̃ = 2φ.
        let state = [0.25, 0.25];
        let d = DesiredState::zero(2);
        let a = control(&sat, &state, &d).unwrap();
        let b = control(&sgn, &state, &d).unwrap();
        assert_eq!(a.diagnostics.s, 0.5);
        assert_eq!(a.u.to_bits(), b.u.to_bits());
    }

    #[test]
    fn non_finite_model_is_an_error() {
        let unc = UncertaintyModel::new(|_| f64::NAN, |_| 0.0, 1.0, 1.0).unwrap();
        let c = cfg(1, 1.0, unc, 0.1, 0.1);
        assert!(matches!(
            control(&c, &[0.0], &DesiredState::zero(1)),
            Err(Error::NonFinite { what: "f_hat", .. })
        ));
        let unc = UncertaintyModel::new(|_| 0.0, |_| f64::INFINITY, 1.0, 1.0).unwrap();
        let c = cfg(1, 1.0, unc, 0.1, 0.1);
        assert!(robust_gain(&c, &[0.0], &DesiredState::zero(1)).is_err());
    }

    #[test]
    fn dimension_checks() {
        let c = cfg(3, 1.0, model(0.0, 1.0, 1.0), 0.1, 0.1);
        assert!(control(&c, &[0.0; 2], &DesiredState::zero(3)).is_err());
        assert!(control(&c, &[0.0; 3], &DesiredState::zero(2)).is_err());
    }

    proptest! {
        #[test]
        fn gain_is_monotone(
            eta in 0.01f64..5.0, d_eta in 0.0f64..5.0,
            f in 0.0f64..5.0, d_f in 0.0f64..5.0,
            b_hat in 0.1f64..10.0, beta in 1.0f64..5.0, d_beta in 0.0f64..3.0,
            xd_n in -10.0f64..10.0, x in -5.0f64..5.0,
        ) {
            let gain = |eta: f64, f: f64, beta: f64| {
                let m = model(f, b_hat / beta, b_hat * beta);
                let c = cfg(1, 1.0, m, eta, 0.1);
                robust_gain(&c, &[x], &DesiredState::new(vec![0.0], xd_n).unwrap()).unwrap()
            };
            let k = gain(eta, f, beta);
            prop_assert!(k > 0.0);
            let tol = 1e-12 * (1.0 + k);
            prop_assert!(gain(eta + d_eta, f, beta) >= k - tol);
            prop_assert!(gain(eta, f + d_f, beta) >= k - tol);
            prop_assert!(gain(eta, f, beta + d_beta) >= k - tol);
        }

        #[test]
        fn switching_term_is_odd(
            s in -3.0f64..3.0, phi in 0.01f64..2.0, lam in 0.2f64..3.0
        ) {
            // n = 2 with ẋ̃ = 0 keeps c̄·x̃ = 0 so only s flips with x̃.
            for kind in SmoothingKind::ALL {
                let c = cfg(2, lam, model(0.3, 1.0, 1.0), 0.2, phi).with_smoothing(kind);
                let d = DesiredState::zero(2);
                let x = s / lam;
                let up = control(&c, &[x, 0.0], &d).unwrap();
                let dn = control(&c, &[-x, 0.0], &d).unwrap();
                prop_assert_eq!(up.diagnostics.u_eq, 0.0);
                prop_assert!((up.u + dn.u - 2.0 * up.diagnostics.u_eq).abs() <= 1e-12);
            }
        }
    }
}
