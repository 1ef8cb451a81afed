//! Deterministic fixed-step closed-loop simulation.

use crate::controller::{control, ControlOutput, ControllerConfig, DesiredState};
use crate::error::{check_len, positive, Assumption, Error, Result, StateDump};
use crate::log::{LogRow, TrajectoryLog};
use crate::plant::{chain_rhs, rk4, PlantModel};
use crate::trajectory::DesiredTrajectory;

/// States beyond this magnitude abort the run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// How the control input is applied inside one RK4 step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlHold {
    /// `u` computed once from the row state and held over the step.
    #[default]
    ZeroOrder,
    /// `u` recomputed at every RK4 stage. The closed loop is then an ODE
    /// integrated at fourth order, provided the law is smooth.
    StageEvaluated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    pub hold: ControlHold,
    /// Check the plant against the controller's uncertainty model at every
    /// logged state.
    pub check_assumptions: bool,
}

impl SimOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            hold: ControlHold::ZeroOrder,
            check_assumptions: true,
        }
    }

    pub fn with_hold(mut self, hold: ControlHold) -> Self {
        self.hold = hold;
        self
    }

    pub fn unchecked(mut self) -> Self {
        self.check_assumptions = false;
        self
    }
}

/// Number of integration steps, `⌈t_end/dt⌉`, tolerant of quotients that land
/// a few ulps above an integer.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    let r = t_end / dt;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}

/// Zero-order-hold simulation from `t = 0` to `t_end`.
pub fn simulate(
    plant: &PlantModel,
    cfg: &ControllerConfig,
    traj: &DesiredTrajectory,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<TrajectoryLog> {
    simulate_with(plant, cfg, traj, x0, &SimOptions::new(dt, t_end))
}

pub fn simulate_with(
    plant: &PlantModel,
    cfg: &ControllerConfig,
    traj: &DesiredTrajectory,
    x0: &[f64],
    opts: &SimOptions,
) -> Result<TrajectoryLog> {
    let n = cfg.order();
    check_len(n, plant.order())?;
    check_len(n, traj.order())?;
    check_len(n, x0.len())?;
    let dt = positive("dt", opts.dt)?;
    let t_end = positive("t_end", opts.t_end)?;
    if t_end < dt {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must be at least dt ({dt}), got {t_end}"),
        });
    }
    let steps = step_count(t_end, dt);
    let mut log = TrajectoryLog::with_capacity(n, dt, steps + 1)?;

    let mut x = x0.to_vec();
    let mut next = Vec::with_capacity(n);
    for k in 0..=steps {
        let t = k as f64 * dt;
        guard(t, &x)?;
        let desired = desired_at(traj, t, n)?;
        if opts.check_assumptions {
            check_assumptions(plant, cfg, t, &x)?;
        }
        let out = control(cfg, &x, &desired)?;
        log.push(row(&x, &desired, &out))?;
        if k == steps {
            break;
        }
        match opts.hold {
            ControlHold::ZeroOrder => {
                let u = out.u;
                rk4(&x, t, dt, &mut next, |tt, xs, dx| {
                    let top = plant.highest_derivative(tt, xs, u);
                    finite_top(top, xs)?;
                    chain_rhs(xs, top, dx);
                    Ok(())
                })?;
            }
            ControlHold::StageEvaluated => {
                rk4(&x, t, dt, &mut next, |tt, xs, dx| {
                    let d = desired_at(traj, tt, n)?;
                    let u = control(cfg, xs, &d)?.u;
                    let top = plant.highest_derivative(tt, xs, u);
                    finite_top(top, xs)?;
                    chain_rhs(xs, top, dx);
                    Ok(())
                })?;
            }
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(log)
}

/// Suggested step: `min(1e-3, 0.01/λ, φ/(10·ṡ_max))`, where `ṡ_max` bounds
/// `|ṡ|` at the initial state from the model data alone.
pub fn suggest_dt(cfg: &ControllerConfig, x0: &[f64], desired: &DesiredState) -> Result<f64> {
    let out = control(cfg, x0, desired)?;
    let unc = cfg.uncertainty();
    let err: Vec<f64> = x0.iter().zip(&desired.vector).map(|(a, b)| a - b).collect();
    let f_hat = unc.f_hat(x0)?;
    let f_bound = unc.f_bound(x0)?;
    let sdot_max = f_hat.abs()
        + f_bound
        + unc.b_max() * (out.diagnostics.u_eq.abs() + out.diagnostics.k)
        + desired.nth_derivative.abs()
        + cfg.surface().cbar_dot(&err)?.abs();
    let mut dt = 1e-3f64.min(0.01 / cfg.surface().lambda());
    if sdot_max > 0.0 {
        dt = dt.min(cfg.phi() / (10.0 * sdot_max));
    }
    Ok(dt)
}

fn row(x: &[f64], desired: &DesiredState, out: &ControlOutput) -> LogRow {
    let d = &out.diagnostics;
    LogRow::new(x.to_vec(), desired.vector.clone(), d.s, d.s_phi, d.k, out.u)
}

fn desired_at(traj: &DesiredTrajectory, t: f64, n: usize) -> Result<DesiredState> {
    let d = traj.eval(t);
    check_len(n, d.vector.len())?;
    DesiredState::new(d.vector, d.nth_derivative)
}

fn guard(t: f64, x: &[f64]) -> Result<()> {
    if x.iter()
        .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
    {
        return Err(Error::Divergence {
            t,
            state: StateDump(x.to_vec()),
        });
    }
    Ok(())
}

fn finite_top(top: f64, x: &[f64]) -> Result<()> {
    if top.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: "plant derivative",
            state: StateDump(x.to_vec()),
        })
    }
}

fn check_assumptions(plant: &PlantModel, cfg: &ControllerConfig, t: f64, x: &[f64]) -> Result<()> {
    let unc = cfg.uncertainty();
    let f = plant.f(t, x);
    let f_hat = unc.f_hat(x)?;
    let bound = unc.f_bound(x)?;
    let gap = (f_hat - f).abs();
    let within = gap <= bound + 1e-12 * (1.0 + bound);
    if !within {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::ModelBound,
            t,
            detail: format!("|f_hat - f| = {gap} exceeds F = {bound} at x = {x:?}"),
        });
    }
    let b = plant.b(x);
    let slack = 1e-12 * unc.b_max();
    if !(b >= unc.b_min() - slack && b <= unc.b_max() + slack) {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::GainBound,
            t,
            detail: format!(
                "b = {b} outside [{}, {}] at x = {x:?}",
                unc.b_min(),
                unc.b_max()
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::UncertaintyModel;
    use crate::smoothing::SmoothingKind;
    use crate::surface::make_surface;

    fn exact_model_setup(eta: f64, phi: f64) -> (PlantModel, ControllerConfig) {
        let plant = PlantModel::new("known", 2, |_, x| -x[0] - 0.5 * x[1], |_| 2.0);
        let unc = UncertaintyModel::new(|x| -x[0] - 0.5 * x[1], |_| 0.0, 2.0, 2.0).unwrap();
        let cfg = ControllerConfig::new(
            make_surface(2, 2.0).unwrap(),
            unc,
            eta,
            phi,
            SmoothingKind::Saturation,
        )
        .unwrap();
        (plant, cfg)
    }

    #[test]
    fn step_count_handles_rounding() {
        assert_eq!(step_count(15.0, 1e-3), 15000);
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.05, 0.1), 11);
        assert_eq!(step_count(0.3, 0.1), 3);
    }

    #[test]
    fn row_count_and_grid() {
        let (plant, cfg) = exact_model_setup(0.2, 0.1);
        let log = simulate(
            &plant,
            &cfg,
            &DesiredTrajectory::zero(2),
            &[0.1, 0.0],
            1.05,
            0.1,
        )
        .unwrap();
        assert_eq!(log.len(), 12);
        assert_eq!(log.time(11), 11.0 * 0.1);
    }

    #[test]
    fn layer_is_invariant_for_known_plant() {
        let (plant, cfg) = exact_model_setup(0.1, 0.2);
        // s(0) = 2·0.05 + 0 = 0.1 inside the layer.
        let log = simulate(
            &plant,
            &cfg,
            &DesiredTrajectory::zero(2),
            &[0.05, 0.0],
            5.0,
            1e-3,
        )
        .unwrap();
        for r in log.rows() {
            assert!(r.s_phi.abs() <= 1e-6);
            assert_eq!(r.v, 0.5 * r.s_phi * r.s_phi);
        }
    }

    #[test]
    fn control_is_equivalent_control_on_the_surface() {
        let (plant, cfg) = exact_model_setup(0.1, 0.2);
        // s(0) = 2·0.5 − 1 = 0 exactly.
        let log = simulate(
            &plant,
            &cfg,
            &DesiredTrajectory::zero(2),
            &[0.5, -1.0],
            0.001,
            0.001,
        )
        .unwrap();
        let r = &log.rows()[0];
        assert_eq!(r.s, 0.0);
        let ueq =
            crate::controller::equivalent_control(&cfg, &r.state, &DesiredState::zero(2)).unwrap();
        assert_eq!(r.u, ueq);
    }

    #[test]
    fn deterministic() {
        let (plant, cfg) = exact_model_setup(0.3, 0.05);
        let tr = DesiredTrajectory::sine(2, 0.4, 1.1, 0.0).unwrap();
        let a = simulate(&plant, &cfg, &tr, &[1.0, 0.0], 2.0, 1e-3).unwrap();
        let b = simulate(&plant, &cfg, &tr, &[1.0, 0.0], 2.0, 1e-3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn assumption_violations_are_reported() {
        let (_, cfg) = exact_model_setup(0.3, 0.05);
        let wrong_f = PlantModel::new("wrong f", 2, |_, _| 1.0, |_| 2.0);
        let err = simulate(
            &wrong_f,
            &cfg,
            &DesiredTrajectory::zero(2),
            &[0.0, 0.0],
            0.1,
            0.01,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::AssumptionViolated {
                assumption: Assumption::ModelBound,
                ..
            }
        ));

        let wrong_b = PlantModel::new("wrong b", 2, |_, x| -x[0] - 0.5 * x[1], |_| 3.0);
        let err = simulate(
            &wrong_b,
            &cfg,
            &DesiredTrajectory::zero(2),
            &[0.0, 0.0],
            0.1,
            0.01,
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::AssumptionViolated { assumption: Assumption::GainBound, t, .. } if t == 0.0)
        );
    }

    #[test]
    fn divergence_is_reported() {
        let plant = PlantModel::new("blowup", 1, |_, x| x[0] * x[0], |_| 1.0);
        let unc = UncertaintyModel::new(|_| 0.0, |x| x[0] * x[0], 1.0, 1.0).unwrap();
        let cfg = ControllerConfig::new(
            make_surface(1, 1.0).unwrap(),
            unc,
            0.1,
            0.1,
            SmoothingKind::Sign,
        )
        .unwrap()
        .with_gain_scale(1e-9)
        .unwrap();
        let err = simulate(
            &plant,
            &cfg,
            &DesiredTrajectory::zero(1),
            &[10.0],
            10.0,
            0.01,
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::Divergence { .. } | Error::NonFinite { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let (plant, cfg) = exact_model_setup(0.3, 0.05);
        assert!(simulate(
            &plant,
            &cfg,
            &DesiredTrajectory::zero(3),
            &[0.0, 0.0],
            1.0,
            0.1
        )
        .is_err());
        assert!(simulate(&plant, &cfg, &DesiredTrajectory::zero(2), &[0.0], 1.0, 0.1).is_err());
        assert!(simulate(
            &plant,
            &cfg,
            &DesiredTrajectory::zero(2),
            &[0.0, 0.0],
            0.01,
            0.1
        )
        .is_err());
    }

    #[test]
    fn suggested_dt_resolves_the_layer() {
        let (_, cfg) = exact_model_setup(0.3, 0.05);
        let dt = suggest_dt(&cfg, &[1.0, 0.0], &DesiredState::zero(2)).unwrap();
        assert!(dt <= 1e-3);
        assert!(dt > 0.0);
    }
}
