//! Machine-checked verdicts over closed-loop logs.
//!
//! * reaching: the layer is entered no later than `|s_φ(0)|/η`, and before
//!   that `|s_φ(t)|` stays under the line `|s_φ(0)| − ηt`;
//! * Lyapunov: the discrete rate of `V = s_φ²/2` respects `V̇ ≤ −η|s_φ|`
//!   outside the layer, up to an `O(dt)` allowance;
//! * invariance: once inside, `s` does not leave the layer;
//! * steady state: over a tail window every `|x̃^{(i)}|` stays inside the
//!   corrected bounds (the `2^i` bounds are evaluated alongside).

mod gain;
mod report;
mod witness;

pub use gain::{sample_gain_sufficiency, GainSamplingReport};
pub use report::{
    ConvergenceReport, InvarianceRecord, LyapunovRecord, ReachRecord, SteadyStateRecord,
    Tolerances, REPORT_SCHEMA,
};
pub use witness::{search_witness, witness_log, BangBangSchedule, WitnessResult, WitnessSearch};

use crate::bounds::{region, slotine_region, ConvergenceRegion};
use crate::controller::ControllerConfig;
use crate::error::{check_len, Error, Result};
use crate::log::TrajectoryLog;

/// Theorem-1 reaching check. `tol` is both the "inside the layer" threshold
/// on `|s_φ|` and the slack on the straight-line envelope.
pub fn check_reaching(log: &TrajectoryLog, eta: f64, tol: f64) -> ReachRecord {
    let dt = log.dt();
    let rows = log.rows();
    let s0 = rows.first().map(|r| r.s_phi.abs()).unwrap_or(0.0);
    let t_reach_bound = s0 / eta;
    let reach_idx = rows.iter().position(|r| r.s_phi.abs() <= tol);
    let pre = reach_idx.unwrap_or(rows.len());
    let envelope_violation = rows[..pre]
        .iter()
        .enumerate()
        .map(|(k, r)| r.s_phi.abs() - (s0 - eta * log.time(k)))
        .fold(f64::NEG_INFINITY, f64::max);
    let t_reach_observed = reach_idx.map(|k| log.time(k));
    ReachRecord {
        t_reach_observed,
        t_reach_bound,
        envelope_violation,
        dt,
        pass: ReachRecord::verdict(t_reach_observed, t_reach_bound, dt, envelope_violation, tol),
    }
}

/// Default Lyapunov allowance `C·dt`, with `C` the largest squared
/// finite-difference `ṡ` between consecutive rows outside the layer.
///
/// The forward-difference rate of `V` overshoots `V̇` by `dt/2 · V̈`, and
/// `V̈ = ṡ² + s_φ s̈`; the allowance covers the first term twice over.
pub fn lyapunov_tolerance(log: &TrajectoryLog) -> f64 {
    let dt = log.dt();
    let c = log
        .rows()
        .windows(2)
        .filter(|w| w[0].s_phi != 0.0 && w[1].s_phi != 0.0)
        .map(|w| ((w[1].s - w[0].s) / dt).powi(2))
        .fold(0.0, f64::max);
    c * dt
}

/// Theorem-1 Lyapunov decrement check over consecutive samples that are both
/// outside the layer.
pub fn check_lyapunov(log: &TrajectoryLog, eta: f64, tol: f64) -> LyapunovRecord {
    let dt = log.dt();
    let mut samples = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_t = None;
    for (k, w) in log.rows().windows(2).enumerate() {
        if w[0].s_phi == 0.0 || w[1].s_phi == 0.0 {
            continue;
        }
        samples += 1;
        let vdot = (w[1].v - w[0].v) / dt;
        let excess = vdot + eta * w[0].s_phi.abs();
        if excess > worst {
            worst = excess;
            worst_t = Some(log.time(k));
        }
    }
    LyapunovRecord {
        max_violation: worst,
        at_time: worst_t,
        samples,
        pass: LyapunovRecord::verdict(worst, tol),
    }
}

/// Layer invariance after the first reach: `max |s_φ| ≤ rel·φ`.
pub fn check_invariance(
    log: &TrajectoryLog,
    phi: f64,
    reach_tol: f64,
    rel: f64,
) -> InvarianceRecord {
    let rows = log.rows();
    let after = rows
        .iter()
        .position(|r| r.s_phi.abs() <= reach_tol)
        .map(|k| rows[k..].iter().map(|r| r.s_phi.abs()).fold(0.0, f64::max));
    InvarianceRecord {
        max_s_phi_after_reach: after,
        limit: rel * phi,
        pass: InvarianceRecord::verdict(after, rel * phi),
    }
}

/// Where the steady-state tail starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWindow {
    /// Fraction of the run, counted from the end, in `(0, 1)`.
    pub fraction: f64,
    /// Earliest admissible start, typically `t_reach_bound + 5/λ`.
    pub not_before: f64,
}

impl TailWindow {
    pub fn new(fraction: f64, not_before: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "tail_fraction",
                reason: format!("must lie in (0, 1), got {fraction}"),
            });
        }
        Ok(Self {
            fraction,
            not_before,
        })
    }

    /// The default window: last `fraction` of the run, gated on
    /// `t ≥ t_reach_bound + 5/λ`.
    pub fn gated(fraction: f64, t_reach_bound: f64, lambda: f64) -> Result<Self> {
        Self::new(fraction, t_reach_bound + 5.0 / lambda)
    }

    pub fn start(&self, t_end: f64) -> f64 {
        ((1.0 - self.fraction) * t_end).max(self.not_before)
    }
}

/// Theorem-2 containment over the tail window. `tol_rel` inflates the box
/// bounds; `layer_rel` inflates `φ` for the `|s| ≤ φ` part.
pub fn check_steady_state(
    log: &TrajectoryLog,
    corrected: &ConvergenceRegion,
    slotine: &ConvergenceRegion,
    window: TailWindow,
    tol_rel: f64,
    layer_rel: f64,
) -> Result<SteadyStateRecord> {
    let n = log.order();
    check_len(n, corrected.bounds().len())?;
    check_len(n, slotine.bounds().len())?;
    let t_end = log.t_end();
    let start = window.start(t_end);
    let mut max_abs = vec![0.0f64; n];
    let mut max_abs_s = 0.0f64;
    let mut count = 0usize;
    for (k, row) in log.rows().iter().enumerate() {
        if log.time(k) < start {
            continue;
        }
        count += 1;
        for (m, e) in max_abs.iter_mut().zip(row.error()) {
            *m = m.max(e.abs());
        }
        max_abs_s = max_abs_s.max(row.s.abs());
    }
    if count == 0 {
        return Err(Error::EmptyTail { start, t_end });
    }
    let mut rec = SteadyStateRecord {
        window_start: start,
        samples: count,
        max_abs,
        corrected_bounds: corrected.bounds().to_vec(),
        slotine_bounds: slotine.bounds().to_vec(),
        max_abs_s,
        phi: corrected.phi(),
        tol_rel,
        layer_rel,
        corrected_pass: false,
        slotine_pass: false,
        layer_pass: false,
    };
    rec.rederive();
    Ok(rec)
}

/// Options for [`verify_log`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub reach_tol: f64,
    /// `None` selects [`lyapunov_tolerance`].
    pub lyapunov_tol: Option<f64>,
    pub invariance_rel: f64,
    pub tail_fraction: f64,
    pub steady_rel: f64,
    pub layer_rel: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            reach_tol: 1e-4,
            lyapunov_tol: None,
            invariance_rel: 1e-3,
            tail_fraction: 0.4,
            steady_rel: 1e-2,
            layer_rel: 1e-3,
        }
    }
}

/// Runs every check on one log.
pub fn verify_log(
    name: &str,
    log: &TrajectoryLog,
    cfg: &ControllerConfig,
    opts: &VerifyOptions,
) -> Result<ConvergenceReport> {
    if log.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "log",
            reason: "verification needs at least two rows".into(),
        });
    }
    let eta = cfg.eta();
    let phi = cfg.phi();
    let reach = check_reaching(log, eta, opts.reach_tol);
    let lyap_tol = opts.lyapunov_tol.unwrap_or_else(|| lyapunov_tolerance(log));
    let lyapunov = check_lyapunov(log, eta, lyap_tol);
    let invariance = check_invariance(log, phi, opts.reach_tol, opts.invariance_rel);
    let corrected = region(cfg.surface(), phi)?;
    let slotine = slotine_region(cfg.surface(), phi)?;
    let window = TailWindow::gated(
        opts.tail_fraction,
        reach.t_reach_bound,
        cfg.surface().lambda(),
    )?;
    let steady_state = check_steady_state(
        log,
        &corrected,
        &slotine,
        window,
        opts.steady_rel,
        opts.layer_rel,
    )?;
    Ok(ConvergenceReport {
        scenario: name.to_string(),
        order_n: cfg.order(),
        lambda: cfg.surface().lambda(),
        eta,
        phi,
        reach,
        lyapunov,
        invariance,
        steady_state,
        tolerances: Tolerances {
            reach_tol: opts.reach_tol,
            lyapunov_tol: lyap_tol,
            invariance_rel: opts.invariance_rel,
            steady_rel: opts.steady_rel,
            layer_rel: opts.layer_rel,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::LogRow;
    use crate::surface::{layer_distance, make_surface};

    // n = 1 log whose state follows the given s(t) directly (s = x̃).
    fn log_from_s(phi: f64, dt: f64, s: impl Fn(f64) -> f64, rows: usize) -> TrajectoryLog {
        let mut log = TrajectoryLog::new(1, dt).unwrap();
        for k in 0..rows {
            let v = s(k as f64 * dt);
            log.push(LogRow::new(
                vec![v],
                vec![0.0],
                v,
                layer_distance(v, phi),
                1.0,
                0.0,
            ))
            .unwrap();
        }
        log
    }

    #[test]
    fn reaching_from_inside_layer() {
        let log = log_from_s(0.1, 0.01, |_| 0.05, 10);
        let r = check_reaching(&log, 0.5, 1e-4);
        assert_eq!(r.t_reach_observed, Some(0.0));
        assert_eq!(r.t_reach_bound, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn reaching_at_rate_eta_passes() {
        let (phi, eta) = (0.1, 0.5);
        let log = log_from_s(phi, 0.01, |t| (1.1 - eta * t).max(0.0), 400);
        let r = check_reaching(&log, eta, 1e-4);
        assert!(r.pass, "{r:?}");
        assert!((r.t_reach_bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reaching_at_half_rate_fails_envelope() {
        let (phi, eta) = (0.1, 0.5);
        let log = log_from_s(phi, 0.01, |t| (1.1 - 0.5 * eta * t).max(0.0), 600);
        let r = check_reaching(&log, eta, 1e-4);
        assert!(!r.pass);
        assert!(r.envelope_violation > 0.1);
        assert!(r.t_reach_observed.unwrap() > r.t_reach_bound + log.dt());
    }

    #[test]
    fn never_reaching_fails() {
        let log = log_from_s(0.1, 0.01, |_| 1.0, 50);
        let r = check_reaching(&log, 0.5, 1e-4);
        assert_eq!(r.t_reach_observed, None);
        assert!(!r.pass);
    }

    #[test]
    fn lyapunov_ignores_inside_rows() {
        let log = log_from_s(1.0, 0.01, |t| (5.0 * t).sin() * 0.9, 300);
        let l = check_lyapunov(&log, 0.5, 0.0);
        assert_eq!(l.samples, 0);
        assert!(l.pass);
    }

    #[test]
    fn lyapunov_detects_growth() {
        let log = log_from_s(0.1, 0.01, |t| 0.5 + 0.1 * t, 100);
        let l = check_lyapunov(&log, 0.5, lyapunov_tolerance(&log));
        assert!(!l.pass);
        assert!(l.max_violation > 0.1);
    }

    #[test]
    fn lyapunov_accepts_rate_eta_decay() {
        let eta = 0.5;
        let log = log_from_s(0.1, 0.01, |t| 1.1 - eta * t, 150);
        let l = check_lyapunov(&log, eta, lyapunov_tolerance(&log));
        assert!(l.pass, "{l:?}");
    }

    #[test]
    fn checks_are_pure() {
        let log = log_from_s(0.1, 0.01, |t| (1.0 - 0.3 * t).max(-0.05), 500);
        assert_eq!(
            check_reaching(&log, 0.4, 1e-4),
            check_reaching(&log, 0.4, 1e-4)
        );
        assert_eq!(
            check_lyapunov(&log, 0.4, 1e-3),
            check_lyapunov(&log, 0.4, 1e-3)
        );
    }

    #[test]
    fn invariance_detects_exit() {
        let log = log_from_s(0.1, 0.01, |t| if t < 1.0 { 0.0 } else { 0.2 }, 200);
        let inv = check_invariance(&log, 0.1, 1e-4, 1e-3);
        assert!(!inv.pass);
        let log = log_from_s(0.1, 0.01, |_| 0.09, 200);
        assert!(check_invariance(&log, 0.1, 1e-4, 1e-3).pass);
    }

    #[test]
    fn steady_state_zero_error() {
        let spec = make_surface(2, 1.0).unwrap();
        let mut log = TrajectoryLog::new(2, 0.1).unwrap();
        for _ in 0..100 {
            log.push(LogRow::new(
                vec![0.0, 0.0],
                vec![0.0, 0.0],
                0.0,
                0.0,
                1.0,
                0.0,
            ))
            .unwrap();
        }
        let rec = check_steady_state(
            &log,
            &region(&spec, 0.1).unwrap(),
            &slotine_region(&spec, 0.1).unwrap(),
            TailWindow::new(0.4, 0.0).unwrap(),
            1e-2,
            1e-3,
        )
        .unwrap();
        assert_eq!(rec.max_abs, vec![0.0, 0.0]);
        assert!(rec.corrected_pass && rec.slotine_pass && rec.layer_pass);
    }

    #[test]
    fn steady_state_empty_tail_is_an_error() {
        let spec = make_surface(1, 1.0).unwrap();
        let log = log_from_s(0.1, 0.1, |_| 0.0, 10);
        let err = check_steady_state(
            &log,
            &region(&spec, 0.1).unwrap(),
            &slotine_region(&spec, 0.1).unwrap(),
            TailWindow::new(0.4, 100.0).unwrap(),
            1e-2,
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyTail { .. }));
        assert!(err.to_string().contains("increase t_end"));
    }

    #[test]
    fn steady_state_flags_excess() {
        // n = 3, λ = 1, φ = 1: x̃'' = 5 sits between the 2^i bound 4 and ζ bound 6.
        let spec = make_surface(3, 1.0).unwrap();
        let mut log = TrajectoryLog::new(3, 0.1).unwrap();
        for _ in 0..20 {
            log.push(LogRow::new(
                vec![0.0, 0.0, 5.0],
                vec![0.0; 3],
                5.0,
                4.0,
                0.0,
                0.0,
            ))
            .unwrap();
        }
        let rec = check_steady_state(
            &log,
            &region(&spec, 1.0).unwrap(),
            &slotine_region(&spec, 1.0).unwrap(),
            TailWindow::new(0.5, 0.0).unwrap(),
            1e-2,
            1e-3,
        )
        .unwrap();
        assert!(rec.corrected_pass);
        assert!(!rec.slotine_pass);
        assert!(!rec.layer_pass);
    }

    #[test]
    fn tail_window_validates_fraction() {
        assert!(TailWindow::new(0.0, 0.0).is_err());
        assert!(TailWindow::new(1.0, 0.0).is_err());
        let w = TailWindow::new(0.4, 3.0).unwrap();
        assert_eq!(w.start(10.0), 6.0);
        assert_eq!(w.start(4.0), 3.0);
    }
}
