//! Scenario files: plant, uncertainty model, controller, trajectory and run
//! settings in one text file. The key reference is `scenarios/SCHEMA.md`.

mod parse;

use std::path::PathBuf;

use crate::controller::{ControllerConfig, UncertaintyModel};
use crate::error::Result;
use crate::log::TrajectoryLog;
use crate::plant::PlantModel;
use crate::sim::{simulate_with, suggest_dt, ControlHold, SimOptions};
use crate::smoothing::SmoothingKind;
use crate::surface::{make_surface, MAX_ORDER};
use crate::trajectory::DesiredTrajectory;
use crate::verify::{verify_log, ConvergenceReport, VerifyOptions};

use parse::RawConfig;

/// The shipped benchmark scenarios, as `(file name, contents)`.
pub const BENCHMARKS: [(&str, &str); 3] = [
    (
        "duffing_n2.cfg",
        include_str!("../../scenarios/duffing_n2.cfg"),
    ),
    ("chain_n3.cfg", include_str!("../../scenarios/chain_n3.cfg")),
    (
        "pendulum_n2.cfg",
        include_str!("../../scenarios/pendulum_n2.cfg"),
    ),
];

/// Under-gained fixture that the Lyapunov check must reject.
pub const UNDER_GAINED: (&str, &str) = (
    "adversarial_n2.cfg",
    include_str!("../../scenarios/adversarial_n2.cfg"),
);

/// True plant.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    /// `ẍ = −a1 ẋ|ẋ| − a2 x³ + b u`
    Duffing { a1: f64, a2: f64, b: f64 },
    /// `x^{(n)} = d sin(w t) + b u`
    Chain { d: f64, w: f64, b: f64 },
    /// `ẍ = −c ẋ − k sin x + (b0 + b1 sin(wb x)) u`
    Pendulum {
        c: f64,
        k: f64,
        b0: f64,
        b1: f64,
        wb: f64,
    },
    /// `x^{(n)} = d + b u`
    Bias { d: f64, b: f64 },
}

impl PlantSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            PlantSpec::Duffing { .. } => "duffing",
            PlantSpec::Chain { .. } => "chain",
            PlantSpec::Pendulum { .. } => "pendulum",
            PlantSpec::Bias { .. } => "bias",
        }
    }

    fn fixed_order(&self) -> Option<usize> {
        match self {
            PlantSpec::Duffing { .. } | PlantSpec::Pendulum { .. } => Some(2),
            _ => None,
        }
    }
}

/// Controller-side model. Only the fields relevant to the plant kind are
/// read from the file; the rest stay zero.
///
/// * duffing: `f̂ = −a1 ẋ|ẋ| − a2 x³`, `F = fv ẋ² + fx |x|³ + f0`
/// * chain, bias: `f̂ = 0`, `F = f0`
/// * pendulum: `f̂ = −c ẋ − k sin x`, `F = fv |ẋ| + f0`
///
/// `F` is multiplied by `f_scale`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelSpec {
    pub b_min: f64,
    pub b_max: f64,
    pub f_scale: f64,
    pub f0: f64,
    pub fv: f64,
    pub fx: f64,
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub n: usize,
    pub lambda: f64,
    pub eta: f64,
    pub phi: f64,
    pub smoothing: SmoothingKind,
    pub gain_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Zero,
    Sine {
        amplitude: f64,
        omega: f64,
        offset: f64,
    },
    SmoothStep {
        amplitude: f64,
        rate: f64,
        poles: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub x0: Vec<f64>,
    /// `None` selects [`suggest_dt`].
    pub dt: Option<f64>,
    pub t_end: f64,
    pub tail_fraction: f64,
    pub hold: ControlHold,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub envelope: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantSpec,
    pub model: ModelSpec,
    pub controller: ControllerSpec,
    pub trajectory: TrajectorySpec,
    pub run: RunSpec,
    pub output: OutputSpec,
}

impl ScenarioConfig {
    /// Parses and validates a scenario file. Never panics, whatever the bytes.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut raw = RawConfig::parse(bytes)?;
        let name = raw
            .take("scenario", "name")
            .map_or_else(|| "scenario".to_string(), |v| v.1);

        let plant = parse_plant(&mut raw)?;
        let model = parse_model(&mut raw, &plant)?;
        let controller = parse_controller(&mut raw, &plant)?;
        let trajectory = parse_trajectory(&mut raw)?;
        let run = parse_run(&mut raw, controller.n)?;
        let output = parse_output(&mut raw);
        raw.finish()?;
        Ok(Self {
            name,
            plant,
            model,
            controller,
            trajectory,
            run,
            output,
        })
    }

    pub fn build(&self) -> Result<Scenario> {
        let n = self.controller.n;
        let plant = build_plant(&self.plant, n, &self.name);
        let uncertainty = build_model(&self.plant, &self.model)?;
        let c = &self.controller;
        let controller = ControllerConfig::new(
            make_surface(n, c.lambda)?,
            uncertainty,
            c.eta,
            c.phi,
            c.smoothing,
        )?
        .with_gain_scale(c.gain_scale)?;
        let trajectory = match self.trajectory {
            TrajectorySpec::Zero => DesiredTrajectory::zero(n),
            TrajectorySpec::Sine {
                amplitude,
                omega,
                offset,
            } => DesiredTrajectory::sine(n, amplitude, omega, offset)?,
            TrajectorySpec::SmoothStep {
                amplitude,
                rate,
                poles,
            } => DesiredTrajectory::smooth_step(n, amplitude, rate, poles)?,
        };
        let dt = match self.run.dt {
            Some(dt) => dt,
            None => suggest_dt(&controller, &self.run.x0, &trajectory.eval(0.0))?,
        };
        Ok(Scenario {
            name: self.name.clone(),
            plant,
            controller,
            trajectory,
            x0: self.run.x0.clone(),
            dt,
            t_end: self.run.t_end,
            tail_fraction: self.run.tail_fraction,
            hold: self.run.hold,
        })
    }
}

/// A ready-to-run closed loop.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantModel,
    pub controller: ControllerConfig,
    pub trajectory: DesiredTrajectory,
    pub x0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub tail_fraction: f64,
    pub hold: ControlHold,
}

impl Scenario {
    pub fn sim_options(&self) -> SimOptions {
        SimOptions::new(self.dt, self.t_end).with_hold(self.hold)
    }

    pub fn run(&self) -> Result<TrajectoryLog> {
        simulate_with(
            &self.plant,
            &self.controller,
            &self.trajectory,
            &self.x0,
            &self.sim_options(),
        )
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            tail_fraction: self.tail_fraction,
            ..VerifyOptions::default()
        }
    }

    pub fn verify(&self, log: &TrajectoryLog) -> Result<ConvergenceReport> {
        verify_log(&self.name, log, &self.controller, &self.verify_options())
    }

    pub fn uncertainty(&self) -> &UncertaintyModel {
        self.controller.uncertainty()
    }
}

/// The three benchmark closed loops: Duffing (n = 2), disturbed integrator
/// chain (n = 3) and a pendulum with state-dependent input gain (n = 2).
pub fn benchmark_plants() -> Vec<Scenario> {
    BENCHMARKS
        .iter()
        .map(|(file, text)| {
            ScenarioConfig::parse(text.as_bytes())
                .and_then(|c| c.build())
                .unwrap_or_else(|e| panic!("shipped scenario {file} is invalid: {e}"))
        })
        .collect()
}

fn parse_plant(raw: &mut RawConfig) -> Result<PlantSpec> {
    let (line, kind) = raw.string("plant", "kind")?;
    let p = "plant";
    Ok(match kind.as_str() {
        "duffing" => PlantSpec::Duffing {
            a1: raw.nonneg_or(p, "a1", 0.0)?,
            a2: raw.nonneg_or(p, "a2", 0.0)?,
            b: raw.positive(p, "b")?,
        },
        "chain" => PlantSpec::Chain {
            d: raw.real_or(p, "d", 0.0)?,
            w: raw.nonneg_or(p, "w", 0.0)?,
            b: raw.positive(p, "b")?,
        },
        "pendulum" => {
            let b0 = raw.positive(p, "b0")?;
            let (bl, b1) = raw.f64(p, "b1")?;
            if b1.abs() >= b0 {
                return Err(RawConfig::err(
                    p,
                    "b1",
                    bl,
                    "|b1| must be below b0 so that b stays positive",
                ));
            }
            PlantSpec::Pendulum {
                c: raw.real_or(p, "c", 0.0)?,
                k: raw.real_or(p, "k", 0.0)?,
                b0,
                b1,
                wb: raw.real_or(p, "wb", 1.0)?,
            }
        }
        "bias" => PlantSpec::Bias {
            d: raw.real_or(p, "d", 0.0)?,
            b: raw.positive(p, "b")?,
        },
        other => {
            return Err(RawConfig::err(
                p,
                "kind",
                line,
                format!("unknown plant `{other}` (expected duffing, chain, pendulum or bias)"),
            ))
        }
    })
}

fn parse_model(raw: &mut RawConfig, plant: &PlantSpec) -> Result<ModelSpec> {
    let m = "model";
    let b_min = raw.positive(m, "b_min")?;
    let (line, b_max) = raw.f64(m, "b_max")?;
    if b_max < b_min {
        return Err(RawConfig::err(
            m,
            "b_max",
            line,
            format!("must be >= b_min ({b_min}), got {b_max}"),
        ));
    }
    let mut spec = ModelSpec {
        b_min,
        b_max,
        f_scale: raw.positive_or(m, "f_scale", 1.0)?,
        f0: raw.nonneg_or(m, "f0", 0.0)?,
        ..ModelSpec::default()
    };
    match plant {
        PlantSpec::Duffing { .. } => {
            spec.fv = raw.nonneg_or(m, "fv", 0.0)?;
            spec.fx = raw.nonneg_or(m, "fx", 0.0)?;
            spec.a1 = raw.nonneg_or(m, "a1", 0.0)?;
            spec.a2 = raw.nonneg_or(m, "a2", 0.0)?;
        }
        PlantSpec::Pendulum { .. } => {
            spec.fv = raw.nonneg_or(m, "fv", 0.0)?;
            spec.c = raw.real_or(m, "c", 0.0)?;
            spec.k = raw.real_or(m, "k", 0.0)?;
        }
        PlantSpec::Chain { .. } | PlantSpec::Bias { .. } => {}
    }
    Ok(spec)
}

fn parse_controller(raw: &mut RawConfig, plant: &PlantSpec) -> Result<ControllerSpec> {
    let c = "controller";
    let (line, n) = raw.integer(c, "n")?;
    if n == 0 || n > MAX_ORDER {
        return Err(RawConfig::err(
            c,
            "n",
            line,
            format!("must lie in 1..={MAX_ORDER}, got {n}"),
        ));
    }
    if let Some(fixed) = plant.fixed_order() {
        if n != fixed {
            return Err(RawConfig::err(
                c,
                "n",
                line,
                format!("plant `{}` has order {fixed}, got {n}", plant.kind()),
            ));
        }
    }
    let lambda = raw.positive(c, "lambda")?;
    let eta = raw.positive(c, "eta")?;
    let (pl, phi) = raw.f64(c, "phi")?;
    if phi <= 0.0 {
        return Err(RawConfig::err(
            c,
            "phi",
            pl,
            format!("boundary-layer thickness must be > 0, got {phi}"),
        ));
    }
    let smoothing = match raw.take(c, "smoothing") {
        None => SmoothingKind::default(),
        Some((line, v)) => v.parse().map_err(|_| {
            RawConfig::err(
                c,
                "smoothing",
                line,
                format!("`{v}` is not one of sign, sat, tanh"),
            )
        })?,
    };
    let gain_scale = raw.positive_or(c, "gain_scale", 1.0)?;
    Ok(ControllerSpec {
        n,
        lambda,
        eta,
        phi,
        smoothing,
        gain_scale,
    })
}

fn parse_trajectory(raw: &mut RawConfig) -> Result<TrajectorySpec> {
    let t = "trajectory";
    let kind = raw.take(t, "kind");
    Ok(match kind.as_ref().map(|k| k.1.as_str()) {
        None | Some("zero") => TrajectorySpec::Zero,
        Some("sine") => TrajectorySpec::Sine {
            amplitude: raw.real_or(t, "amplitude", 1.0)?,
            omega: raw.positive(t, "omega")?,
            offset: raw.real_or(t, "offset", 0.0)?,
        },
        Some("smooth_step") => {
            let poles = match raw.take(t, "poles") {
                None => 4,
                Some((line, v)) => match v.parse::<usize>() {
                    Ok(p) if p >= 1 => p,
                    _ => {
                        return Err(RawConfig::err(
                            t,
                            "poles",
                            line,
                            format!("`{v}` is not an integer >= 1"),
                        ))
                    }
                },
            };
            TrajectorySpec::SmoothStep {
                amplitude: raw.real_or(t, "amplitude", 1.0)?,
                rate: raw.positive(t, "rate")?,
                poles,
            }
        }
        Some(other) => {
            let line = kind.as_ref().map_or(0, |k| k.0);
            return Err(RawConfig::err(
                t,
                "kind",
                line,
                format!("unknown trajectory `{other}` (expected zero, sine or smooth_step)"),
            ));
        }
    })
}

fn parse_run(raw: &mut RawConfig, n: usize) -> Result<RunSpec> {
    let r = "run";
    let (line, x0) = raw.list(r, "x0")?;
    if x0.len() != n {
        return Err(RawConfig::err(
            r,
            "x0",
            line,
            format!("needs {n} entries, found {}", x0.len()),
        ));
    }
    let dt = match raw.opt_f64(r, "dt")? {
        None => None,
        Some((_, v)) if v > 0.0 => Some(v),
        Some((line, v)) => {
            return Err(RawConfig::err(
                r,
                "dt",
                line,
                format!("must be > 0, got {v}"),
            ))
        }
    };
    let (tl, t_end) = raw.f64(r, "t_end")?;
    if t_end <= 0.0 {
        return Err(RawConfig::err(
            r,
            "t_end",
            tl,
            format!("must be > 0, got {t_end}"),
        ));
    }
    if let Some(dt) = dt.filter(|dt| t_end < *dt) {
        return Err(RawConfig::err(
            r,
            "t_end",
            tl,
            format!("must be at least dt ({dt}), got {t_end}"),
        ));
    }
    let tail_fraction = match raw.opt_f64(r, "tail_fraction")? {
        None => VerifyOptions::default().tail_fraction,
        Some((_, v)) if v > 0.0 && v < 1.0 => v,
        Some((line, v)) => {
            return Err(RawConfig::err(
                r,
                "tail_fraction",
                line,
                format!("must lie in (0, 1), got {v}"),
            ))
        }
    };
    let hold = match raw.take(r, "hold") {
        None => ControlHold::ZeroOrder,
        Some((_, v)) if v == "zoh" => ControlHold::ZeroOrder,
        Some((_, v)) if v == "stage" => ControlHold::StageEvaluated,
        Some((line, v)) => {
            return Err(RawConfig::err(
                r,
                "hold",
                line,
                format!("`{v}` is not one of zoh, stage"),
            ))
        }
    };
    Ok(RunSpec {
        x0,
        dt,
        t_end,
        tail_fraction,
        hold,
    })
}

fn parse_output(raw: &mut RawConfig) -> OutputSpec {
    let mut path = |key| raw.take("output", key).map(|v| PathBuf::from(v.1));
    OutputSpec {
        csv: path("csv"),
        report: path("report"),
        envelope: path("envelope"),
        geometry: path("geometry"),
    }
}

fn build_plant(spec: &PlantSpec, n: usize, name: &str) -> PlantModel {
    match *spec {
        PlantSpec::Duffing { a1, a2, b } => PlantModel::new(
            name,
            2,
            move |_, x| -a1 * x[1] * x[1].abs() - a2 * x[0].powi(3),
            move |_| b,
        ),
        PlantSpec::Chain { d, w, b } => {
            PlantModel::new(name, n, move |t, _| d * (w * t).sin(), move |_| b)
        }
        PlantSpec::Pendulum { c, k, b0, b1, wb } => PlantModel::new(
            name,
            2,
            move |_, x| -c * x[1] - k * x[0].sin(),
            move |x| b0 + b1 * (wb * x[0]).sin(),
        ),
        PlantSpec::Bias { d, b } => PlantModel::new(name, n, move |_, _| d, move |_| b),
    }
}

fn build_model(plant: &PlantSpec, m: &ModelSpec) -> Result<UncertaintyModel> {
    let ModelSpec {
        b_min,
        b_max,
        f_scale,
        f0,
        fv,
        fx,
        a1,
        a2,
        c,
        k,
    } = m.clone();
    match plant {
        PlantSpec::Duffing { .. } => UncertaintyModel::new(
            move |x| -a1 * x[1] * x[1].abs() - a2 * x[0].powi(3),
            move |x| f_scale * (fv * x[1] * x[1] + fx * x[0].abs().powi(3) + f0),
            b_min,
            b_max,
        ),
        PlantSpec::Pendulum { .. } => UncertaintyModel::new(
            move |x| -c * x[1] - k * x[0].sin(),
            move |x| f_scale * (fv * x[1].abs() + f0),
            b_min,
            b_max,
        ),
        PlantSpec::Chain { .. } | PlantSpec::Bias { .. } => {
            UncertaintyModel::new(|_| 0.0, move |_| f_scale * f0, b_min, b_max)
        }
    }
}
