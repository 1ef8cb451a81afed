//! Verdict records and their text and key/value forms.
//!
//! The key/value form is one `key = value` pair per line; `#` starts a
//! comment. Vectors are comma separated, missing times are written `never`.
//! Every `pass` flag is re-derived on parsing and must agree with the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Value of the `schema` key in a key/value report.
pub const REPORT_SCHEMA: &str = "smooth-smc-report/1";

#[derive(Debug, Clone, PartialEq)]
pub struct ReachRecord {
    /// First grid time with `|s_φ| ≤ tol`; `None` if the layer is never reached.
    pub t_reach_observed: Option<f64>,
    pub t_reach_bound: f64,
    /// `max_k |s_φ(t_k)| − (|s_φ(0)| − η t_k)` before reach. `-inf` when the
    /// run starts inside the layer.
    pub envelope_violation: f64,
    pub dt: f64,
    pub pass: bool,
}

impl ReachRecord {
    pub fn verdict(observed: Option<f64>, bound: f64, dt: f64, envelope: f64, tol: f64) -> bool {
        matches!(observed, Some(t) if t <= bound + dt) && envelope <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovRecord {
    /// `max (V̇_k + η|s_φ,k|)`, `-inf` if no pair lies outside the layer.
    pub max_violation: f64,
    pub at_time: Option<f64>,
    pub samples: usize,
    pub pass: bool,
}

impl LyapunovRecord {
    pub fn verdict(max_violation: f64, tol: f64) -> bool {
        max_violation <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceRecord {
    pub max_s_phi_after_reach: Option<f64>,
    pub limit: f64,
    pub pass: bool,
}

impl InvarianceRecord {
    pub fn verdict(after: Option<f64>, limit: f64) -> bool {
        matches!(after, Some(m) if m <= limit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateRecord {
    pub window_start: f64,
    pub samples: usize,
    /// `max |x̃^{(i)}|` over the window.
    pub max_abs: Vec<f64>,
    pub corrected_bounds: Vec<f64>,
    pub slotine_bounds: Vec<f64>,
    pub max_abs_s: f64,
    pub phi: f64,
    pub tol_rel: f64,
    pub layer_rel: f64,
    pub corrected_pass: bool,
    pub slotine_pass: bool,
    pub layer_pass: bool,
}

impl SteadyStateRecord {
    /// Recomputes the three flags from the stored extrema.
    pub fn rederive(&mut self) {
        let within = |bounds: &[f64]| {
            bounds.len() == self.max_abs.len()
                && self
                    .max_abs
                    .iter()
                    .zip(bounds)
                    .all(|(m, b)| *m <= b * (1.0 + self.tol_rel))
        };
        self.corrected_pass = within(&self.corrected_bounds);
        self.slotine_pass = within(&self.slotine_bounds);
        self.layer_pass = self.max_abs_s <= self.phi * (1.0 + self.layer_rel);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub reach_tol: f64,
    pub lyapunov_tol: f64,
    pub invariance_rel: f64,
    pub steady_rel: f64,
    pub layer_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub order_n: usize,
    pub lambda: f64,
    pub eta: f64,
    pub phi: f64,
    pub reach: ReachRecord,
    pub lyapunov: LyapunovRecord,
    pub invariance: InvarianceRecord,
    pub steady_state: SteadyStateRecord,
    pub tolerances: Tolerances,
}

impl ConvergenceReport {
    /// True iff every gating check passed. The `2^i` comparison is
    /// informational and does not gate.
    pub fn all_pass(&self) -> bool {
        self.reach.pass
            && self.lyapunov.pass
            && self.invariance.pass
            && self.steady_state.corrected_pass
            && self.steady_state.layer_pass
    }

    /// Names of the gating checks that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.reach.pass {
            out.push("reaching");
        }
        if !self.lyapunov.pass {
            out.push("lyapunov");
        }
        if !self.invariance.pass {
            out.push("invariance");
        }
        if !self.steady_state.corrected_pass {
            out.push("steady_state");
        }
        if !self.steady_state.layer_pass {
            out.push("layer");
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let v = |b: bool| if b { "PASS" } else { "FAIL" };
        let _ = writeln!(
            o,
            "scenario {}  (n = {}, lambda = {}, eta = {}, phi = {})",
            self.scenario, self.order_n, self.lambda, self.eta, self.phi
        );
        let r = &self.reach;
        let _ = writeln!(
            o,
            "reaching     {}  t_reach = {}  bound = {:.6}  envelope excess = {:.3e}",
            v(r.pass),
            fmt_opt_time(r.t_reach_observed),
            r.t_reach_bound,
            r.envelope_violation
        );
        let l = &self.lyapunov;
        let _ = writeln!(
            o,
            "lyapunov     {}  max(Vdot + eta|s_phi|) = {:.3e}  tol = {:.3e}  ({} pairs outside layer)",
            v(l.pass),
            l.max_violation,
            self.tolerances.lyapunov_tol,
            l.samples
        );
        let i = &self.invariance;
        let _ = writeln!(
            o,
            "invariance   {}  max |s_phi| after reach = {}  limit = {:.3e}",
            v(i.pass),
            i.max_s_phi_after_reach
                .map_or_else(|| "n/a".to_string(), |m| format!("{m:.3e}")),
            i.limit
        );
        let s = &self.steady_state;
        let _ = writeln!(
            o,
            "steady state window t >= {:.4} ({} samples), max |s| = {:.6} (phi = {}) layer {}",
            s.window_start,
            s.samples,
            s.max_abs_s,
            s.phi,
            v(s.layer_pass)
        );
        let _ = writeln!(o, "  i  max|e_i|        corrected      2^i bound");
        for k in 0..s.max_abs.len() {
            let _ = writeln!(
                o,
                "  {k}  {:<15.6e} {:<14.6e} {:.6e}",
                s.max_abs[k], s.corrected_bounds[k], s.slotine_bounds[k]
            );
        }
        let _ = writeln!(
            o,
            "  corrected {}   2^i {} (informational)",
            v(s.corrected_pass),
            v(s.slotine_pass)
        );
        let _ = writeln!(o, "overall      {}", v(self.all_pass()));
        o
    }

    pub fn to_kv(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, val: String| {
            let _ = writeln!(o, "{k} = {val}");
        };
        let name: String = self
            .scenario
            .chars()
            .map(|c| if c.is_control() { ' ' } else { c })
            .collect();
        kv("schema", REPORT_SCHEMA.into());
        kv("scenario", name.trim().to_string());
        kv("n", self.order_n.to_string());
        kv("lambda", self.lambda.to_string());
        kv("eta", self.eta.to_string());
        kv("phi", self.phi.to_string());
        let r = &self.reach;
        kv("reach.t_observed", fmt_opt(r.t_reach_observed));
        kv("reach.t_bound", r.t_reach_bound.to_string());
        kv("reach.envelope_violation", r.envelope_violation.to_string());
        kv("reach.dt", r.dt.to_string());
        kv("reach.pass", r.pass.to_string());
        let l = &self.lyapunov;
        kv("lyapunov.max_violation", l.max_violation.to_string());
        kv("lyapunov.at_time", fmt_opt(l.at_time));
        kv("lyapunov.samples", l.samples.to_string());
        kv("lyapunov.pass", l.pass.to_string());
        let i = &self.invariance;
        kv(
            "invariance.max_after_reach",
            fmt_opt(i.max_s_phi_after_reach),
        );
        kv("invariance.limit", i.limit.to_string());
        kv("invariance.pass", i.pass.to_string());
        let s = &self.steady_state;
        kv("steady.window_start", s.window_start.to_string());
        kv("steady.samples", s.samples.to_string());
        kv("steady.max_abs", fmt_vec(&s.max_abs));
        kv("steady.corrected_bounds", fmt_vec(&s.corrected_bounds));
        kv("steady.slotine_bounds", fmt_vec(&s.slotine_bounds));
        kv("steady.max_abs_s", s.max_abs_s.to_string());
        kv("steady.tol_rel", s.tol_rel.to_string());
        kv("steady.layer_rel", s.layer_rel.to_string());
        kv("steady.corrected_pass", s.corrected_pass.to_string());
        kv("steady.slotine_pass", s.slotine_pass.to_string());
        kv("steady.layer_pass", s.layer_pass.to_string());
        let t = &self.tolerances;
        kv("tol.reach", t.reach_tol.to_string());
        kv("tol.lyapunov", t.lyapunov_tol.to_string());
        kv("tol.invariance_rel", t.invariance_rel.to_string());
        kv("tol.steady_rel", t.steady_rel.to_string());
        kv("tol.layer_rel", t.layer_rel.to_string());
        kv("all_pass", self.all_pass().to_string());
        o
    }

    /// Parses [`to_kv`](Self::to_kv) output and checks that every stored
    /// flag matches the one re-derived from the stored numbers.
    pub fn from_kv(text: &str) -> Result<Self> {
        let map = KvMap::parse(text)?;
        let schema = map.str("schema")?;
        if schema != REPORT_SCHEMA {
            return Err(map.err("schema", format!("unsupported schema `{schema}`")));
        }
        let order_n = map.usize("n")?;
        let phi = map.f64("phi")?;
        let tolerances = Tolerances {
            reach_tol: map.f64("tol.reach")?,
            lyapunov_tol: map.f64("tol.lyapunov")?,
            invariance_rel: map.f64("tol.invariance_rel")?,
            steady_rel: map.f64("tol.steady_rel")?,
            layer_rel: map.f64("tol.layer_rel")?,
        };
        let t_obs = map.opt_f64("reach.t_observed")?;
        let t_bound = map.f64("reach.t_bound")?;
        let dt = map.f64("reach.dt")?;
        let env = map.f64("reach.envelope_violation")?;
        let reach = ReachRecord {
            t_reach_observed: t_obs,
            t_reach_bound: t_bound,
            envelope_violation: env,
            dt,
            pass: ReachRecord::verdict(t_obs, t_bound, dt, env, tolerances.reach_tol),
        };
        let max_violation = map.f64("lyapunov.max_violation")?;
        let lyapunov = LyapunovRecord {
            max_violation,
            at_time: map.opt_f64("lyapunov.at_time")?,
            samples: map.usize("lyapunov.samples")?,
            pass: LyapunovRecord::verdict(max_violation, tolerances.lyapunov_tol),
        };
        let after = map.opt_f64("invariance.max_after_reach")?;
        let limit = map.f64("invariance.limit")?;
        let invariance = InvarianceRecord {
            max_s_phi_after_reach: after,
            limit,
            pass: InvarianceRecord::verdict(after, limit),
        };
        let mut steady_state = SteadyStateRecord {
            window_start: map.f64("steady.window_start")?,
            samples: map.usize("steady.samples")?,
            max_abs: map.vec("steady.max_abs", order_n)?,
            corrected_bounds: map.vec("steady.corrected_bounds", order_n)?,
            slotine_bounds: map.vec("steady.slotine_bounds", order_n)?,
            max_abs_s: map.f64("steady.max_abs_s")?,
            phi,
            tol_rel: map.f64("steady.tol_rel")?,
            layer_rel: map.f64("steady.layer_rel")?,
            corrected_pass: false,
            slotine_pass: false,
            layer_pass: false,
        };
        steady_state.rederive();
        let report = Self {
            scenario: map.str("scenario")?.to_string(),
            order_n,
            lambda: map.f64("lambda")?,
            eta: map.f64("eta")?,
            phi,
            reach,
            lyapunov,
            invariance,
            steady_state,
            tolerances,
        };
        let s = &report.steady_state;
        for (key, derived) in [
            ("reach.pass", report.reach.pass),
            ("lyapunov.pass", report.lyapunov.pass),
            ("invariance.pass", report.invariance.pass),
            ("steady.corrected_pass", s.corrected_pass),
            ("steady.slotine_pass", s.slotine_pass),
            ("steady.layer_pass", s.layer_pass),
            ("all_pass", report.all_pass()),
        ] {
            if map.bool(key)? != derived {
                return Err(map.err(
                    key,
                    format!("stored flag disagrees with recorded values (expected {derived})"),
                ));
            }
        }
        Ok(report)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "never".to_string(), |t| t.to_string())
}

fn fmt_opt_time(v: Option<f64>) -> String {
    v.map_or_else(|| "never".to_string(), |t| format!("{t:.6}"))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

struct KvMap<'a> {
    entries: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> KvMap<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `key = value`, found `{body}`"),
                });
            };
            let k = k.trim();
            if entries.insert(k, (line, v.trim())).is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{k}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn err(&self, key: &str, msg: String) -> Error {
        let line = self.entries.get(key).map_or(0, |e| e.0);
        Error::Parse {
            line,
            msg: format!("`{key}`: {msg}"),
        }
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        self.entries
            .get(key)
            .map(|e| e.1)
            .ok_or_else(|| self.err(key, "missing key".into()))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|_| self.err(key, format!("`{raw}` is not a number")))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.str(key)? == "never" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|_| self.err(key, format!("`{raw}` is not a non-negative integer")))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.err(key, format!("`{other}` is not true/false"))),
        }
    }

    fn vec(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        let raw = self.str(key)?;
        let v = raw
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| self.err(key, format!("`{raw}` is not a number list")))?;
        if v.len() != len {
            return Err(self.err(key, format!("expected {len} entries, found {}", v.len())));
        }
        Ok(v)
    }
}
