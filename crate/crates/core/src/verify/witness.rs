//! Worst-case search for the steady-state excursion of `x̃^{(i)}`.
//!
//! Inside the layer, `x̃` is the output of `n − 1` cascaded first-order
//! filters `1/(p + λ)` driven by `s(t)` with `|s| ≤ φ`. The search drives
//! that cascade with bang-bang schedules `s ∈ {−φ, +φ}` and propagates it
//! exactly between switches, so the only error is floating-point rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::zeta_table;
use crate::error::{positive, Error, Result};
use crate::log::{LogRow, TrajectoryLog};
use crate::surface::{choose, layer_distance, SurfaceSpec, MAX_ORDER};

/// Schedules are refined from this many of the best random draws.
const REFINE_TOP: usize = 8;

/// `s(t) = initial_sign·φ`, flipping sign at each switch time.
#[derive(Debug, Clone, PartialEq)]
pub struct BangBangSchedule {
    pub horizon: f64,
    /// `+1.0` or `−1.0`.
    pub initial_sign: f64,
    /// Sorted, inside `[0, horizon]`. A switch at `horizon` only changes
    /// the value of `s` at the final instant.
    pub switch_times: Vec<f64>,
}

impl BangBangSchedule {
    pub fn new(horizon: f64, initial_sign: f64, mut switch_times: Vec<f64>) -> Result<Self> {
        let horizon = positive("horizon", horizon)?;
        if switch_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "switch_times",
                reason: "must be finite".into(),
            });
        }
        for t in &mut switch_times {
            *t = t.clamp(0.0, horizon);
        }
        switch_times.sort_by(f64::total_cmp);
        Ok(Self {
            horizon,
            initial_sign: if initial_sign < 0.0 { -1.0 } else { 1.0 },
            switch_times,
        })
    }

    /// Sign of `s` at `t`, right-continuous.
    pub fn sign_at(&self, t: f64) -> f64 {
        let flips = self.switch_times.iter().filter(|&&w| w <= t).count();
        if flips % 2 == 0 {
            self.initial_sign
        } else {
            -self.initial_sign
        }
    }

    fn final_sign(&self) -> f64 {
        self.sign_at(self.horizon)
    }

    /// `x̃^{(i)}(horizon)` for the cascade started from rest at `t = 0`.
    pub fn excursion(&self, n: usize, lambda: f64, phi: f64, i: usize) -> f64 {
        let mut cascade = Cascade::new(n, lambda);
        let mut t = 0.0;
        let mut sign = self.initial_sign;
        for &w in &self.switch_times {
            cascade.advance(sign * phi, w - t);
            t = w;
            sign = -sign;
        }
        cascade.advance(sign * phi, self.horizon - t);
        cascade.derivative(i, self.final_sign() * phi)
    }
}

/// `y_1..y_m` with `y_k = (p + λ)^{−k} s`.
struct Cascade {
    lambda: f64,
    y: Vec<f64>,
    next: Vec<f64>,
}

impl Cascade {
    fn new(n: usize, lambda: f64) -> Self {
        Self {
            lambda,
            y: vec![0.0; n - 1],
            next: vec![0.0; n - 1],
        }
    }

    // Exact solution over a step of length h with constant input u.
    fn advance(&mut self, u: f64, h: f64) {
        if h <= 0.0 || self.y.is_empty() {
            return;
        }
        let lam = self.lambda;
        let e = (-lam * h).exp();
        let m = self.y.len();
        // taylor[q] = (λh)^q / q!, pow_h[q] = h^q / q!
        let mut partial = 0.0;
        let mut taylor = 1.0;
        let mut pow_h = vec![1.0; m];
        for q in 1..m {
            pow_h[q] = pow_h[q - 1] * h / q as f64;
        }
        let mut lam_pow = 1.0;
        for k in 1..=m {
            partial += taylor;
            taylor *= lam * h / k as f64;
            lam_pow *= lam;
            let forced = u / lam_pow * (1.0 - e * partial);
            let hom: f64 = (1..=k).map(|j| self.y[j - 1] * pow_h[k - j]).sum::<f64>() * e;
            self.next[k - 1] = hom + forced;
        }
        std::mem::swap(&mut self.y, &mut self.next);
    }

    // x̃^{(i)} = Σ_j C(i,j) (−λ)^{i−j} y_{m−j}, with y_0 = s.
    fn derivative(&self, i: usize, s: f64) -> f64 {
        let m = self.y.len();
        (0..=i)
            .map(|j| {
                let yj = if j == m { s } else { self.y[m - j - 1] };
                choose(i as u64, j as u64).unwrap_or(0) as f64
                    * (-self.lambda).powi((i - j) as i32)
                    * yj
            })
            .sum()
    }

    fn error_vector(&self, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|i| self.derivative(i, s)).collect()
    }
}

/// Parameters of a witness search.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSearch {
    pub n: usize,
    pub lambda: f64,
    pub phi: f64,
    pub index: usize,
    /// Total cascade evaluations, random draws and refinement together.
    pub budget: usize,
    pub seed: u64,
    /// Maximum number of switches per random schedule.
    pub switches: usize,
    /// Run length in units of `1/λ`.
    pub horizon_units: f64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl WitnessSearch {
    pub fn new(n: usize, lambda: f64, phi: f64, index: usize, budget: usize) -> Result<Self> {
        if n == 0 || n > MAX_ORDER {
            return Err(Error::OrderOutOfRange(n));
        }
        positive("lambda", lambda)?;
        positive("phi", phi)?;
        if index >= n {
            return Err(Error::InvalidParameter {
                name: "i",
                reason: format!("derivative index must be below n = {n}, got {index}"),
            });
        }
        if budget == 0 {
            return Err(Error::InvalidParameter {
                name: "budget",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self {
            n,
            lambda,
            phi,
            index,
            budget,
            seed: 0,
            switches: 12,
            horizon_units: 30.0,
            jobs: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_switches(mut self, switches: usize) -> Self {
        self.switches = switches;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = Some(jobs.max(1));
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon_units / self.lambda
    }

    fn eval(&self, sched: &BangBangSchedule) -> f64 {
        sched
            .excursion(self.n, self.lambda, self.phi, self.index)
            .abs()
    }

    fn random_schedule(&self, k: usize) -> BangBangSchedule {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(k as u64));
        let horizon = self.horizon();
        let count = rng.random_range(0..=self.switches);
        // Offsets before the end, in units of 1/λ; negative draws land on
        // the horizon itself.
        let reach = (self.n as f64 + 4.0).min(self.horizon_units);
        let times = (0..count)
            .map(|_| horizon - rng.random_range(-0.5..reach) / self.lambda)
            .collect();
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        BangBangSchedule::new(horizon, sign, times).expect("horizon is positive")
    }

    // Coordinate search on the switch times, halving the step down to
    // 1e-9/λ or until the evaluation budget runs out.
    fn refine(
        &self,
        mut sched: BangBangSchedule,
        mut best: f64,
        budget: usize,
    ) -> (f64, BangBangSchedule, usize) {
        let mut used = 0;
        let mut step = 0.5 / self.lambda;
        while step > 1e-9 / self.lambda && used < budget {
            let mut improved = false;
            for idx in 0..sched.switch_times.len() {
                for dir in [1.0, -1.0] {
                    if used >= budget {
                        break;
                    }
                    let mut cand = sched.clone();
                    cand.switch_times[idx] =
                        (cand.switch_times[idx] + dir * step).clamp(0.0, cand.horizon);
                    cand.switch_times.sort_by(f64::total_cmp);
                    used += 1;
                    let v = self.eval(&cand);
                    if v > best {
                        best = v;
                        sched = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (best, sched, used)
    }

    fn run(&self) -> WitnessResult {
        let random_budget = self.budget.div_ceil(2);
        let mut scored: Vec<(f64, usize)> = (0..random_budget)
            .into_par_iter()
            .map(|k| (self.eval(&self.random_schedule(k)), k))
            .collect();
        // Descending value, ties broken by the lowest index.
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.truncate(REFINE_TOP);

        let refine_budget = self.budget - random_budget;
        let per = refine_budget / scored.len().max(1);
        let refined: Vec<(f64, usize, BangBangSchedule, usize)> = scored
            .par_iter()
            .map(|&(v, k)| {
                let (best, sched, used) = self.refine(self.random_schedule(k), v, per);
                (best, k, sched, used)
            })
            .collect();
        let evaluations = random_budget + refined.iter().map(|r| r.3).sum::<usize>();
        let (best, _, schedule, _) = refined
            .into_iter()
            .reduce(|a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            })
            .expect("at least one random draw");

        let table = zeta_table(self.n).expect("order validated");
        let scale = self.lambda.powi(self.index as i32 - self.n as i32 + 1) * self.phi;
        WitnessResult {
            best,
            schedule,
            corrected_bound: table.zeta()[self.index] as f64 * scale,
            slotine_bound: table.slotine()[self.index] as f64 * scale,
            evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessResult {
    /// Largest `|x̃^{(i)}|` found.
    pub best: f64,
    pub schedule: BangBangSchedule,
    pub corrected_bound: f64,
    pub slotine_bound: f64,
    pub evaluations: usize,
}

impl WitnessResult {
    /// True when the search beat the `2^i` bound.
    pub fn exceeds_slotine(&self) -> bool {
        self.best > self.slotine_bound
    }

    pub fn within_corrected(&self, tol_rel: f64) -> bool {
        self.best <= self.corrected_bound * (1.0 + tol_rel)
    }
}

/// Random restarts plus coordinate refinement. Deterministic for a given
/// seed regardless of thread count.
pub fn search_witness(params: &WitnessSearch) -> Result<WitnessResult> {
    WitnessSearch::new(
        params.n,
        params.lambda,
        params.phi,
        params.index,
        params.budget,
    )?;
    match params.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::InvalidParameter {
                    name: "jobs",
                    reason: e.to_string(),
                })?;
            Ok(pool.install(|| params.run()))
        }
        None => Ok(params.run()),
    }
}

/// Samples the cascade response to `schedule` on a grid that ends exactly at
/// the horizon. The logged state is `x̃` with a zero desired trajectory and
/// `u` holds the applied `s`.
pub fn witness_log(
    spec: &SurfaceSpec,
    phi: f64,
    schedule: &BangBangSchedule,
    dt: f64,
) -> Result<TrajectoryLog> {
    let phi = positive("phi", phi)?;
    positive("dt", dt)?;
    let n = spec.order();
    let lambda = spec.lambda();
    let steps = (schedule.horizon / dt).ceil().max(1.0) as usize;
    let h = schedule.horizon / steps as f64;
    let mut log = TrajectoryLog::with_capacity(n, h, steps + 1)?;
    let mut cascade = Cascade::new(n, lambda);
    let mut switches = schedule.switch_times.iter().peekable();
    let mut sign = schedule.initial_sign;
    let mut t = 0.0;
    for k in 0..=steps {
        let target = if k == steps {
            schedule.horizon
        } else {
            k as f64 * h
        };
        while let Some(&&w) = switches.peek() {
            if w > target {
                break;
            }
            cascade.advance(sign * phi, w - t);
            t = w;
            sign = -sign;
            switches.next();
        }
        cascade.advance(sign * phi, target - t);
        t = target;
        let state = cascade.error_vector(n, sign * phi);
        let s = spec.value(&state)?;
        log.push(LogRow::new(
            state,
            vec![0.0; n],
            s,
            layer_distance(s, phi),
            0.0,
            sign * phi,
        ))?;
    }
    Ok(log)
}
