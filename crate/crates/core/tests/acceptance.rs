//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::time::{Duration, Instant};

use smooth_smc::bounds::zeta_table;
use smooth_smc::scenario::{benchmark_plants, Scenario, ScenarioConfig, BENCHMARKS, UNDER_GAINED};
use smooth_smc::sim::{simulate_with, ControlHold, SimOptions};
use smooth_smc::smoothing::SmoothingKind;
use smooth_smc::verify::{
    check_lyapunov, check_reaching, lyapunov_tolerance, sample_gain_sufficiency, search_witness,
    WitnessSearch,
};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ζ_i = 1 + Σ_{j<i} C(i,j) ζ_j with C from Pascal's triangle.
fn zeta_brute(n: usize) -> Vec<u128> {
    let mut pascal: Vec<Vec<u128>> = vec![vec![1]];
    for i in 1..n {
        let prev = &pascal[i - 1];
        let mut row = vec![1u128; i + 1];
        for (j, w) in prev.windows(2).enumerate() {
            row[j + 1] = w[0] + w[1];
        }
        pascal.push(row);
    }
    let mut z = Vec::with_capacity(n);
    for row in &pascal {
        let sum: u128 = row.iter().zip(&z).map(|(c, zj)| c * zj).sum();
        z.push(1 + sum);
    }
    z
}

fn zeta_criterion() -> Outcome {
    let t = Instant::now();
    let table = zeta_table(6).expect("n = 6 is supported");
    let elapsed = t.elapsed();
    let brute = zeta_brute(6);
    let z = table.zeta();
    let pass = z == brute.as_slice()
        && z[..3] == [1, 2, 6]
        && z[2] != 4
        && elapsed < Duration::from_millis(1);
    outcome(
        pass,
        format!(
            "zeta(6) = {z:?}, brute force {brute:?}, zeta_2 = {} vs 2^2 = 4, {elapsed:?}",
            z[2]
        ),
    )
}

fn run_timed(sc: &Scenario) -> (smooth_smc::log::TrajectoryLog, Duration) {
    let t = Instant::now();
    let log = sc.run().unwrap_or_else(|e| panic!("{}: {e}", sc.name));
    (log, t.elapsed())
}

fn reaching_criterion(plants: &[Scenario]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for sc in plants {
        let sat = sc.controller.smoothing() == SmoothingKind::Saturation;
        let (log, elapsed) = run_timed(sc);
        let r = check_reaching(&log, sc.controller.eta(), 1e-4);
        let ok = sat && sc.dt == 1e-3 && r.pass && elapsed < Duration::from_secs(10);
        pass &= ok;
        parts.push(format!(
            "{}: t_reach {} <= {:.3} + dt, envelope excess {:.1e}, {:.0?}",
            sc.name,
            r.t_reach_observed
                .map_or("never".into(), |t| format!("{t:.3}")),
            r.t_reach_bound,
            r.envelope_violation,
            elapsed
        ));
    }
    outcome(pass, parts.join("; "))
}

fn lyapunov_criterion(plants: &[Scenario]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for sc in plants {
        let log = sc.run().expect("benchmark runs");
        let tol = lyapunov_tolerance(&log);
        let l = check_lyapunov(&log, sc.controller.eta(), tol);
        pass &= l.pass && l.samples > 0;
        parts.push(format!(
            "{}: max {:.2e} <= C*dt {:.2e}",
            sc.name, l.max_violation, tol
        ));
    }
    let under = ScenarioConfig::parse(UNDER_GAINED.1.as_bytes())
        .and_then(|c| c.build())
        .expect("fixture parses");
    let log = under.run().expect("fixture runs");
    let l = check_lyapunov(&log, under.controller.eta(), lyapunov_tolerance(&log));
    pass &= !l.pass;
    parts.push(format!(
        "under-gained fixture {} (max {:.2e})",
        if l.pass {
            "passed (checker insensitive)"
        } else {
            "rejected"
        },
        l.max_violation
    ));
    outcome(pass, parts.join("; "))
}

fn containment_criterion(plants: &[Scenario]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for sc in plants {
        let log = sc.run().expect("benchmark runs");
        let rep = sc.verify(&log).expect("tail window is non-empty");
        let s = &rep.steady_state;
        pass &= s.corrected_pass && s.layer_pass && s.tol_rel == 1e-2 && s.layer_rel == 1e-3;
        let worst = s
            .max_abs
            .iter()
            .zip(&s.corrected_bounds)
            .map(|(m, b)| m / b)
            .fold(0.0, f64::max);
        parts.push(format!(
            "{}: max |e_i|/bound {:.3}, max|s|/phi {:.3}, 2^i {}",
            sc.name,
            worst,
            s.max_abs_s / s.phi,
            if s.slotine_pass { "pass" } else { "fail" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn witness_criterion() -> Outcome {
    let t = Instant::now();
    let params = WitnessSearch::new(3, 1.0, 1.0, 2, 20_000).expect("valid parameters");
    let r = search_witness(&params).expect("search runs");
    let elapsed = t.elapsed();
    let random = params.budget.div_ceil(2);
    let sound = r.within_corrected(1e-3);
    let pass = sound && random >= 10_000 && elapsed < Duration::from_secs(60);
    let gap = if r.exceeds_slotine() {
        "2^i bound violation demonstrated".to_string()
    } else {
        format!(
            "2^i bound violation NOT demonstrated (best {:.6} <= 4; sup of the cascade is 2 + 2e^-2 = {:.6})",
            r.best,
            2.0 + 2.0 * (-2.0f64).exp()
        )
    };
    outcome(
        pass,
        format!(
            "{random} random schedules + refinement ({} evals), best |x~''| = {:.6} <= 6(1+1e-3); {gap}; {elapsed:.0?}",
            r.evaluations, r.best
        ),
    )
}

fn gain_criterion(plants: &[Scenario]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, sc) in plants.iter().enumerate() {
        let t = Instant::now();
        let r = sample_gain_sufficiency(&sc.controller, 100_000, 2.0, k as u64, 1e-9)
            .expect("sampling runs");
        let elapsed = t.elapsed();
        pass &= r.pass && r.outside_layer > 0 && elapsed < Duration::from_secs(5);
        parts.push(format!(
            "{}: {} of {} draws outside layer, max(sign(s_phi) sdot + eta) = {:.2e}, {:.0?}",
            sc.name, r.outside_layer, r.draws, r.max_violation, elapsed
        ));
    }
    outcome(pass, parts.join("; "))
}

fn order_criterion(plants: &[Scenario]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let (smooth, kinked): (Vec<&Scenario>, Vec<&Scenario>) =
        plants.iter().partition(|s| s.uncertainty().beta() == 1.0);
    for sc in smooth {
        let cfg = sc
            .controller
            .clone()
            .with_smoothing(SmoothingKind::HyperbolicTangent);
        let end = |dt: f64| {
            let opts = SimOptions::new(dt, 2.0).with_hold(ControlHold::StageEvaluated);
            let log = simulate_with(&sc.plant, &cfg, &sc.trajectory, &sc.x0, &opts)
                .expect("smooth loop runs");
            log.rows().last().expect("non-empty").state.clone()
        };
        let dt = 0.02;
        let reference = end(dt / 8.0);
        let dist = |x: &[f64]| {
            x.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (dist(&end(dt)), dist(&end(dt / 2.0)));
        let ratio = e1 / e2;
        pass &= (12.0..=20.0).contains(&ratio);
        parts.push(format!(
            "{}: err(dt) {e1:.2e}, err(dt/2) {e2:.2e}, ratio {ratio:.2}",
            sc.name
        ));
    }
    pass &= !parts.is_empty();
    for sc in kinked {
        parts.push(format!(
            "{} skipped (beta > 1: |u_hat| in K makes the loop non-smooth)",
            sc.name
        ));
    }
    outcome(pass, parts.join("; "))
}

fn determinism_criterion() -> Outcome {
    let mut pass = true;
    let mut rows = 0;
    for (file, text) in BENCHMARKS {
        let csv = || {
            ScenarioConfig::parse(text.as_bytes())
                .and_then(|c| c.build())
                .and_then(|s| s.run())
                .map(|l| l.to_csv())
                .unwrap_or_else(|e| panic!("{file}: {e}"))
        };
        let (a, b) = (csv(), csv());
        pass &= a.as_bytes() == b.as_bytes();
        rows += a.lines().count() - 1;
    }
    outcome(
        pass,
        format!("3 scenarios run twice, {rows} rows, byte-identical CSV"),
    )
}

fn main() {
    let plants = benchmark_plants();
    let criteria: Vec<Criterion> = vec![
        ("1 zeta table", Box::new(zeta_criterion)),
        ("2 reaching time", Box::new(|| reaching_criterion(&plants))),
        (
            "3 lyapunov decrement",
            Box::new(|| lyapunov_criterion(&plants)),
        ),
        (
            "4 steady-state containment",
            Box::new(|| containment_criterion(&plants)),
        ),
        ("5 witness soundness", Box::new(witness_criterion)),
        ("6 gain sufficiency", Box::new(|| gain_criterion(&plants))),
        ("7 integrator order", Box::new(|| order_criterion(&plants))),
        ("8 determinism", Box::new(determinism_criterion)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
