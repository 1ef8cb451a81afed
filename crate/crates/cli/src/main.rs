use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use smooth_smc::bounds::zeta_table;
use smooth_smc::figures::{layer_geometry_csv, reaching_envelope_csv};
use smooth_smc::scenario::{Scenario, ScenarioConfig};
use smooth_smc::surface::make_surface;
use smooth_smc::verify::{search_witness, witness_log, WitnessSearch};
use smooth_smc::Error;

/// Smooth sliding-mode control: simulation, bound verification, ζ tables
/// and worst-case witness search.
#[derive(Parser)]
#[command(name = "smc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trajectory CSV.
    Simulate(SimulateArgs),
    /// Run scenarios and check the reaching, Lyapunov and steady-state bounds.
    VerifyBounds(VerifyArgs),
    /// Print ζ_i next to 2^i for i < n.
    ZetaTable {
        #[arg(long)]
        n: usize,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search bang-bang layer signals for the largest |x̃^(i)|.
    SearchWitness(WitnessArgs),
}

#[derive(Args)]
struct RunOverrides {
    /// Override the time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the run length.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    #[command(flatten)]
    run: RunOverrides,
    /// Trajectory CSV path; defaults to `[output] csv`, else standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `t,|s_phi|,envelope` rows here.
    #[arg(long)]
    envelope: Option<PathBuf>,
    /// Write the n = 2 layer/box polygons here.
    #[arg(long)]
    geometry: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    #[command(flatten)]
    run: RunOverrides,
    /// Key/value report path (single scenario only); defaults to `[output] report`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Trajectory CSV path (single scenario only).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scenarios verified in parallel.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct WitnessArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    /// Derivative index, 0 ≤ i < n.
    #[arg(long)]
    i: usize,
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    switches: usize,
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the best witness trajectory as a CSV log.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Verification(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::AssumptionViolated { .. }
            | Error::Divergence { .. }
            | Error::NonFinite { .. }
            | Error::EmptyTail { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn context(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        Failure::Runtime(m) => Failure::Runtime(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path, run: &RunOverrides) -> Result<(ScenarioConfig, Scenario), Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::parse(&bytes).map_err(context(path))?;
    if let Some(dt) = run.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Failure::Usage(format!("--dt must be > 0, got {dt}")));
        }
        cfg.run.dt = Some(dt);
    }
    if let Some(t) = run.t_end {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::Usage(format!("--t-end must be > 0, got {t}")));
        }
        cfg.run.t_end = t;
    }
    let scenario = cfg.build().map_err(context(path))?;
    Ok((cfg, scenario))
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (cfg, sc) = load(&args.config, &args.run)?;
    let log = sc.run().map_err(context(&args.config))?;
    let csv = log.to_csv();
    let csv_path = args.out.or(cfg.output.csv);
    let mut summary = String::new();
    match sc.verify(&log) {
        Ok(report) => summary.push_str(&report.to_text()),
        Err(e) => summary.push_str(&format!(
            "scenario {}: no steady-state summary ({e})\n",
            sc.name
        )),
    }
    if let Some(p) = args.envelope.or(cfg.output.envelope) {
        write_file(&p, &reaching_envelope_csv(&log, sc.controller.eta())?)?;
    }
    if let Some(p) = args.geometry.or(cfg.output.geometry) {
        write_file(
            &p,
            &layer_geometry_csv(sc.controller.surface(), sc.controller.phi())?,
        )?;
    }
    match csv_path {
        Some(p) => {
            write_file(&p, &csv)?;
            print!("{summary}");
            println!("wrote {} rows to {}", log.len(), p.display());
        }
        None => {
            io::stdout()
                .write_all(csv.as_bytes())
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    if args.configs.len() > 1 && (args.report.is_some() || args.out.is_some()) {
        return Err(Failure::Usage(
            "--report and --out need exactly one config".into(),
        ));
    }
    let run_one = |path: &PathBuf| -> Result<(String, Vec<&'static str>), Failure> {
        let (cfg, sc) = load(path, &args.run)?;
        let log = sc.run().map_err(context(path))?;
        let report = sc.verify(&log).map_err(context(path))?;
        if let Some(p) = args.report.clone().or(cfg.output.report) {
            write_file(&p, &report.to_kv())?;
        }
        if let Some(p) = args.out.clone().or(cfg.output.csv) {
            write_file(&p, &log.to_csv())?;
        }
        Ok((report.to_text(), report.failures()))
    };
    let results: Vec<_> = match args.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Failure::Runtime(e.to_string()))?
            .install(|| args.configs.par_iter().map(run_one).collect()),
        None => args.configs.iter().map(run_one).collect(),
    };

    let mut failed = Vec::new();
    let mut errors = 0;
    let mut worst: Option<Failure> = None;
    for (path, res) in args.configs.iter().zip(results) {
        match res {
            Ok((text, failures)) => {
                print!("{text}");
                if !failures.is_empty() {
                    failed.push(format!("{}: {}", path.display(), failures.join(", ")));
                }
            }
            Err(f) => {
                errors += 1;
                match &worst {
                    Some(w) if w.code() >= f.code() => eprintln!("error: {}", f.message()),
                    _ => {
                        if let Some(old) = worst.replace(f) {
                            eprintln!("error: {}", old.message());
                        }
                    }
                }
            }
        }
    }
    if let Some(f) = worst {
        if errors > 1 {
            eprintln!("{errors} of {} scenarios could not run", args.configs.len());
        }
        return Err(f);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "verification failed: {}",
            failed.join("; ")
        )))
    }
}

fn zeta(n: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let table = zeta_table(n)?;
    let mut csv = String::from("i,zeta_i,2^i\n");
    for (i, (z, s)) in table.zeta().iter().zip(table.slotine()).enumerate() {
        csv.push_str(&format!("{i},{z},{s}\n"));
    }
    print!("{csv}");
    if let Some(first) = table.first_divergent_index() {
        println!("# zeta_i exceeds 2^i from i = {first}");
    }
    if let Some(p) = out {
        write_file(&p, &csv)?;
    }
    Ok(())
}

fn witness(args: WitnessArgs) -> Result<(), Failure> {
    let mut params = WitnessSearch::new(args.n, args.lambda, args.phi, args.i, args.budget)?
        .with_seed(args.seed)
        .with_switches(args.switches);
    if let Some(j) = args.jobs {
        params = params.with_jobs(j);
    }
    let r = search_witness(&params)?;
    println!(
        "n = {}, lambda = {}, phi = {}, i = {}",
        args.n, args.lambda, args.phi, args.i
    );
    println!("evaluations         {}", r.evaluations);
    println!("best |x~^(i)|       {:.12}", r.best);
    println!("corrected bound     {:.12}", r.corrected_bound);
    println!("2^i bound           {:.12}", r.slotine_bound);
    println!(
        "best / (lambda^(i-n+1) phi) {:.12}",
        r.best / r.corrected_bound * zeta_table(args.n)?.zeta()[args.i] as f64
    );
    println!(
        "within corrected    {}",
        if r.within_corrected(1e-3) {
            "yes"
        } else {
            "NO"
        }
    );
    println!(
        "exceeds 2^i bound   {}",
        if r.exceeds_slotine() { "yes" } else { "no" }
    );
    println!(
        "switch times        {:?} (initial sign {:+}, horizon {})",
        r.schedule.switch_times, r.schedule.initial_sign, r.schedule.horizon
    );
    if let Some(p) = args.out {
        let spec = make_surface(args.n, args.lambda)?;
        let log = witness_log(&spec, args.phi, &r.schedule, 1e-3 / args.lambda)?;
        write_file(&p, &log.to_csv())?;
    }
    if !r.within_corrected(1e-3) {
        return Err(Failure::Verification(
            "witness exceeds the corrected bound".into(),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::VerifyBounds(a) => verify(a),
        Command::ZetaTable { n, out } => zeta(n, out),
        Command::SearchWitness(a) => witness(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = match f {
                Failure::Usage(_) => "error",
                Failure::Verification(_) => "FAIL",
                Failure::Runtime(_) => "runtime error",
            };
            eprintln!("{kind}: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
