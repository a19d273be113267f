//! The `diffinv` command line.
//!
//! Exit codes: 0 success, 1 numerical failure (Newton divergence, singular
//! Jacobian, failed verification), 2 usage error.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::euler::{self, IntegrationConfig, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL};
use crate::exec::Execution;
use crate::inversion::{self, Algorithm};
use crate::linalg::StateVector;
use crate::ode::{make_random_glv, GlvParams, LotkaVolterra2, OdeSystem, System};
use crate::verify::{self, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable that takes precedence over `--seed`.
pub const SEED_ENV: &str = "DIFFINV_SEED";

pub const CSV_HEADER: [&str; 9] = [
    "algorithm",
    "n",
    "m",
    "trials",
    "wall_seconds_total",
    "flops_inversion_phase",
    "flops_total",
    "tape_bytes",
    "seed",
];

#[derive(Parser, Debug)]
#[command(
    name = "diffinv",
    version,
    about = "Implicit Euler integration and differential inversion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate an initial value problem and print x(t).
    Solve(SystemArgs),
    /// Compute (E')⁻¹·v with the chosen algorithm.
    Invert(InvertArgs),
    /// Run the built-in verification checks.
    Verify(VerifyArgs),
    /// Time the three algorithms on random generalized Lotka-Volterra systems.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SystemKind {
    /// Two-species predator-prey model.
    Lv2,
    /// Generalized Lotka-Volterra, from --params or random with --n/--seed.
    Glv,
    /// dx/dt = λ·x.
    Linear,
    /// G ≡ 0 in --n dimensions.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Blackbox,
    Partial,
    Full,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Blackbox => Algorithm::Blackbox,
            AlgorithmArg::Partial => Algorithm::Partial,
            AlgorithmArg::Full => Algorithm::Full,
        }
    }
}

#[derive(Args, Debug)]
struct SystemArgs {
    #[arg(long, value_enum, default_value_t = SystemKind::Lv2)]
    system: SystemKind,
    /// GLV parameter file (n, then r, then A row-major).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Dimension for random GLV or zero systems.
    #[arg(long)]
    n: Option<usize>,
    /// Seed for random GLV parameters.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rate of the linear system.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lambda: f64,
    /// Write the GLV parameters in use to this file.
    #[arg(long)]
    save_params: Option<PathBuf>,
    /// Initial state, comma separated. Defaults to all ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Target time.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Number of implicit Euler steps.
    #[arg(long, default_value_t = 1000)]
    m: usize,
    /// Newton residual tolerance.
    #[arg(long, default_value_t = DEFAULT_NEWTON_TOL)]
    tol: f64,
    /// Newton iteration cap per step.
    #[arg(long, default_value_t = DEFAULT_NEWTON_MAX_ITER)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct InvertArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Full)]
    algorithm: AlgorithmArg,
    /// Right-hand side vector, comma separated. Defaults to E(x0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v: Option<Vec<f64>>,
    /// Also print flop counts and tape size.
    #[arg(long)]
    report: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Only run checks whose name contains this string.
    #[arg(long)]
    filter: Option<String>,
    /// List check names and exit.
    #[arg(long)]
    list: bool,
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb_jacobian: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// System dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,48,64")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Wall-time budget per cell in seconds.
    #[arg(long, default_value_t = 300.0)]
    budget: f64,
    /// Algorithms to run, comma separated.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "blackbox,partial,full"
    )]
    algorithms: Vec<AlgorithmArg>,
    /// CSV output path; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// `%g`-style formatting with six significant digits.
pub fn format_g(x: f64) -> String {
    format_sig(x, 6)
}

pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

fn seed_override(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|e| Error::InvalidInput(format!("{SEED_ENV}={s:?}: {e}"))),
        Err(_) => Ok(flag),
    }
}

fn build_system(args: &SystemArgs) -> Result<System> {
    let sys = match args.system {
        SystemKind::Lv2 => System::LotkaVolterra2(LotkaVolterra2),
        SystemKind::Glv => match (&args.params, args.n) {
            (Some(path), _) => System::Glv(GlvParams::read(path)?),
            (None, Some(n)) => System::Glv(make_random_glv(n, seed_override(args.seed)?)?),
            (None, None) => {
                return Err(Error::InvalidInput(
                    "--system glv needs --params or --n".into(),
                ))
            }
        },
        SystemKind::Linear => System::Glv(GlvParams::linear(args.lambda)),
        SystemKind::Zero => {
            let n = args.n.unwrap_or(2);
            if n == 0 {
                return Err(Error::InvalidInput("--n must be at least 1".into()));
            }
            System::Glv(GlvParams::zero(n))
        }
    };
    if let (Some(path), System::Glv(p)) = (&args.save_params, &sys) {
        p.write(path)?;
    }
    Ok(sys)
}

fn state(values: Option<&Vec<f64>>, n: usize, what: &str) -> Result<StateVector> {
    match values {
        None => Ok(StateVector::ones(n)),
        Some(v) if v.len() != n => Err(Error::InvalidInput(format!(
            "{what} has {} entries, system dimension is {n}",
            v.len()
        ))),
        Some(v) => StateVector::new(v.clone()),
    }
}

fn config(args: &SystemArgs) -> Result<IntegrationConfig> {
    IntegrationConfig::new(args.t, args.m)?.with_newton(args.tol, args.max_iter)
}

fn print_vector(out: &mut dyn Write, v: &[f64]) -> Result<()> {
    for x in v {
        writeln!(out, "{}", format_g(*x))?;
    }
    Ok(())
}

fn cmd_solve(args: &SystemArgs, out: &mut dyn Write) -> Result<()> {
    let sys = build_system(args)?;
    let x0 = state(args.x0.as_ref(), sys.dim(), "--x0")?;
    let cfg = config(args)?;
    let xm = euler::integrate(&sys, &x0, &cfg)?;
    print_vector(out, &xm)
}

fn cmd_invert(args: &InvertArgs, out: &mut dyn Write) -> Result<()> {
    let sys = build_system(&args.system)?;
    let n = sys.dim();
    let x0 = state(args.system.x0.as_ref(), n, "--x0")?;
    let cfg = config(&args.system)?;
    let v = match &args.v {
        Some(_) => state(args.v.as_ref(), n, "--v")?,
        None => euler::integrate(&sys, &x0, &cfg)?,
    };
    let result = inversion::diffinv(args.algorithm.into(), &sys, &x0, &v, &cfg)?;
    print_vector(out, &result.w)?;
    if args.report {
        writeln!(out, "algorithm: {}", result.algorithm)?;
        writeln!(out, "flops_total: {}", result.cost_total.multiply_adds)?;
        writeln!(
            out,
            "flops_inversion_phase: {}",
            result.cost_inversion.multiply_adds
        )?;
        writeln!(out, "factorizations: {}", result.cost_total.factorizations)?;
        writeln!(out, "solves: {}", result.cost_total.solves)?;
        writeln!(out, "tape_bytes: {}", result.tape_bytes)?;
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<bool> {
    if args.list {
        for name in verify::check_names() {
            writeln!(out, "{name}")?;
        }
        return Ok(true);
    }
    let opts = VerifyOptions {
        filter: args.filter.clone(),
        perturb_jacobian: args.perturb_jacobian,
        execution: Execution::default(),
    };
    let outcomes = verify::run(&opts);
    if outcomes.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no check matches {:?}",
            args.filter
        )));
    }
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {}: {}", o.name, o.detail)?;
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    writeln!(out, "{passed}/{} checks passed", outcomes.len())?;
    Ok(passed == outcomes.len())
}

/// Benchmark sweep settings.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub t_final: f64,
    pub budget: Duration,
    pub algorithms: Vec<Algorithm>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ns: vec![4, 8, 16, 32, 48, 64],
            m: 1000,
            trials: 3,
            seed: 1,
            t_final: 1.0,
            budget: Duration::from_secs(300),
            algorithms: Algorithm::ALL.to_vec(),
        }
    }
}

/// One CSV row. `wall_seconds_total` is `None` when the cell ran out of budget;
/// the counters are `None` when the cell was never run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub wall_seconds_total: Option<f64>,
    pub flops_inversion_phase: Option<u64>,
    pub flops_total: Option<u64>,
    pub tape_bytes: Option<usize>,
    pub seed: u64,
}

impl BenchRecord {
    fn fields(&self) -> [String; 9] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.algorithm.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.trials.to_string(),
            self.wall_seconds_total
                .map_or_else(|| "timeout".to_string(), |s| format!("{s:.6}")),
            opt(self.flops_inversion_phase.map(|v| v.to_string())),
            opt(self.flops_total.map(|v| v.to_string())),
            opt(self.tape_bytes.map(|v| v.to_string())),
            self.seed.to_string(),
        ]
    }
}

/// Runs every (n, algorithm) cell sequentially. Cells whose Newton iteration
/// fails are skipped with a warning. Once an algorithm exceeds the budget at
/// some n, its cells at larger n are recorded as timed out without running.
pub fn run_bench(cfg: &BenchConfig, log: &mut dyn Write) -> Result<Vec<BenchRecord>> {
    if cfg.ns.is_empty() || cfg.ns.contains(&0) {
        return Err(Error::InvalidInput(
            "--n must list dimensions of at least 1".into(),
        ));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidInput("--trials must be at least 1".into()));
    }
    let icfg = IntegrationConfig::new(cfg.t_final, cfg.m)?;
    let mut exhausted: Vec<(Algorithm, usize)> = Vec::new();
    let mut records = Vec::new();
    for &n in &cfg.ns {
        let sys = make_random_glv(n, cfg.seed)?;
        let x0 = StateVector::ones(n);
        let v = match euler::integrate(&sys, &x0, &icfg) {
            Ok(v) => v,
            Err(e) => {
                writeln!(log, "warning: skipping n={n}: {e}")?;
                continue;
            }
        };
        for &algorithm in &cfg.algorithms {
            let mut record = BenchRecord {
                algorithm,
                n,
                m: cfg.m,
                trials: cfg.trials,
                wall_seconds_total: None,
                flops_inversion_phase: None,
                flops_total: None,
                tape_bytes: None,
                seed: cfg.seed,
            };
            if exhausted
                .iter()
                .any(|&(a, below)| a == algorithm && below < n)
            {
                writeln!(log, "{algorithm} n={n}: timed out at a smaller n, not run")?;
                records.push(record);
                continue;
            }
            let mut elapsed = Duration::ZERO;
            let mut failed = None;
            for _ in 0..cfg.trials {
                let start = Instant::now();
                let outcome = inversion::diffinv(algorithm, &sys, &x0, &v, &icfg);
                elapsed += start.elapsed();
                match outcome {
                    Ok(r) => {
                        record.flops_inversion_phase = Some(r.cost_inversion.multiply_adds);
                        record.flops_total = Some(r.cost_total.multiply_adds);
                        record.tape_bytes = Some(r.tape_bytes);
                    }
                    Err(e) => {
                        failed = Some(e);
                        break;
                    }
                }
                if elapsed > cfg.budget {
                    break;
                }
            }
            if let Some(e) = failed {
                writeln!(log, "warning: skipping {algorithm} n={n}: {e}")?;
                continue;
            }
            if elapsed > cfg.budget {
                writeln!(log, "{algorithm} n={n}: exceeded {:?} budget", cfg.budget)?;
                exhausted.push((algorithm, n));
            } else {
                record.wall_seconds_total = Some(elapsed.as_secs_f64().max(f64::MIN_POSITIVE));
                writeln!(log, "{algorithm} n={n}: {:.3} s", elapsed.as_secs_f64())?;
            }
            records.push(record);
        }
    }
    Ok(records)
}

pub fn write_csv(records: &[BenchRecord], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record(r.fields()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if !(args.budget.is_finite() && args.budget > 0.0) {
        return Err(Error::InvalidInput("--budget must be positive".into()));
    }
    let cfg = BenchConfig {
        ns: args.n.clone(),
        m: args.m,
        trials: args.trials,
        seed: seed_override(args.seed)?,
        t_final: args.t,
        budget: Duration::from_secs_f64(args.budget),
        algorithms: args.algorithms.iter().map(|&a| a.into()).collect(),
    };
    let records = run_bench(&cfg, err)?;
    match &args.output {
        Some(path) => write_csv(&records, std::fs::File::create(path)?),
        None => write_csv(&records, out),
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out).map(|_| true),
        Command::Invert(a) => cmd_invert(a, out).map(|_| true),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out, err).map(|_| true),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_NUMERICAL,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}
