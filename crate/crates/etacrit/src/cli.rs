//! The `etacrit` command line.
//!
//! A `--config FILE` of `key = value` lines supplies flag values; keys are
//! long flag names without the dashes. Flags given on the command line win.
//! Exit status: 0 success, 1 usage or input error, 2 numeric-integrity
//! failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use etacrit_core::optimize::objective;
use etacrit_core::qstate::entanglement_ratio;
use etacrit_core::{
    eta_crit, evaluate, make_noisy, BellFunctional, Builtin, DetectorModel, NoiseKind, NoiseSpec,
    OptimizationOutcome, SearchConfig, ThetaMode,
};

use crate::files::{self, format_settings};
use crate::parallel::{self, JOBS_ENV};
use crate::scan::{self, SweepMode, SweepSpec, TableId};
use crate::{check, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "etacrit", version, about = "Critical detection efficiency of Bell tests with colored and white noise")]
struct Cli {
    /// File of `key = value` lines giving flag values (flags override it)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the built-in inequalities with their coefficient tables
    List,
    /// Evaluate an inequality on a state and settings read from a file
    Eval(EvalArgs),
    /// Run one multistart search for the lowest critical efficiency
    Etacrit(EtacritArgs),
    /// Run a parameter sweep and write CSV
    Scan(ScanArgs),
    /// Reproduce one of the reference tables (I or II) as CSV
    Table(TableArgs),
    /// Run the fast invariant suite
    Check,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Number of random starts
    #[arg(long, default_value_t = 1000)]
    starts: usize,
    /// Seed of the start-point generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum unit-efficiency violation (0 disables the constraint)
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
    /// Weight of the violation-floor penalty
    #[arg(long, default_value_t = 1000.0)]
    penalty: f64,
    /// Central finite-difference step
    #[arg(long, default_value_t = 1e-6)]
    gradient_step: f64,
    /// Gradient-norm convergence tolerance
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Iteration cap per start
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    /// Worker threads [default: $ETACRIT_JOBS, else machine parallelism]
    #[arg(long, env = JOBS_ENV)]
    jobs: Option<usize>,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            n_starts: self.starts,
            seed: self.seed,
            gradient_step: self.gradient_step,
            gradient_tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            violation_floor: self.floor,
            penalty_weight: self.penalty,
        }
    }

    fn jobs(&self) -> usize {
        self.jobs.filter(|&n| n > 0).unwrap_or_else(parallel::default_jobs)
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EvalArgs {
    /// Built-in inequality (chsh, i3322, a5) or path to an inequality file
    #[arg(long, default_value = "chsh")]
    ineq: String,
    /// Settings file: `A i phi nu` / `B j phi nu` lines plus optional theta, cs, noise, p, w
    #[arg(long, visible_alias = "state-file", value_name = "FILE")]
    settings_file: PathBuf,
    /// Detector model: symmetric or one-sided
    #[arg(long, default_value = "symmetric")]
    detector: String,
    /// Noise form; overrides the file [default: file, else colored-pp]
    #[arg(long)]
    noise: Option<String>,
    /// Colored noise level; overrides the file [default: file, else 0]
    #[arg(long)]
    p: Option<f64>,
    /// White noise level; overrides the file [default: file, else 0]
    #[arg(long)]
    w: Option<f64>,
    /// State angle in radians; overrides the file
    #[arg(long, conflicts_with = "cs")]
    theta: Option<f64>,
    /// Entanglement ratio C/S in (0, 1]; overrides the file
    #[arg(long)]
    cs: Option<f64>,
    /// Also print the density matrix (rows in HH, HV, VH, VV order)
    #[arg(long)]
    show_state: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EtacritArgs {
    /// Built-in inequality (chsh, i3322, a5) or path to an inequality file
    #[arg(long, default_value = "chsh")]
    ineq: String,
    /// Detector model: symmetric or one-sided
    #[arg(long, default_value = "symmetric")]
    detector: String,
    /// Noise form: colored-pp, colored-ap, white or mixed
    #[arg(long, default_value = "colored-pp")]
    noise: String,
    /// Colored noise level
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// White noise level
    #[arg(long, default_value_t = 0.0)]
    w: f64,
    /// State angle in radians, or `free` to optimize it
    #[arg(long, default_value = "free")]
    theta: String,
    /// Entanglement ratio C/S in (0, 1]; fixes the state and overrides --theta
    #[arg(long)]
    cs: Option<f64>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct ScanArgs {
    /// Sweep: p-sweep, cs-sweep, surface or mixed-sweep
    #[arg(long, default_value = "p-sweep")]
    mode: String,
    /// Comma-separated inequalities (built-in names or file paths)
    #[arg(long, default_value = "chsh")]
    ineq: String,
    /// Detector model: symmetric or one-sided
    #[arg(long, default_value = "symmetric")]
    detector: String,
    /// Noise form: colored-pp, colored-ap or white (mixed-sweep always mixes)
    #[arg(long, default_value = "colored-pp")]
    noise: String,
    /// Noise levels: comma list or start:stop:step
    #[arg(long, default_value = "0:0.3:0.01")]
    p_grid: String,
    /// Entanglement ratios: comma list or start:stop:step
    #[arg(long, default_value = "0.05:1:0.05")]
    cs_grid: String,
    /// White noise levels for mixed-sweep: comma list or start:stop:step
    #[arg(long, default_value = "0:0.1:0.02")]
    w_grid: String,
    /// CSV output path, `-` for standard output
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct TableArgs {
    /// Which table: I (CHSH, symmetric) or II (I3322, one-sided)
    which: String,
    /// CSV output path, `-` for standard output
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
}

/// Run with `argv` (program name first); returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match with_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render();
            let _ = if e.use_stderr() {
                write!(err, "{}", rendered.ansi())
            } else {
                write!(out, "{}", rendered)
            };
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return 1;
        }
    };
    if let Some((name, sub)) = matches.subcommand() {
        echo_config(name, sub, &cli.command, err);
    }
    match dispatch(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

const SUBCOMMANDS: [&str; 6] = ["list", "eval", "etacrit", "scan", "table", "check"];

/// Splice `--key value` pairs from the config file in right after the
/// subcommand, so that anything on the real command line overrides them.
fn with_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let Some(at) = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s)))
    else {
        return Ok(argv);
    };
    let pairs = files::read_config(&path)?;
    let mut spliced: Vec<OsString> = argv[..=at].to_vec();
    for (key, value) in pairs {
        if key == "which" {
            // positional argument of `table`
            spliced.push(value.into());
        } else {
            spliced.push(format!("--{key}").into());
            spliced.push(value.into());
        }
    }
    spliced.extend_from_slice(&argv[at + 1..]);
    Ok(spliced)
}

/// Print every resolved flag as `key = value`, a valid config file.
fn echo_config(name: &str, m: &ArgMatches, command: &Command, err: &mut dyn Write) {
    let _ = writeln!(err, "# etacrit {name}");
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(name) else { return };
    let mut ids: Vec<&str> = sub.get_arguments().map(|a| a.get_id().as_str()).collect();
    ids.sort_unstable();
    for id in ids {
        if id == "config" || id == "help" {
            continue;
        }
        if let Ok(Some(mut values)) = m.try_get_raw(id) {
            let joined: Vec<String> = values.by_ref().map(|v| v.to_string_lossy().into_owned()).collect();
            let _ = writeln!(err, "{} = {}", id.replace('_', "-"), joined.join(","));
        }
    }
    let search = match command {
        Command::Etacrit(a) => Some(&a.search),
        Command::Scan(a) => Some(&a.search),
        Command::Table(a) => Some(&a.search),
        _ => None,
    };
    if let Some(s) = search {
        if s.jobs.is_none() {
            let _ = writeln!(err, "jobs = {}", s.jobs());
        }
    }
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::List => list(out).map(|_| 0),
        Command::Eval(a) => eval(a, out).map(|_| 0),
        Command::Etacrit(a) => etacrit(a, out).map(|_| 0),
        Command::Scan(a) => scan_cmd(a, out).map(|_| 0),
        Command::Table(a) => table(a, out).map(|_| 0),
        Command::Check => Ok(check_cmd(out)),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<output>"),
        source: e,
    }
}

/// A built-in name or a path to an inequality file.
pub fn load_inequality(spec: &str) -> Result<BellFunctional> {
    if let Ok(b) = spec.parse::<Builtin>() {
        return Ok(BellFunctional::builtin(b));
    }
    let path = Path::new(spec);
    let text = files::read(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
    BellFunctional::parse_named(&text, name).map_err(|e| Error::from(e).in_file(path))
}

fn list(out: &mut dyn Write) -> Result<()> {
    for b in Builtin::ALL {
        let f = BellFunctional::builtin(b);
        writeln!(out, "{}: n_A = {}, n_B = {}, {} parameters", f.name(), f.n_a(), f.n_b(), f.n_parameters()).map_err(io)?;
        for line in f.to_string().lines() {
            writeln!(out, "    {line}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}

fn parse_noise(kind: &str, p: f64, w: f64) -> Result<NoiseSpec> {
    let kind: NoiseKind = kind.parse()?;
    Ok(NoiseSpec::new(kind, p, w)?)
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let f = load_inequality(&a.ineq)?;
    let file = files::read_settings(&a.settings_file)?;
    let detector: DetectorModel = a.detector.parse()?;
    let kind = match &a.noise {
        Some(k) => k.parse()?,
        None => file.noise.unwrap_or(NoiseKind::ColoredPhotonPhoton),
    };
    let noise = NoiseSpec::new(kind, a.p.or(file.p).unwrap_or(0.0), a.w.or(file.w).unwrap_or(0.0))?;
    let theta = match (a.theta, a.cs) {
        (Some(t), _) => t,
        (None, Some(r)) => cs_angle(r)?,
        (None, None) => match (file.theta, file.cs) {
            (Some(t), _) => t,
            (None, Some(r)) => cs_angle(r)?,
            (None, None) => {
                return Err(Error::Core(etacrit_core::Error::InvalidArgument(
                    "no state angle: give theta or cs in the file or as a flag".into(),
                )))
            }
        },
    };
    let rho = make_noisy(theta, noise)?;
    let d = evaluate(&f, &rho, &file.settings())?;
    writeln!(out, "inequality   {}", f.name()).map_err(io)?;
    writeln!(out, "state        theta = {theta:.10}, C/S = {:.10}, {}", entanglement_ratio(theta), describe(noise)).map_err(io)?;
    writeln!(out, "J            {:.10}", d.j).map_err(io)?;
    writeln!(out, "K_A          {:.10}", d.k_a).map_err(io)?;
    writeln!(out, "K_B          {:.10}", d.k_b).map_err(io)?;
    writeln!(out, "ideal_value  {:.10}", d.ideal_value()).map_err(io)?;
    writeln!(out, "eta_crit     {} ({detector})", eta_crit(&d, detector)).map_err(io)?;
    if a.show_state {
        writeln!(out, "rho").map_err(io)?;
        write!(out, "{rho}").map_err(io)?;
    }
    Ok(())
}

fn cs_angle(r: f64) -> Result<f64> {
    Ok(etacrit_core::PureStateParam::from_entanglement_ratio(r)?.theta())
}

fn describe(noise: NoiseSpec) -> String {
    format!("{} noise p = {}, w = {}", noise.kind, noise.p, noise.w)
}

fn etacrit(a: &EtacritArgs, out: &mut dyn Write) -> Result<()> {
    let f = load_inequality(&a.ineq)?;
    let detector: DetectorModel = a.detector.parse()?;
    let noise = parse_noise(&a.noise, a.p, a.w)?;
    let theta_mode = match (a.cs, a.theta.trim()) {
        (Some(r), _) => ThetaMode::Fixed(cs_angle(r)?),
        (None, "free") => ThetaMode::Free,
        (None, t) => ThetaMode::Fixed(t.parse().map_err(|_| {
            Error::Core(etacrit_core::Error::InvalidArgument(format!(
                "--theta takes radians or 'free', got '{t}'"
            )))
        })?),
    };
    let cfg = a.search.config();
    let obj = objective(&f, detector, noise, theta_mode, &cfg)?;
    let o = parallel::search(&obj, &cfg, a.search.jobs())?;
    report(out, &f, detector, noise, &o).map_err(io)
}

fn report(
    out: &mut dyn Write,
    f: &BellFunctional,
    detector: DetectorModel,
    noise: NoiseSpec,
    o: &OptimizationOutcome,
) -> std::io::Result<()> {
    let d = &o.decomposition;
    writeln!(out, "inequality          {}", f.name())?;
    writeln!(out, "detector            {detector}")?;
    writeln!(out, "noise               {}", describe(noise))?;
    writeln!(out, "eta_crit            {}", o.eta_crit)?;
    writeln!(out, "ideal_value         {:.10}", o.ideal_value)?;
    writeln!(out, "theta               {:.10}", o.theta)?;
    writeln!(out, "C/S                 {:.10}", entanglement_ratio(o.theta))?;
    writeln!(out, "J K_A K_B           {:.10} {:.10} {:.10}", d.j, d.k_a, d.k_b)?;
    writeln!(out, "objective           {:.10}", o.objective_value)?;
    writeln!(out, "meets_floor         {}", o.meets_floor)?;
    writeln!(out, "converged_fraction  {:.4}", o.converged_fraction)?;
    writeln!(out, "distinct_minima     {}", o.distinct_minima)?;
    writeln!(out, "starts              {} (seed {})", o.n_starts, o.seed)?;
    writeln!(out, "# best settings, readable by `eval --settings-file`")?;
    write!(out, "{}", format_settings(o.theta, noise, &o.settings))
}

/// Numbers from `a,b,c` or an inclusive `start:stop:step` range.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::Core(etacrit_core::Error::InvalidArgument(msg));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("bad grid value '{t}'")));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || !(stop >= start) {
                return Err(bad(format!("bad grid range '{s}'")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            // round away the accumulated binary error so 0.05:1:0.05 ends at 1
            Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(bad(format!("bad grid '{s}'"))),
    }
}

fn write_rows(rows: &[scan::SweepRow], path: &Path, out: &mut dyn Write) -> Result<()> {
    if path == Path::new("-") {
        return scan::write_csv(rows, out);
    }
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    scan::write_csv(rows, BufWriter::new(file))
}

fn scan_cmd(a: &ScanArgs, out: &mut dyn Write) -> Result<()> {
    let mode: SweepMode = a.mode.parse()?;
    if let SweepMode::Table(_) = mode {
        return Err(Error::Core(etacrit_core::Error::InvalidArgument(
            "use the `table` subcommand for table reproduction".into(),
        )));
    }
    let inequalities = a.ineq.split(',').map(|s| load_inequality(s.trim())).collect::<Result<Vec<_>>>()?;
    let mut spec = SweepSpec::new(mode, inequalities, a.detector.parse()?, a.noise.parse()?);
    spec.p_grid = parse_grid(&a.p_grid)?;
    spec.cs_grid = parse_grid(&a.cs_grid)?;
    spec.w_grid = parse_grid(&a.w_grid)?;
    spec.search = a.search.config();
    spec.jobs = a.search.jobs();
    let rows = scan::run(&spec)?;
    write_rows(&rows, &a.out, out)
}

fn table(a: &TableArgs, out: &mut dyn Write) -> Result<()> {
    let which: TableId = a.which.parse()?;
    let rows = scan::reproduce_table(which, &a.search.config(), a.search.jobs())?;
    write_rows(&rows, &a.out, out)
}

fn check_cmd(out: &mut dyn Write) -> i32 {
    let mut failed = 0;
    for r in check::run_all() {
        let _ = match &r.outcome {
            Ok(()) => writeln!(out, "PASS  {}", r.name),
            Err(e) => {
                failed += 1;
                writeln!(out, "FAIL  {}: {e}", r.name)
            }
        };
    }
    if failed == 0 {
        0
    } else {
        2
    }
}
