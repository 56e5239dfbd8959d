//! Command line front end: uniform and adaptive studies, verification suites.
//!
//! Exit codes: 0 success, 1 usage, 2 numerical failure, 3 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::adapt::{run_adaptive, run_uniform, Quantity, RunConfig, RunHistory, SpaceKind};
use crate::mesh::{builders, load_mesh, write_mesh, BcKind, Mesh};
use crate::problems::{by_name, PlateProblem, NAMES};
use crate::verify::{check_boundary_kernel, check_complex, check_nestedness, VerificationReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("verification failed")]
    Verification,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Numeric(_) => 2,
            CliError::Verification => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Standard,
    Extended,
}

#[derive(Debug, Parser)]
#[command(name = "plate", about = "Mixed finite elements for Kirchhoff-Love plates")]
pub struct Cli {
    /// key=value file; flags given on the command line take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a sequence of meshes and write the history
    Run {
        #[command(subcommand)]
        mode: RunMode,
    },
    /// Check dimension counts, exactness, surjectivity and nestedness
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum RunMode {
    Uniform(StudyArgs),
    Adaptive(StudyArgs),
}

#[derive(Clone, Debug, Args)]
pub struct StudyArgs {
    #[arg(long, default_value = "lshape_clamped_corner")]
    pub problem: String,
    /// mesh file replacing the problem's initial mesh
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long, default_value_t = 200_000)]
    pub max_dofs: usize,
    #[arg(long, default_value_t = 25)]
    pub max_iter: usize,
    #[arg(long, value_enum)]
    pub space: Option<SpaceArg>,
    #[arg(long)]
    pub quad_order: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// record wall-clock seconds per iteration (makes the CSV machine dependent)
    #[arg(long)]
    pub timing: bool,
}

#[derive(Clone, Debug, Args)]
pub struct VerifyArgs {
    /// mesh file; default is a twice refined unit square
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// use the initial mesh of a built-in problem
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = vec![];
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Usage(format!("config: invalid value '{v}' for {key}")))
}

fn from_file(m: &ArgMatches, key: &str) -> bool {
    !matches!(m.value_source(key), Some(ValueSource::CommandLine))
}

fn apply_study_config(a: &mut StudyArgs, m: &ArgMatches, cfg: &[(String, String)]) -> Result<(), CliError> {
    for (k, v) in cfg {
        if !from_file(m, k) {
            continue;
        }
        match k.as_str() {
            "problem" => a.problem = v.clone(),
            "mesh" => a.mesh = Some(v.into()),
            "k" => a.k = value(k, v)?,
            "theta" => a.theta = value(k, v)?,
            "levels" => a.levels = value(k, v)?,
            "max_dofs" => a.max_dofs = value(k, v)?,
            "max_iter" => a.max_iter = value(k, v)?,
            "space" => a.space = Some(SpaceArg::from_str(v, true).map_err(CliError::Usage)?),
            "quad_order" => a.quad_order = Some(value(k, v)?),
            "out" => a.out = v.into(),
            "timing" => a.timing = value(k, v)?,
            "threads" => {}
            _ => return Err(CliError::Usage(format!("config: unknown key '{k}'"))),
        }
    }
    Ok(())
}

fn apply_verify_config(a: &mut VerifyArgs, m: &ArgMatches, cfg: &[(String, String)]) -> Result<(), CliError> {
    for (k, v) in cfg {
        if !from_file(m, k) {
            continue;
        }
        match k.as_str() {
            "problem" => a.problem = Some(v.clone()),
            "mesh" => a.mesh = Some(v.into()),
            "k" => a.k = value(k, v)?,
            "seed" => a.seed = value(k, v)?,
            "out" => a.out = v.into(),
            "threads" => {}
            _ => return Err(CliError::Usage(format!("config: unknown key '{k}'"))),
        }
    }
    Ok(())
}

fn problem(name: &str) -> Result<PlateProblem, CliError> {
    by_name(name).ok_or_else(|| CliError::Usage(format!("unknown problem '{name}'; available: {}", NAMES.join(", "))))
}

fn study_setup(a: &StudyArgs) -> Result<(PlateProblem, RunConfig), CliError> {
    if a.k < 3 {
        return Err(CliError::Usage(format!("--k must be at least 3, got {}", a.k)));
    }
    if !(a.theta > 0.0 && a.theta < 1.0) {
        return Err(CliError::Usage(format!("--theta must lie in (0, 1), got {}", a.theta)));
    }
    let mut p = problem(&a.problem)?;
    if let Some(path) = &a.mesh {
        let m = load_mesh(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        p = p.with_mesh(m);
    }
    let cfg = RunConfig {
        k: a.k,
        theta: a.theta,
        max_dofs: a.max_dofs,
        max_iter: a.max_iter,
        space: a.space.map(|s| match s {
            SpaceArg::Standard => SpaceKind::Standard,
            SpaceArg::Extended => SpaceKind::Extended,
        }),
        quad_order: a.quad_order,
        timing: a.timing,
    };
    Ok((p, cfg))
}

/// Errors and successive orders per level in the layout of a convergence table.
pub fn rate_table(h: &RunHistory) -> String {
    let mut s = format!("{:>5} {:>7} {:>8}", "level", "ntri", "N");
    for q in Quantity::ERRORS {
        let _ = write!(s, " {:>12} {:>6}", q.label(), "order");
    }
    s.push('\n');
    let orders: Vec<Vec<f64>> = Quantity::ERRORS.iter().map(|&q| h.orders(q)).collect();
    for (i, r) in h.records.iter().enumerate() {
        let _ = write!(s, "{:>5} {:>7} {:>8}", r.iter, r.ntri, r.ndof());
        for (c, &q) in Quantity::ERRORS.iter().enumerate() {
            let o = if i == 0 { "-".to_string() } else { format!("{:.2}", orders[c][i - 1]) };
            let _ = write!(s, " {:>12.4e} {:>6}", q.of(r), o);
        }
        s.push('\n');
    }
    s
}

/// Gnuplot script for the log-log history with reference slopes -1 and -2.
pub fn plot_script(csv: &str, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set key outside");
    let _ = writeln!(s, "set xlabel 'N'");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "f(x) = x**-1");
    let _ = writeln!(s, "g(x) = x**-2");
    let cols = [(5, "eta"), (10, "sigma L2"), (13, "w L2"), (16, "w* 2h")];
    let plots: Vec<String> = cols.iter().map(|(c, n)| format!("'{csv}' using ($3+$4):{c} with linespoints title '{n}'")).collect();
    let _ = writeln!(s, "plot {}, f(x) title 'N^-1' dashtype 2, g(x) title 'N^-2' dashtype 3", plots.join(", "));
    s
}

fn cmd_uniform(a: &StudyArgs) -> Result<String, CliError> {
    if a.levels == 0 {
        return Err(CliError::Usage("--levels must be at least 1".into()));
    }
    let (p, cfg) = study_setup(a)?;
    let h = run_uniform(&p, a.levels, &cfg).map_err(|e| CliError::Numeric(e.to_string()))?;
    let csv = a.out.join(format!("{}_uniform.csv", p.name));
    write(&csv, &h.to_csv())?;
    let table = rate_table(&h);
    write(&a.out.join(format!("{}_uniform_rates.txt", p.name)), &table)?;
    Ok(format!("{table}wrote {}\n", csv.display()))
}

fn cmd_adaptive(a: &StudyArgs) -> Result<String, CliError> {
    let (p, cfg) = study_setup(a)?;
    let (h, err) = run_adaptive(&p, &cfg);
    let name = format!("{}_adaptive.csv", p.name);
    write(&a.out.join(&name), &h.to_csv())?;
    write(&a.out.join(format!("{}_adaptive.gp", p.name)), &plot_script(&name, &p.name))?;
    if let Some(m) = &h.mesh {
        write(&a.out.join(format!("{}_final.mesh", p.name)), &write_mesh(m))?;
    }
    if let Some(e) = err {
        return Err(CliError::Numeric(format!("stopped after {} iterations: {e}", h.records.len())));
    }
    let mut s = String::new();
    for q in [Quantity::Eta41, Quantity::SigmaL2, Quantity::W, Quantity::WStar2h] {
        if let Ok(r) = h.tail_rate(q, 10.0) {
            let _ = writeln!(s, "{:<14} slope {r:.3}", q.label());
        }
    }
    let _ = writeln!(s, "{} iterations, wrote {}", h.records.len(), a.out.join(&name).display());
    Ok(s)
}

fn verify_mesh(a: &VerifyArgs) -> Result<Mesh, CliError> {
    Ok(match (&a.mesh, &a.problem) {
        (Some(path), _) => load_mesh(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        (None, Some(name)) => problem(name)?.mesh,
        (None, None) => builders::unit_square(BcKind::Clamped).uniform_refine().uniform_refine(),
    })
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<(VerificationReport, String), CliError> {
    if a.k < 3 {
        return Err(CliError::Usage(format!("--k must be at least 3, got {}", a.k)));
    }
    let mesh = verify_mesh(a)?;
    let num = |e: crate::verify::VerifyError| CliError::Numeric(e.to_string());
    let mut rep = check_complex(&mesh, a.k, a.seed).map_err(num)?;
    let marked: Vec<usize> = (0..mesh.num_triangles()).step_by(3).collect();
    let fine = mesh.bisect(&marked);
    rep.extend(check_nestedness(&mesh, &fine, a.k).map_err(num)?);
    rep.extend(check_boundary_kernel(&mesh, a.k, a.seed).map_err(num)?);
    write(&a.out.join("verify.csv"), &rep.to_csv())?;
    let text = rep.to_text();
    write(&a.out.join("verify.txt"), &text)?;
    Ok((rep, text))
}

fn dispatch(cli: &Cli, m: &ArgMatches) -> Result<String, CliError> {
    let cfg = match &cli.config {
        Some(p) => parse_config(&read(p)?)?,
        None => vec![],
    };
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => cfg.iter().find(|(k, _)| k == "threads").map(|(k, v)| value(k, v)).transpose()?,
    };
    if let Some(n) = threads {
        // a second global pool in the same process keeps the first one
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Run { mode } => {
            let (_, rm) = m.subcommand().expect("run has a mode");
            let (_, sm) = rm.subcommand().expect("mode has arguments");
            match mode {
                RunMode::Uniform(a) => {
                    let mut a = a.clone();
                    apply_study_config(&mut a, sm, &cfg)?;
                    cmd_uniform(&a)
                }
                RunMode::Adaptive(a) => {
                    let mut a = a.clone();
                    apply_study_config(&mut a, sm, &cfg)?;
                    cmd_adaptive(&a)
                }
            }
        }
        Command::Verify(a) => {
            let (_, vm) = m.subcommand().expect("verify arguments");
            let mut a = a.clone();
            apply_verify_config(&mut a, vm, &cfg)?;
            let (rep, text) = cmd_verify(&a)?;
            if rep.passed() {
                Ok(text)
            } else {
                eprint!("{text}");
                Err(CliError::Verification)
            }
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&m) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match dispatch(&cli, &m) {
        Ok(s) => {
            print!("{s}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
