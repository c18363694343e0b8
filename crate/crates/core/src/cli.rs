//! Command-line front end. Every command writes CSV preceded by a `# config:` comment line.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a conformance
//! gate or a solver fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::compress::{rank_profile, write_rank_profile};
use crate::config::{parse_key_values, ProfileKind, RhsChoice, RunConfig};
use crate::error::{config_err, Error, Result};
use crate::geometry::Grid;
use crate::kernel::{split, RadialProfile};
use crate::operator::{apply_truncated_dense, TruncatedOperator, TruncatedOptions};
use crate::solve::{manufactured_rhs, solve_dirichlet, Negated, SolveReport};
use crate::stats::{loglog_slope, random_vector, rel_inf_error};

/// Fast/dense disagreement above this fails `apply` and `bench`.
pub const CONFORMANCE_TOL: f64 = 1e-10;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nlfast", version, about = "Fast evaluation of truncated nonlocal diffusion operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Matched polynomial coefficients and a sampled κ/p/γ table.
    Split,
    /// One fast application checked against the dense oracle.
    Apply,
    /// Operation counts and timings over an N sweep, with fitted log-log slopes.
    Bench,
    /// HODLR storage over kernel regularities.
    RankProfile,
    /// Krylov solve of -L u = f.
    Solve,
}

#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    /// key = value file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Nodes per axis.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub delta0: Option<f64>,
    /// constant or bump
    #[arg(long, global = true)]
    pub horizon: Option<String>,
    /// InverseS, ConicalInverseS, Regularized or PolynomialTruncated
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Regularity of the Regularized profile.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Matching order of the split.
    #[arg(long = "K", global = true)]
    pub split_k: Option<u32>,
    #[arg(long, global = true)]
    pub coefficient: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub leaf_size: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// cg, cgnr or auto
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated nodes per axis for `bench`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
    /// Comma-separated regularities for `rank-profile`; -1 is the raw kernel.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub regularities: Option<Vec<i32>>,
    /// manufactured, constant[:value] or file:<path>
    #[arg(long, global = true)]
    pub rhs: Option<String>,
    /// Write zeros in the wall-time columns.
    #[arg(long, global = true)]
    pub no_timing: bool,
    /// Where `solve` writes the solution vector.
    #[arg(long, global = true)]
    pub solution: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Flags {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            cfg.apply_pairs(&parse_key_values(&text)?)?;
        }
        if let Some(v) = self.dim {
            cfg.dimension = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.delta0 {
            cfg.delta0 = v;
        }
        if let Some(v) = &self.horizon {
            cfg.horizon_kind = v.parse()?;
        }
        if let Some(v) = &self.profile {
            cfg.profile = v.parse()?;
        }
        if let Some(v) = self.k {
            cfg.regularity_k = v;
        }
        if let Some(v) = self.split_k {
            cfg.split_k = v;
        }
        if let Some(v) = self.coefficient {
            cfg.coefficient = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.leaf_size {
            cfg.leaf_size = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = Some(v);
        }
        if let Some(v) = &self.method {
            cfg.method = v.parse()?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.sweep {
            cfg.sweep = v.clone();
        }
        if let Some(v) = &self.regularities {
            cfg.regularities = v.clone();
        }
        if let Some(v) = &self.rhs {
            cfg.rhs = v.parse()?;
        }
        if self.no_timing {
            cfg.timing = false;
        }
        if let Some(v) = &self.out {
            cfg.output_path = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One row of `apply` / `bench` output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRecord {
    pub n_nodes: usize,
    pub recur_calls: u64,
    pub step2_ops: u64,
    pub step3_ops: u64,
    pub panel_visits: u64,
    /// Kernel evaluations of the dense oracle, `N²`.
    pub dense_ops: u64,
    pub fast_wall_ns: u128,
    pub dense_wall_ns: u128,
    pub max_rel_err_vs_dense: f64,
}

pub const BENCH_HEADER: [&str; 9] = [
    "N",
    "recur_calls",
    "step2_ops",
    "step3_ops",
    "panel_visits",
    "dense_ops",
    "fast_wall_ns",
    "dense_wall_ns",
    "max_rel_err_vs_dense",
];

impl BenchRecord {
    fn fields(&self) -> [String; 9] {
        [
            self.n_nodes.to_string(),
            self.recur_calls.to_string(),
            self.step2_ops.to_string(),
            self.step3_ops.to_string(),
            self.panel_visits.to_string(),
            self.dense_ops.to_string(),
            self.fast_wall_ns.to_string(),
            self.dense_wall_ns.to_string(),
            format!("{:e}", self.max_rel_err_vs_dense),
        ]
    }
}

/// Builds the fast operator for `n` nodes per axis, applies it and the dense oracle to
/// a seeded random vector.
pub fn bench_record(cfg: &RunConfig, n: usize) -> Result<BenchRecord> {
    let grid = Grid::new(cfg.dimension, n)?;
    let spec = cfg.truncated_spec()?;
    let opts = TruncatedOptions::default();
    let op = TruncatedOperator::new(&spec, &grid, opts)?;
    let u = random_vector(grid.node_count(), cfg.seed);
    let t = Instant::now();
    let (fast, stats) = op.apply_with_stats(&u)?;
    let fast_ns = t.elapsed().as_nanos();
    let t = Instant::now();
    let dense = apply_truncated_dense(&spec, &grid, opts, &u)?;
    let dense_ns = t.elapsed().as_nanos();
    let nodes = grid.node_count();
    Ok(BenchRecord {
        n_nodes: nodes,
        recur_calls: op.recur_calls(),
        step2_ops: stats.step2_ops,
        step3_ops: stats.step3_ops,
        panel_visits: stats.panel_visits,
        dense_ops: (nodes * nodes) as u64,
        fast_wall_ns: if cfg.timing { fast_ns } else { 0 },
        dense_wall_ns: if cfg.timing { dense_ns } else { 0 },
        max_rel_err_vs_dense: rel_inf_error(&fast, &dense),
    })
}

/// Least-squares log-log slopes against `N` of the counters in `records`.
pub fn bench_slopes(records: &[BenchRecord], timing: bool) -> Vec<(&'static str, f64)> {
    let xs: Vec<f64> = records.iter().map(|r| r.n_nodes as f64).collect();
    let fit = |f: &dyn Fn(&BenchRecord) -> f64| loglog_slope(&xs, &records.iter().map(f).collect::<Vec<_>>());
    let mut out = vec![
        ("recur_calls", fit(&|r| r.recur_calls as f64)),
        ("step2_plus_step3_ops", fit(&|r| (r.step2_ops + r.step3_ops) as f64)),
        ("step3_ops", fit(&|r| r.step3_ops as f64)),
        ("panel_visits", fit(&|r| r.panel_visits as f64)),
        ("dense_ops", fit(&|r| r.dense_ops as f64)),
    ];
    if timing {
        out.push(("fast_wall_ns", fit(&|r| r.fast_wall_ns as f64)));
        out.push(("dense_wall_ns", fit(&|r| r.dense_wall_ns as f64)));
    }
    out
}

enum Outcome {
    Ok,
    Failed(String),
}

fn write_config_line(w: &mut dyn Write, command: Command, cfg: &RunConfig) -> Result<()> {
    writeln!(w, "# config: command={} {}", command_name(command), cfg.to_line())?;
    Ok(())
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Split => "split",
        Command::Apply => "apply",
        Command::Bench => "bench",
        Command::RankProfile => "rank-profile",
        Command::Solve => "solve",
    }
}

fn cmd_split(cfg: &RunConfig, w: &mut dyn Write) -> Result<Outcome> {
    let profile = match cfg.profile {
        ProfileKind::InverseS => RadialProfile::inverse_s(),
        ProfileKind::ConicalInverseS => RadialProfile::conical_inverse_s(),
        other => return Err(config_err(format!("split needs InverseS or ConicalInverseS, got {other}"))),
    };
    let s = split(&profile, cfg.split_k)?;
    let poly = s.polynomial();
    for (j, (exact, c)) in poly.exact_coeffs().iter().zip(poly.coeffs()).enumerate() {
        writeln!(w, "# c_{j} (s^{}) = {exact} = {c}", 2 * j)?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["s", "gamma", "p", "kappa"])?;
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let (gamma, kappa) = if i == 0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (profile.eval(t)?, s.kappa(t)?)
        };
        csv.write_record([t, gamma, poly.eval(t), kappa].map(|v| v.to_string()))?;
    }
    csv.flush()?;
    Ok(Outcome::Ok)
}

fn write_records(records: &[BenchRecord], w: &mut dyn Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(BENCH_HEADER)?;
    for r in records {
        csv.write_record(r.fields())?;
    }
    csv.flush()?;
    Ok(())
}

fn conformance(records: &[BenchRecord]) -> Outcome {
    match records.iter().find(|r| !(r.max_rel_err_vs_dense <= CONFORMANCE_TOL)) {
        Some(r) => Outcome::Failed(format!(
            "fast and dense disagree at N = {}: {:e}",
            r.n_nodes, r.max_rel_err_vs_dense
        )),
        None => Outcome::Ok,
    }
}

fn cmd_apply(cfg: &RunConfig, w: &mut dyn Write) -> Result<Outcome> {
    let records = [bench_record(cfg, cfg.n)?];
    write_records(&records, w)?;
    Ok(conformance(&records))
}

fn cmd_bench(cfg: &RunConfig, w: &mut dyn Write) -> Result<Outcome> {
    if cfg.sweep.len() < 4 {
        return Err(config_err("bench needs a sweep of at least 4 sizes"));
    }
    let records = cfg
        .sweep
        .iter()
        .map(|&n| bench_record(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    write_records(&records, w)?;
    for (name, slope) in bench_slopes(&records, cfg.timing) {
        writeln!(w, "# slope {name} = {slope:.4}")?;
    }
    Ok(conformance(&records))
}

fn cmd_rank_profile(cfg: &RunConfig, w: &mut dyn Write) -> Result<Outcome> {
    let rows = rank_profile(&cfg.regularities, cfg.dimension, cfg.n, cfg.delta0, cfg.epsilon, cfg.leaf_size)?;
    write_rank_profile(&rows, &mut *w)?;
    for r in &rows {
        let ranks: Vec<String> = r.level_ranks.iter().map(ToString::to_string).collect();
        writeln!(w, "# level_ranks k={} : {}", r.regularity_k, ranks.join(","))?;
    }
    Ok(Outcome::Ok)
}

/// Last column of every line; a leading header line is skipped.
fn read_vector(path: &PathBuf) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).enumerate() {
        let field = line.rsplit(',').next().unwrap_or("").trim();
        match field.parse() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(config_err(format!("invalid value '{field}' in {}", path.display()))),
        }
    }
    Ok(out)
}

fn cmd_solve(cfg: &RunConfig, solution_path: Option<&PathBuf>, w: &mut dyn Write) -> Result<Outcome> {
    let grid = Grid::new(cfg.dimension, cfg.n)?;
    let spec = cfg.truncated_spec()?;
    let op = TruncatedOperator::new(&spec, &grid, TruncatedOptions::default())?;
    let a = Negated(&op);
    let nodes = grid.node_count();
    let (exact, f) = match &cfg.rhs {
        RhsChoice::Manufactured => {
            let (u, f) = manufactured_rhs(&a, &grid)?;
            (Some(u), f)
        }
        RhsChoice::Constant(c) => (None, vec![*c; nodes]),
        RhsChoice::File(p) => {
            let f = read_vector(p)?;
            if f.len() != nodes {
                return Err(Error::DimensionMismatch {
                    expected: nodes,
                    got: f.len(),
                });
            }
            (None, f)
        }
    };
    let max_iter = cfg.max_iter.unwrap_or(10 * nodes);
    let report: SolveReport = solve_dirichlet(&a, &f, cfg.tol, max_iter, cfg.method)?;
    let error = exact.as_ref().map(|u| rel_inf_error(&report.solution, u));
    let mut csv = csv::Writer::from_writer(&mut *w);
    csv.write_record(["method", "iterations", "final_residual", "converged", "tol", "max_iter", "error_vs_exact"])?;
    csv.write_record([
        report.method.to_string(),
        report.iterations.to_string(),
        format!("{:e}", report.final_residual),
        report.converged.to_string(),
        format!("{:e}", cfg.tol),
        max_iter.to_string(),
        error.map(|e| format!("{e:e}")).unwrap_or_default(),
    ])?;
    csv.flush()?;
    drop(csv);
    if let Some(path) = solution_path {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_config_line(&mut file, Command::Solve, cfg)?;
        let mut csv = csv::Writer::from_writer(file);
        csv.write_record(["node", "u"])?;
        for (i, u) in report.solution.iter().enumerate() {
            csv.write_record([i.to_string(), u.to_string()])?;
        }
        csv.flush()?;
    }
    Ok(if report.converged {
        Outcome::Ok
    } else {
        Outcome::Failed(format!(
            "no convergence after {} iterations (residual {:e})",
            report.iterations, report.final_residual
        ))
    })
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<Outcome> {
    let cfg = cli.flags.resolve()?;
    let mut file;
    let w: &mut dyn Write = match &cfg.output_path {
        Some(p) => {
            file = std::io::BufWriter::new(std::fs::File::create(p)?);
            &mut file
        }
        None => stdout,
    };
    write_config_line(w, cli.command, &cfg)?;
    let outcome = match cli.command {
        Command::Split => cmd_split(&cfg, w),
        Command::Apply => cmd_apply(&cfg, w),
        Command::Bench => cmd_bench(&cfg, w),
        Command::RankProfile => cmd_rank_profile(&cfg, w),
        Command::Solve => cmd_solve(&cfg, cli.flags.solution.as_ref(), w),
    }?;
    w.flush()?;
    Ok(outcome)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Construction(_) | Error::NonFinite(_) => EXIT_FAILURE,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit
/// status. Diagnostics go to stderr.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli, stdout) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("nlfast: {msg}");
            EXIT_FAILURE
        }
        Err(e) => {
            eprintln!("nlfast: {e}");
            exit_code_for(&e)
        }
    }
}
