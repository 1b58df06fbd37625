//! `pbiharm`: eigenvalue tables, p-sweeps and verification reports for the
//! Navier p-biharmonic problem with a sign-changing weight.
//!
//! Exit status is 0 when every requested check passes, 1 when some check
//! fails, and 2 on errors (reported as JSON on stderr).

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pbiharm_core::discrete::{default_init, mu1_curve, oracle_p2, projected_gradient_lambda1, DiscreteProblem};
use pbiharm_core::spectrum::{build_verify_report, enumerate, p_sweep, Sign, SweepTable};
use pbiharm_core::{Exponent, ProblemSpec, SpectrumTable};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "pbiharm", version, about = "Navier p-biharmonic eigenvalue sequences with a sign-changing weight")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized probes (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Both eigenvalue sequences at `p`, with the verification report.
    Solve(Common),
    /// lambda_k along `p_grid` for k = 1..k_max on both branches.
    SweepP {
        #[command(flatten)]
        common: Common,
        /// Emit `sign,k,p,lambda` CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Dense p = 2 spectrum as `sign,k,p,lambda` CSV.
    OracleP2(Common),
    /// Re-runs the checks on a table written by `solve`.
    Verify {
        /// Table JSON.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples of mu_1(lambda) for the configured weight at `p`.
    MuCurve(Common),
}

#[derive(Serialize)]
struct ErrorRecord {
    error: String,
    causes: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            let rec = ErrorRecord {
                error: err.to_string(),
                causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
            };
            let _ = writeln!(std::io::stderr(), "{}", serde_json::to_string(&rec).unwrap_or_default());
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, Option<PathBuf>)> {
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply_overrides(common.seed)?;
    let out = common.out.clone().or_else(|| cfg.out.clone());
    Ok((cfg, out))
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Solve(common) => {
            let (cfg, out) = load(&common)?;
            let table = enumerate(&cfg.problem(cfg.single_p("solve")?), cfg.k_max)?;
            emit(out.as_deref(), &json(&table)?)?;
            Ok(table.verify.passed)
        }
        Command::SweepP { common, csv } => {
            let (cfg, out) = load(&common)?;
            let grid = cfg.grid("sweep-p")?.to_vec();
            let sweeps = sweep_all(&cfg, &grid)?;
            let body = if csv { sweep_csv(&sweeps) } else { json(&SweepReport::new(&cfg, sweeps.clone()))? };
            emit(out.as_deref(), &body)?;
            Ok(sweeps.iter().all(SweepTable::passed))
        }
        Command::OracleP2(common) => {
            let (cfg, out) = load(&common)?;
            emit(out.as_deref(), &oracle_csv(&cfg)?)?;
            Ok(true)
        }
        Command::Verify { input, out } => {
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let table: SpectrumTable =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
            let report = build_verify_report(&table);
            emit(out.as_deref(), &json(&report)?)?;
            Ok(report.passed)
        }
        Command::MuCurve(common) => {
            let (cfg, out) = load(&common)?;
            let report = mu_report(&cfg, cfg.single_p("mu-curve")?)?;
            let ok = report.mu1_at_zero > 0.0 && report.concave;
            emit(out.as_deref(), &json(&report)?)?;
            Ok(ok)
        }
    }
}

#[derive(Clone, Serialize)]
struct SweepReport {
    problem: ProblemSpec,
    p_grid: Vec<f64>,
    sweeps: Vec<SweepTable>,
    passed: bool,
}

impl SweepReport {
    fn new(cfg: &RunConfig, sweeps: Vec<SweepTable>) -> Self {
        let grid = cfg.p_grid.clone().unwrap_or_default();
        Self {
            problem: cfg.problem(grid[0]),
            passed: sweeps.iter().all(SweepTable::passed),
            p_grid: grid,
            sweeps,
        }
    }
}

fn sweep_all(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<SweepTable>> {
    let spec = cfg.problem(2.0);
    let mut signs = vec![Sign::Plus];
    if spec.branch_weight(Sign::Minus).is_ok() {
        signs.push(Sign::Minus);
    }
    let mut out = Vec::new();
    for sign in signs {
        for k in 1..=cfg.k_max {
            out.push(p_sweep(&spec, sign, k, grid, cfg.jump_threshold)?);
        }
    }
    Ok(out)
}

fn sweep_csv(sweeps: &[SweepTable]) -> String {
    let mut s = String::from("sign,k,p,lambda\n");
    for t in sweeps {
        for pt in &t.points {
            s.push_str(&format!("{},{},{},{}\n", t.sign.symbol(), t.k, pt.p, pt.lambda));
        }
    }
    s
}

fn oracle_csv(cfg: &RunConfig) -> Result<String> {
    let prob = DiscreteProblem::from_weight(&cfg.weight, cfg.n, Exponent::new(2.0)?)?;
    let spec = oracle_p2(&prob)?;
    let mut s = String::from("sign,k,p,lambda\n");
    for (k, m) in spec.positive.iter().take(cfg.k_max).enumerate() {
        s.push_str(&format!("+,{},2,{}\n", k + 1, m.lambda));
    }
    for (k, m) in spec.negative.iter().take(cfg.k_max).enumerate() {
        s.push_str(&format!("-,{},2,{}\n", k + 1, m.lambda));
    }
    Ok(s)
}

#[derive(Serialize)]
struct MuPoint {
    lambda: f64,
    mu1: f64,
    converged: bool,
}

#[derive(Serialize)]
struct MuReport {
    p: f64,
    n: usize,
    /// Projected-gradient principal eigenvalue on the same grid.
    lambda1: f64,
    mu1_at_zero: f64,
    /// Three-point concavity over consecutive samples, with `1e-6` slack.
    concave: bool,
    points: Vec<MuPoint>,
}

fn mu_report(cfg: &RunConfig, p: f64) -> Result<MuReport> {
    const POINTS: usize = 20;
    let prob = DiscreteProblem::from_weight(&cfg.weight, cfg.n, Exponent::new(p)?)?;
    let lambda1 = projected_gradient_lambda1(&prob, &default_init(&prob), &cfg.descent)?.value;
    let lambdas = match &cfg.mu_lambdas {
        Some(l) => l.clone(),
        None => (0..POINTS).map(|i| 2.0 * lambda1 * i as f64 / (POINTS - 1) as f64).collect(),
    };
    let curve = mu1_curve(&prob, &lambdas, &cfg.descent)?;
    let mut order: Vec<usize> = (0..curve.len()).collect();
    order.sort_by(|&a, &b| curve[a].lambda.total_cmp(&curve[b].lambda));
    let concave = order.windows(3).all(|w| {
        let (a, b, c) = (&curve[w[0]], &curve[w[1]], &curve[w[2]]);
        if !(a.lambda < c.lambda) {
            return true;
        }
        let t = (b.lambda - a.lambda) / (c.lambda - a.lambda);
        b.mu1 >= a.mu1 + t * (c.mu1 - a.mu1) - 1e-6
    });
    let mu1_at_zero = pbiharm_core::discrete::mu1_at(&prob, 0.0, &default_init(&prob), &cfg.descent)?.mu1;
    Ok(MuReport {
        p,
        n: cfg.n,
        lambda1,
        mu1_at_zero,
        concave,
        points: curve
            .into_iter()
            .map(|pt| MuPoint {
                lambda: pt.lambda,
                mu1: pt.mu1,
                converged: pt.converged,
            })
            .collect(),
    })
}
