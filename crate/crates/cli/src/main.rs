mod config;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conical::action::{action_of, verify_theorem1};
use conical::field::FieldEvaluator;
use conical::kahler::{gram, metric, verify_kahler_potential, verify_theorem2};
use conical::monodromy::{solve_accessory, solve_auto, SolveReport};
use conical::{Configuration, Error, OrderData};
use num_complex::Complex64;
use rayon::prelude::*;

use config::{parse_budget, parse_ladder, ConfigError, RunConfig};
use report::{AccessoryReport, Check, RunReport, SweepRow, Verification};

const THREADS_VAR: &str = "CONICAL_THREADS";

#[derive(Parser)]
#[command(name = "conical", version, about = "Accessory parameters, Liouville action and Kähler metric on M_{0,n}")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the accessory parameters.
    Solve(Common),
    /// Evaluate the regularized action.
    Action(Common),
    /// Compute the Gram matrix and the metric.
    Metric(Common),
    /// Run the cross-checks between accessories, action and metric.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Which::All)]
        which: Which,
    },
    /// Tabulate c_1, S and G_11 along a segment of z_1 (four points).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// CSV output; stdout when neither this nor the config names a file.
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    config: PathBuf,
    /// Where to write the JSON report (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Moduli-space finite-difference step.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Comma-separated, strictly decreasing ε values.
    #[arg(long, value_name = "LIST")]
    epsilon_ladder: Option<String>,
    /// `default`, `refined`, `fine` or a JSON object of budget fields.
    #[arg(long)]
    budget: Option<String>,
    /// Omit wall times from the report.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Theorem1,
    Theorem2,
    Potential,
    All,
}

enum Failure {
    Numerical(String),
    Validation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Numerical(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Numerical(m) | Failure::Validation(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidOrders(_) | Error::InvalidConfiguration(_) | Error::Dimension(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(..) => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

struct Loaded {
    run: RunConfig,
    config: Configuration,
    orders: OrderData,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let mut run = RunConfig::load(&common.config)?;
    if let Some(h) = common.fd_step {
        run.fd_step = h;
    }
    if let Some(l) = &common.epsilon_ladder {
        run.epsilon_ladder = Some(parse_ladder(l)?);
    }
    if let Some(b) = &common.budget {
        run.budget = parse_budget(b)?;
    }
    if let Some(o) = &common.output {
        run.output.report = Some(o.clone());
    }
    run.deterministic |= common.deterministic;
    let (config, orders) = run.validate()?;
    Ok(Loaded { run, config, orders })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn emit(report: &RunReport) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    match &report.config.output.report {
        Some(p) => write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn solve(l: &Loaded, report: &mut RunReport) -> Result<(SolveReport, FieldEvaluator), Failure> {
    let opts = l.run.solver_options();
    let (r, ev) = report.timed("solve", || FieldEvaluator::solve(&l.config, &l.orders, &opts))?;
    report.accessories = Some(AccessoryReport::new(&l.config, &l.orders, &r));
    Ok((r, ev))
}

fn cmd_solve(l: &Loaded) -> Result<RunReport, Failure> {
    let mut report = RunReport::new("solve", &l.run);
    solve(l, &mut report)?;
    Ok(report)
}

fn cmd_action(l: &Loaded) -> Result<RunReport, Failure> {
    let mut report = RunReport::new("action", &l.run);
    let (_, ev) = solve(l, &mut report)?;
    let opts = l.run.action_options();
    let s = report.timed("action", || action_of(&ev, &opts))?;
    report.action = Some(s);
    Ok(report)
}

fn require_moduli(l: &Loaded) -> Result<(), Failure> {
    if l.config.n() < 4 {
        return Err(Failure::Validation("three points have no moduli; give at least one free point".into()));
    }
    Ok(())
}

fn cmd_metric(l: &Loaded) -> Result<RunReport, Failure> {
    require_moduli(l)?;
    let mut report = RunReport::new("metric", &l.run);
    let (_, ev) = solve(l, &mut report)?;
    let g = report.timed("gram", || gram(&ev, &l.run.budget))?;
    report.metric = Some(metric(&g)?);
    report.gram = Some(g);
    Ok(report)
}

fn cmd_verify(l: &Loaded, which: Which) -> Result<RunReport, Failure> {
    let mut report = RunReport::new("verify", &l.run);
    let mut v = Verification::default();
    if l.config.n() < 4 {
        solve(l, &mut report)?;
        v.skipped = Some(
            "three points: the moduli space is a point, so there are no derivatives to check".into(),
        );
        report.verification = Some(v);
        return Ok(report);
    }
    let run = &l.run;
    let solver = run.solver_options();
    let opts = run.action_options();
    let h = run.fd_step;
    solve(l, &mut report)?;
    if matches!(which, Which::Theorem1 | Which::All) {
        let t = report.timed("theorem1", || verify_theorem1(&l.config, &l.orders, h, &solver, &opts))?;
        // ∂S/∂z_i = −2π c_i
        let worst = t.entries.iter().map(|e| e.relative_minus).fold(0.0, f64::max);
        v.theorem1 = Some(Check::new(worst, run.checks.theorem1, t));
    }
    if matches!(which, Which::Theorem2 | Which::All) {
        let t = report.timed("theorem2", || verify_theorem2(&l.config, &l.orders, h, &solver, &run.budget))?;
        v.theorem2 = Some(Check::new(t.residual, run.checks.theorem2, t));
    }
    if matches!(which, Which::Potential | Which::All) {
        let t = report.timed("potential", || verify_kahler_potential(&l.config, &l.orders, h, &solver, &opts))?;
        v.potential = Some(Check::new(t.relative_mismatch, run.checks.potential, t));
    }
    report.verification = Some(v);
    Ok(report)
}

/// Solves the samples in order, each from the previous solution.
fn continuation(l: &Loaded, samples: &[Complex64]) -> Vec<Result<(Configuration, SolveReport), String>> {
    let opts = l.run.solver_options();
    let mut prev: Option<Vec<Complex64>> = None;
    let mut out = Vec::with_capacity(samples.len());
    for &z in samples {
        let res = Configuration::new(vec![z]).map_err(|e| e.to_string()).and_then(|cfg| {
            let first = match &prev {
                Some(g) => solve_accessory(&cfg, &l.orders, g, &opts),
                None => Err(Error::NoConvergence("no previous point".into())),
            };
            first
                .or_else(|_| solve_auto(&cfg, &l.orders, &opts))
                .map(|r| (cfg, r))
                .map_err(|e| e.to_string())
        });
        if let Ok((_, r)) = &res {
            prev = Some(r.accessory.free.clone());
        }
        out.push(res);
    }
    out
}

fn sweep_row(l: &Loaded, z: Complex64, solved: &Result<(Configuration, SolveReport), String>) -> SweepRow {
    let (cfg, r) = match solved {
        Ok(v) => v,
        Err(e) => return SweepRow::failed(z, e.clone()),
    };
    let c1 = r.accessory.free[0];
    let mut row = SweepRow {
        c1_re: Some(c1.re),
        c1_im: Some(c1.im),
        residual: Some(r.residual_norm),
        error: None,
        ..SweepRow::failed(z, String::new())
    };
    let mut eval = || -> conical::Result<()> {
        let ev = FieldEvaluator::from_solve(cfg, &l.orders, r)?;
        let s = action_of(&ev, &l.run.action_options())?;
        row.action = Some(s.value);
        row.action_error = Some(s.error_estimate);
        let g = gram(&ev, &l.run.budget)?;
        row.g11 = Some(g.matrix.entries[0][0].re);
        row.g11_error = Some(g.matrix.errors[0][0]);
        Ok(())
    };
    if let Err(e) = eval() {
        row.error = Some(e.to_string());
    }
    row
}

fn cmd_sweep(l: &Loaded, table: Option<PathBuf>) -> Result<(RunReport, Option<Vec<u8>>), Failure> {
    if l.config.n() != 4 {
        return Err(Failure::Validation("sweep needs exactly one free point".into()));
    }
    let grid = l
        .run
        .sweep
        .clone()
        .ok_or_else(|| Failure::Validation("sweep needs a `sweep` section in the config".into()))?;
    let mut report = RunReport::new("sweep", &l.run);
    let samples = grid.samples();
    let solved = report.timed("continuation", || continuation(l, &samples));
    let rows: Vec<SweepRow> = report.timed("evaluation", || {
        samples
            .par_iter()
            .zip(solved.par_iter())
            .map(|(&z, s)| sweep_row(l, z, s))
            .collect()
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| Failure::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    report.sweep = Some(rows);
    match table.or_else(|| l.run.output.table.clone()) {
        Some(p) => {
            write_file(&p, &bytes)?;
            Ok((report, None))
        }
        None => Ok((report, Some(bytes))),
    }
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Validation(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Validation(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    configure_threads()?;
    match cli.command {
        Command::Solve(c) => emit(&cmd_solve(&load(&c)?)?)?,
        Command::Action(c) => emit(&cmd_action(&load(&c)?)?)?,
        Command::Metric(c) => emit(&cmd_metric(&load(&c)?)?)?,
        Command::Verify { common, which } => {
            let report = cmd_verify(&load(&common)?, which)?;
            emit(&report)?;
            let ok = report.verification.as_ref().is_none_or(|v| v.all_passed());
            return Ok(ok);
        }
        Command::Sweep { common, table } => {
            let l = load(&common)?;
            let (report, csv) = cmd_sweep(&l, table)?;
            match csv {
                Some(bytes) => {
                    std::io::stdout().write_all(&bytes).map_err(|e| Failure::Io(e.to_string()))?;
                    if report.config.output.report.is_some() {
                        emit(&report)?;
                    }
                }
                None => emit(&report)?,
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("conical: one or more checks failed");
            ExitCode::from(1)
        }
        Err(f) => {
            eprintln!("conical: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
