//! `tunnelcoef` command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error, 3 I/O or parse
//! error. Machine-readable output goes to stdout, diagnostics to stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use tunnelcoef::config::RunConfig;
use tunnelcoef::market_data::{load_ohlc, load_vols, DataError, Journal};
use tunnelcoef::plot::{profile_series, render_svg, sweep_sigma, sweep_width, Series};
use tunnelcoef::strategy::{backtest, write_summary_csv, BacktestInput, BacktestReport, Side, DEFAULT_TICK};
use tunnelcoef::table1::{check_row, row, D_TOLERANCE, REFERENCE_ROWS, T_TOLERANCE};
use tunnelcoef::{
    integrate_wavefunction, transmission_coefficient, turning_point, wkb_exponent_numeric, BarrierSpec, MarketParams,
    RangeBound, TunnelError,
};

#[derive(Debug)]
enum CliError {
    Domain(String),
    Usage(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

// Input validation failures are usage errors; a closed barrier is a domain error.
fn tunnel_error(e: TunnelError) -> CliError {
    match e {
        TunnelError::NoBarrier { .. } => CliError::Domain("not in tunneling regime: K >= sqrt(sigma/r)".into()),
        other => CliError::Usage(other.to_string()),
    }
}

#[derive(Parser)]
#[command(name = "tunnelcoef", version, about = "Transmission-coefficient timing for range-bound options")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate lambda, u, exponent, T and d for one barrier
    #[command(allow_negative_numbers = true)]
    Eval(EvalArgs),
    /// Recompute the four reference rows and compare against the printed values
    #[command(allow_negative_numbers = true)]
    Table1(Table1Args),
    /// Detect ranges and signals for every symbol in a data directory
    #[command(allow_negative_numbers = true)]
    Scan(ScanArgs),
    /// Backtest one symbol and print signal outcomes
    #[command(allow_negative_numbers = true)]
    Backtest(BacktestArgs),
    /// Compare the closed-form exponent against numerical quadrature
    #[command(allow_negative_numbers = true)]
    Verify(VerifyArgs),
    /// Write sweep or profile data as CSV plus an SVG chart
    #[command(allow_negative_numbers = true)]
    Plot(PlotArgs),
}

#[derive(Args)]
struct LevelArgs {
    /// Support level; together with --resistance bypasses range detection
    #[arg(long, requires = "resistance")]
    support: Option<f64>,
    #[arg(long, requires = "support")]
    resistance: Option<f64>,
}

impl LevelArgs {
    fn range(&self) -> Result<Option<RangeBound>, CliError> {
        match (self.support, self.resistance) {
            (Some(s), Some(r)) => RangeBound::new(s, r).map(Some).map_err(tunnel_error),
            _ => Ok(None),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    r: f64,
    #[arg(long)]
    sigma: f64,
    /// Range width; alternatively pass --support and --resistance
    #[arg(long, required_unless_present = "support", conflicts_with = "support")]
    k: Option<f64>,
    #[command(flatten)]
    levels: LevelArgs,
    /// Print a single JSON object instead of key=value lines
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Table1Args {
    /// Absolute tolerance for both T and d (default 1e-3 for T, 1e-4 for d)
    #[arg(long)]
    tolerance: Option<f64>,
    /// Check a single row by symbol
    #[arg(long)]
    row: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Risk-free rate; overrides `risk_free_rate` from the config
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value = "call")]
    side: Side,
    /// Number of vol marks the fall is measured over
    #[arg(long, default_value_t = 5)]
    lookback: usize,
    /// Strike grid spacing
    #[arg(long, default_value_t = DEFAULT_TICK)]
    tick: f64,
}

#[derive(Args)]
struct ScanArgs {
    /// Directory holding `<SYMBOL>.ohlc.csv` and `<SYMBOL>.vols.csv` pairs
    #[arg(long)]
    data_dir: PathBuf,
    /// Evaluation journal (default: `journal.jsonl` inside the data directory)
    #[arg(long)]
    journal: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BacktestArgs {
    #[arg(long)]
    ohlc: PathBuf,
    #[arg(long)]
    vols: PathBuf,
    /// Symbol label (default: file name of --ohlc up to the first dot)
    #[arg(long)]
    symbol: Option<String>,
    /// Write the summary CSV here
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    levels: LevelArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Relative tolerance for closed form vs quadrature
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    #[arg(long, default_value_t = 20130207)]
    seed: u64,
    /// Random specs on top of the four reference rows
    #[arg(long, default_value_t = 50)]
    count: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    TVsSigma,
    TVsK,
    PsiProfile,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// CSV output; the SVG is written next to it with an `.svg` extension
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.03)]
    r: f64,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Upper end of the vol sweep
    #[arg(long, default_value_t = 1000.0)]
    sigma_max: f64,
    /// Sweep points, or RK4 steps for the profile
    #[arg(long, default_value_t = 200)]
    points: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(&a, &mut out),
        Command::Table1(a) => cmd_table1(&a, &mut out),
        Command::Scan(a) => cmd_scan(&a, &mut out),
        Command::Backtest(a) => cmd_backtest(&a, &mut out),
        Command::Verify(a) => cmd_verify(&a, &mut out),
        Command::Plot(a) => cmd_plot(&a, &mut out),
    };
    let flushed = out.flush();
    match result.and(flushed.map_err(CliError::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn cmd_eval(a: &EvalArgs, out: &mut impl Write) -> CliResult {
    let params = MarketParams::new(a.r, a.sigma).map_err(tunnel_error)?;
    let k = match (a.k, a.levels.range()?) {
        (_, Some(range)) => range.width(),
        (Some(k), None) => k,
        (None, None) => return Err(CliError::Usage("--k or --support/--resistance is required".into())),
    };
    let ev = transmission_coefficient(&params, k).map_err(tunnel_error)?;
    if a.json {
        let obj = json!({
            "r": a.r,
            "sigma": a.sigma,
            "k": k,
            "regime": ev.regime,
            "lambda": ev.lambda,
            "u": ev.u,
            "exponent": ev.exponent,
            "t": ev.transmission,
            "d": ev.penetration,
        });
        writeln!(out, "{obj}")?;
    } else {
        writeln!(out, "regime={:?}", ev.regime)?;
        writeln!(out, "lambda={}", ev.lambda)?;
        writeln!(out, "u={}", ev.u)?;
        writeln!(out, "exponent={:e}", ev.exponent)?;
        writeln!(out, "T={:.6}", ev.transmission)?;
        writeln!(out, "d={:.6}", ev.penetration)?;
    }
    Ok(())
}

fn cmd_table1(a: &Table1Args, out: &mut impl Write) -> CliResult {
    let (t_tol, d_tol) = match a.tolerance {
        Some(tol) if tol.is_finite() && tol >= 0.0 => (tol, tol),
        Some(tol) => return Err(CliError::Usage(format!("--tolerance {tol} must be finite and >= 0"))),
        None => (T_TOLERANCE, D_TOLERANCE),
    };
    let rows: Vec<_> = match &a.row {
        Some(sym) => vec![row(sym).ok_or_else(|| CliError::Usage(format!("unknown row `{sym}`")))?],
        None => REFERENCE_ROWS.iter().collect(),
    };
    writeln!(out, "symbol,quantity,computed,printed,delta,status")?;
    let mut failing = Vec::new();
    for r in rows {
        let check = check_row(r).map_err(tunnel_error)?;
        let cells = [
            ("T", check.eval.transmission, r.t, check.t_delta(), t_tol),
            ("d", check.eval.penetration, r.d, check.d_delta(), d_tol),
        ];
        for (quantity, computed, printed, delta, tol) in cells {
            let ok = delta <= tol;
            if !ok {
                failing.push(format!("{}.{quantity}", r.symbol));
            }
            let status = if ok { "PASS" } else { "FAIL" };
            writeln!(out, "{},{quantity},{computed},{printed},{delta:e},{status}", r.symbol)?;
        }
    }
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Domain(format!("tolerance exceeded in {}", failing.join(", "))))
    }
}

struct Run {
    r: f64,
    cfg: RunConfig,
}

fn resolve_run(a: &RunArgs) -> Result<Run, CliError> {
    let cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let r = a
        .r
        .or(cfg.risk_free_rate)
        .ok_or_else(|| CliError::Usage("no risk-free rate: pass --r or set risk_free_rate in --config".into()))?;
    Ok(Run { r, cfg })
}

fn run_backtest(
    symbol: &str,
    ohlc: &Path,
    vols: &Path,
    run: &Run,
    a: &RunArgs,
    range_override: Option<RangeBound>,
) -> Result<BacktestReport, CliError> {
    let bars = load_ohlc(ohlc)?;
    let vols = load_vols(vols)?;
    let range_cfg = run.cfg.range_config().map_err(CliError::Io)?;
    let strat_cfg = run.cfg.strategy_config(a.side, a.lookback).map_err(CliError::Usage)?;
    backtest(&BacktestInput {
        symbol,
        bars: &bars,
        vols: &vols,
        r: run.r,
        range_cfg,
        strat_cfg,
        tick: a.tick,
        range_override,
    })
    .map_err(|e| CliError::Domain(e.to_string()))
}

fn list_symbols(dir: &Path) -> Result<Vec<String>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut symbols = Vec::new();
    for entry in entries {
        let name = entry?.file_name();
        if let Some(sym) = name.to_str().and_then(|n| n.strip_suffix(".ohlc.csv")) {
            symbols.push(sym.to_string());
        }
    }
    symbols.sort();
    Ok(symbols)
}

fn cmd_scan(a: &ScanArgs, out: &mut impl Write) -> CliResult {
    let run = resolve_run(&a.run)?;
    let symbols = list_symbols(&a.data_dir)?;
    let journal_path = a.journal.clone().unwrap_or_else(|| a.data_dir.join("journal.jsonl"));
    let mut journal = Journal::open(&journal_path)?;
    let mut failures = 0;
    for sym in &symbols {
        let ohlc = a.data_dir.join(format!("{sym}.ohlc.csv"));
        let vols = a.data_dir.join(format!("{sym}.vols.csv"));
        let report = match run_backtest(sym, &ohlc, &vols, &run, &a.run, None) {
            Ok(rep) => rep,
            Err(e) => {
                eprintln!("{sym}: {}", e.message());
                failures += 1;
                continue;
            }
        };
        for record in &report.evaluations {
            journal.append(record)?;
        }
        for signal in &report.signals {
            let line = serde_json::to_string(signal).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
    }
    if !symbols.is_empty() && failures == symbols.len() {
        return Err(CliError::Io(format!("all {failures} symbols failed")));
    }
    Ok(())
}

fn cmd_backtest(a: &BacktestArgs, out: &mut impl Write) -> CliResult {
    let run = resolve_run(&a.run)?;
    let symbol = match &a.symbol {
        Some(s) => s.clone(),
        None => a
            .ohlc
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.split('.').next())
            .unwrap_or("UNKNOWN")
            .to_string(),
    };
    let report = run_backtest(&symbol, &a.ohlc, &a.vols, &run, &a.run, a.levels.range()?)?;
    report.write_jsonl(&mut *out)?;
    if let Some(path) = &a.summary {
        let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_summary_csv(&mut w, std::slice::from_ref(&report))?;
        w.flush()?;
    }
    Ok(())
}

fn random_tunneling(rng: &mut ChaCha8Rng) -> (MarketParams, f64) {
    let r = rng.gen_range(0.005..0.10);
    let sigma = rng.gen_range(0.05..1.0);
    let params = MarketParams::new(r, sigma).expect("sampled inside the valid domain");
    let k = turning_point(&params) * rng.gen_range(0.05..0.99);
    (params, k)
}

fn cmd_verify(a: &VerifyArgs, out: &mut impl Write) -> CliResult {
    if !(a.rel_tol.is_finite() && a.rel_tol > 0.0) {
        return Err(CliError::Usage(format!("--rel-tol {} must be finite and > 0", a.rel_tol)));
    }
    let mut cases: Vec<(String, MarketParams, f64)> = REFERENCE_ROWS
        .iter()
        .map(|r| (r.symbol.to_string(), MarketParams::new(r.r, r.sigma).expect("reference row"), r.k))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for i in 0..a.count {
        let (params, k) = random_tunneling(&mut rng);
        cases.push((format!("random-{i}"), params, k));
    }

    let mut worst: f64 = 0.0;
    for (label, params, k) in &cases {
        let closed = transmission_coefficient(params, *k).map_err(tunnel_error)?.exponent;
        let spec = BarrierSpec::new(*params, *k).map_err(|e| CliError::Domain(e.to_string()))?;
        // The quadrature rejects tolerances it cannot reach.
        let numeric = wkb_exponent_numeric(&spec, a.rel_tol)
            .map_err(|e| CliError::Domain(format!("{label}: {e}")))?;
        let dev = ((numeric - closed) / closed).abs();
        worst = worst.max(dev);
        let line = json!({
            "type": "case",
            "label": label,
            "r": params.r(),
            "sigma": params.sigma(),
            "k": k,
            "closed_form": closed,
            "numeric": numeric,
            "rel_dev": dev,
        });
        writeln!(out, "{line}")?;
    }
    let pass = worst <= a.rel_tol;
    let summary = json!({
        "type": "summary",
        "cases": cases.len(),
        "seed": a.seed,
        "rel_tol": a.rel_tol,
        "max_rel_dev": worst,
        "pass": pass,
    });
    writeln!(out, "{summary}")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Domain(format!("max relative deviation {worst:e} exceeds {}", a.rel_tol)))
    }
}

fn need(value: Option<f64>, flag: &str, kind: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --kind {kind}")))
}

fn cmd_plot(a: &PlotArgs, out: &mut impl Write) -> CliResult {
    let (series, title, x, y) = match a.kind {
        PlotKind::TVsK => {
            let params = MarketParams::new(a.r, need(a.sigma, "sigma", "t-vs-k")?).map_err(tunnel_error)?;
            (sweep_width(&params, a.points).map_err(tunnel_error)?, "T against range width", "k", "t")
        }
        PlotKind::TVsSigma => {
            let k = need(a.k, "k", "t-vs-sigma")?;
            let series = sweep_sigma(a.r, k, a.sigma_max, a.points).map_err(tunnel_error)?;
            (series, "T against implied vol", "sigma", "t")
        }
        PlotKind::PsiProfile => {
            let params = MarketParams::new(a.r, need(a.sigma, "sigma", "psi-profile")?).map_err(tunnel_error)?;
            let spec = BarrierSpec::new(params, need(a.k, "k", "psi-profile")?).map_err(|e| CliError::Domain(e.to_string()))?;
            let profile = integrate_wavefunction(&spec, a.points).map_err(|e| CliError::Usage(e.to_string()))?;
            (profile_series(&profile), "psi across the barrier", "s", "psi")
        }
    };
    let svg_path = a.out.with_extension("svg");
    write_plot(&series, &a.out, &svg_path, title, x, y)?;
    let line = json!({
        "csv": a.out.display().to_string(),
        "svg": svg_path.display().to_string(),
        "rows": series.rows.len(),
        "columns": series.columns,
    });
    writeln!(out, "{line}")?;
    Ok(())
}

fn write_plot(series: &Series, csv: &Path, svg: &Path, title: &str, x: &str, y: &str) -> CliResult {
    let io_err = |p: &Path, e: io::Error| CliError::Io(format!("{}: {e}", p.display()));
    let file = File::create(csv).map_err(|e| io_err(csv, e))?;
    let mut w = BufWriter::new(file);
    series.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(csv, e))?;
    let xs = series.column(x).unwrap_or_default();
    let ys = series.column(y).unwrap_or_default();
    std::fs::write(svg, render_svg(title, x, y, &xs, &ys)).map_err(|e| io_err(svg, e))
}
