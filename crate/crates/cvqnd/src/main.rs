//! Command-line front end: single runs, grid sweeps, protocol comparison,
//! and the self-validation suite. Exit codes: 0 ok, 1 validation failure,
//! 2 bad arguments or config.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvqnd::analysis::{check_crossing, run_row, rows_to_csv, ComparisonRow, SweepSpec, CSV_HEADER};
use cvqnd::channel::ChannelModel;
use cvqnd::phase_space::V0;
use cvqnd::protocols::{ProtocolConfig, ProtocolKind, RunMode};
use cvqnd::validation;

#[derive(Parser)]
#[command(name = "cvqnd", version, about = "Gaussian simulator for QND interactions at a distance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol configuration and print its row plus the output covariance.
    Run(CommonArgs),
    /// Evaluate a grid of configurations and emit CSV.
    Sweep(CommonArgs),
    /// Run all four protocols on a shared grid; side-by-side CSV plus the G=1 crossing check.
    Compare(CommonArgs),
    /// Run the trajectory-vs-analytic oracle suite and randomized invariant checks.
    Validate(CommonArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Protocol kind(s): fig1 | fig2 | teleport | classical | ideal (comma list for sweep)
    #[arg(long)]
    protocol: Option<String>,
    /// Symmetric gain G (sets G_A = G_B); comma list for sweep, entries may be "GA:GB"
    #[arg(long)]
    gain: Option<String>,
    /// Alice's local gain G_A (overrides --gain for her side)
    #[arg(long)]
    gain_alice: Option<f64>,
    /// Bob's local gain G_B (overrides --gain for his side)
    #[arg(long)]
    gain_bob: Option<f64>,
    /// Resource squeezing r >= 0 (comma list for sweep)
    #[arg(long)]
    squeezing: Option<String>,
    /// Channel transmitivity T in (0, 1]; T = 1 disables the channel (comma list for sweep)
    #[arg(long)]
    transmitivity: Option<String>,
    /// Pre-channel noise variance per quadrature (default 2*V0 = 1)
    #[arg(long)]
    noise_var: Option<String>,
    /// Treat resource squeezing as perfect (resource noise terms exactly zero)
    #[arg(long)]
    idealize_resources: bool,
    /// Execution mode: ensemble | trajectory
    #[arg(long)]
    mode: Option<String>,
    /// Number of trajectories (trajectory mode and validate)
    #[arg(long)]
    runs: Option<usize>,
    /// RNG seed (trajectory mode and validate)
    #[arg(long)]
    seed: Option<u64>,
    /// Config file: one `key = value` per line, `#` comments; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write CSV here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Merged settings from config file and flags; every axis is a list so the
/// same structure serves single runs and sweeps.
#[derive(Default, Clone)]
struct Settings {
    protocols: Option<Vec<ProtocolKind>>,
    gains: Option<Vec<(f64, f64)>>,
    gain_alice: Option<f64>,
    gain_bob: Option<f64>,
    squeezings: Option<Vec<f64>>,
    transmitivities: Option<Vec<f64>>,
    noise_vars: Option<Vec<f64>>,
    idealize_resources: bool,
    mode: Option<String>,
    runs: Option<usize>,
    seed: Option<u64>,
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    match s.trim() {
        "fig1" => Ok(ProtocolKind::Fig1),
        "fig2" => Ok(ProtocolKind::Fig2),
        "teleport" => Ok(ProtocolKind::TeleportBaseline),
        "classical" => Ok(ProtocolKind::ClassicalBenchmark),
        "ideal" => Ok(ProtocolKind::IdealQnd),
        other => Err(format!(
            "unknown protocol '{other}' (expected fig1|fig2|teleport|classical|ideal)"
        )),
    }
}

fn parse_f64_list(key: &str, s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|e| format!("bad value for {key}: '{p}' ({e})")))
        .collect()
}

/// Gain entries are either a symmetric "G" or an explicit "GA:GB" pair.
fn parse_gain_list(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| match p.split_once(':') {
            Some((a, b)) => {
                let ga = a.trim().parse::<f64>().map_err(|e| format!("bad gain '{p}' ({e})"))?;
                let gb = b.trim().parse::<f64>().map_err(|e| format!("bad gain '{p}' ({e})"))?;
                Ok((ga, gb))
            }
            None => {
                let g = p.parse::<f64>().map_err(|e| format!("bad gain '{p}' ({e})"))?;
                Ok((g, g))
            }
        })
        .collect()
}

fn parse_bool(key: &str, s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(format!("bad value for {key}: '{other}' (expected true/false)")),
    }
}

fn parse_config_file(path: &PathBuf, settings: &mut Settings) -> Result<(), String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "protocol" | "protocols" => {
                settings.protocols = Some(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|p| !p.is_empty())
                        .map(parse_protocol)
                        .collect::<Result<_, _>>()?,
                )
            }
            "gain" | "gains" => settings.gains = Some(parse_gain_list(value)?),
            "gain_alice" => {
                settings.gain_alice =
                    Some(value.parse().map_err(|e| format!("bad gain_alice: {e}"))?)
            }
            "gain_bob" => {
                settings.gain_bob = Some(value.parse().map_err(|e| format!("bad gain_bob: {e}"))?)
            }
            "squeezing" | "squeezings" => settings.squeezings = Some(parse_f64_list(key, value)?),
            "transmitivity" | "transmitivities" => {
                settings.transmitivities = Some(parse_f64_list(key, value)?)
            }
            "noise_var" | "noise_vars" => settings.noise_vars = Some(parse_f64_list(key, value)?),
            "idealize_resources" => settings.idealize_resources = parse_bool(key, value)?,
            "mode" => settings.mode = Some(value.to_string()),
            "runs" => settings.runs = Some(value.parse().map_err(|e| format!("bad runs: {e}"))?),
            "seed" => settings.seed = Some(value.parse().map_err(|e| format!("bad seed: {e}"))?),
            other => return Err(format!("{}: unknown config key '{other}'", path.display())),
        }
    }
    Ok(())
}

fn merge(args: &CommonArgs) -> Result<Settings, String> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        parse_config_file(path, &mut s)?;
    }
    if let Some(p) = &args.protocol {
        s.protocols = Some(
            p.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(parse_protocol)
                .collect::<Result<_, _>>()?,
        );
    }
    if let Some(g) = &args.gain {
        s.gains = Some(parse_gain_list(g)?);
    }
    if args.gain_alice.is_some() {
        s.gain_alice = args.gain_alice;
    }
    if args.gain_bob.is_some() {
        s.gain_bob = args.gain_bob;
    }
    if let Some(v) = &args.squeezing {
        s.squeezings = Some(parse_f64_list("squeezing", v)?);
    }
    if let Some(v) = &args.transmitivity {
        s.transmitivities = Some(parse_f64_list("transmitivity", v)?);
    }
    if let Some(v) = &args.noise_var {
        s.noise_vars = Some(parse_f64_list("noise_var", v)?);
    }
    if args.idealize_resources {
        s.idealize_resources = true;
    }
    if args.mode.is_some() {
        s.mode = args.mode.clone();
    }
    if args.runs.is_some() {
        s.runs = args.runs;
    }
    if args.seed.is_some() {
        s.seed = args.seed;
    }
    Ok(s)
}

fn run_mode(s: &Settings) -> Result<RunMode, String> {
    match s.mode.as_deref().unwrap_or("ensemble") {
        "ensemble" => Ok(RunMode::Ensemble),
        "trajectory" => Ok(RunMode::Trajectory {
            seed: s.seed.unwrap_or(0),
            n_runs: s.runs.unwrap_or(100_000),
        }),
        other => Err(format!("unknown mode '{other}' (expected ensemble|trajectory)")),
    }
}

fn single<T: Copy>(key: &str, list: &Option<Vec<T>>, default: T) -> Result<T, String> {
    match list {
        None => Ok(default),
        Some(v) if v.len() == 1 => Ok(v[0]),
        Some(v) => Err(format!("run takes a single {key}, got {} values", v.len())),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_run(args: &CommonArgs) -> Result<ExitCode, String> {
    let s = merge(args)?;
    let kinds = s
        .protocols
        .clone()
        .ok_or_else(|| "run requires --protocol (or `protocol =` in the config)".to_string())?;
    if kinds.len() != 1 {
        return Err(format!("run takes a single protocol, got {}", kinds.len()));
    }
    let (ga_sym, gb_sym) = single("gain", &s.gains, (1.0, 1.0))?;
    let mut cfg = ProtocolConfig::new(kinds[0]);
    cfg.gain_alice = s.gain_alice.unwrap_or(ga_sym);
    cfg.gain_bob = s.gain_bob.unwrap_or(gb_sym);
    cfg.squeezing = single("squeezing", &s.squeezings, 0.0)?;
    let t = single("transmitivity", &s.transmitivities, 1.0)?;
    let nv = single("noise_var", &s.noise_vars, 2.0 * V0)?;
    cfg.channel = if t < 1.0 {
        Some(ChannelModel::new(t, nv).map_err(|e| e.to_string())?)
    } else {
        None
    };
    cfg.idealize_resources = s.idealize_resources;
    cfg.mode = run_mode(&s)?;

    let (row, result) = run_row(&cfg).map_err(|e| e.to_string())?;
    let mut text = format!("{CSV_HEADER}\n{}\n", row.to_csv());
    let mean = result.output.mean();
    text.push_str(&format!(
        "# output mean (X_A,P_A,X_B,P_B): {}\n",
        (0..4).map(|i| fmt17(mean[i])).collect::<Vec<_>>().join(" ")
    ));
    text.push_str("# output covariance (X_A,P_A,X_B,P_B):\n");
    let cov = result.output.cov();
    for i in 0..4 {
        text.push_str("# ");
        text.push_str(&(0..4).map(|j| fmt17(cov[(i, j)])).collect::<Vec<_>>().join(" "));
        text.push('\n');
    }
    emit(&args.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_spec(s: &Settings, kinds_default: Option<Vec<ProtocolKind>>) -> Result<SweepSpec, String> {
    let mut spec = SweepSpec {
        kinds: s.protocols.clone().or(kinds_default).unwrap_or_else(|| {
            vec![
                ProtocolKind::Fig1,
                ProtocolKind::Fig2,
                ProtocolKind::TeleportBaseline,
                ProtocolKind::ClassicalBenchmark,
            ]
        }),
        gains: s.gains.clone().unwrap_or_else(|| vec![(1.0, 1.0)]),
        squeezings: s.squeezings.clone().unwrap_or_else(|| vec![0.0]),
        transmitivities: s.transmitivities.clone().unwrap_or_else(|| vec![1.0]),
        noise_vars: s.noise_vars.clone().unwrap_or_else(|| vec![2.0 * V0]),
        idealize_resources: s.idealize_resources,
        input_a: cvqnd::GaussianState::vacuum(1).map_err(|e| e.to_string())?,
        input_b: cvqnd::GaussianState::vacuum(1).map_err(|e| e.to_string())?,
        mode: RunMode::Ensemble,
    };
    spec.mode = run_mode(s)?;
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn cmd_sweep(args: &CommonArgs) -> Result<ExitCode, String> {
    let s = merge(args)?;
    let spec = sweep_spec(&s, None)?;
    let rows = cvqnd::analysis::run_sweep(&spec).map_err(|e| e.to_string())?;
    emit(&args.out, &rows_to_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: &CommonArgs) -> Result<ExitCode, String> {
    let s = merge(args)?;
    let kinds = vec![
        ProtocolKind::Fig1,
        ProtocolKind::Fig2,
        ProtocolKind::TeleportBaseline,
        ProtocolKind::ClassicalBenchmark,
    ];
    let mut spec = sweep_spec(&s, Some(kinds.clone()))?;
    spec.kinds = kinds.clone();

    // side-by-side ordering: all four protocols adjacent per grid point
    let mut rows: Vec<ComparisonRow> = Vec::new();
    for &(ga, gb) in &spec.gains {
        for &r in &spec.squeezings {
            for &t in &spec.transmitivities {
                for &nv in &spec.noise_vars {
                    for &kind in &kinds {
                        let mut cfg = ProtocolConfig::new(kind);
                        cfg.gain_alice = ga;
                        cfg.gain_bob = gb;
                        cfg.squeezing = r;
                        cfg.channel = if t < 1.0 {
                            Some(ChannelModel::new(t, nv).map_err(|e| e.to_string())?)
                        } else {
                            None
                        };
                        cfg.idealize_resources = spec.idealize_resources;
                        cfg.mode = spec.mode;
                        let (row, _) = run_row(&cfg).map_err(|e| e.to_string())?;
                        rows.push(row);
                    }
                }
            }
        }
    }
    let mut text = rows_to_csv(&rows);

    // crossing check at the first channel with T < 1; needs symmetric gains
    let sym_gains: Vec<f64> = spec
        .gains
        .iter()
        .filter(|(a, b)| (a - b).abs() < 1e-12)
        .map(|&(a, _)| a)
        .collect();
    let t = spec.transmitivities.iter().copied().find(|&t| t < 1.0);
    match (t, sym_gains.is_empty()) {
        (Some(t), false) => {
            let check = check_crossing(&sym_gains, t, spec.noise_vars[0])
                .map_err(|e| e.to_string())?;
            text.push_str(&format!(
                "# crossing check at T={t}: {}\n",
                if check.holds { "holds" } else { "VIOLATED" }
            ));
            for d in &check.details {
                text.push_str(&format!("# {d}\n"));
            }
        }
        _ => text.push_str("# crossing check skipped (needs T < 1 and symmetric gains)\n"),
    }
    emit(&args.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: &CommonArgs) -> Result<ExitCode, String> {
    let s = merge(args)?;
    let seed = s.seed.unwrap_or(0);
    let runs = s.runs.unwrap_or(1_000_000);
    let results = validation::validate_all(seed, runs).map_err(|e| e.to_string())?;
    let mut all_pass = true;
    for r in &results {
        all_pass &= r.pass;
        println!("{} {} ({})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if all_pass {
        println!("validate: {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("validate: FAILED");
        Ok(ExitCode::from(1))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
