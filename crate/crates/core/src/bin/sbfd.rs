use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use sbfd_core::grid::{build_map, parse_pattern, validate_numerology, SegmentKind};
use sbfd_core::harness::{self, Execution};
use sbfd_core::scenario::{
    default_scenario, load_scenario_file, DEFAULT_CP_FRACTION, SPEED_OF_LIGHT,
};
use sbfd_core::uplink;

#[derive(Parser)]
#[command(
    name = "sbfd",
    version,
    about = "SBFD cell-free massive MIMO sensing and uplink simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the sub-band layout and derived sensing metrics.
    GridInfo {
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        scs: f64,
        #[arg(long)]
        bandwidth: f64,
        #[arg(long, default_value_t = 7e9)]
        carrier: f64,
        #[arg(long, default_value_t = 14)]
        symbols: usize,
        #[arg(long, default_value_t = DEFAULT_CP_FRACTION)]
        cp_fraction: f64,
    },
    /// Monte Carlo RMSE per (AP, target).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Summary CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-trial CSV.
        #[arg(long)]
        trials_out: Option<PathBuf>,
        #[arg(long)]
        serial: bool,
    },
    /// RMSE over a list of residual INR values (dB).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        inr: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        serial: bool,
    },
    /// Print the default 6-AP, 3-target, 5-UE scenario as TOML.
    DefaultConfig,
    /// Uplink SINR, spectral efficiency and SER per UE.
    UlEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        slots: usize,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => harness::write_text(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn grid_info(
    pattern: &str,
    scs: f64,
    bandwidth: f64,
    carrier: f64,
    symbols: usize,
    cp: f64,
) -> Result<()> {
    let fc = parse_pattern(pattern)?;
    let map = build_map(&fc)?;
    let occupied = validate_numerology(&fc, scs, bandwidth)?;
    println!("pattern        {fc}");
    println!("subcarriers    {}", map.total_sc);
    for kind in [SegmentKind::Dl, SegmentKind::Ul, SegmentKind::Gb] {
        println!("{:<14} {}", format!("{kind} sc"), map.sc_count(kind));
    }
    for seg in &map.segments {
        println!("  {:<3} [{}, {})", seg.kind, seg.range.start, seg.range.end);
    }
    println!(
        "occupied       {:.6} MHz of {:.6} MHz",
        occupied / 1e6,
        bandwidth / 1e6
    );

    let sym = (1.0 + cp) / scs;
    println!("symbol         {:.6} us", sym * 1e6);
    for (i, r) in map.dl_segments().iter().enumerate() {
        let b = r.len() as f64 * scs;
        println!(
            "DL sub-band {i}  {:.6} MHz, range resolution {:.4} m",
            b / 1e6,
            SPEED_OF_LIGHT / (2.0 * b)
        );
    }
    println!("max range      {:.4} m", SPEED_OF_LIGHT / (2.0 * scs));
    println!(
        "max |rate|     {:.4} m/s",
        SPEED_OF_LIGHT / (4.0 * carrier * sym)
    );
    println!(
        "rate resolution {:.4} m/s",
        SPEED_OF_LIGHT / (2.0 * carrier * symbols as f64 * sym)
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GridInfo {
            pattern,
            scs,
            bandwidth,
            carrier,
            symbols,
            cp_fraction,
        } => grid_info(&pattern, scs, bandwidth, carrier, symbols, cp_fraction)?,
        Command::Simulate {
            config,
            trials,
            seed,
            out,
            trials_out,
            serial,
        } => {
            let mut cfg = load_scenario_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let n = trials.unwrap_or(cfg.n_trials);
            let run = harness::run_trials(&cfg, n, execution(serial))
                .with_context(|| format!("simulating {}", config.display()))?;
            for f in &run.report.failures {
                eprintln!("AP {} trial {} failed: {}", f.ap_id, f.trial, f.reason);
            }
            emit(&harness::summary_csv(&run.report), out.as_ref())?;
            if let Some(path) = trials_out {
                harness::write_text(
                    &path,
                    &harness::trials_csv(&run.report.run_id, &run.records),
                )?;
            }
        }
        Command::Sweep {
            config,
            inr,
            trials,
            out,
            serial,
        } => {
            let cfg = load_scenario_file(&config)?;
            let n = trials.unwrap_or(cfg.n_trials);
            let sweep = harness::sweep_inr(&cfg, &inr, n, execution(serial))?;
            for (db, report) in &sweep.points {
                eprintln!(
                    "INR {db:>6} dB: median range RMSE {} m, median rate RMSE {} m/s",
                    harness::fmt_sig9(report.median_rmse_range_m()),
                    harness::fmt_sig9(report.median_rmse_rate_mps())
                );
            }
            emit(&harness::sweep_csv(&sweep), out.as_ref())?;
        }
        Command::DefaultConfig => print!("{}", default_scenario().to_toml_string()),
        Command::UlEval {
            config,
            slots,
            trial,
        } => {
            let cfg = load_scenario_file(&config)?;
            cfg.validate()?;
            if cfg.ues.is_empty() {
                bail!("{} defines no UEs", config.display());
            }
            let r = uplink::evaluate_ul(&cfg, trial, slots)?;
            println!("ue_id,sinr_db,measured_sinr_db,se_bps_hz,ser");
            for u in &r.ues {
                println!(
                    "{},{},{},{},{}",
                    u.ue_id,
                    harness::fmt_sig9(10.0 * u.sinr_linear.log10()),
                    harness::fmt_sig9(10.0 * u.measured_sinr_linear.log10()),
                    harness::fmt_sig9(u.spectral_efficiency_bps_hz),
                    harness::fmt_sig9(u.ser)
                );
            }
        }
    }
    Ok(())
}
