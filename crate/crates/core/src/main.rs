//! Command-line front end for the simulation and post-processing
//! pipeline.
//!
//! Exit codes: 0 success, 2 validation error (bad config, bad input
//! file), 3 no-key result from `keyrate`.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tfqkd::config::RunConfig;
use tfqkd::keyrate::key_rate;
use tfqkd::recovery::recover_all;
use tfqkd::scenario::{replay_paper, run_scenario};
use tfqkd::sift::{build_count_table, encode_slots, tally_er, RawCountTable};
use tfqkd::synth::{simulate_run, BeatCarrier};
use tfqkd::timetag::{read_timetags, write_timetags};

#[derive(Parser)]
#[command(name = "tfqkd", version, about = "Twin-field QKD simulation and post-processing")]
struct Cli {
    /// Run configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for input/output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a click stream and write <out-dir>/events.ttag.
    Simulate,
    /// Estimate the beat carrier per frame; writes estimates.csv.
    Recover {
        /// Timetag input (default <out-dir>/events.ttag).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Sift clicks into the labeled count table; writes counts.csv.
    Sift {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Key-rate analysis on a count table CSV; writes keyrate.txt.
    Keyrate {
        /// Count table input (default <out-dir>/counts.csv).
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Run a canned sweep: er-scan, linewidth-scan, skr-curve, fft-hist,
    /// replay.
    Scenario { name: String },
    /// Key-rate analysis on the bundled five-distance reference dataset.
    ReplayPaper,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Box<dyn std::error::Error>> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::parse("")?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_artifact(dir: &Path, name: &str, text: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = load_config(cli)?;
    match &cli.cmd {
        Cmd::Simulate => {
            let schedule = cfg.schedule()?;
            let carrier = BeatCarrier::new(cfg.carrier_mhz * 1e6, cfg.phi0_rad)?;
            let run = simulate_run(
                &carrier,
                &cfg.link_noise()?,
                &schedule,
                &cfg.rates(),
                schedule.period() * cfg.n_frames as f64,
                cfg.seed,
            )?;
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join("events.ttag");
            write_timetags(&run.events, &path)?;
            println!("wrote {} events to {}", run.events.len(), path.display());
        }
        Cmd::Recover { input } => {
            let path = input.clone().unwrap_or_else(|| cli.out_dir.join("events.ttag"));
            let stream = read_timetags(&path)?;
            let schedule = cfg.schedule()?;
            let estimates = recover_all(&stream, &schedule, cfg.n_frames, &cfg.recovery());
            let mut csv = format!("# config: {}\n", cfg.digest);
            csv.push_str("frame_index,nu_hat_hz,phi0_hat_rad,n_events,peak_amplitude\n");
            let mut failed = 0u64;
            for est in &estimates {
                match est {
                    Ok(e) => csv.push_str(&format!(
                        "{},{:.6e},{:.8},{},{:.6e}\n",
                        e.frame_index, e.nu_hat, e.phi0_hat, e.n_events, e.peak_amplitude
                    )),
                    Err(_) => failed += 1,
                }
            }
            let out = write_artifact(&cli.out_dir, "estimates.csv", &csv)?;
            println!(
                "recovered {}/{} frames ({} failed) -> {}",
                estimates.len() as u64 - failed,
                estimates.len(),
                failed,
                out.display()
            );
        }
        Cmd::Sift { input } => {
            let path = input.clone().unwrap_or_else(|| cli.out_dir.join("events.ttag"));
            let stream = read_timetags(&path)?;
            let schedule = cfg.schedule()?;
            let estimates = recover_all(&stream, &schedule, cfg.n_frames, &cfg.recovery());
            let slice = cfg.slice()?;
            let er = tally_er(&stream, &schedule, &estimates, &slice);
            let params = cfg.decoy();
            let slots = encode_slots(&schedule, cfg.n_frames, cfg.pulse_period_ns * 1e-9, &params, cfg.seed)?;
            let lambda = 1.0 - (std::f64::consts::PI / cfg.slice_m as f64).cos();
            let (_, raw, stats) = build_count_table(
                &slots,
                &stream,
                &estimates,
                &params,
                lambda,
                cfg.gate_width_ps * 1e-12,
                cfg.seed,
            )?;
            let out = write_artifact(&cli.out_dir, "counts.csv", &raw.to_csv())?;
            println!(
                "interference ER {:.4} ({} clicks, {} gated out, {} multi-click slots) -> {}",
                er.er(),
                stats.clicks_total,
                stats.clicks_gated_out,
                stats.multi_click_slots,
                out.display()
            );
        }
        Cmd::Keyrate { counts } => {
            let path = counts.clone().unwrap_or_else(|| cli.out_dir.join("counts.csv"));
            let raw = RawCountTable::from_csv(&std::fs::read_to_string(&path)?)?;
            let mut params = cfg.decoy();
            params.n_total = raw.n_send;
            let table = raw.pooled(&params)?;
            let report = key_rate(
                &table,
                &params,
                cfg.slot_rate_ghz * 1e9,
                cfg.schedule()?.duty_cycle(),
            )?;
            let text = format!("# config: {}\n{}", cfg.digest, report.to_kv());
            let out = write_artifact(&cli.out_dir, "keyrate.txt", &text)?;
            println!(
                "R = {:.4e} bit/pulse, K = {:.4e} bit/s -> {}",
                report.r_bits_per_pulse,
                report.k_bits_per_s,
                out.display()
            );
            if report.no_key.is_some() {
                eprintln!("no key: {}", report.no_key.unwrap());
                return Ok(ExitCode::from(3));
            }
        }
        Cmd::Scenario { name } => {
            let result = run_scenario(name, &cfg)?;
            let out = write_artifact(&cli.out_dir, &format!("{}.csv", result.id), &result.csv)?;
            println!("wrote {}", out.display());
        }
        Cmd::ReplayPaper => {
            let (result, rows) = replay_paper(&cfg)?;
            let out = write_artifact(&cli.out_dir, "replay.csv", &result.csv)?;
            for row in &rows {
                println!(
                    "{:>5} km  {:>5.1} dB  R = {:.3e} (ref {:.3e})  K = {:.3e} (ref {:.3e})",
                    row.distance_km,
                    row.loss_db,
                    row.report.r_bits_per_pulse,
                    row.r_ref,
                    row.report.k_bits_per_s,
                    row.k_ref
                );
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
