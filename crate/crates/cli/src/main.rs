use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use trunk_inekf::filter::MeasurementKind;
use trunk_inekf::harness::{self, table_csv, FilterKind, TableColumn, TrialConfig};
use trunk_inekf::observability::StateBlock;
use trunk_inekf::sim::{self, MotionKind, MotionProfile, Offsets};

#[derive(Parser)]
#[command(name = "trunk-inekf", version, about = "Trunk state estimation with IMU placement-offset estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML trial configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<TrialConfig, String> {
        match &self.config {
            Some(p) => TrialConfig::load(p).map_err(|e| e.to_string()),
            None => Ok(TrialConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream with ground truth.
    Simulate {
        #[arg(long)]
        profile: MotionKind,
        #[arg(long)]
        out: PathBuf,
        /// Offset rotation angle about the default skew axis, degrees.
        #[arg(long, default_value_t = 10.0)]
        offset_deg: f64,
        /// Offset translation x,y,z in metres.
        #[arg(long, value_parser = parse_vec3, default_value = "0.02,0.01,0.05")]
        offset_p: Vector3<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the profile duration, s.
        #[arg(long)]
        duration: Option<f64>,
        /// Move stance feet at this rate, m/s.
        #[arg(long)]
        rolling_contact: Option<f64>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run a trial battery and write the RMSE table.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "proposed")]
        filter: FilterKind,
        #[arg(long, default_value = "fk")]
        measurement: MeasurementKind,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write one row per trial here.
        #[arg(long)]
        trials_out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Rank and unobservable directions over consecutive windows.
    Observability {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Time filter loops over a stream.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        loops: usize,
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn parse_vec3(s: &str) -> Result<Vector3<f64>, String> {
    let parts = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"))).collect::<Result<Vec<_>, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vector3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got {} values", parts.len())),
    }
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.4}"))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate { profile, out, offset_deg, offset_p, seed, duration, rolling_contact, config } => {
            let cfg = config.load()?;
            let mut p = MotionProfile::of_kind(profile);
            if let Some(d) = duration {
                p.duration = d;
            }
            p.rolling_contact = rolling_contact;
            let offsets = Offsets::new(offset_deg, offset_p);
            let (truth, frames) = sim::generate(&p, &cfg.legs, &offsets, &cfg.noise, seed).map_err(|e| e.to_string())?;
            harness::write_csv_file(&out, Some(&profile.to_string()), &frames, Some(&truth)).map_err(|e| e.to_string())?;
            println!("wrote {} samples ({} s of {profile}) to {}", frames.len(), p.duration, out.display());
        }
        Command::Run { data, filter, measurement, trials, seed, out, trials_out, config } => {
            let mut cfg = config.load()?;
            cfg.filter = filter;
            cfg.measurement = measurement;
            if let Some(n) = trials {
                cfg.n_trials = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let ds = harness::ingest_csv(&data).map_err(|e| e.to_string())?;
            let report = harness::run_battery(&cfg, &ds).map_err(|e| e.to_string())?;
            let motion = ds.motion.clone().unwrap_or_else(|| "Motion".into());
            write(&out, &table_csv(&motion, &[TableColumn { measurement, filter, report: &report }]))?;
            if let Some(path) = trials_out {
                write(&path, &report.trials_csv())?;
            }
            if report.rates_filled {
                println!("note: joint rates were reconstructed by finite differences");
            }
            println!("{filter}/{measurement}, {} trials on {}", report.trials.len(), data.display());
            println!("  velocity RMSE    initial {} steady {} m/s", fmt(report.v_rmse_initial()), fmt(report.v_rmse_steady()));
            println!("  roll/pitch RMSE  initial {} steady {} deg", fmt(report.o_rmse_initial()), fmt(report.o_rmse_steady()));
            println!("  converged within 0.6 s: {}/{}, diverged: {}", report.converged_within(0.6), report.trials.len(), report.diverged());
            println!("  mean loop {:.1} us", report.mean_loop_seconds() * 1e6);
        }
        Command::Observability { data, window, out, config } => {
            let cfg = config.load()?;
            let ds = harness::ingest_csv(&data).map_err(|e| e.to_string())?;
            let windows = harness::observability_windows(&ds, &cfg, window).map_err(|e| e.to_string())?;
            let mut text = String::from("t_start,regime,rank");
            for b in StateBlock::ALL {
                text.push_str(&format!(",{}", b.name()));
            }
            text.push('\n');
            for (t, rep) in &windows {
                let regime = rep.regime.map_or("unknown".to_string(), |r| r.to_string());
                text.push_str(&format!("{t},{regime},{}", rep.rank));
                for b in StateBlock::ALL {
                    text.push_str(&format!(",{}", rep.block(b).unobservable_dims));
                }
                text.push('\n');
            }
            match out {
                Some(path) => {
                    write(&path, &text)?;
                    println!("wrote {} windows to {}", windows.len(), path.display());
                }
                None => print!("{text}"),
            }
        }
        Command::Bench { data, loops, config } => {
            let cfg = config.load()?;
            let ds = harness::ingest_csv(&data).map_err(|e| e.to_string())?;
            let report = harness::bench(&cfg, &ds.frames, loops).map_err(|e| e.to_string())?;
            print!("{}", report.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
