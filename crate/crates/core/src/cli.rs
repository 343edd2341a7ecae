//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::controller::ControlMode;
use crate::error::Error;
use crate::harness::{run, RunConfig, RunTrace};
use crate::metrics::{metrics_csv, RunSummary};
use crate::scenario::{synthetic_drive, write_driver_records, SyntheticDriveConfig};
use crate::vehicle::fit_pacejka;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "mfc-sim", version, about = "Model-free longitudinal control simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration, writing trace.csv and metrics.csv
    Run(SimArgs),
    /// Run classic and adaptive control on the same scenario and seed
    Compare(SimArgs),
    /// Fit Magic Formula coefficients from tire curve features
    FitTire(FitArgs),
    /// Write a synthetic driver record (t,vx,vy,yaw_rate)
    GenDriverData(GenArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// key=value override, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "delay-ms")]
    pub delay_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// peak force, N
    #[arg(long)]
    pub peak: f64,
    /// asymptotic force, N
    #[arg(long)]
    pub asymptote: f64,
    /// slope at zero slip, N per unit slip
    #[arg(long)]
    pub slope: f64,
    /// slip ratio at the peak
    #[arg(long = "peak-slip")]
    pub peak_slip: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// s
    #[arg(long)]
    pub duration: Option<f64>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::DriverRecord(_) => EXIT_CONFIG,
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        Error::Io { .. } | Error::Csv(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

pub fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::FitTire(args) => cmd_fit_tire(&args, &mut std::io::stdout()),
        Command::GenDriverData(args) => cmd_gen_driver_data(&args),
    }
}

fn load_settings(args: &SimArgs) -> Result<Settings, Error> {
    let mut overrides = args.set.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    if let Some(ms) = args.delay_ms {
        overrides.push(format!("delay.actuation={}", ms / 1000.0));
    }
    Settings::from_file(&args.config, &overrides)
}

/// Writes `contents` to `dir/name` via a temporary file and rename, so a
/// reader never sees a truncated file.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(&target, e))?;
    tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_run(args: &SimArgs) -> Result<(), Error> {
    let settings = load_settings(args)?;
    let profile = settings.run.scenario.build_profile()?;
    let trace = run(&settings.run)?;
    let summary = RunSummary::from_trace(trace.mode().to_string(), &trace, &profile)?;
    let metrics = metrics_csv(std::slice::from_ref(&summary));

    prepare_out_dir(&args.out)?;
    write_atomic(&args.out, "trace.csv", &trace.to_csv_string())?;
    write_atomic(&args.out, "metrics.csv", &metrics)?;
    print!("{metrics}");
    Ok(())
}

struct Variant {
    file: String,
    config: RunConfig,
}

pub fn cmd_compare(args: &SimArgs) -> Result<(), Error> {
    let settings = load_settings(args)?;
    let profile = settings.run.scenario.build_profile()?;

    let mut variants = Vec::new();
    let mut delays = vec![(settings.run.actuation_delay, "")];
    if settings.compare.delay_sweep {
        delays.push((settings.compare.sweep_delay, "_delay"));
    }
    for (delay, suffix) in delays {
        for mode in [ControlMode::Classic, ControlMode::Adaptive] {
            let mut config = settings.run.clone();
            config.controller.mode = mode;
            config.actuation_delay = delay;
            config.validate()?;
            variants.push(Variant {
                file: format!("trace_{mode}{suffix}.csv"),
                config,
            });
        }
    }

    let traces: Vec<Result<RunTrace, Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|v| scope.spawn(|| run(&v.config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let traces = traces.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(traces.len());
    for t in &traces {
        rows.push(RunSummary::from_trace(t.mode().to_string(), t, &profile)?);
    }
    let table = metrics_csv(&rows);

    prepare_out_dir(&args.out)?;
    for (v, t) in variants.iter().zip(&traces) {
        write_atomic(&args.out, &v.file, &t.to_csv_string())?;
    }
    write_atomic(&args.out, "comparison.csv", &table)?;
    print!("{table}");
    Ok(())
}

pub fn cmd_fit_tire<W: Write>(args: &FitArgs, out: &mut W) -> Result<(), Error> {
    let t = fit_pacejka(args.peak, args.asymptote, args.slope, args.peak_slip)?;
    let text = format!(
        "tire.stiffness_factor={}\ntire.shape_factor={}\ntire.peak_value={}\ntire.curvature_factor={}\n",
        t.stiffness_factor, t.shape_factor, t.peak_value, t.curvature_factor
    );
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_gen_driver_data(args: &GenArgs) -> Result<(), Error> {
    let mut cfg = SyntheticDriveConfig::default();
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(d) = args.duration {
        cfg.duration = d;
    }
    let records = synthetic_drive(&cfg)?;
    let mut buf = Vec::new();
    write_driver_records(&mut buf, &records)?;
    prepare_out_dir(&args.out)?;
    write_atomic(&args.out, "driver.csv", &String::from_utf8(buf).expect("ascii csv"))?;
    println!("wrote {} records to {}", records.len(), args.out.join("driver.csv").display());
    Ok(())
}
