//! `microinv`: design checks, closed-form tables, switched simulations,
//! parameter sweeps and waveform analysis for the SEPIC-Ćuk micro-inverter.
//!
//! Exit codes: 0 success, 1 domain failure (a design rule or a physical
//! limit), 2 usage or configuration error, 3 numerical failure.

mod sweep;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use microinv_core::analysis;
use microinv_core::averaged::steady_state_clamped;
use microinv_core::config::Scenario;
use microinv_core::design::verify_design_with;
use microinv_core::sim::{run_simulation, WaveformRecord};
use microinv_core::Error;

use sweep::{SweepParam, SweepRange};

#[derive(Parser)]
#[command(name = "microinv", version, about = "SEPIC-Ćuk micro-inverter toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a parts set against the sizing rules.
    Design {
        config: PathBuf,
        /// Also write the report as `key = value` lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the closed-form DCM steady state over the line cycle.
    Steady {
        config: PathBuf,
        /// Number of line angles, spread evenly over the positive half cycle
        /// with both zero crossings included.
        #[arg(long, default_value_t = 181, value_parser = clap::value_parser!(u32).range(3..))]
        angles: u32,
        /// Span a whole line cycle instead of the positive half.
        #[arg(long)]
        full_cycle: bool,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the switched-circuit simulation and analyse the last line cycles.
    Simulate {
        config: PathBuf,
        /// Simulated time in seconds (overrides `t_end_s`).
        #[arg(long, value_parser = positive_seconds)]
        t_end: Option<f64>,
        /// Directory receiving `waveform.csv` and `report.txt`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate once per value of one parameter and tabulate the results.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// `LO:HI` in the parameter's SI unit.
        #[arg(long)]
        range: SweepRange,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        steps: u32,
        /// Simulated time per run in seconds (overrides `t_end_s`).
        #[arg(long, value_parser = positive_seconds)]
        t_end: Option<f64>,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyse a waveform CSV written by `simulate`.
    Analyze {
        config: PathBuf,
        waveform: PathBuf,
        /// Report destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn positive_seconds(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
        Ok(_) => Err("must be a positive number of seconds".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

pub(crate) fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Range { .. } => 2,
        Error::NumericalDivergence { .. }
        | Error::InconsistentMode { .. }
        | Error::EnergyMismatch { .. } => 3,
        Error::DegenerateDuty { .. }
        | Error::CcmViolation { .. }
        | Error::DutyOverflow { .. }
        | Error::Window(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design { config, out } => design(&config, out.as_deref()),
        Command::Steady {
            config,
            angles,
            full_cycle,
            out,
        } => steady(&config, angles as usize, full_cycle, out.as_deref()),
        Command::Simulate { config, t_end, out } => simulate(&config, t_end, &out),
        Command::Sweep {
            config,
            param,
            range,
            steps,
            t_end,
            out,
        } => sweep::run(&config, param, range, steps as usize, t_end, out.as_deref()),
        Command::Analyze {
            config,
            waveform,
            out,
        } => analyze(&config, &waveform, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("microinv: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| io_failure(Path::new("<stdout>"), e))
        }
    }
}

fn design(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let s = Scenario::from_file(config)?;
    let report = verify_design_with(&s.params, &s.op, &s.design)?;
    print!("{}", report.to_text_table());
    if let Some(p) = out {
        fs::write(p, report.to_key_value()).map_err(|e| io_failure(p, e))?;
    }
    if report.all_pass() {
        return Ok(());
    }
    let names: Vec<&str> = report.failed().map(|c| c.name).collect();
    Err(Failure {
        code: 1,
        message: format!("design check failed: {}", names.join(", ")),
    })
}

const STEADY_HEADER: &str = "angle_deg,d,d0,d_il1,d_il2,il1_valley,il1_peak,il2_valley,il2_peak,idc_avg,i2_avg,vc1_avg,ccm_violation";

fn steady(
    config: &Path,
    angles: usize,
    full_cycle: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let s = Scenario::from_file(config)?;
    let span = if full_cycle { 2.0 * PI } else { PI };
    let mut csv = String::from(STEADY_HEADER);
    csv.push('\n');
    for k in 0..angles {
        let theta = span * k as f64 / (angles - 1) as f64;
        let r = steady_state_clamped(&s.params, &s.op, theta)?;
        let _ = writeln!(
            csv,
            "{:.4},{},{},{},{},{},{},{},{},{},{},{},{}",
            theta.to_degrees(),
            r.d,
            r.d0,
            r.d_il1,
            r.d_il2,
            r.il1_valley,
            r.il1_peak,
            r.il2_valley,
            r.il2_peak,
            r.idc_avg,
            r.i2_avg,
            r.vc1_avg,
            u8::from(r.ccm_violation),
        );
    }
    write_or_print(out, &csv)
}

fn simulate(config: &Path, t_end: Option<f64>, out: &Path) -> Result<(), Failure> {
    let mut s = Scenario::from_file(config)?;
    if let Some(t) = t_end {
        s.sim.t_end = t;
    }
    s.sim.validate(&s.op)?;
    let run = run_simulation(&s.params, &s.op, s.controller()?, &s.sim)?;
    let report = analysis::analyze(&run.record, Some(&s.params))?;

    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let wave = out.join("waveform.csv");
    let comment = format!(
        "microinv simulate: t_end = {} s, dt_max = {:.4e} s, decimation = {}",
        s.sim.t_end, s.sim.dt_max, s.sim.record_decimation
    );
    let file = fs::File::create(&wave).map_err(|e| io_failure(&wave, e))?;
    let mut w = io::BufWriter::new(file);
    run.record
        .write_csv(&mut w, &comment)
        .and_then(|_| w.flush())
        .map_err(|e| io_failure(&wave, e))?;

    let d = &run.diagnostics;
    let mut text = report.to_key_value();
    let _ = writeln!(text, "periods = {}", d.periods);
    let _ = writeln!(text, "ccm_periods_total = {}", d.ccm_periods);
    let _ = writeln!(text, "mode3_reentries = {}", d.reentries);
    let _ = writeln!(text, "energy_residual = {:.3e}", d.energy_residual());
    let _ = writeln!(text, "final_d_peak = {:.6}", d.final_d_peak);
    let rep = out.join("report.txt");
    fs::write(&rep, &text).map_err(|e| io_failure(&rep, e))?;
    print!("{text}");
    Ok(())
}

fn analyze(config: &Path, waveform: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let s = Scenario::from_file(config)?;
    let file = fs::File::open(waveform).map_err(|e| io_failure(waveform, e))?;
    let record = WaveformRecord::read_csv(BufReader::new(file), s.op.fs, s.op.fg)?;
    let report = analysis::analyze(&record, Some(&s.params))?;
    write_or_print(out, &report.to_key_value())
}
