//! Simulation output: decimated samples, exact per-switching-period
//! summaries and run diagnostics, plus the waveform CSV writer.

use std::io::{self, BufRead, Write};

use super::dynamics::{acc, N_ACC};
use crate::error::{Error, Result};
use crate::model::{ConverterState, HalfCycle, ModeId};

/// One recorded instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: ConverterState,
    /// Duty latched for the switching period containing `t`.
    pub duty: f64,
    /// Grid-frame output terminal voltage.
    pub vo: f64,
    /// Grid-frame load current.
    pub io: f64,
    /// Source current.
    pub idc: f64,
    /// Grid-frame unfolder output current.
    pub i_unf: f64,
}

/// Exact integrals over one switching period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSummary {
    pub index: usize,
    pub t_start: f64,
    pub ts: f64,
    pub half: HalfCycle,
    pub duty: f64,
    /// S1 held off because the unfolder changed polarity at this period.
    pub blanked: bool,
    /// Time spent in ModeI, ModeII, ModeIII.
    pub mode_time: [f64; 3],
    /// The diode was still conducting when S1 turned on at the end of this
    /// period.
    pub ccm: bool,
    /// Number of ModeIII -> ModeII re-entries (diode forward-biased again).
    pub reentries: u32,
    /// Running integrals over the period (see `dynamics::acc`).
    pub integrals: [f64; N_ACC],
    pub stored_start: f64,
    pub stored_end: f64,
    /// S1 voltage and current at turn-off (zero when S1 never turned on).
    pub v_off: f64,
    pub i_off: f64,
    /// S1 voltage and current at the turn-on that started this period.
    pub v_on: f64,
    pub i_on: f64,
    /// Diode-interval length, ModeII time / Ts.
    pub diode_fraction: f64,
}

impl PeriodSummary {
    fn mean(&self, k: usize) -> f64 {
        self.integrals[k] / self.ts
    }

    pub fn mean_i_l1(&self) -> f64 {
        self.mean(acc::I_L1)
    }
    pub fn mean_i_l2(&self) -> f64 {
        self.mean(acc::I_L2)
    }
    pub fn mean_v_c1(&self) -> f64 {
        self.mean(acc::V_C1)
    }
    pub fn mean_vo(&self) -> f64 {
        self.mean(acc::V_O)
    }
    pub fn mean_io(&self) -> f64 {
        self.mean(acc::I_O)
    }
    pub fn mean_i_unf(&self) -> f64 {
        self.mean(acc::I_UNF)
    }
    pub fn mean_sq_vo(&self) -> f64 {
        self.mean(acc::SQ_VO)
    }
    pub fn mean_sq_io(&self) -> f64 {
        self.mean(acc::SQ_IO)
    }
    pub fn has_mode3(&self) -> bool {
        self.mode_time[2] > 0.0
    }
    /// Fraction of the period spent in ModeIII.
    pub fn d0(&self) -> f64 {
        self.mode_time[2] / self.ts
    }
    pub fn t_mid(&self) -> f64 {
        self.t_start + 0.5 * self.ts
    }
}

/// Extremes of one signal over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
}

impl Default for Extremes {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl Extremes {
    pub fn update(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }
}

/// Run-level bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunDiagnostics {
    pub periods: usize,
    pub ccm_periods: usize,
    pub blanked_periods: usize,
    pub reentries: usize,
    pub i_l1: Extremes,
    pub i_l2: Extremes,
    pub v_c1: Extremes,
    pub v_c2: Extremes,
    pub i_lg: Extremes,
    pub energy_in: f64,
    pub energy_load: f64,
    pub energy_dissipated: f64,
    pub stored_start: f64,
    pub stored_end: f64,
    pub final_d_peak: f64,
}

impl RunDiagnostics {
    /// (E_in − E_load − E_dissipated − ΔE_stored) / E_in over the whole run.
    pub fn energy_residual(&self) -> f64 {
        let r = self.energy_in
            - self.energy_load
            - self.energy_dissipated
            - (self.stored_end - self.stored_start);
        if self.energy_in.abs() > 0.0 {
            r / self.energy_in.abs()
        } else {
            r
        }
    }
}

/// Time series plus per-period summaries of one run.
#[derive(Debug, Clone, Default)]
pub struct WaveformRecord {
    /// Nominal spacing between samples.
    pub dt: f64,
    pub fs: f64,
    pub fg: f64,
    pub samples: Vec<Sample>,
    pub periods: Vec<PeriodSummary>,
}

/// Column layout of the waveform CSV.
pub const CSV_HEADER: &str = "t,iL1,iL2,vC1,vC2,vo,io,idc,duty,mode,half";

impl WaveformRecord {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Samples with `t` in `[t0, t1)`.
    pub fn window(&self, t0: f64, t1: f64) -> &[Sample] {
        let lo = self.samples.partition_point(|s| s.t < t0 - 1e-3 * self.dt);
        let hi = self.samples.partition_point(|s| s.t < t1 - 1e-3 * self.dt);
        &self.samples[lo..hi]
    }

    /// Periods starting in `[t0, t1)`.
    pub fn periods_in(&self, t0: f64, t1: f64) -> &[PeriodSummary] {
        let tol = 1e-3 / self.fs.max(1.0);
        let lo = self.periods.partition_point(|p| p.t_start < t0 - tol);
        let hi = self.periods.partition_point(|p| p.t_start < t1 - tol);
        &self.periods[lo..hi]
    }

    pub fn duration(&self) -> f64 {
        self.periods.last().map(|p| p.t_start + p.ts).unwrap_or(0.0)
    }

    /// Writes the samples as CSV with a leading `#` comment line.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &str) -> io::Result<()> {
        if !comment.is_empty() {
            writeln!(w, "# {comment}")?;
        }
        writeln!(w, "{CSV_HEADER}")?;
        for s in &self.samples {
            let st = &s.state;
            writeln!(
                w,
                "{:.12e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
                s.t,
                st.i_l1,
                st.i_l2,
                st.v_c1,
                st.v_c2,
                s.vo,
                s.io,
                s.idc,
                s.duty,
                st.mode.number(),
                st.half.name(),
            )?;
        }
        Ok(())
    }

    /// Reads samples written by [`write_csv`](Self::write_csv). Period
    /// summaries are not stored in the CSV and come back empty; the unfolder
    /// current is rebuilt from the mode and half-cycle columns.
    pub fn read_csv<R: BufRead>(r: R, fs: f64, fg: f64) -> Result<Self> {
        let mut samples = Vec::new();
        let mut header_seen = false;
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Config(format!("reading waveform: {e}")))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != CSV_HEADER {
                    return Err(Error::Config(format!(
                        "line {}: expected header `{CSV_HEADER}`",
                        n + 1
                    )));
                }
                header_seen = true;
                continue;
            }
            let bad = || Error::Config(format!("line {}: malformed waveform row", n + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(bad());
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            let mode = match f[9] {
                "1" => ModeId::I,
                "2" => ModeId::II,
                "3" => ModeId::III,
                _ => return Err(bad()),
            };
            let half = match f[10] {
                "Sepic" => HalfCycle::Sepic,
                "Cuk" => HalfCycle::Cuk,
                _ => return Err(bad()),
            };
            let state = ConverterState {
                i_l1: num(1)?,
                i_l2: num(2)?,
                v_c1: num(3)?,
                v_c2: num(4)?,
                i_lg: 0.0,
                mode,
                half,
            };
            let i_out = match (half, mode) {
                (HalfCycle::Sepic, ModeId::II) => state.i_l1 + state.i_l2,
                (HalfCycle::Sepic, _) => 0.0,
                (HalfCycle::Cuk, _) => state.i_l2,
            };
            samples.push(Sample {
                t: num(0)?,
                state,
                duty: num(8)?,
                vo: num(5)?,
                io: num(6)?,
                idc: num(7)?,
                i_unf: half.sign() * i_out,
            });
        }
        if !header_seen {
            return Err(Error::Config("waveform file has no header".into()));
        }
        let dt = match samples.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => return Err(Error::Config("waveform needs at least two rows".into())),
        };
        Ok(Self {
            dt,
            fs,
            fg,
            samples,
            periods: Vec::new(),
        })
    }
}
