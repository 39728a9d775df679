//! Component sizing and verification of a parts set against the DCM design
//! rules.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::averaged;
use crate::error::{Error, Result};
use crate::model::{CircuitParams, OperatingPoint};

/// ΔV_C1/V_C1 that reproduces C1 = 0.47 µF for the prototype.
pub const DEFAULT_C1_RIPPLE: f64 = 1.21;
/// ΔI_L2/I_L2 that reproduces L2 = 100 µH for the prototype.
pub const DEFAULT_L2_RIPPLE: f64 = 2.40;

/// Largest L1 that keeps the converter discontinuous at the line peak, and
/// the duty at the DCM/CCM boundary there.
pub fn size_l1(op: &OperatingPoint) -> Result<(f64, f64)> {
    if !(op.ipv > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Ipv must be > 0, got {}",
            op.ipv
        )));
    }
    let (vom, vpv) = (op.v_om(), op.vdc);
    let d = vom / (vom + vpv);
    let l1 = op.ts() * vom * vpv / (4.0 * op.ipv * (vpv + vom));
    Ok((l1, d))
}

/// C1 for a relative voltage ripple, evaluated at the boundary duty.
pub fn size_c1(op: &OperatingPoint, l1: f64, ripple_ratio: f64) -> Result<f64> {
    if !(ripple_ratio > 0.0) || !(l1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "C1 sizing needs L1 > 0 and ripple ratio > 0, got {l1}, {ripple_ratio}"
        )));
    }
    let d = op.v_om() / (op.v_om() + op.vdc);
    Ok(c1_for_duty(op, d, l1, ripple_ratio))
}

fn c1_for_duty(op: &OperatingPoint, d: f64, l1: f64, ripple_ratio: f64) -> f64 {
    (d * op.ts()).powi(2) * op.vdc / (2.0 * op.v_om() * l1 * ripple_ratio)
}

/// Rated rms output current, Vpv·Ipv / Vo_rms.
pub fn rated_output_current(op: &OperatingPoint) -> f64 {
    op.vdc * op.ipv / op.vo_rms
}

/// L2 for a relative current ripple at duty `d`.
pub fn size_l2(op: &OperatingPoint, d: f64, ripple_ratio: f64) -> Result<f64> {
    let io = rated_output_current(op);
    if !(io > 0.0) || !(ripple_ratio > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "L2 sizing needs Io > 0 and ripple ratio > 0, got {io}, {ripple_ratio}"
        )));
    }
    Ok(d * op.vdc * op.ts() / (io * ripple_ratio))
}

/// LC corner frequency.
pub fn cutoff_frequency(l2: f64, c2: f64) -> f64 {
    1.0 / (2.0 * PI * (l2 * c2).sqrt())
}

/// Allowed corner-frequency band, [10·fg, fs/4].
pub fn cutoff_band(op: &OperatingPoint) -> (f64, f64) {
    (10.0 * op.fg, op.fs / 4.0)
}

/// C2 that places the L2–C2 corner at `fc`.
pub fn size_c2(op: &OperatingPoint, l2: f64, fc: f64) -> Result<f64> {
    let (lo, hi) = cutoff_band(op);
    if !(fc >= lo && fc <= hi) {
        return Err(Error::Range {
            name: "fc",
            value: fc,
            lo,
            hi,
        });
    }
    if !(l2 > 0.0) {
        return Err(Error::InvalidParameter(format!("L2 must be > 0, got {l2}")));
    }
    Ok(1.0 / (4.0 * PI * PI * fc * fc * l2))
}

/// Ripple targets used by [`verify_design_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub c1_ripple: f64,
    pub l2_ripple: f64,
    /// Line angles sampled for the valley-current check.
    pub angles: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            c1_ripple: DEFAULT_C1_RIPPLE,
            l2_ripple: DEFAULT_L2_RIPPLE,
            angles: 181,
        }
    }
}

/// One design rule evaluated on a parts set.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: &'static str,
    pub description: &'static str,
    pub value: f64,
    pub limit: f64,
    pub unit: &'static str,
    /// Relative headroom; negative when the rule is broken.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub criteria: Vec<Criterion>,
    pub l1_max: f64,
    pub d_boundary: f64,
    /// Closed-form peak duty, if below 1.
    pub d_peak: Option<f64>,
    pub c1_required: f64,
    pub l2_required: f64,
    pub fc: f64,
    /// Largest D/(1−D−D0) − L2/L1 over the line cycle and its angle (rad).
    pub valley_margin: f64,
    pub valley_angle: f64,
}

impl DesignReport {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Criterion> {
        self.criteria.iter().filter(|c| !c.pass)
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn to_text_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>14} {:>14} {:>6} {:>10}  {}",
            "criterion", "value", "limit", "unit", "margin", "result"
        );
        for c in &self.criteria {
            let _ = writeln!(
                s,
                "{:<16} {:>14.6e} {:>14.6e} {:>6} {:>9.2}%  {}",
                c.name,
                c.value,
                c.limit,
                c.unit,
                100.0 * c.margin,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(s);
        for c in &self.criteria {
            let _ = writeln!(s, "{:<16} {}", c.name, c.description);
        }
        let _ = writeln!(
            s,
            "\noverall: {}",
            if self.all_pass() { "PASS" } else { "FAIL" }
        );
        s
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "all_pass = {}", self.all_pass());
        let _ = writeln!(s, "l1_max_h = {:.6e}", self.l1_max);
        let _ = writeln!(s, "d_boundary = {:.6}", self.d_boundary);
        match self.d_peak {
            Some(d) => {
                let _ = writeln!(s, "d_peak = {d:.6}");
            }
            None => {
                let _ = writeln!(s, "d_peak = overflow");
            }
        }
        let _ = writeln!(s, "c1_required_f = {:.6e}", self.c1_required);
        let _ = writeln!(s, "l2_required_h = {:.6e}", self.l2_required);
        let _ = writeln!(s, "fc_hz = {:.6e}", self.fc);
        let _ = writeln!(s, "valley_margin = {:.6}", self.valley_margin);
        let _ = writeln!(
            s,
            "valley_angle_deg = {:.3}",
            self.valley_angle.to_degrees()
        );
        for c in &self.criteria {
            let _ = writeln!(s, "{}.value = {:.6e}", c.name, c.value);
            let _ = writeln!(s, "{}.limit = {:.6e}", c.name, c.limit);
            let _ = writeln!(s, "{}.margin = {:.6}", c.name, c.margin);
            let _ = writeln!(s, "{}.pass = {}", c.name, c.pass);
        }
        s
    }
}

/// [`verify_design_with`] using the default ripple targets.
pub fn verify_design(params: &CircuitParams, op: &OperatingPoint) -> Result<DesignReport> {
    verify_design_with(params, op, &DesignOptions::default())
}

/// Checks a parts set against every sizing rule plus the negative-valley
/// condition over a line cycle.
pub fn verify_design_with(
    params: &CircuitParams,
    op: &OperatingPoint,
    opts: &DesignOptions,
) -> Result<DesignReport> {
    params.validate()?;
    op.validate()?;
    let ts = op.ts();
    let (l1_max, d_boundary) = size_l1(op)?;
    let d_peak = averaged::d_peak(op.ipv, params, ts, op.vdc).ok();
    let c1_required = size_c1(op, params.l1, opts.c1_ripple)?;
    let l2_required = size_l2(op, d_peak.unwrap_or(d_boundary), opts.l2_ripple)?;
    let fc = cutoff_frequency(params.l2, params.c2);
    let (fc_lo, fc_hi) = cutoff_band(op);

    // In DCM the gain D/(1−D−D0) equals |vo|/Vdc, so the margin follows the
    // line voltage directly.
    let n = opts.angles.max(3);
    let (mut valley_margin, mut valley_angle) = (f64::NEG_INFINITY, 0.0);
    for k in 0..n {
        let wt = PI * k as f64 / (n - 1) as f64;
        let m = op.v_om() * wt.sin().abs() / op.vdc - params.l2 / params.l1;
        if m > valley_margin {
            valley_margin = m;
            valley_angle = wt;
        }
    }

    let mut criteria = Vec::new();
    let mut upper = |name, description, value: f64, limit: f64, unit| {
        criteria.push(Criterion {
            name,
            description,
            value,
            limit,
            unit,
            margin: (limit - value) / limit.abs(),
            pass: value <= limit,
        })
    };
    upper(
        "l1_dcm_bound",
        "L1 at or below the largest value that keeps DCM at the line peak",
        params.l1,
        l1_max,
        "H",
    );
    upper(
        "duty_peak",
        "closed-form peak duty below the DCM boundary duty",
        d_peak.unwrap_or(f64::INFINITY),
        d_boundary,
        "-",
    );
    upper(
        "c1_ripple",
        "C1 ripple at or below the target (required C1 not above C1)",
        c1_required,
        params.c1,
        "F",
    );
    upper(
        "l2_ripple",
        "L2 ripple at or below the target (required L2 not above L2)",
        l2_required,
        params.l2,
        "H",
    );
    upper(
        "fc_above_line",
        "L2-C2 corner at least ten times the line frequency",
        fc_lo,
        fc,
        "Hz",
    );
    upper(
        "fc_below_switch",
        "L2-C2 corner at most a quarter of the switching frequency",
        fc,
        fc_hi,
        "Hz",
    );
    criteria.push(Criterion {
        name: "negative_valley",
        description: "gain below L2/L1 over the whole line cycle so the L1 valley stays negative",
        value: valley_margin + params.l2 / params.l1,
        limit: params.l2 / params.l1,
        unit: "-",
        margin: -valley_margin / (params.l2 / params.l1),
        pass: valley_margin < 0.0,
    });

    Ok(DesignReport {
        criteria,
        l1_max,
        d_boundary,
        d_peak,
        c1_required,
        l2_required,
        fc,
        valley_margin,
        valley_angle,
    })
}
