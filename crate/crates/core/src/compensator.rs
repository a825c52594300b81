//! Phase-lead compensation: corner arithmetic, component snapping, and a
//! small search over capacitor candidates and corner frequencies.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::loop_model::{LeadNetwork, LoopModel};
use crate::stability::{self, Band, BodeData, StabilityReport, Verdict};

/// Default corner: this fraction of the lowest uncompensated gain crossover.
pub const F0_CROSSOVER_RATIO: f64 = 0.4;
pub const F0_GRID_POINTS: usize = 11;
pub const F0_GRID_SPAN: (f64, f64) = (0.2, 0.8);
pub const DEFAULT_C_CANDIDATES: [f64; 4] = [1e-6, 2.2e-6, 4.7e-6, 10e-6];

/// Corner of a first-order RC section, `1/(2 pi R C)`.
pub fn lead_corner(r_ohms: f64, c_farads: f64) -> Result<f64> {
    if !(r_ohms > 0.0 && c_farads > 0.0) || !r_ohms.is_finite() || !c_farads.is_finite() {
        return Err(Error::invalid("lead_corner needs positive finite R and C"));
    }
    Ok(1.0 / (2.0 * PI * r_ohms * c_farads))
}

/// Lowest corner reachable with the internal sense resistor alone.
pub fn feasibility_boundary_hz(r_int_ohms: f64, c_comp_farads: f64) -> Result<f64> {
    lead_corner(r_int_ohms, c_comp_farads)
}

/// Corners closer than this (relative) to the boundary are treated as
/// infeasible; they would need an R_comp above 10^4 R_int.
pub const FEASIBILITY_MARGIN: f64 = 1e-4;

/// Resistor that, in parallel with `r_int`, puts the lead corner at `f0`:
/// `R_comp = R_int / (2 pi f0 C R_int - 1)`.
pub fn rcomp_for_f0(r_int_ohms: f64, c_comp_farads: f64, f0_hz: f64) -> Result<f64> {
    let boundary_hz = feasibility_boundary_hz(r_int_ohms, c_comp_farads)?;
    if !(f0_hz > 0.0 && f0_hz.is_finite()) {
        return Err(Error::invalid("f0 must be positive and finite"));
    }
    let den = 2.0 * PI * f0_hz * c_comp_farads * r_int_ohms - 1.0;
    if den <= 0.0 || f0_hz <= boundary_hz * (1.0 + FEASIBILITY_MARGIN) {
        return Err(Error::InfeasibleCorner { f0_hz, boundary_hz });
    }
    Ok(r_int_ohms / den)
}

pub fn parallel_resistance(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

/// Default corner from an uncompensated sweep.
pub fn pick_f0(uncompensated: &BodeData) -> Result<f64> {
    Ok(F0_CROSSOVER_RATIO * lowest_crossover(&stability::margins(uncompensated))?)
}

fn lowest_crossover(r: &StabilityReport) -> Result<f64> {
    r.gain_crossovers
        .iter()
        .map(|c| c.freq_hz)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoCrossover)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Series {
    E12,
    #[default]
    E24,
}

const E12: [u32; 12] = [10, 12, 15, 18, 22, 27, 33, 39, 47, 56, 68, 82];
const E24: [u32; 24] = [
    10, 11, 12, 13, 15, 16, 18, 20, 22, 24, 27, 30, 33, 36, 39, 43, 47, 51, 56, 62, 68, 75, 82, 91,
];

impl Series {
    fn mantissas(self) -> &'static [u32] {
        match self {
            Series::E12 => &E12,
            Series::E24 => &E24,
        }
    }
}

/// `m * 10^exp` with a single rounding, so 47e-7 comes out as the literal 4.7e-6.
fn scaled(m: u32, exp: i32) -> f64 {
    if exp >= 0 {
        m as f64 * 10f64.powi(exp)
    } else {
        m as f64 / 10f64.powi(-exp)
    }
}

/// Nearest standard value by ratio.
pub fn snap_to_series(value: f64, series: Series) -> Result<f64> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::invalid(format!("cannot snap {value} to a standard value")));
    }
    // mantissas are two-digit, so the decade exponent is offset by one
    let decade = value.log10().floor() as i32 - 1;
    let mut best = (f64::INFINITY, value);
    for exp in decade - 1..=decade + 1 {
        for &m in series.mantissas() {
            let c = scaled(m, exp);
            let d = (value / c).ln().abs();
            if d < best.0 {
                best = (d, c);
            }
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompensationDesign {
    /// Corner actually realised by the snapped parts.
    pub f0_hz: f64,
    /// Corner requested before snapping.
    pub target_f0_hz: f64,
    pub r_comp_ohms: f64,
    pub c_comp_farads: f64,
    pub r_int_ohms: f64,
    pub achieved: StabilityReport,
}

impl CompensationDesign {
    pub fn lead(&self) -> LeadNetwork {
        LeadNetwork {
            r_comp: self.r_comp_ohms,
            c_comp: self.c_comp_farads,
        }
    }

    pub fn objective(&self) -> f64 {
        self.achieved.normalized_margin()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignOptions {
    pub band: Band,
    pub series: Series,
    pub exec: Execution,
}

/// Log-spaced corner candidates across the default span of the crossover.
pub fn f0_grid(crossover_hz: f64) -> Vec<f64> {
    let (a, b) = ((F0_GRID_SPAN.0 * crossover_hz).ln(), (F0_GRID_SPAN.1 * crossover_hz).ln());
    (0..F0_GRID_POINTS)
        .map(|i| (a + (b - a) * i as f64 / (F0_GRID_POINTS - 1) as f64).exp())
        .collect()
}

pub fn design_lead(model: &LoopModel, c_candidates: &[f64], f0_hz: Option<f64>) -> Result<CompensationDesign> {
    design_lead_with(model, c_candidates, f0_hz, &DesignOptions::default())
}

/// Searches `c_candidates x f0 grid` for the lead that maximises
/// `min(GM/10 dB, PM/45 deg)`. Candidates that are infeasible, closed-loop
/// unstable, or worse than leaving the loop alone are discarded.
pub fn design_lead_with(
    model: &LoopModel,
    c_candidates: &[f64],
    f0_hz: Option<f64>,
    opts: &DesignOptions,
) -> Result<CompensationDesign> {
    if c_candidates.is_empty() {
        return Err(Error::NoFeasibleDesign);
    }
    if c_candidates.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::invalid("capacitor candidates must be positive and finite"));
    }
    let baseline = model.with_lead(None)?;
    let uncompensated = stability::margins(&stability::sweep_with(&baseline.loop_gain()?, &opts.band, opts.exec)?);
    let floor = uncompensated.normalized_margin();
    let f0s = match f0_hz {
        Some(f) => vec![f],
        None => f0_grid(lowest_crossover(&uncompensated)?),
    };

    let mut caps = c_candidates.to_vec();
    caps.sort_by(f64::total_cmp);
    caps.dedup();
    let pairs: Vec<(f64, f64)> = caps
        .iter()
        .flat_map(|&c| f0s.iter().map(move |&f| (c, f)))
        .collect();
    let evaluated = opts
        .exec
        .map(&pairs, |&(c, f0)| evaluate_candidate(&baseline, c, f0, opts).ok().flatten());

    let mut best: Option<CompensationDesign> = None;
    for design in evaluated.into_iter().flatten() {
        if design.objective() < floor {
            continue;
        }
        if best.as_ref().is_none_or(|b| design.objective() > b.objective()) {
            best = Some(design);
        }
    }
    best.ok_or(Error::NoFeasibleDesign)
}

/// `Ok(None)` for a closed-loop-unstable result.
fn evaluate_candidate(
    baseline: &LoopModel,
    c: f64,
    target_f0: f64,
    opts: &DesignOptions,
) -> Result<Option<CompensationDesign>> {
    let r_int = baseline.r_int();
    let r_comp = snap_to_series(rcomp_for_f0(r_int, c, target_f0)?, opts.series)?;
    let lead = LeadNetwork { r_comp, c_comp: c };
    let compensated = baseline.with_lead(Some(&lead))?;
    let mut achieved = stability::margins(&stability::sweep_with(&compensated.loop_gain()?, &opts.band, opts.exec)?);
    let stable = stability::pole_stable(compensated.g(), compensated.h())?;
    achieved.pole_stable = Some(stable);
    if !stable || achieved.verdict() != Verdict::Stable {
        return Ok(None);
    }
    Ok(Some(CompensationDesign {
        f0_hz: lead_corner(parallel_resistance(r_comp, r_int), c)?,
        target_f0_hz: target_f0,
        r_comp_ohms: r_comp,
        c_comp_farads: c,
        r_int_ohms: r_int,
        achieved,
    }))
}
