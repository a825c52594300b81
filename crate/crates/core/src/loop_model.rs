//! The regulator control loop: forward path `G(s)` from the error node to the
//! output, sense network `H(s)` from the output back to the feedback node, and
//! the open-loop output impedance seen by the load.
//!
//! Node roles follow the usual block diagram: `V_error = V_ref - V_fb`,
//! `V_out = G V_error`, `V_fb = H V_out`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdn::{self, CapBank, TraceBranch};
use crate::poly::Polynomial;
use crate::tf::TransferFunction;

pub const DEFAULT_R_INT: f64 = 100.0;

/// Parametric averaged model of the regulator's forward path.
///
/// `lc_corner_hz` is the output-filter corner with only `filter_capacitance`
/// present; bulk capacitance added at the load pulls it down as `1/sqrt(C_total)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorTemplate {
    pub dc_gain: f64,
    pub error_amp_pole_hz: f64,
    pub lc_corner_hz: f64,
    pub lc_quality: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_pole_hz: Option<f64>,
    pub filter_capacitance: f64,
    /// Open-loop source resistance of the power stage, in series with the filter inductor.
    pub output_resistance: f64,
}

impl RegulatorTemplate {
    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        let positive = [
            ("dc_gain", self.dc_gain),
            ("error_amp_pole_hz", self.error_amp_pole_hz),
            ("lc_corner_hz", self.lc_corner_hz),
            ("lc_quality", self.lc_quality),
            ("filter_capacitance", self.filter_capacitance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{key}.{name}"), "must be positive and finite"));
            }
        }
        if let Some(v) = self.extra_pole_hz {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{key}.extra_pole_hz"), "must be positive and finite"));
            }
        }
        if !(self.output_resistance >= 0.0 && self.output_resistance.is_finite()) {
            return Err(Error::validation(format!("{key}.output_resistance"), "must be finite and >= 0"));
        }
        Ok(())
    }

    /// LC corner once `added_capacitance` sits in parallel with the filter capacitor.
    pub fn shifted_corner_hz(&self, added_capacitance: f64) -> f64 {
        let cf = self.filter_capacitance;
        self.lc_corner_hz * (cf / (cf + added_capacitance)).sqrt()
    }

    pub fn filter_inductance(&self) -> f64 {
        let w0 = 2.0 * PI * self.lc_corner_hz;
        1.0 / (w0 * w0 * self.filter_capacitance)
    }
}

/// Phase-lead network: `r_comp` parallels the internal sense resistor and
/// `c_comp` bypasses the distribution path from the regulator output to the
/// sense node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadNetwork {
    pub r_comp: f64,
    pub c_comp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseNetwork {
    pub r_int: f64,
    pub lead: Option<LeadNetwork>,
    /// `None` models an ideal (zero-impedance) distribution path.
    pub distribution: Option<TraceBranch>,
    pub load_r: f64,
}

impl SenseNetwork {
    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        if !(self.r_int > 0.0 && self.r_int.is_finite()) {
            return Err(Error::validation(format!("{key}.r_int"), "must be positive and finite"));
        }
        if !(self.load_r > 0.0 && self.load_r.is_finite()) {
            return Err(Error::validation(format!("{key}.load_r"), "must be positive and finite"));
        }
        if let Some(lead) = &self.lead {
            if !(lead.r_comp >= 0.0 && lead.r_comp.is_finite()) {
                return Err(Error::validation(format!("{key}.lead.r_comp"), "must be finite and >= 0"));
            }
            if !(lead.c_comp > 0.0 && lead.c_comp.is_finite()) {
                return Err(Error::validation(format!("{key}.lead.c_comp"), "must be positive and finite"));
            }
        }
        if let Some(d) = &self.distribution {
            d.validate(&format!("{key}.distribution"))?;
        }
        Ok(())
    }
}

/// `G(s) = A0 / (1 + s/w_ea) / (1 + s/(Q w0) + s^2/w0^2) [/ (1 + s/w_x)]`
pub fn build_forward_path(t: &RegulatorTemplate, bank: Option<&CapBank>) -> Result<TransferFunction> {
    t.validate("template")?;
    let added = bank.map_or(0.0, CapBank::total_capacitance);
    let mut g = TransferFunction::first_order_lowpass(t.error_amp_pole_hz)?
        .mul(&TransferFunction::second_order_lowpass(t.shifted_corner_hz(added), t.lc_quality)?)?;
    if let Some(fx) = t.extra_pole_hz {
        g = g.mul(&TransferFunction::first_order_lowpass(fx)?)?;
    }
    Ok(g.scale(t.dc_gain))
}

/// Transfer from the regulator output to the remote sense point: the
/// distribution trace into `bank || load_r`.
pub fn distribution_transfer(
    distribution: Option<&TraceBranch>,
    bank: Option<&CapBank>,
    load_r: f64,
) -> Result<TransferFunction> {
    let Some(trace) = distribution else {
        return Ok(TransferFunction::constant(1.0));
    };
    let y_load = load_admittance(bank, load_r)?;
    // D = 1 / (1 + Z_trace Y_load) = dY / (dY + Z_trace nY)
    let z_trace = Polynomial::new(vec![trace.resistance, trace.inductance])?;
    let den = y_load.den().add(&z_trace.mul(y_load.num())?)?;
    TransferFunction::new(y_load.den().clone(), den)
}

fn load_admittance(bank: Option<&CapBank>, load_r: f64) -> Result<TransferFunction> {
    let y_r = TransferFunction::constant(1.0 / load_r);
    match bank {
        Some(b) => b.impedance()?.reciprocal()?.add(&y_r),
        None => Ok(y_r),
    }
}

/// `H = (D Gp + s C) / (Gp + s C)` with `Gp = 1/r_int + 1/r_comp`; without a
/// lead network `H = D`.
pub fn sense_transfer(n: &SenseNetwork, bank: Option<&CapBank>) -> Result<TransferFunction> {
    n.validate("sense")?;
    let d = distribution_transfer(n.distribution.as_ref(), bank, n.load_r)?;
    apply_lead(&d, n.r_int, n.lead.as_ref())
}

pub(crate) fn apply_lead(
    d: &TransferFunction,
    r_int: f64,
    lead: Option<&LeadNetwork>,
) -> Result<TransferFunction> {
    let Some(lead) = lead else {
        return Ok(d.clone());
    };
    if lead.r_comp == 0.0 {
        // R_comp shorts the sense node straight to the remote point.
        return Ok(d.clone());
    }
    let gp = 1.0 / r_int + 1.0 / lead.r_comp;
    let bypass = Polynomial::new(vec![0.0, lead.c_comp])?;
    let num = d.num().scale(gp).add(&bypass.mul(d.den())?)?;
    let den = d.den().mul(&Polynomial::new(vec![gp, lead.c_comp])?)?;
    TransferFunction::new(num, den)
}

/// Output impedance at the load with the loop open:
/// `((R_out + s L_f) || 1/(s C_f) + Z_trace) || Z_bank || load_r`.
pub fn open_loop_output_impedance(
    t: &RegulatorTemplate,
    bank: Option<&CapBank>,
    n: &SenseNetwork,
) -> Result<TransferFunction> {
    let inductor = TransferFunction::from_coeffs(&[t.output_resistance, t.filter_inductance()], &[1.0])?;
    let filter_cap = TransferFunction::from_coeffs(&[1.0], &[0.0, t.filter_capacitance])?;
    let mut z = pdn::parallel(&inductor, &filter_cap)?;
    if let Some(trace) = &n.distribution {
        z = pdn::series(&z, &trace.impedance()?)?;
    }
    let y = load_admittance(bank, n.load_r)?;
    // z || (1/y) = z / (1 + z y)
    let num = z.num().mul(y.den())?;
    let den = z.den().mul(y.den())?.add(&z.num().mul(y.num())?)?;
    TransferFunction::new(num, den)
}

/// A composed loop. `distribution` and `r_int` are kept so a lead network can
/// be swapped in without rebuilding the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopModel {
    g: TransferFunction,
    h: TransferFunction,
    z_open: TransferFunction,
    distribution: TransferFunction,
    r_int: f64,
}

impl LoopModel {
    /// A model from raw transfer functions; `h` is taken as the lead-free sense path.
    pub fn new(g: TransferFunction, h: TransferFunction, z_open: TransferFunction) -> Result<Self> {
        for (name, t) in [("g", &g), ("h", &h)] {
            if !t.is_proper() {
                return Err(Error::validation(name, "loop transfer functions must be proper"));
            }
        }
        Ok(Self {
            distribution: h.clone(),
            g,
            h,
            z_open,
            r_int: DEFAULT_R_INT,
        })
    }

    pub fn build(t: &RegulatorTemplate, bank: Option<&CapBank>, sense: &SenseNetwork) -> Result<Self> {
        sense.validate("sense")?;
        let g = build_forward_path(t, bank)?;
        let distribution = distribution_transfer(sense.distribution.as_ref(), bank, sense.load_r)?;
        let h = apply_lead(&distribution, sense.r_int, sense.lead.as_ref())?;
        let z_open = open_loop_output_impedance(t, bank, sense)?;
        Ok(Self {
            g,
            h,
            z_open,
            distribution,
            r_int: sense.r_int,
        })
    }

    pub fn g(&self) -> &TransferFunction {
        &self.g
    }

    pub fn h(&self) -> &TransferFunction {
        &self.h
    }

    pub fn z_open(&self) -> &TransferFunction {
        &self.z_open
    }

    pub fn distribution(&self) -> &TransferFunction {
        &self.distribution
    }

    pub fn r_int(&self) -> f64 {
        self.r_int
    }

    /// Same plant with the sense network's lead replaced (or removed).
    pub fn with_lead(&self, lead: Option<&LeadNetwork>) -> Result<Self> {
        Ok(Self {
            h: apply_lead(&self.distribution, self.r_int, lead)?,
            ..self.clone()
        })
    }

    pub fn with_z_open(&self, z_open: TransferFunction) -> Self {
        Self {
            z_open,
            ..self.clone()
        }
    }

    /// `T = G H`
    pub fn loop_gain(&self) -> Result<TransferFunction> {
        self.g.mul(&self.h)
    }

    /// `G / (1 + G H)`
    pub fn closed_loop_ref_to_out(&self) -> Result<TransferFunction> {
        TransferFunction::feedback_close(&self.g, &self.h)
    }

    /// `Z_open / (1 + T)`, formed as `nZ dT / (dZ (dT + nT))`.
    pub fn closed_loop_output_impedance(&self) -> Result<TransferFunction> {
        let t = self.loop_gain()?;
        let one_plus_t = t.den().add(t.num())?;
        if one_plus_t.is_zero() {
            return Err(Error::DegenerateLoop);
        }
        TransferFunction::new(
            self.z_open.num().mul(t.den())?,
            self.z_open.den().mul(&one_plus_t)?,
        )
    }
}

pub fn loop_gain(m: &LoopModel) -> Result<TransferFunction> {
    m.loop_gain()
}

pub fn closed_loop_ref_to_out(m: &LoopModel) -> Result<TransferFunction> {
    m.closed_loop_ref_to_out()
}

pub fn closed_loop_output_impedance(m: &LoopModel) -> Result<TransferFunction> {
    m.closed_loop_output_impedance()
}
