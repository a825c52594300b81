//! JSON analysis configuration (`"schema": 1`).
//!
//! Unknown keys are rejected everywhere. Field-level problems are reported
//! with the dotted path of the offending key, e.g. `bank[0].esr`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loop_model::{LeadNetwork, LoopModel, RegulatorTemplate, SenseNetwork, DEFAULT_R_INT};
use crate::pdn::{BankEntry, CapBank, CapBranch, TraceBranch};
use crate::stability::Band;
use crate::transient::LoadStep;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub name: Option<String>,
    /// Regulation point; informational only, all analyses work on deviations.
    pub setpoint_volts: Option<f64>,
    pub template: RegulatorTemplate,
    pub bank: Option<CapBank>,
    pub sense: SenseNetwork,
    pub sweep: Band,
    pub step: Option<LoadStep>,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        self.template.validate("template")?;
        if let Some(b) = &self.bank {
            b.validate("bank")?;
        }
        self.sense.validate("sense")?;
        self.sweep.validate("sweep")?;
        if let Some(s) = &self.step {
            s.validate("step")?;
        }
        if let Some(v) = self.setpoint_volts {
            if !v.is_finite() {
                return Err(Error::validation("setpoint_volts", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn loop_model(&self) -> Result<LoopModel> {
        LoopModel::build(&self.template, self.bank.as_ref(), &self.sense)
    }

    pub fn with_lead(&self, lead: Option<LeadNetwork>) -> Self {
        let mut c = self.clone();
        c.sense.lead = lead;
        c
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    setpoint_volts: Option<f64>,
    template: RegulatorTemplate,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bank: Vec<RawBankEntry>,
    sense: RawSense,
    #[serde(default)]
    sweep: Band,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<LoadStep>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBankEntry {
    capacitance: f64,
    #[serde(default)]
    esr: f64,
    #[serde(default)]
    esl: f64,
    #[serde(default = "one")]
    count: u32,
}

fn one() -> u32 {
    1
}

fn default_r_int() -> f64 {
    DEFAULT_R_INT
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSense {
    #[serde(default = "default_r_int")]
    r_int: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lead: Option<LeadNetwork>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distribution: Option<TraceBranch>,
    load_r: f64,
}

pub fn parse_config(text: &str) -> Result<AnalysisConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    if raw.schema != SCHEMA_VERSION {
        return Err(Error::validation(
            "schema",
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema),
        ));
    }
    let bank = if raw.bank.is_empty() {
        None
    } else {
        let entries = raw
            .bank
            .into_iter()
            .map(|e| BankEntry {
                branch: CapBranch {
                    capacitance: e.capacitance,
                    esr: e.esr,
                    esl: e.esl,
                },
                count: e.count,
            })
            .collect();
        // validated below with the rest so errors carry the config path
        Some(CapBank::from_entries_unchecked(entries))
    };
    let cfg = AnalysisConfig {
        name: raw.name,
        setpoint_volts: raw.setpoint_volts,
        template: raw.template,
        bank,
        sense: SenseNetwork {
            r_int: raw.sense.r_int,
            lead: raw.sense.lead,
            distribution: raw.sense.distribution,
            load_r: raw.sense.load_r,
        },
        sweep: raw.sweep,
        step: raw.step,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<AnalysisConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Serialises a config back to JSON; floats use shortest round-trip form.
pub fn emit_config(cfg: &AnalysisConfig) -> Result<String> {
    let raw = RawConfig {
        schema: SCHEMA_VERSION,
        name: cfg.name.clone(),
        setpoint_volts: cfg.setpoint_volts,
        template: cfg.template,
        bank: cfg
            .bank
            .as_ref()
            .map(|b| {
                b.entries()
                    .iter()
                    .map(|e| RawBankEntry {
                        capacitance: e.branch.capacitance,
                        esr: e.branch.esr,
                        esl: e.branch.esl,
                        count: e.count,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        sense: RawSense {
            r_int: cfg.sense.r_int,
            lead: cfg.sense.lead,
            distribution: cfg.sense.distribution,
            load_r: cfg.sense.load_r,
        },
        sweep: cfg.sweep,
        step: cfg.step,
    };
    serde_json::to_string_pretty(&raw).map_err(|e| Error::invalid(e.to_string()))
}
