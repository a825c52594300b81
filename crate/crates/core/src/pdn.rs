//! Impedance models for decoupling capacitors, distribution traces and loads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tf::TransferFunction;

/// A real capacitor: `Z(s) = esr + s esl + 1/(s C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapBranch {
    pub capacitance: f64,
    #[serde(default)]
    pub esr: f64,
    #[serde(default)]
    pub esl: f64,
}

impl CapBranch {
    pub fn new(capacitance: f64, esr: f64, esl: f64) -> Result<Self> {
        let b = Self {
            capacitance,
            esr,
            esl,
        };
        b.validate("branch")?;
        Ok(b)
    }

    pub fn ideal(capacitance: f64) -> Result<Self> {
        Self::new(capacitance, 0.0, 0.0)
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        if !(self.capacitance > 0.0 && self.capacitance.is_finite()) {
            return Err(Error::validation(
                format!("{key}.capacitance"),
                "must be positive and finite",
            ));
        }
        if !(self.esr >= 0.0 && self.esr.is_finite()) {
            return Err(Error::validation(format!("{key}.esr"), "must be finite and >= 0"));
        }
        if !(self.esl >= 0.0 && self.esl.is_finite()) {
            return Err(Error::validation(format!("{key}.esl"), "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Frequency where the ESL cancels the capacitance, if the branch has inductance.
    pub fn self_resonant_hz(&self) -> Option<f64> {
        (self.esl > 0.0)
            .then(|| 1.0 / (2.0 * std::f64::consts::PI * (self.esl * self.capacitance).sqrt()))
    }

    /// `(esl C s^2 + esr C s + 1) / (C s)`
    pub fn impedance(&self) -> Result<TransferFunction> {
        let c = self.capacitance;
        TransferFunction::from_coeffs(&[1.0, self.esr * c, self.esl * c], &[0.0, c])
    }

    fn admittance(&self) -> Result<TransferFunction> {
        self.impedance()?.reciprocal()
    }
}

/// Series resistance and inductance of the path between regulator and load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceBranch {
    #[serde(default)]
    pub resistance: f64,
    #[serde(default)]
    pub inductance: f64,
}

impl TraceBranch {
    pub fn new(resistance: f64, inductance: f64) -> Result<Self> {
        let t = Self {
            resistance,
            inductance,
        };
        t.validate("distribution")?;
        Ok(t)
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        for (name, v) in [("resistance", self.resistance), ("inductance", self.inductance)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{key}.{name}"), "must be finite and >= 0"));
            }
        }
        if self.resistance == 0.0 && self.inductance == 0.0 {
            return Err(Error::validation(
                key,
                "a series distribution element needs nonzero resistance or inductance",
            ));
        }
        Ok(())
    }

    /// `R + s L`
    pub fn impedance(&self) -> Result<TransferFunction> {
        TransferFunction::from_coeffs(&[self.resistance, self.inductance], &[1.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankEntry {
    pub branch: CapBranch,
    pub count: u32,
}

/// Identical capacitors grouped by part; all entries are in parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct CapBank {
    entries: Vec<BankEntry>,
}

impl CapBank {
    pub fn new(entries: Vec<BankEntry>) -> Result<Self> {
        let bank = Self { entries };
        bank.validate("bank")?;
        Ok(bank)
    }

    pub(crate) fn from_entries_unchecked(entries: Vec<BankEntry>) -> Self {
        Self { entries }
    }

    pub fn single(branch: CapBranch, count: u32) -> Result<Self> {
        Self::new(vec![BankEntry { branch, count }])
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::validation(key, "a capacitor bank needs at least one entry"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            e.branch.validate(&format!("{key}[{i}]"))?;
            if e.count == 0 {
                return Err(Error::validation(format!("{key}[{i}].count"), "must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn total_capacitance(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.branch.capacitance * e.count as f64)
            .sum()
    }

    /// Parallel combination of every entry. `n` identical branches contribute
    /// `n` times the branch admittance rather than `n` copies of its polynomial.
    pub fn impedance(&self) -> Result<TransferFunction> {
        let mut admittance = TransferFunction::zero();
        for e in &self.entries {
            admittance = admittance.add(&e.branch.admittance()?.scale(e.count as f64))?;
        }
        admittance.reciprocal()
    }
}

pub fn branch_impedance(b: &CapBranch) -> Result<TransferFunction> {
    b.impedance()
}

pub fn bank_impedance(bank: &CapBank) -> Result<TransferFunction> {
    bank.impedance()
}

pub fn resistor(ohms: f64) -> TransferFunction {
    TransferFunction::constant(ohms)
}

pub fn series(a: &TransferFunction, b: &TransferFunction) -> Result<TransferFunction> {
    a.add(b)
}

/// `a b / (a + b)`, formed as `na nb / (na db + nb da)`.
pub fn parallel(a: &TransferFunction, b: &TransferFunction) -> Result<TransferFunction> {
    let den = a.num().mul(b.den())?.add(&b.num().mul(a.den())?)?;
    if den.is_zero() {
        return Err(Error::DegenerateParallel);
    }
    TransferFunction::new(a.num().mul(b.num())?, den)
}
