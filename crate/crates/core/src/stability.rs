//! Bode sweeps with unwrapped phase, gain/phase margin extraction, and
//! pole-based stability classification.
//!
//! Conventions: phase in degrees, negative for lag. A phase crossover is any
//! crossing of `-180 + 360 k` degrees by the unwrapped phase. Crossover
//! frequencies are interpolated linearly in `log10(f)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tf::{FrequencyResponse, TransferFunction};

/// Margins within this distance of zero are reported as marginal.
pub const MARGINAL_GM_DB: f64 = 0.1;
pub const MARGINAL_PM_DEG: f64 = 0.5;
/// Closed-loop roots must sit at least this far left of the axis (rad/s).
pub const POLE_STABILITY_TOL: f64 = 1e-9;

const MAX_REFINEMENTS: u32 = 3;
const MAX_UNWRAPPED_STEP_DEG: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points_per_decade: u32,
}

impl Default for Band {
    fn default() -> Self {
        Self {
            f_min_hz: 10.0,
            f_max_hz: 10e6,
            points_per_decade: 200,
        }
    }
}

impl Band {
    pub fn new(f_min_hz: f64, f_max_hz: f64, points_per_decade: u32) -> Result<Self> {
        let b = Self {
            f_min_hz,
            f_max_hz,
            points_per_decade,
        };
        b.validate("sweep")?;
        Ok(b)
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        if !(self.f_min_hz > 0.0 && self.f_min_hz.is_finite()) {
            return Err(Error::validation(format!("{key}.f_min_hz"), "must be positive"));
        }
        if !(self.f_max_hz > self.f_min_hz && self.f_max_hz.is_finite()) {
            return Err(Error::validation(format!("{key}.f_max_hz"), "must exceed f_min_hz"));
        }
        if self.points_per_decade < 10 {
            return Err(Error::validation(format!("{key}.points_per_decade"), "must be >= 10"));
        }
        Ok(())
    }

    /// Log-spaced grid including both endpoints.
    pub fn grid(&self) -> Vec<f64> {
        log_grid(self.f_min_hz, self.f_max_hz, self.points_per_decade as f64)
    }
}

pub fn log_grid(f_min: f64, f_max: f64, points_per_decade: f64) -> Vec<f64> {
    let decades = (f_max / f_min).log10();
    let intervals = ((decades * points_per_decade).ceil() as usize).max(1);
    let (lo, hi) = (f_min.log10(), f_max.log10());
    let mut grid: Vec<f64> = (0..=intervals)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / intervals as f64))
        .collect();
    grid[0] = f_min;
    grid[intervals] = f_max;
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodeData {
    freqs_hz: Vec<f64>,
    mag_db: Vec<f64>,
    phase_deg: Vec<f64>,
}

impl BodeData {
    /// Validates lengths and ordering; `phase_deg` is re-unwrapped starting from
    /// its first sample.
    pub fn new(freqs_hz: Vec<f64>, mag_db: Vec<f64>, phase_deg: Vec<f64>) -> Result<Self> {
        if freqs_hz.len() != mag_db.len() || freqs_hz.len() != phase_deg.len() {
            return Err(Error::invalid("bode columns have different lengths"));
        }
        if freqs_hz.len() < 2 {
            return Err(Error::invalid("bode data needs at least two points"));
        }
        if freqs_hz.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::invalid("frequencies must be positive and finite"));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frequencies must be strictly ascending"));
        }
        let start = phase_deg[0];
        let phase_deg = unwrap_from(start, &phase_deg);
        Ok(Self {
            freqs_hz,
            mag_db,
            phase_deg,
        })
    }

    /// Magnitude and unwrapped phase of sampled complex data.
    pub fn from_response(r: &FrequencyResponse) -> Result<Self> {
        let mag_db = r.values().iter().map(|v| 20.0 * v.norm().log10()).collect();
        let phase = r.values().iter().map(|v| v.arg().to_degrees()).collect();
        Self::new(r.freqs_hz().to_vec(), mag_db, phase)
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn mag_db(&self) -> &[f64] {
        &self.mag_db
    }

    pub fn phase_deg(&self) -> &[f64] {
        &self.phase_deg
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Largest absolute step between adjacent phase samples, with its frequency.
    pub fn max_phase_step(&self) -> (f64, f64) {
        self.phase_deg
            .windows(2)
            .zip(&self.freqs_hz)
            .map(|(w, f)| ((w[1] - w[0]).abs(), *f))
            .fold((0.0, self.freqs_hz[0]), |acc, x| if x.0 > acc.0 { x } else { acc })
    }
}

/// Unwraps `raw` (degrees), placing the first sample on the branch nearest `anchor`.
fn unwrap_from(anchor: f64, raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let first = raw[0] + 360.0 * ((anchor - raw[0]) / 360.0).round();
    out.push(first);
    let mut offset = first - raw[0];
    for w in raw.windows(2) {
        let jump = w[1] - w[0];
        if jump > 180.0 {
            offset -= 360.0 * ((jump - 180.0) / 360.0).ceil();
        } else if jump < -180.0 {
            offset += 360.0 * ((-jump - 180.0) / 360.0).ceil();
        }
        out.push(w[1] + offset);
    }
    out
}

/// Phase of `tf` at `f_hz` on the branch continuous from DC, from its roots.
pub fn continuous_phase_deg(tf: &TransferFunction, f_hz: f64) -> Result<f64> {
    let w = 2.0 * PI * f_hz;
    let root_phase = |r: &Complex64| -> f64 {
        if r.re > 0.0 {
            180.0 - (w - r.im).atan2(r.re).to_degrees()
        } else {
            (w - r.im).atan2(-r.re).to_degrees()
        }
    };
    let gain = tf.num().leading() / tf.den().leading();
    let mut phase = if gain < 0.0 { -180.0 } else { 0.0 };
    phase += tf.zeros()?.iter().map(root_phase).sum::<f64>();
    phase -= tf.poles()?.iter().map(root_phase).sum::<f64>();
    Ok(phase)
}

pub fn sweep(tf: &TransferFunction, band: &Band) -> Result<BodeData> {
    sweep_with(tf, band, Execution::default())
}

pub fn sweep_with(tf: &TransferFunction, band: &Band, exec: Execution) -> Result<BodeData> {
    band.validate("sweep")?;
    let anchor = if tf.is_zero() {
        0.0
    } else {
        // Root finding only picks the starting branch; fall back to the
        // principal value if it fails.
        continuous_phase_deg(tf, band.f_min_hz).unwrap_or(0.0)
    };
    let mut ppd = band.points_per_decade as f64;
    for attempt in 0..=MAX_REFINEMENTS {
        let freqs = log_grid(band.f_min_hz, band.f_max_hz, ppd);
        let values = exec.try_map(&freqs, |&f| tf.evaluate(f))?;
        let mag_db: Vec<f64> = values.iter().map(|v| 20.0 * v.norm().log10()).collect();
        let raw: Vec<f64> = values.iter().map(|v| v.arg().to_degrees()).collect();
        let phase_deg = unwrap_from(anchor, &raw);
        let bode = BodeData {
            freqs_hz: freqs,
            mag_db,
            phase_deg,
        };
        let (step, f_hz) = bode.max_phase_step();
        if step <= MAX_UNWRAPPED_STEP_DEG {
            return Ok(bode);
        }
        if attempt == MAX_REFINEMENTS {
            return Err(Error::GridTooCoarse {
                f_hz,
                step_deg: step,
            });
        }
        ppd *= 2.0;
    }
    unreachable!("refinement loop always returns")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub freq_hz: f64,
    /// Phase margin (degrees) at a gain crossover, gain margin (dB) at a phase crossover.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub gain_margin_db: f64,
    pub phase_margin_deg: f64,
    pub gain_crossovers: Vec<Crossing>,
    pub phase_crossovers: Vec<Crossing>,
    pub gm_at_hz: Option<f64>,
    pub pm_at_hz: Option<f64>,
    /// Closed-loop pole check; `None` when only sampled data was available.
    pub pole_stable: Option<bool>,
}

impl StabilityReport {
    pub fn gain_crossover_hz(&self) -> Vec<f64> {
        self.gain_crossovers.iter().map(|c| c.freq_hz).collect()
    }

    pub fn phase_crossover_hz(&self) -> Vec<f64> {
        self.phase_crossovers.iter().map(|c| c.freq_hz).collect()
    }

    pub fn is_marginal(&self) -> bool {
        self.gain_margin_db.abs() <= MARGINAL_GM_DB || self.phase_margin_deg.abs() <= MARGINAL_PM_DEG
    }

    /// Classification from the worst-case margins.
    pub fn verdict(&self) -> Verdict {
        if self.is_marginal() {
            Verdict::Marginal
        } else if self.gain_margin_db > 0.0 && self.phase_margin_deg > 0.0 {
            Verdict::Stable
        } else {
            Verdict::Unstable
        }
    }

    /// Worst margin normalised by the 10 dB / 45 degree design targets.
    pub fn normalized_margin(&self) -> f64 {
        (self.gain_margin_db / 10.0).min(self.phase_margin_deg / 45.0)
    }
}

/// Wraps a phase margin into (-180, 180].
fn wrap_margin(pm: f64) -> f64 {
    let mut m = pm % 360.0;
    if m > 180.0 {
        m -= 360.0;
    } else if m <= -180.0 {
        m += 360.0;
    }
    m
}

pub fn margins(b: &BodeData) -> StabilityReport {
    let lf: Vec<f64> = b.freqs_hz.iter().map(|f| f.log10()).collect();
    let mut gain_crossovers = Vec::new();
    let mut phase_crossovers = Vec::new();
    for i in 0..b.len() - 1 {
        let (m0, m1) = (b.mag_db[i], b.mag_db[i + 1]);
        let (p0, p1) = (b.phase_deg[i], b.phase_deg[i + 1]);
        let lerp = |t: f64, a: f64, c: f64| a + t * (c - a);

        if m0.is_finite() && m1.is_finite() && (m0 >= 0.0) != (m1 >= 0.0) {
            let t = m0 / (m0 - m1);
            gain_crossovers.push(Crossing {
                freq_hz: 10f64.powf(lerp(t, lf[i], lf[i + 1])),
                margin: wrap_margin(180.0 + lerp(t, p0, p1)),
            });
        }

        let (lo, hi) = (p0.min(p1), p0.max(p1));
        let k_first = ((lo + 180.0) / 360.0).floor() as i64 + 1;
        let k_last = ((hi + 180.0) / 360.0).floor() as i64;
        for k in k_first..=k_last {
            let threshold = -180.0 + 360.0 * k as f64;
            let t = (p0 - threshold) / (p0 - p1);
            let mag = lerp(t, m0, m1);
            phase_crossovers.push(Crossing {
                freq_hz: 10f64.powf(lerp(t, lf[i], lf[i + 1])),
                margin: -mag,
            });
        }
    }

    let worst = |cs: &[Crossing]| {
        cs.iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .map_or((f64::INFINITY, None), |c| (c.margin, Some(c.freq_hz)))
    };
    let (phase_margin_deg, pm_at_hz) = worst(&gain_crossovers);
    let (gain_margin_db, gm_at_hz) = worst(&phase_crossovers);
    StabilityReport {
        gain_margin_db,
        phase_margin_deg,
        gain_crossovers,
        phase_crossovers,
        gm_at_hz,
        pm_at_hz,
        pole_stable: None,
    }
}

/// Sweep, extract margins, and classify the unity-feedback closed loop by its poles.
pub fn margins_of(tf: &TransferFunction, band: &Band) -> Result<StabilityReport> {
    margins_of_with(tf, band, Execution::default())
}

pub fn margins_of_with(tf: &TransferFunction, band: &Band, exec: Execution) -> Result<StabilityReport> {
    let mut report = margins(&sweep_with(tf, band, exec)?);
    report.pole_stable = Some(pole_stable(tf, &TransferFunction::constant(1.0))?);
    Ok(report)
}

/// Margins plus pole check for many loop gains, e.g. a Monte Carlo family.
pub fn margins_batch(loops: &[TransferFunction], band: &Band, exec: Execution) -> Vec<Result<StabilityReport>> {
    // each sweep runs sequentially; the parallelism is across plants
    exec.map(loops, |t| margins_of_with(t, band, Execution::Sequential))
}

/// True iff every root of `den(g) den(h) + num(g) num(h)` lies strictly in the left half-plane.
pub fn pole_stable(g: &TransferFunction, h: &TransferFunction) -> Result<bool> {
    let chi = TransferFunction::characteristic(g, h)?;
    if chi.degree() == 0 {
        return Ok(true);
    }
    Ok(chi.roots()?.iter().all(|r| r.re < -POLE_STABILITY_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::from_coeffs(num, den).unwrap()
    }

    fn cubic() -> TransferFunction {
        tf(&[8.0], &[1.0, 3.0, 3.0, 1.0])
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = Band::new(10.0, 1e4, 10).unwrap().grid();
        assert_eq!(g.len(), 31);
        assert_eq!(g[0], 10.0);
        assert_eq!(g[30], 1e4);
        assert!(Band::new(10.0, 1e4, 9).is_err());
        assert!(Band::new(10.0, 10.0, 20).is_err());
    }

    #[test]
    fn first_order_corner_point() {
        let t = TransferFunction::first_order_lowpass(1000.0).unwrap();
        let b = sweep(&t, &Band::new(10.0, 1e5, 100).unwrap()).unwrap();
        let i = b.freqs_hz().iter().position(|f| (f - 1000.0).abs() < 1e-6).unwrap();
        assert_relative_eq!(b.mag_db()[i], -3.0103, epsilon = 1e-4);
        assert_relative_eq!(b.phase_deg()[i], -45.0, epsilon = 1e-9);
    }

    #[test]
    fn double_integrator() {
        let b = sweep(&tf(&[1.0], &[0.0, 0.0, 1.0]), &Band::new(1.0, 1e3, 20).unwrap()).unwrap();
        assert!(b.phase_deg().iter().all(|p| (p + 180.0).abs() < 1e-9));
        let slope = (b.mag_db()[20] - b.mag_db()[0]) / 1.0;
        assert_relative_eq!(slope, -40.0, epsilon = 1e-9);
    }

    #[test]
    fn cubic_phase_crossing() {
        let b = sweep(&cubic(), &Band::new(0.01, 10.0, 200).unwrap()).unwrap();
        let r = margins(&b);
        let want = 3f64.sqrt() / (2.0 * PI);
        assert_relative_eq!(want, 0.27566, epsilon = 1e-5);
        assert_eq!(r.phase_crossovers.len(), 1);
        assert!((r.gm_at_hz.unwrap() / want - 1.0).abs() < 0.005);
        assert!(r.gain_margin_db.abs() < 0.05);
        assert!(r.phase_margin_deg.abs() < 0.5);
        assert_eq!(r.verdict(), Verdict::Marginal);
    }

    #[test]
    fn integrator_has_ninety_degrees() {
        let r = margins_of(&tf(&[50.0], &[0.0, 1.0]), &Band::new(0.1, 1e3, 50).unwrap()).unwrap();
        assert_relative_eq!(r.phase_margin_deg, 90.0, epsilon = 1e-9);
        assert!(r.gain_margin_db.is_infinite());
        assert_eq!(r.pole_stable, Some(true));
    }

    #[test]
    fn type_one_second_order() {
        // w^2 = (sqrt5 - 1)/2, PM = 180 - 90 - atan(w)
        let w = ((5f64.sqrt() - 1.0) / 2.0).sqrt();
        let pm = 90.0 - w.atan().to_degrees();
        assert_relative_eq!(w, 0.7862, epsilon = 1e-4);
        assert_relative_eq!(pm, 51.83, epsilon = 0.01);
        let r = margins_of(&tf(&[1.0], &[0.0, 1.0, 1.0]), &Band::new(0.001, 100.0, 200).unwrap())
            .unwrap();
        assert!((r.phase_margin_deg - 51.83).abs() < 0.2);
    }

    #[test]
    fn flat_low_gain_has_no_crossings() {
        let r = margins_of(&TransferFunction::constant(0.1), &Band::default()).unwrap();
        assert!(r.gain_crossovers.is_empty() && r.phase_crossovers.is_empty());
        assert!(r.gain_margin_db.is_infinite() && r.phase_margin_deg.is_infinite());
    }

    #[test]
    fn phase_reaches_lag_asymptote() {
        for n in 1..=6 {
            let mut t = TransferFunction::constant(1.0);
            for _ in 0..n {
                t = t.mul(&tf(&[1.0], &[1.0, 1.0])).unwrap();
            }
            let corner = 1.0 / (2.0 * PI);
            let b = sweep(&t, &Band::new(corner / 100.0, corner * 1e4, 50).unwrap()).unwrap();
            let last = *b.phase_deg().last().unwrap();
            assert!((last + 90.0 * n as f64).abs() < 1.0, "n={n}: {last}");
        }
    }

    #[test]
    fn pole_stability_cases() {
        let one = TransferFunction::constant(1.0);
        assert!(pole_stable(&tf(&[1.0], &[0.0, 1.0]), &one).unwrap());
        assert!(!pole_stable(&cubic().scale(1.25), &one).unwrap());
        assert!(pole_stable(&cubic().scale(0.5), &one).unwrap());
    }

    #[test]
    fn too_coarse_grid_is_reported() {
        // Lightly damped resonance: the phase flips by nearly 180 degrees within
        // a tiny band that 4 refinements of 10 ppd cannot resolve below 90 deg steps.
        let t = TransferFunction::second_order_lowpass(1234.5, 1e6).unwrap();
        assert!(matches!(
            sweep(&t, &Band::new(10.0, 1e5, 10).unwrap()),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn starting_branch_follows_dc_continuity() {
        // Right-half-plane zero with negative gain starts at 0 degrees.
        let t = tf(&[1.0, -1.0], &[1.0, 1.0]);
        let b = sweep(&t, &Band::new(1e-4, 1e3, 20).unwrap()).unwrap();
        assert!(b.phase_deg()[0].abs() < 0.1);
        assert!((b.phase_deg().last().unwrap() + 180.0).abs() < 0.1);
    }
}
