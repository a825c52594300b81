//! Text, CSV and SVG output.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::compensator::CompensationDesign;
use crate::error::{Error, Result};
use crate::measured::BODE_HEADER;
use crate::stability::{self, BodeData, StabilityReport};
use crate::transient::{TransientMetrics, TransientResult};

pub const WAVEFORM_HEADER: [&str; 2] = ["time_s", "v_deviation"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
    Txt,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            "txt" => Ok(Format::Txt),
            other => Err(Error::invalid(format!("unknown format `{other}` (csv, svg, txt)"))),
        }
    }
}

/// Human-readable summary; every value is on its own `key=value` line.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub stability: Option<StabilityReport>,
    pub design: Option<CompensationDesign>,
    pub transient: Option<TransientMetrics>,
    pub notes: Vec<String>,
}

pub enum Artifact<'a> {
    Report(&'a Report),
    Bode(&'a BodeData),
    Waveform(&'a TransientResult),
}

pub fn render(artifact: &Artifact<'_>, format: Format) -> Result<String> {
    match (artifact, format) {
        (Artifact::Report(r), Format::Txt) => Ok(report_text(r)),
        (Artifact::Bode(b), Format::Csv) => bode_csv(b.freqs_hz(), b.mag_db(), b.phase_deg()),
        (Artifact::Bode(b), Format::Svg) => bode_svg(b),
        (Artifact::Bode(b), Format::Txt) => Ok(report_text(&Report {
            title: "loop gain".into(),
            stability: Some(stability::margins(b)),
            ..Report::default()
        })),
        (Artifact::Waveform(w), Format::Csv) => waveform_csv(&w.times_s, &w.v_deviation_volts),
        (Artifact::Waveform(w), Format::Svg) => waveform_svg(w),
        (Artifact::Waveform(w), Format::Txt) => Ok(report_text(&Report {
            title: "load step".into(),
            transient: Some(w.metrics),
            ..Report::default()
        })),
        (Artifact::Report(_), f) => Err(Error::invalid(format!("reports are text only, not {f:?}"))),
    }
}

/// Renders first, so nothing is written if rendering fails.
pub fn emit(artifact: &Artifact<'_>, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let text = render(artifact, format)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn bode_csv(freqs_hz: &[f64], mag_db: &[f64], phase_deg: &[f64]) -> Result<String> {
    if freqs_hz.is_empty() {
        return Err(Error::invalid("refusing to write an empty sweep"));
    }
    if freqs_hz.len() != mag_db.len() || freqs_hz.len() != phase_deg.len() {
        return Err(Error::invalid("bode columns have different lengths"));
    }
    let mut out = BODE_HEADER.join(",");
    out.push('\n');
    for ((f, m), p) in freqs_hz.iter().zip(mag_db).zip(phase_deg) {
        // Display for f64 is the shortest string that parses back to the same value
        let _ = writeln!(out, "{f},{m},{p}");
    }
    Ok(out)
}

pub fn waveform_csv(times_s: &[f64], v: &[f64]) -> Result<String> {
    if times_s.is_empty() || times_s.len() != v.len() {
        return Err(Error::invalid("waveform is empty or ragged"));
    }
    let mut out = WAVEFORM_HEADER.join(",");
    out.push('\n');
    for (t, y) in times_s.iter().zip(v) {
        let _ = writeln!(out, "{t},{y}");
    }
    Ok(out)
}

fn hz_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(";")
}

pub fn report_text(r: &Report) -> String {
    let mut out = String::new();
    if !r.title.is_empty() {
        let _ = writeln!(out, "# {}", r.title);
    }
    if let Some(s) = &r.stability {
        let _ = writeln!(out, "verdict={}", format!("{:?}", s.verdict()).to_lowercase());
        let _ = writeln!(out, "gain_margin_db={:.4}", s.gain_margin_db);
        let _ = writeln!(out, "phase_margin_deg={:.4}", s.phase_margin_deg);
        if let Some(f) = s.gm_at_hz {
            let _ = writeln!(out, "gain_margin_at_hz={f:.6}");
        }
        if let Some(f) = s.pm_at_hz {
            let _ = writeln!(out, "phase_margin_at_hz={f:.6}");
        }
        let _ = writeln!(out, "gain_crossovers_hz={}", hz_list(&s.gain_crossover_hz()));
        let _ = writeln!(out, "phase_crossovers_hz={}", hz_list(&s.phase_crossover_hz()));
        if let Some(p) = s.pole_stable {
            let _ = writeln!(out, "pole_stable={p}");
        }
    }
    if let Some(d) = &r.design {
        let _ = writeln!(out, "r_comp_ohms={}", d.r_comp_ohms);
        let _ = writeln!(out, "c_comp_farads={}", d.c_comp_farads);
        let _ = writeln!(out, "r_int_ohms={}", d.r_int_ohms);
        let _ = writeln!(out, "f0_hz={:.6}", d.f0_hz);
        let _ = writeln!(out, "target_f0_hz={:.6}", d.target_f0_hz);
    }
    if let Some(t) = &r.transient {
        let _ = writeln!(out, "peak_droop_v={:.6e}", t.peak_droop_v);
        let _ = writeln!(out, "steady_state_droop_v={:.6e}", t.steady_state_droop_v);
        let _ = writeln!(out, "ringing_freq_hz={:.3}", t.ringing_freq_hz);
        let _ = writeln!(out, "settling_time_s={:.6e}", t.settling_time_s);
        let _ = writeln!(out, "overshoot_ratio={:.4}", t.overshoot_ratio);
    }
    for n in &r.notes {
        let _ = writeln!(out, "note={n}");
    }
    out
}

const W: f64 = 800.0;
const PANEL_H: f64 = 260.0;
const PAD: f64 = 50.0;

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn finite_range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], ax: &Axis, ay: &Axis, colour: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| format!("{:.2},{:.2}", ax.map(*x), ay.map(*y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
        pts.join(" ")
    );
}

fn frame(out: &mut String, top: f64, label: &str, lo: f64, hi: f64) {
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{top}" width="{}" height="{PANEL_H}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD
    );
    let _ = writeln!(out, r#"<text x="{PAD}" y="{}" font-size="12">{label}</text>"#, top - 6.0);
    let _ = writeln!(
        out,
        r#"<text x="4" y="{}" font-size="10">{hi:.3}</text><text x="4" y="{}" font-size="10">{lo:.3}</text>"#,
        top + 10.0,
        top + PANEL_H
    );
}

fn svg_open(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{height}\" viewBox=\"0 0 {W} {height}\">\n"
    )
}

pub fn bode_svg(b: &BodeData) -> Result<String> {
    if b.is_empty() {
        return Err(Error::invalid("refusing to plot an empty sweep"));
    }
    let lf: Vec<f64> = b.freqs_hz().iter().map(|f| f.log10()).collect();
    let ax = Axis::new(lf[0], lf[lf.len() - 1], PAD, W - PAD);
    let (m_lo, m_hi) = finite_range(b.mag_db());
    let (p_lo, p_hi) = finite_range(b.phase_deg());
    let top2 = 2.0 * PAD + PANEL_H;
    let am = Axis::new(m_lo.min(0.0), m_hi.max(0.0), PAD + PANEL_H, PAD);
    let ap = Axis::new(p_lo.min(-180.0), p_hi.max(-180.0), top2 + PANEL_H, top2);

    let mut out = svg_open(top2 + PANEL_H + PAD);
    frame(&mut out, PAD, "magnitude (dB) vs log10(f / Hz)", am.lo, am.hi);
    frame(&mut out, top2, "phase (deg)", ap.lo, ap.hi);
    for (axis, level) in [(&am, 0.0), (&ap, -180.0)] {
        let y = axis.map(level);
        let _ = writeln!(
            out,
            r##"<line x1="{PAD}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            W - PAD
        );
    }
    polyline(&mut out, &lf, b.mag_db(), &ax, &am, "#1f5fbf");
    polyline(&mut out, &lf, b.phase_deg(), &ax, &ap, "#bf3f1f");
    let r = stability::margins(b);
    for c in &r.gain_crossovers {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="black"/>"#,
            ax.map(c.freq_hz.log10()),
            am.map(0.0)
        );
    }
    for c in &r.phase_crossovers {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="black"/>"#,
            ax.map(c.freq_hz.log10()),
            ap.map(-180.0)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn waveform_svg(w: &TransientResult) -> Result<String> {
    if w.times_s.is_empty() {
        return Err(Error::invalid("refusing to plot an empty waveform"));
    }
    let ax = Axis::new(w.times_s[0], w.times_s[w.times_s.len() - 1], PAD, W - PAD);
    let (lo, hi) = finite_range(&w.v_deviation_volts);
    let ay = Axis::new(lo.min(0.0), hi.max(0.0), PAD + PANEL_H, PAD);
    let mut out = svg_open(PANEL_H + 2.0 * PAD);
    frame(&mut out, PAD, "deviation (V) vs time (s)", ay.lo, ay.hi);
    polyline(&mut out, &w.times_s, &w.v_deviation_volts, &ax, &ay, "#1f5fbf");
    out.push_str("</svg>\n");
    Ok(out)
}
