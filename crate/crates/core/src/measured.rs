//! Import of instrument-measured loop gain as `freq_hz,mag_db,phase_deg` CSV.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stability::{self, BodeData, StabilityReport};

pub const BODE_HEADER: [&str; 3] = ["freq_hz", "mag_db", "phase_deg"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredRow {
    pub freq_hz: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredLoopGain {
    rows: Vec<MeasuredRow>,
}

impl MeasuredLoopGain {
    pub fn rows(&self) -> &[MeasuredRow] {
        &self.rows
    }

    /// Phase is expected to be continuous already but is unwrapped again anyway.
    pub fn to_bode(&self) -> Result<BodeData> {
        BodeData::new(
            self.rows.iter().map(|r| r.freq_hz).collect(),
            self.rows.iter().map(|r| r.mag_db).collect(),
            self.rows.iter().map(|r| r.phase_deg).collect(),
        )
    }

    pub fn margins(&self) -> Result<StabilityReport> {
        Ok(stability::margins(&self.to_bode()?))
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_measured(text: &str) -> Result<MeasuredLoopGain> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(BODE_HEADER) => {}
        Some(Ok(h)) => {
            return Err(parse_err(
                1,
                format!("expected header `{}`, found `{}`", BODE_HEADER.join(","), h.iter().collect::<Vec<_>>().join(",")),
            ))
        }
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        None => return Err(parse_err(1, "empty file")),
    }
    let mut rows: Vec<MeasuredRow> = Vec::new();
    let mut last_line = 1;
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(last_line + 1, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(last_line + 1, |p| p.line());
        last_line = line;
        if rec.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let field = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("`{}` in column {}: {e}", &rec[i], BODE_HEADER[i])))
        };
        let row = MeasuredRow {
            freq_hz: field(0)?,
            mag_db: field(1)?,
            phase_deg: field(2)?,
        };
        if !(row.freq_hz > 0.0 && row.freq_hz.is_finite()) {
            return Err(parse_err(line, "frequency must be positive and finite"));
        }
        if row.mag_db.is_nan() || !row.phase_deg.is_finite() {
            return Err(parse_err(line, "magnitude and phase must be numbers"));
        }
        if rows.last().is_some_and(|p| row.freq_hz <= p.freq_hz) {
            return Err(Error::NonMonotonicFrequency { line });
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(parse_err(last_line, "at least two data rows are required"));
    }
    Ok(MeasuredLoopGain { rows })
}

pub fn import_measured(path: impl AsRef<Path>) -> Result<MeasuredLoopGain> {
    parse_measured(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let m = parse_measured("freq_hz,mag_db,phase_deg\n10,20,-90\n100,0,-135\n1000,-20,-170\n").unwrap();
        assert_eq!(m.rows().len(), 3);
        let r = m.margins().unwrap();
        assert_eq!(r.gain_crossovers.len(), 1);
        assert!((r.phase_margin_deg - 45.0).abs() < 1e-12);
    }

    #[test]
    fn header_must_match() {
        assert!(matches!(
            parse_measured("f,mag_db,phase_deg\n1,0,0\n2,0,0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn single_row_refused() {
        assert!(matches!(
            parse_measured("freq_hz,mag_db,phase_deg\n1,0,0\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bad_number_reports_line() {
        match parse_measured("freq_hz,mag_db,phase_deg\n1,0,0\n2,x,0\n3,0,0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn descending_frequency() {
        assert!(matches!(
            parse_measured("freq_hz,mag_db,phase_deg\n1,0,0\n3,0,0\n2,0,0\n"),
            Err(Error::NonMonotonicFrequency { line: 4 })
        ));
    }
}
