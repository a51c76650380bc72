//! CSV tables: ensemble statistics, exponents, recentered distributions
//! and time series.

use std::io::Write;

use serde::Deserialize;
use trajfrac::ensemble::{RunResult, TimeSeries};
use trajfrac::observables::CellSummary;
use trajfrac::scaling::{ExponentTable, SizedCell};

pub const STATS_HEADER: [&str; 13] = [
    "dynamics",
    "scheme",
    "L",
    "p",
    "q",
    "l_box",
    "mean_ipr",
    "mean_ipr_stderr",
    "typical_ipr",
    "typical_ipr_stderr",
    "mean_var",
    "mean_var_stderr",
    "n_traj",
];

pub const EXPONENTS_HEADER: [&str; 10] = [
    "q",
    "l_box",
    "tau_q",
    "tau_q_stderr",
    "tau_star_q",
    "tau_star_q_stderr",
    "D_q",
    "Delta_q",
    "D0",
    "tau_var",
];

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Round-trip exact float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// One stats.csv record.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StatsRow {
    pub dynamics: String,
    pub scheme: String,
    #[serde(rename = "L")]
    pub length: usize,
    pub p: f64,
    pub q: f64,
    pub l_box: usize,
    pub mean_ipr: f64,
    pub mean_ipr_stderr: f64,
    pub typical_ipr: f64,
    pub typical_ipr_stderr: f64,
    pub mean_var: f64,
    pub mean_var_stderr: f64,
    pub n_traj: u64,
}

impl StatsRow {
    pub fn from_cell(dynamics: &str, scheme: &str, p: f64, sized: &SizedCell) -> Self {
        let c = &sized.cell;
        Self {
            dynamics: dynamics.to_string(),
            scheme: scheme.to_string(),
            length: sized.length,
            p,
            q: c.q,
            l_box: c.l_box,
            mean_ipr: c.mean_ipr,
            mean_ipr_stderr: c.mean_ipr_stderr,
            typical_ipr: c.typical_ipr,
            typical_ipr_stderr: c.typical_ipr_stderr,
            mean_var: c.mean_var,
            mean_var_stderr: c.mean_var_stderr,
            n_traj: c.count,
        }
    }

    /// The ensemble cell, with `<ln IPR>` recovered from the typical IPR.
    pub fn to_cell(&self) -> SizedCell {
        SizedCell {
            length: self.length,
            cell: CellSummary {
                q: self.q,
                l_box: self.l_box,
                mean_ipr: self.mean_ipr,
                mean_ipr_stderr: self.mean_ipr_stderr,
                typical_ipr: self.typical_ipr,
                typical_ipr_stderr: self.typical_ipr_stderr,
                mean_log_ipr: self.typical_ipr.ln(),
                mean_log_ipr_stderr: self.typical_ipr_stderr / self.typical_ipr,
                mean_var: self.mean_var,
                mean_var_stderr: self.mean_var_stderr,
                count: self.n_traj,
            },
        }
    }

    fn record(&self) -> [String; 13] {
        [
            self.dynamics.clone(),
            self.scheme.clone(),
            self.length.to_string(),
            fmt_f64(self.p),
            fmt_f64(self.q),
            self.l_box.to_string(),
            fmt_f64(self.mean_ipr),
            fmt_f64(self.mean_ipr_stderr),
            fmt_f64(self.typical_ipr),
            fmt_f64(self.typical_ipr_stderr),
            fmt_f64(self.mean_var),
            fmt_f64(self.mean_var_stderr),
            self.n_traj.to_string(),
        ]
    }

    fn check(&self) -> Result<(), String> {
        if self.length < 2 {
            return Err(format!("L = {} must be at least 2", self.length));
        }
        if self.l_box == 0 || !self.length.is_multiple_of(self.l_box) {
            return Err(format!("l_box = {} does not divide L = {}", self.l_box, self.length));
        }
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(format!("q = {} must be positive", self.q));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(format!("p = {} outside [0, 1]", self.p));
        }
        if self.n_traj == 0 {
            return Err("n_traj must be positive".into());
        }
        Ok(())
    }
}

/// Stats rows of a run, ordered by length, box size and q.
pub fn stats_rows(result: &RunResult) -> Vec<StatsRow> {
    let spec = &result.spec;
    result
        .sizes
        .iter()
        .flat_map(|size| {
            size.stats.summaries().into_iter().map(move |cell| {
                StatsRow::from_cell(
                    spec.dynamics.name(),
                    spec.scheme.name(),
                    size.rate,
                    &SizedCell {
                        length: size.length,
                        cell,
                    },
                )
            })
        })
        .collect()
}

pub fn write_stats<W: Write>(out: W, rows: &[StatsRow]) -> Result<(), TableError> {
    let mut w = writer(out);
    w.write_record(STATS_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Parses stats.csv; schema violations are reported with 1-based data row
/// numbers.
pub fn parse_stats(data: &[u8]) -> Result<Vec<StatsRow>, TableError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let header = reader.headers()?.clone();
    if header.iter().ne(STATS_HEADER) {
        return Err(TableError::Header {
            expected: STATS_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<StatsRow>().enumerate() {
        let row = i as u64 + 1;
        let parsed = record.map_err(|e| TableError::Row {
            row,
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        parsed.check().map_err(|message| TableError::Row { row, message })?;
        rows.push(parsed);
    }
    Ok(rows)
}

pub fn write_exponents<W: Write>(out: W, table: Option<&ExponentTable>) -> Result<(), TableError> {
    let mut w = writer(out);
    w.write_record(EXPONENTS_HEADER)?;
    for r in table.map(|t| t.rows.as_slice()).unwrap_or_default() {
        w.write_record([
            fmt_f64(r.q),
            r.l_box.to_string(),
            fmt_f64(r.tau_q),
            fmt_f64(r.tau_q_stderr),
            fmt_f64(r.tau_star_q),
            fmt_f64(r.tau_star_q_stderr),
            fmt_opt(r.d_q),
            fmt_f64(r.delta_q),
            fmt_f64(r.d0),
            fmt_opt(r.tau_var),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean recentered distributions, `index` running over `-L/2+1 ..= L/2`.
pub fn write_recentered<W: Write>(out: W, result: &RunResult) -> Result<(), TableError> {
    let mut w = writer(out);
    w.write_record(["L", "index", "mean_p"])?;
    for size in &result.sizes {
        let Some(dist) = &size.recentered else { continue };
        let origin = (size.length / 2) as i64 - 1;
        for (k, p) in dist.iter().enumerate() {
            w.write_record([
                size.length.to_string(),
                (k as i64 - origin).to_string(),
                fmt_f64(*p),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_time_series<W: Write>(out: W, series: &[TimeSeries]) -> Result<(), TableError> {
    let mut w = writer(out);
    w.write_record([
        "L",
        "t",
        "q",
        "l_box",
        "mean_ipr",
        "mean_ipr_stderr",
        "typical_ipr",
        "mean_var",
        "mean_var_stderr",
    ])?;
    for s in series {
        for (t, stats) in s.times.iter().zip(&s.stats) {
            for c in stats.summaries() {
                w.write_record([
                    s.length.to_string(),
                    t.to_string(),
                    fmt_f64(c.q),
                    c.l_box.to_string(),
                    fmt_f64(c.mean_ipr),
                    fmt_f64(c.mean_ipr_stderr),
                    fmt_f64(c.typical_ipr),
                    fmt_f64(c.mean_var),
                    fmt_f64(c.mean_var_stderr),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StatsRow {
        StatsRow {
            dynamics: "quantum_haar".into(),
            scheme: "projective".into(),
            length: 64,
            p: 1.0 / 64.0,
            q: 2.0,
            l_box: 1,
            mean_ipr: 0.123_456_789_012_345_68,
            mean_ipr_stderr: 1e-3 / 3.0,
            typical_ipr: std::f64::consts::PI / 100.0,
            typical_ipr_stderr: f64::NAN,
            mean_var: 12.5,
            mean_var_stderr: 0.1,
            n_traj: 4000,
        }
    }

    #[test]
    fn stats_round_trip_is_exact() {
        let row = sample();
        let mut buf = Vec::new();
        write_stats(&mut buf, std::slice::from_ref(&row)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("dynamics,scheme,L,p,q,l_box,"));
        assert!(!text.contains('\r'));
        let back = parse_stats(&buf).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].mean_ipr.to_bits(), row.mean_ipr.to_bits());
        assert_eq!(back[0].p.to_bits(), row.p.to_bits());
        assert!(back[0].typical_ipr_stderr.is_nan());
        let mut again = Vec::new();
        write_stats(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn schema_errors_name_the_row() {
        let mut buf = Vec::new();
        write_stats(&mut buf, &[sample(), sample()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let bad = text.replacen(",64,", ",6x,", 1);
        let err = parse_stats(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.starts_with("row 1:"), "{err}");
        let mut rows = vec![sample(), sample()];
        rows[1].l_box = 3;
        let mut buf = Vec::new();
        write_stats(&mut buf, &rows).unwrap();
        let err = parse_stats(&buf).unwrap_err().to_string();
        assert!(err.starts_with("row 2:"), "{err}");
        assert!(matches!(parse_stats(b"a,b\n1,2\n"), Err(TableError::Header { .. })));
    }

    #[test]
    fn cell_round_trip() {
        let row = sample();
        let cell = row.to_cell();
        assert!((cell.cell.mean_log_ipr.exp() - row.typical_ipr).abs() < 1e-15);
        assert_eq!(StatsRow::from_cell("quantum_haar", "projective", row.p, &cell).mean_ipr, row.mean_ipr);
    }
}
