use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use super::Solution;
use crate::error::{Error, Result};

/// One sweep point. Failed points keep their row with NaN values and an
/// explanatory `status`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    /// Swept key, empty for a single run.
    pub parameter: String,
    pub value: Option<f64>,
    #[serde(deserialize_with = "nullable")]
    pub eta_o: f64,
    #[serde(deserialize_with = "nullable")]
    pub eta_tr: f64,
    #[serde(deserialize_with = "nullable")]
    pub eta_rt: f64,
    #[serde(deserialize_with = "nullable")]
    pub p_out: f64,
    #[serde(deserialize_with = "nullable")]
    pub p_ch: f64,
    #[serde(deserialize_with = "nullable")]
    pub p_com: f64,
    #[serde(deserialize_with = "nullable")]
    pub p_e: f64,
    #[serde(deserialize_with = "nullable")]
    pub snr_db: f64,
    #[serde(deserialize_with = "nullable")]
    pub capacity: f64,
    /// D4σ diameter at the gain plane, meters.
    #[serde(deserialize_with = "nullable")]
    pub beam_diameter: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(deserialize_with = "nullable")]
    pub eta_lg: f64,
    #[serde(deserialize_with = "nullable")]
    pub eta_pose: f64,
    #[serde(deserialize_with = "nullable")]
    pub p_th: f64,
    /// cm².
    #[serde(deserialize_with = "nullable")]
    pub a_b: f64,
    #[serde(deserialize_with = "nullable")]
    pub residual: f64,
    /// `ok`, `not_converged`, `mode_collapse` or `error: <message>`.
    pub status: String,
}

pub const COLUMNS: [&str; 20] = [
    "parameter",
    "value",
    "eta_o",
    "eta_tr",
    "eta_rt",
    "p_out",
    "p_ch",
    "p_com",
    "p_e",
    "snr_db",
    "capacity",
    "beam_diameter",
    "iterations",
    "converged",
    "eta_lg",
    "eta_pose",
    "p_th",
    "a_b",
    "residual",
    "status",
];

fn nullable<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

impl PartialEq for ResultRow {
    fn eq(&self, o: &Self) -> bool {
        let value = match (self.value, o.value) {
            (Some(a), Some(b)) => same(a, b),
            (a, b) => a.is_none() && b.is_none(),
        };
        value
            && self.parameter == o.parameter
            && self.iterations == o.iterations
            && self.converged == o.converged
            && self.status == o.status
            && self
                .floats()
                .iter()
                .zip(o.floats())
                .all(|(&a, b)| same(a, b))
    }
}

/// Rounds to nine significant digits.
fn sig9(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().unwrap_or(x)
    } else {
        x
    }
}

impl ResultRow {
    pub(crate) fn empty(parameter: &str, value: Option<f64>) -> Self {
        let nan = f64::NAN;
        ResultRow {
            parameter: parameter.to_string(),
            value,
            eta_o: nan,
            eta_tr: nan,
            eta_rt: nan,
            p_out: nan,
            p_ch: nan,
            p_com: nan,
            p_e: nan,
            snr_db: nan,
            capacity: nan,
            beam_diameter: nan,
            iterations: 0,
            converged: false,
            eta_lg: nan,
            eta_pose: nan,
            p_th: nan,
            a_b: nan,
            residual: nan,
            status: String::new(),
        }
    }

    pub(crate) fn failed(parameter: &str, value: f64, e: &Error) -> Self {
        let mut row = ResultRow::empty(parameter, Some(value));
        row.status = format!("error: {e}");
        row
    }

    pub(crate) fn fill(&mut self, sol: &Solution) {
        let s = &sol.steady;
        let b = &sol.budget;
        self.eta_o = s.eta_o;
        self.eta_tr = s.eta_tr;
        self.eta_rt = s.eta_rt;
        self.eta_lg = s.eta_lg;
        self.eta_pose = s.eta_pose;
        self.p_out = b.p_out;
        self.p_ch = b.p_ch;
        self.p_com = b.p_com;
        self.p_e = b.p_e;
        self.snr_db = b.snr_db();
        self.capacity = b.capacity;
        self.beam_diameter = sol.beam_diameter;
        self.p_th = b.p_th;
        self.a_b = b.a_b;
        self.iterations = s.iterations;
        self.converged = s.converged;
        self.residual = s.residual;
        self.status = if s.converged { "ok" } else { "not_converged" }.into();
    }

    pub(crate) fn collapse(&mut self, iterations: usize) {
        for x in [
            &mut self.eta_o,
            &mut self.eta_tr,
            &mut self.eta_rt,
            &mut self.eta_lg,
            &mut self.p_out,
            &mut self.p_ch,
            &mut self.p_com,
            &mut self.p_e,
            &mut self.capacity,
        ] {
            *x = 0.0;
        }
        self.snr_db = f64::NEG_INFINITY;
        self.p_th = f64::INFINITY;
        self.iterations = iterations;
        self.converged = false;
        self.status = "mode_collapse".into();
    }

    fn floats(&self) -> [f64; 16] {
        [
            self.eta_o,
            self.eta_tr,
            self.eta_rt,
            self.p_out,
            self.p_ch,
            self.p_com,
            self.p_e,
            self.snr_db,
            self.capacity,
            self.beam_diameter,
            self.eta_lg,
            self.eta_pose,
            self.p_th,
            self.a_b,
            self.residual,
            self.value.unwrap_or(0.0),
        ]
    }

    /// Copy with every float rounded to the nine significant digits written to files.
    pub fn rounded(&self) -> ResultRow {
        let mut r = self.clone();
        r.value = r.value.map(sig9);
        for x in [
            &mut r.eta_o,
            &mut r.eta_tr,
            &mut r.eta_rt,
            &mut r.p_out,
            &mut r.p_ch,
            &mut r.p_com,
            &mut r.p_e,
            &mut r.snr_db,
            &mut r.capacity,
            &mut r.beam_diameter,
            &mut r.eta_lg,
            &mut r.eta_pose,
            &mut r.p_th,
            &mut r.a_b,
            &mut r.residual,
        ] {
            *x = sig9(*x);
        }
        r
    }

    fn record(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.8e}");
        let mut out = vec![
            self.parameter.clone(),
            self.value.map(f).unwrap_or_default(),
        ];
        out.extend(
            [
                self.eta_o,
                self.eta_tr,
                self.eta_rt,
                self.p_out,
                self.p_ch,
                self.p_com,
                self.p_e,
                self.snr_db,
                self.capacity,
                self.beam_diameter,
            ]
            .map(f),
        );
        out.push(self.iterations.to_string());
        out.push(self.converged.to_string());
        out.extend(
            [
                self.eta_lg,
                self.eta_pose,
                self.p_th,
                self.a_b,
                self.residual,
            ]
            .map(f),
        );
        out.push(self.status.clone());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(COLUMNS).map_err(csv_err)?;
            for row in rows {
                w.write_record(row.record()).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let rounded: Vec<ResultRow> = rows.iter().map(ResultRow::rounded).collect();
            serde_json::to_writer_pretty(&mut out, &rounded)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn emit_results(
    rows: &[ResultRow],
    format: Format,
    destination: impl AsRef<Path>,
) -> Result<()> {
    let file = std::fs::File::create(destination)?;
    write_results(rows, format, std::io::BufWriter::new(file))
}

pub fn read_results(path: impl AsRef<Path>, format: Format) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path)?;
    match format {
        Format::Csv => csv::Reader::from_reader(file)
            .deserialize()
            .map(|r| r.map_err(csv_err))
            .collect(),
        Format::Json => Ok(serde_json::from_reader(std::io::BufReader::new(file))?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64) -> ResultRow {
        let mut r = ResultRow::empty("layout.receiver.pose.dy", Some(v));
        r.eta_o = 0.123456789123;
        r.p_out = 59.92;
        r.snr_db = f64::NEG_INFINITY;
        r.iterations = 17;
        r.converged = true;
        r.status = "error: a, b".into();
        r
    }

    #[test]
    fn empty_outputs() {
        let mut csv = Vec::new();
        write_results(&[], Format::Csv, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), COLUMNS.join(",") + "\n");
        let mut json = Vec::new();
        write_results(&[], Format::Json, &mut json).unwrap();
        assert_eq!(String::from_utf8(json).unwrap().trim(), "[]");
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.123456789123), 0.123456789);
        assert_eq!(sig9(-1234567891234.0), -1234567890000.0);
        assert!(sig9(f64::NAN).is_nan());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<ResultRow> = (0..11).map(|i| row(i as f64 * 1e-3 - 5e-3)).collect();
        for format in [Format::Csv, Format::Json] {
            let path = dir.path().join(format!("rows.{format}"));
            emit_results(&rows, format, &path).unwrap();
            let back = read_results(&path, format).unwrap();
            let mut expected: Vec<ResultRow> = rows.iter().map(ResultRow::rounded).collect();
            if format == Format::Json {
                // JSON has no infinities; they are written as null.
                for r in &mut expected {
                    r.snr_db = f64::NAN;
                }
            }
            assert_eq!(back, expected, "{format}");
        }
        let text = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert_eq!(text.lines().count(), 12);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
    }
}
