//! Artifact writers. Every float is written with 17 significant digits so
//! that outputs round-trip exactly and compare byte-for-byte.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;
use turnpike_core::DeviationCurve;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot serialize {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub const DEVIATION_HEADER: [&str; 4] = ["t", "err_state", "err_adjoint", "err_control"];

pub const SWEEP_HEADER: [&str; 7] = [
    "T",
    "avg_err_state",
    "avg_err_control",
    "gamma_hat",
    "C_hat",
    "r2",
    "envelope_pass",
];

/// `x` in scientific notation with 17 significant digits; non-finite values
/// print as `inf`, `-inf` or `NaN`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Directory holding the per-horizon artifacts of horizon `t`.
pub fn horizon_dir(root: &Path, t: f64) -> PathBuf {
    root.join(format!("T_{t}"))
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub horizon: f64,
    pub avg_err_state: f64,
    pub avg_err_control: f64,
    pub gamma_hat: f64,
    pub c_hat: f64,
    pub r2: f64,
    pub envelope_pass: bool,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, OutputError> {
    csv::Writer::from_path(path).map_err(|source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let wrap = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_deviation_csv(path: &Path, curve: &DeviationCurve) -> Result<(), OutputError> {
    let rows = (0..curve.times.len()).map(|k| {
        vec![
            fmt_float(curve.times[k]),
            fmt_float(curve.state[k]),
            fmt_float(curve.adjoint[k]),
            fmt_float(curve.control[k]),
        ]
    });
    write_rows(path, &DEVIATION_HEADER, rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), OutputError> {
    let rows = rows.iter().map(|r| {
        vec![
            fmt_float(r.horizon),
            fmt_float(r.avg_err_state),
            fmt_float(r.avg_err_control),
            fmt_float(r.gamma_hat),
            fmt_float(r.c_hat),
            fmt_float(r.r2),
            r.envelope_pass.to_string(),
        ]
    });
    write_rows(path, &SWEEP_HEADER, rows)
}

/// Pretty JSON with floats in 17-digit scientific notation. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ScientificFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let bytes = to_json(value).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, bytes).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Default)]
struct ScientificFormatter(PrettyFormatter<'static>);

impl Formatter for ScientificFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.replace('.', "").len(), 17);
        }
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn json_uses_scientific_floats_and_null_for_infinity() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: f64,
            c: Vec<u32>,
        }
        let bytes = to_json(&S {
            a: 0.5,
            b: f64::INFINITY,
            c: vec![1, 2],
        })
        .unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"a\": 5.0000000000000000e-1"));
        assert!(text.contains("\"b\": null"));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.5));
    }

    #[test]
    fn horizon_directories_use_shortest_form() {
        assert_eq!(horizon_dir(Path::new("o"), 2.0), Path::new("o/T_2"));
        assert_eq!(horizon_dir(Path::new("o"), 0.5), Path::new("o/T_0.5"));
    }
}
