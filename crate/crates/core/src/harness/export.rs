use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{CheckRow, CurvePoint, CurveRow, HarnessError};
use crate::driver::RunRecord;

pub const RUN_RECORDS_FILE: &str = "run_records.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKS_FILE: &str = "checks.csv";

const CURVE_HEADER: [&str; 8] = [
    "epsilon",
    "labels_active_med",
    "labels_active_q1",
    "labels_active_q3",
    "labels_passive_med",
    "labels_passive_q1",
    "labels_passive_q3",
    "censored",
];
const CHECKS_HEADER: [&str; 6] = ["check_name", "parameter", "observed", "bound_or_target", "sigma", "pass"];

/// Provenance stamped into the CSV comment line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputHeader {
    pub config_digest: String,
    pub seed: u64,
}

impl OutputHeader {
    fn comment(&self) -> String {
        format!("# config_digest={} seed={}\n", self.config_digest, self.seed)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// `Display` of `f64` is the shortest string that parses back to the same
/// value, so CSV floats round-trip exactly.
fn num(v: f64) -> String {
    v.to_string()
}

/// One JSON object per line, each carrying the config digest.
pub fn write_run_records(path: &Path, records: &[RunRecord<f64>], header: &OutputHeader) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for rec in records {
        let line = rec.clone().with_digest(header.config_digest.clone()).to_json_line();
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

fn csv_writer(path: &Path, header: &OutputHeader) -> Result<csv::Writer<File>, HarnessError> {
    let mut file = File::create(path).map_err(io_err(path))?;
    file.write_all(header.comment().as_bytes()).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint], header: &OutputHeader) -> Result<(), HarnessError> {
    let mut w = csv_writer(path, header)?;
    w.write_record(CURVE_HEADER).map_err(csv_err(path))?;
    for p in curve {
        let r = p.row();
        w.write_record([
            num(r.epsilon),
            num(r.labels_active_med),
            num(r.labels_active_q1),
            num(r.labels_active_q3),
            num(r.labels_passive_med),
            num(r.labels_passive_q1),
            num(r.labels_passive_q3),
            r.censored.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_checks_csv(path: &Path, rows: &[CheckRow], header: &OutputHeader) -> Result<(), HarnessError> {
    let mut w = csv_writer(path, header)?;
    w.write_record(CHECKS_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.check_name.clone(),
            r.parameter.clone(),
            num(r.observed),
            r.bound_or_target.clone(),
            num(r.sigma),
            r.pass.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>, HarnessError> {
    csv_reader(path)?
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err(path))
}

pub fn read_checks_csv(path: &Path) -> Result<Vec<CheckRow>, HarnessError> {
    csv_reader(path)?
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err(path))
}

/// Paths written by [`export_results`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub run_records: PathBuf,
    pub curve: PathBuf,
    pub checks: PathBuf,
}

/// Writes all three result files into `dir`, creating it if needed. Empty
/// inputs still produce the files (with headers for the CSVs).
pub fn export_results(
    records: &[RunRecord<f64>],
    curve: &[CurvePoint],
    checks: &[CheckRow],
    dir: &Path,
    header: &OutputHeader,
) -> Result<ExportPaths, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths = ExportPaths {
        run_records: dir.join(RUN_RECORDS_FILE),
        curve: dir.join(CURVE_FILE),
        checks: dir.join(CHECKS_FILE),
    };
    write_run_records(&paths.run_records, records, header)?;
    write_curve_csv(&paths.curve, curve, header)?;
    write_checks_csv(&paths.checks, checks, header)?;
    Ok(paths)
}
