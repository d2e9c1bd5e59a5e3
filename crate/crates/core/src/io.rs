//! File formats: dataset CSV with a TOML provenance sidecar, mixing-measure
//! TOML files, fit records, and number formatting for numeric outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, MixingMeasure, Provenance};
use crate::vi::{FitConfig, FitResult, PriorConfig, VariationalState};

/// Formats `v` with 17 significant digits, or with `round` decimals when given.
pub fn fmt_f64(v: f64, round: Option<usize>) -> String {
    match round {
        Some(dp) => format!("{v:.dp$}"),
        None => format!("{v:.16e}"),
    }
}

/// Writes `x1..xd, y, z` rows; `z` is the recorded 0-based expert label or −1.
pub fn dataset_to_csv(data: &Dataset<f64>, round: Option<usize>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    header.push("z".into());
    w.write_record(&header)?;
    let z = data.provenance.assignments.as_ref();
    for (i, (x, y)) in data.rows().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_f64(*v, round)).collect();
        rec.push(fmt_f64(*y, round));
        rec.push(z.map(|z| z[i] as i64).unwrap_or(-1).to_string());
        w.write_record(&rec)?;
    }
    finish_csv(w)
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses a dataset CSV. Columns must be `x1..xd, y` with an optional
/// trailing `z`; labels are kept only when every row has `z ≥ 0`.
pub fn dataset_from_csv(text: &str) -> Result<Dataset<f64>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let has_z = header.last().map(|h| h == "z").unwrap_or(false);
    let d = header.len() - 1 - usize::from(has_z);
    let expected: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    if d == 0 || header[..d + 1] != expected[..] {
        return Err(Error::Parse(format!(
            "dataset header must be x1..xd,y[,z], got {}",
            header.join(",")
        )));
    }
    let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: column {}: {e}", line + 1, header[i])))
        };
        for i in 0..d {
            x.push(num(i)?);
        }
        y.push(num(d)?);
        if has_z {
            z.push(num(d + 1)? as i64);
        }
    }
    let assignments = if has_z && !z.is_empty() && z.iter().all(|v| *v >= 0) {
        Some(z.iter().map(|v| *v as usize).collect())
    } else {
        None
    };
    let data = Dataset::new(d, x, y)?;
    Ok(data.with_provenance(Provenance {
        dgp: "external".into(),
        seed: None,
        assignments,
        truth: None,
    }))
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("provenance.toml")
}

#[derive(Serialize, Deserialize)]
struct ProvenanceFile {
    provenance: Provenance,
}

/// Writes the CSV and a `<stem>.provenance.toml` sidecar; returns the sidecar path.
pub fn write_dataset(path: &Path, data: &Dataset<f64>, round: Option<usize>) -> Result<PathBuf> {
    fs::write(path, dataset_to_csv(data, round)?)?;
    let side = sidecar_path(path);
    let mut prov = data.provenance.clone();
    // labels already live in the CSV
    prov.assignments = None;
    fs::write(&side, to_toml(&ProvenanceFile { provenance: prov })?)?;
    Ok(side)
}

/// Reads a dataset CSV and, when present, its provenance sidecar.
pub fn read_dataset(path: &Path) -> Result<Dataset<f64>> {
    let mut data = dataset_from_csv(&fs::read_to_string(path)?)?;
    let side = sidecar_path(path);
    if side.exists() {
        let pf: ProvenanceFile = from_toml(&fs::read_to_string(side)?)?;
        let assignments = data.provenance.assignments.take();
        data.provenance = Provenance {
            assignments,
            ..pf.provenance
        };
    }
    Ok(data)
}

pub fn to_toml<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| Error::Parse(e.to_string()))
}

pub fn from_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn measure_to_toml(g: &MixingMeasure<f64>) -> Result<String> {
    to_toml(g)
}

pub fn measure_from_toml(text: &str) -> Result<MixingMeasure<f64>> {
    from_toml(text)
}

pub fn read_measure(path: &Path) -> Result<MixingMeasure<f64>> {
    measure_from_toml(&fs::read_to_string(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Structured record of a fit: every variational parameter, the ELBO trace
/// kept at every 100th iteration (and the last), the final ELBO, the point
/// estimate and the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub k: usize,
    pub final_elbo: f64,
    pub final_elbo_std_error: f64,
    pub trace_stride: usize,
    pub trace_iterations: Vec<usize>,
    pub elbo_trace: Vec<f64>,
    pub config: FitConfig,
    pub prior: PriorConfig,
    pub variational: VariationalState,
    pub point_estimate: MixingMeasure<f64>,
}

pub const TRACE_STRIDE: usize = 100;

impl FitRecord {
    pub fn new(result: &FitResult, config: &FitConfig, prior: &PriorConfig) -> Self {
        let n = result.elbo_trace.len();
        let mut idx: Vec<usize> = (0..n).step_by(TRACE_STRIDE).collect();
        if n > 0 && idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        Self {
            k: result.final_state.k,
            final_elbo: result.final_elbo,
            final_elbo_std_error: result.final_elbo_std_error,
            trace_stride: TRACE_STRIDE,
            elbo_trace: idx.iter().map(|&i| result.elbo_trace[i]).collect(),
            trace_iterations: idx,
            config: config.clone(),
            prior: *prior,
            variational: result.final_state.clone(),
            point_estimate: result.point_estimate.clone(),
        }
    }
}
