use super::{ClosedLoopRecord, Dataset, DatasetSchema, KPI_NAMES};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

const ID_COLUMNS: [&str; 3] = ["instance_id", "scenario_id", "timestamp"];
const FLAG_COLUMNS: [&str; 2] = ["converged", "violation"];

fn header(schema: &DatasetSchema) -> Vec<String> {
    ID_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(schema.feature_names.iter().cloned())
        .chain(schema.target_names())
        .chain(KPI_NAMES.iter().chain(&FLAG_COLUMNS).map(|s| s.to_string()))
        .collect()
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the records; values carry 17 significant digits so reading back is bit-exact.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header(&dataset.schema))?;
    for r in &dataset.records {
        let mut row = vec![r.instance_id.to_string(), r.scenario_id.to_string(), real(r.timestamp)];
        row.extend(r.features.iter().chain(&r.target).map(|&v| real(v)));
        row.extend([r.k1, r.k2_ms, r.k2_iters].map(real));
        row.push((r.converged as u8).to_string());
        row.push((r.violation as u8).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records laid out by `schema`; column order in the file may differ.
pub fn read_csv(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let head = rdr.headers()?.clone();
    if head.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no header", path.display())));
    }
    let expected = header(schema);
    let cols = expected
        .iter()
        .map(|name| {
            head.iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = schema.feature_names.len();
    let np = schema.n_predict();
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |k: usize| -> &str { rec.get(cols[k]).unwrap_or("") };
        let parse_err = |k: usize, message: String| Error::Parse {
            row,
            column: expected[k].clone(),
            message,
        };
        let num = |k: usize| -> Result<f64> {
            let v: f64 = cell(k)
                .trim()
                .parse()
                .map_err(|e: std::num::ParseFloatError| parse_err(k, e.to_string()))?;
            if v.is_nan() {
                return Err(parse_err(k, "NaN".into()));
            }
            Ok(v)
        };
        let int = |k: usize| -> Result<u64> {
            cell(k)
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| parse_err(k, e.to_string()))
        };
        let flag = |k: usize| -> Result<bool> {
            match cell(k).trim() {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                other => Err(parse_err(k, format!("invalid flag `{other}`"))),
            }
        };
        let base = 3;
        let features = (base..base + nf).map(num).collect::<Result<Vec<_>>>()?;
        let target = (base + nf..base + nf + np).map(num).collect::<Result<Vec<_>>>()?;
        let k = base + nf + np;
        records.push(ClosedLoopRecord {
            instance_id: int(0)?,
            scenario_id: int(1)?,
            timestamp: num(2)?,
            features,
            target,
            k1: num(k)?,
            k2_ms: num(k + 1)?,
            k2_iters: num(k + 2)?,
            converged: flag(k + 3)?,
            violation: flag(k + 4)?,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("{} holds no records", path.display())));
    }
    Dataset::new(schema.clone(), records)
}

/// `data.csv` → `data.schema.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("schema.json")
}

/// CSV plus the schema sidecar.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    write_csv(dataset, path)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(sidecar_path(path))?), &dataset.schema)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let side = sidecar_path(path);
    let schema: DatasetSchema = serde_json::from_reader(BufReader::new(
        File::open(&side).map_err(|e| Error::Schema(format!("{}: {e}", side.display())))?,
    ))?;
    schema.layout.validate()?;
    read_csv(path, &schema)
}
