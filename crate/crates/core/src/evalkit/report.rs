//! CSV and JSON report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evalkit::{MetricsReport, SweepResult};

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// One header row and one metrics row per named experiment.
pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[(&str, &MetricsReport)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "experiment",
        "acc_seen",
        "acc_unseen",
        "harmonic",
        "zsl_acc",
    ])?;
    for (name, r) in rows {
        let zsl = r.zsl_acc.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            name.to_string(),
            r.acc_seen.to_string(),
            r.acc_unseen.to_string(),
            r.harmonic.to_string(),
            zsl,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv(path: impl AsRef<Path>, result: &SweepResult) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([result.axis.name(), "acc_seen", "acc_unseen", "harmonic"])?;
    for row in &result.rows {
        w.write_record([
            row.value.to_string(),
            row.acc_seen.to_string(),
            row.acc_unseen.to_string(),
            row.harmonic.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
