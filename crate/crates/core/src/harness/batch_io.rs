//! JSON files holding a snapshot batch and the scenario that produced it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, SnapshotBatch, SourceScenario};
use crate::error::{DoaError, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchFile {
    seed: u64,
    num_sensors: usize,
    spacing: f64,
    wavelength: f64,
    doas_deg: Vec<f64>,
    source_powers: Vec<f64>,
    noise_variance: f64,
    known_indices: Vec<usize>,
    /// `num_sensors` rows of `num_snapshots` `[re, im]` pairs.
    data: Vec<Vec<[f64; 2]>>,
}

pub fn batch_to_json(batch: &SnapshotBatch) -> Result<String> {
    let g = &batch.geometry;
    let sc = &batch.scenario;
    let file = BatchFile {
        seed: batch.seed,
        num_sensors: g.num_sensors(),
        spacing: g.spacing(),
        wavelength: g.wavelength(),
        doas_deg: sc.doas().iter().map(|d| d.to_degrees()).collect(),
        source_powers: sc.source_powers().to_vec(),
        noise_variance: sc.noise_variance(),
        known_indices: sc.known_indices().to_vec(),
        data: batch
            .data
            .row_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| DoaError::Io(e.into()))
}

pub fn batch_from_json(text: &str) -> Result<SnapshotBatch> {
    let file: BatchFile =
        serde_json::from_str(text).map_err(|e| DoaError::InvalidArgument(format!("malformed batch file: {e}")))?;
    let geometry = ArrayGeometry::new(file.num_sensors, file.spacing, file.wavelength)?;
    if file.data.len() != file.num_sensors {
        return Err(DoaError::InvalidArgument(format!(
            "batch has {} rows for {} sensors",
            file.data.len(),
            file.num_sensors
        )));
    }
    let n = file.data.first().map_or(0, Vec::len);
    if file.data.iter().any(|r| r.len() != n) {
        return Err(DoaError::InvalidArgument("ragged snapshot rows".into()));
    }
    let scenario = SourceScenario::new(
        file.doas_deg.iter().map(|d| d.to_radians()).collect(),
        file.source_powers,
        file.noise_variance,
        n,
        file.known_indices,
    )?;
    let data = CMatrix::from_fn(file.num_sensors, n, |r, c| {
        let [re, im] = file.data[r][c];
        C64::new(re, im)
    });
    Ok(SnapshotBatch {
        data,
        seed: file.seed,
        scenario,
        geometry,
    })
}

pub fn write_batch(batch: &SnapshotBatch, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, batch_to_json(batch)?)?;
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<SnapshotBatch> {
    batch_from_json(&std::fs::read_to_string(path)?)
}
