//! Monte Carlo experiments and their file outputs.

pub mod batch_io;
pub mod config;
pub mod experiment;
pub mod plot;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::{Estimator, ExperimentConfig, RmseSources};
pub use experiment::{run_experiment, run_sweep, ResultRow, ResultTable};
pub use plot::{emit_plot, PlotKind};
pub use table::{read_csv_file, write_csv_file};

use crate::error::Result;

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    write_csv_file(table, path)
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub resolution_svg: PathBuf,
    pub rmse_svg: PathBuf,
    pub rmse_crb_svg: PathBuf,
}

impl OutputFiles {
    pub fn under(dir: &Path, name: &str) -> Self {
        Self {
            csv: dir.join(format!("{name}.csv")),
            resolution_svg: dir.join(format!("{name}.svg")),
            rmse_svg: dir.join(format!("{name}_rmse.svg")),
            rmse_crb_svg: dir.join(format!("{name}_rmse_crb.svg")),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.csv, &self.resolution_svg, &self.rmse_svg, &self.rmse_crb_svg]
    }
}

/// Writes `{name}.csv`, `{name}.svg` (resolution), `{name}_rmse.svg` and
/// `{name}_rmse_crb.svg` under `dir`.
pub fn write_outputs(table: &ResultTable, dir: &Path, name: &str) -> Result<OutputFiles> {
    let files = OutputFiles::under(dir, name);
    emit_csv(table, &files.csv)?;
    emit_plot(table, PlotKind::Resolution, &files.resolution_svg)?;
    emit_plot(table, PlotKind::Rmse, &files.rmse_svg)?;
    emit_plot(table, PlotKind::RmseDbWithCrb, &files.rmse_crb_svg)?;
    Ok(files)
}
