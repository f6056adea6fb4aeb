use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::json;

use crate::config::{ExperimentConfig, Format};
use crate::error::{io_error, CliResult};
use crate::experiments::RunOutput;

pub fn render(out: &RunOutput, format: Format) -> String {
    match format {
        Format::Csv => out.table.to_csv(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.table.to_json()).expect("table json");
            s.push('\n');
            s
        }
    }
}

/// `<out>.meta.json`
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn sidecar(cfg: &ExperimentConfig, out: &RunOutput, wall: Duration) -> serde_json::Value {
    json!({
        "tool": "cfl",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.name(),
        "inputs": cfg.inputs(),
        "diagnostics": out.diagnostics,
        "columns": out.table.columns(),
        "rows": out.table.rows().len(),
        "wall_time_s": wall.as_secs_f64(),
    })
}

pub fn write_outputs(path: &Path, cfg: &ExperimentConfig, out: &RunOutput, wall: Duration) -> CliResult<()> {
    std::fs::write(path, render(out, cfg.format)).map_err(|e| io_error(path, e))?;
    let meta = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(&sidecar(cfg, out, wall)).expect("sidecar json");
    text.push('\n');
    std::fs::write(&meta, text).map_err(|e| io_error(&meta, e))
}
