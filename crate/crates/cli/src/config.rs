use std::path::{Path, PathBuf};

use saliency_core::PipelineConfig;

use crate::CliError;

/// Reads a JSON config. Missing keys take their defaults; unknown keys and
/// out-of-range values are rejected.
pub fn load(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let cfg = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid config {}: {e}", p.display())))?
        }
    };
    cfg.validate()
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    Ok(cfg)
}

pub fn write_resolved(cfg: &PipelineConfig, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(cfg).expect("config serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Echo path for a single-image run: `<out stem>.config.json` next to the map.
pub fn echo_path_for(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("saliency");
    out.with_file_name(format!("{stem}.config.json"))
}
