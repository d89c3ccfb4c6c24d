use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Directory searched for `<command>.json` when no `--config` is given.
pub const CONFIG_DIR_ENV: &str = "DIFFSR_CONFIG_DIR";

/// Loads a command config. Without an explicit path, `$DIFFSR_CONFIG_DIR/<command>.json`
/// is used if it exists; otherwise the defaults apply. Unknown keys are errors.
pub fn load<T: DeserializeOwned + Default>(explicit: Option<&Path>, command: &str) -> Result<(T, Option<PathBuf>)> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_DIR_ENV)
            .map(|dir| Path::new(&dir).join(format!("{command}.json")))
            .filter(|p| p.is_file()),
    };
    let Some(path) = path else {
        return Ok((T::default(), None));
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg = serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    Ok((cfg, Some(path)))
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    config_file: Option<&'a Path>,
    #[serde(flatten)]
    extra: serde_json::Value,
}

/// Writes `<out>.json` with the fully resolved config and command-specific details.
pub fn write_sidecar<C: Serialize>(
    out: &Path,
    command: &str,
    config: &C,
    config_file: Option<&Path>,
    extra: serde_json::Value,
) -> Result<()> {
    let sidecar = Sidecar {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        config_file,
        extra,
    };
    let path = sidecar_path(out);
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
}
