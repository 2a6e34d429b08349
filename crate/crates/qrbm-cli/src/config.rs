//! Sectioned key=value config files mirroring the flag names; flags
//! override file values, which override defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{CliError, CliResult};

/// Parsed config file: `[section]` headers, `key = value` lines, `#`
/// comments.
#[derive(Debug, Default)]
pub struct FileConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("global");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {} is neither [section] nor key = value: {raw:?}",
                    lineno + 1
                )));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn section<'a>(&'a self, name: &str) -> SectionView<'a> {
        SectionView { config: self, name: name.to_string() }
    }
}

/// Lookup helper bound to one section (falls back to `[global]`).
pub struct SectionView<'a> {
    config: &'a FileConfig,
    name: String,
}

impl SectionView<'_> {
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.config
            .sections
            .get(&self.name)
            .and_then(|s| s.get(key))
            .or_else(|| self.config.sections.get("global").and_then(|s| s.get(key)))
            .map(String::as_str)
    }

    /// flag > file > default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> CliResult<T> {
        self.resolve_opt(flag, key)
            .map(|v| v.unwrap_or(default))
    }

    /// flag > file > None.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if let Some(v) = flag {
            return Ok(Some(v));
        }
        match self.raw(key) {
            Some(text) => text
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("bad value {text:?} for {key} in config"))),
            None => Ok(None),
        }
    }

    pub fn resolve_path(
        &self,
        flag: Option<PathBuf>,
        key: &str,
    ) -> CliResult<Option<PathBuf>> {
        if let Some(v) = flag {
            return Ok(Some(v));
        }
        Ok(self.raw(key).map(PathBuf::from))
    }
}

/// Write `<out>/manifest.txt` with sorted key=value lines describing the
/// fully resolved run.
pub fn write_manifest(out_dir: &Path, entries: &[(String, String)]) -> CliResult<()> {
    let mut sorted: Vec<&(String, String)> = entries.iter().collect();
    sorted.sort();
    let mut text = String::new();
    for (key, value) in sorted {
        text.push_str(&format!("{key}={value}\n"));
    }
    std::fs::write(out_dir.join("manifest.txt"), text)?;
    Ok(())
}

/// Shared manifest entries for every command.
pub fn base_manifest(command: &str) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.into()),
        ("tool_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("format.rbm".into(), "RBM1".into()),
        ("format.dataset".into(), "CDS1".into()),
        ("format.pca".into(), "PCA1".into()),
        ("format.quantizer".into(), "QNT1".into()),
    ]
}
