//! Output directory layout and per-directory manifests.
//!
//! ```text
//! <root>/checkpoints/  <root>/reports/  <root>/prototypes/  <root>/exports/
//! ```
//! Each directory carries a `manifest.json` listing its files with the
//! config fingerprint they were produced under. Manifests hold no timestamps
//! so reruns reproduce them byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const MANIFEST: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "rrl-manifest";
const MANIFEST_VERSION: u32 = 1;

/// Serializes manifest read-modify-write cycles of concurrent runs.
static MANIFEST_LOCK: Mutex<()> = Mutex::new(());

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputLayout {
    pub root: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
    pub prototypes: PathBuf,
    pub exports: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl OutputLayout {
    pub fn new(root: impl AsRef<Path>) -> Self {
        let root = root.as_ref().to_path_buf();
        Self {
            checkpoints: root.join("checkpoints"),
            reports: root.join("reports"),
            prototypes: root.join("prototypes"),
            exports: root.join("exports"),
            root,
        }
    }

    /// Creates all four directories.
    pub fn ensure(&self) -> Result<&Self> {
        for d in [
            &self.checkpoints,
            &self.reports,
            &self.prototypes,
            &self.exports,
        ] {
            fs::create_dir_all(d)?;
        }
        Ok(self)
    }

    pub fn record(&self, file: &Path, entry: ManifestEntry) -> Result<()> {
        let _guard = MANIFEST_LOCK.lock().unwrap_or_else(|e| e.into_inner());
        let dir = file.parent().unwrap_or(Path::new("."));
        let kind = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("outputs")
            .to_string();
        let path = dir.join(MANIFEST);
        let mut manifest = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(_) => Manifest {
                format: MANIFEST_FORMAT.into(),
                version: MANIFEST_VERSION,
                kind,
                entries: BTreeMap::new(),
            },
        };
        let name = file
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        manifest.entries.insert(name, entry);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    pub fn record_checkpoint(
        &self,
        file: &Path,
        fingerprint: &str,
        seed: u64,
        epoch: usize,
    ) -> Result<()> {
        self.record(
            file,
            ManifestEntry {
                fingerprint: fingerprint.into(),
                seed: Some(seed),
                epoch: Some(epoch),
                note: String::new(),
            },
        )
    }

    /// Writes `value` as pretty JSON into `dir` and records it.
    pub fn write_json<T: Serialize>(
        &self,
        dir: &Path,
        name: &str,
        value: &T,
        entry: ManifestEntry,
    ) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
        self.record(&path, entry)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_tracks_files() {
        let dir = tempfile::tempdir().unwrap();
        let layout = OutputLayout::new(dir.path());
        layout.ensure().unwrap();
        for d in ["checkpoints", "reports", "prototypes", "exports"] {
            assert!(dir.path().join(d).is_dir());
        }
        let entry = ManifestEntry {
            fingerprint: "abc".into(),
            ..ManifestEntry::default()
        };
        layout
            .write_json(&layout.reports, "b.json", &1, entry.clone())
            .unwrap();
        layout
            .write_json(&layout.reports, "a.json", &2, entry)
            .unwrap();
        let m: Manifest =
            serde_json::from_str(&fs::read_to_string(layout.reports.join(MANIFEST)).unwrap())
                .unwrap();
        assert_eq!(m.kind, "reports");
        assert_eq!(
            m.entries.keys().collect::<Vec<_>>(),
            vec!["a.json", "b.json"]
        );
    }
}
