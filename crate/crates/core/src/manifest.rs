//! Dataset manifests: either one JSON document `{"items": [...]}` or one
//! item object per line. Relative paths resolve against the manifest's
//! directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{bail, KngError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    pub features: PathBuf,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub items: Vec<ManifestItem>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let manifest = if trimmed.starts_with('{') && serde_json::from_str::<Manifest>(text).is_ok() {
            serde_json::from_str::<Manifest>(text).expect("checked above")
        } else {
            let mut items = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let item: ManifestItem = serde_json::from_str(line).map_err(|e| {
                    KngError::Format(format!("manifest line {}: {e}", lineno + 1))
                })?;
                items.push(item);
            }
            Manifest { items }
        };
        manifest.check_structure()?;
        Ok(manifest)
    }

    fn check_structure(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for item in &self.items {
            if !seen.insert(item.id.as_str()) {
                bail!(Validation, "duplicate manifest id {:?}", item.id);
            }
            if item.mask.is_some() && item.label.is_none() {
                bail!(Validation, "item {:?} has a mask but no label", item.id);
            }
        }
        Ok(())
    }

    /// Reads, resolves relative paths, and checks that every referenced file
    /// exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| KngError::io(path, e))?;
        let mut manifest = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for item in &mut manifest.items {
            if item.features.is_relative() {
                item.features = base.join(&item.features);
            }
            if let Some(mask) = item.mask.as_mut() {
                if mask.is_relative() {
                    *mask = base.join(&*mask);
                }
            }
            if !item.features.is_file() {
                return Err(KngError::io(
                    &item.features,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "feature file missing"),
                ));
            }
            if let Some(mask) = &item.mask {
                if !mask.is_file() {
                    return Err(KngError::io(
                        mask,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "mask file missing"),
                    ));
                }
            }
        }
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| KngError::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_and_lines_forms() {
        let doc = r#"{"items":[{"id":"a","features":"a.ften","label":"normal","mask":null},
                      {"id":"b","features":"b.ften","label":"anomalous","mask":"b_mask.ften"}]}"#;
        let m = Manifest::parse(doc).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.items[1].label, Some(Label::Anomalous));

        let lines = "{\"id\":\"a\",\"features\":\"a.ften\"}\n\n{\"id\":\"b\",\"features\":\"b.ften\",\"label\":null}\n";
        let m = Manifest::parse(lines).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.items.iter().all(|i| i.label.is_none()));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let doc = r#"{"items":[{"id":"a","features":"x"},{"id":"a","features":"y"}]}"#;
        assert!(matches!(Manifest::parse(doc), Err(KngError::Validation(_))));
    }

    #[test]
    fn mask_requires_label() {
        let doc = r#"{"items":[{"id":"a","features":"x","mask":"m"}]}"#;
        assert!(matches!(Manifest::parse(doc), Err(KngError::Validation(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"items":[{"id":"a","features":"nope.ften"}]}"#).unwrap();
        assert!(matches!(Manifest::load(&p), Err(KngError::Io { .. })));
    }
}
