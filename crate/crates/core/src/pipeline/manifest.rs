//! JSON-lines dataset manifests. Relative paths resolve against the
//! manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits_dep_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits_uda_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Image,
    Depth,
    Label,
    LogitsDep,
    LogitsUda,
}

impl FieldKind {
    fn name(self) -> &'static str {
        match self {
            FieldKind::Image => "image_path",
            FieldKind::Depth => "depth_path",
            FieldKind::Label => "label_path",
            FieldKind::LogitsDep => "logits_dep_path",
            FieldKind::LogitsUda => "logits_uda_path",
        }
    }
}

impl ManifestRecord {
    pub fn field(&self, kind: FieldKind) -> Option<&Path> {
        match kind {
            FieldKind::Image => self.image_path.as_deref(),
            FieldKind::Depth => self.depth_path.as_deref(),
            FieldKind::Label => self.label_path.as_deref(),
            FieldKind::LogitsDep => self.logits_dep_path.as_deref(),
            FieldKind::LogitsUda => self.logits_uda_path.as_deref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn parse(text: &str, dir: impl Into<PathBuf>) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| Error::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            if rec.id.is_empty() || rec.id.contains(['/', '\\']) {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: format!(
                        "id `{}` must be non-empty and free of path separators",
                        rec.id
                    ),
                });
            }
            if !seen.insert(rec.id.clone()) {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: format!("duplicate id `{}`", rec.id),
                });
            }
            records.push(rec);
        }
        Ok(Manifest {
            dir: dir.into(),
            records,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::parse(&text, dir)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    /// Resolved path of a field, or a missing-input error naming the record.
    pub fn path(&self, rec: &ManifestRecord, kind: FieldKind) -> Result<PathBuf> {
        rec.field(kind).map(|p| self.resolve(p)).ok_or_else(|| {
            Error::MissingInput(format!("record `{}` has no {}", rec.id, kind.name()))
        })
    }

    /// Checks up front that every record names every required field and that
    /// the files exist; all problems are reported together.
    pub fn require(&self, kinds: &[FieldKind]) -> Result<()> {
        let mut problems = Vec::new();
        for rec in &self.records {
            for &kind in kinds {
                match rec.field(kind) {
                    None => problems.push(format!("record `{}`: no {}", rec.id, kind.name())),
                    Some(p) => {
                        let full = self.resolve(p);
                        if !full.is_file() {
                            problems.push(format!(
                                "record `{}`: {} {} does not exist",
                                rec.id,
                                kind.name(),
                                full.display()
                            ));
                        }
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingInput(problems.join("\n")))
        }
    }

    pub fn to_jsonl(records: &[ManifestRecord]) -> String {
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(path: &Path, records: &[ManifestRecord]) -> Result<()> {
        fs::write(path, Manifest::to_jsonl(records))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_resolve() {
        let text = r#"{"id":"a","image_path":"img/a.png","depth_path":"/abs/a.png"}

{"id":"b","label_path":"l/b.png"}
"#;
        let m = Manifest::parse(text, "/data").unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(
            m.path(&m.records[0], FieldKind::Image).unwrap(),
            PathBuf::from("/data/img/a.png")
        );
        assert_eq!(
            m.path(&m.records[0], FieldKind::Depth).unwrap(),
            PathBuf::from("/abs/a.png")
        );
        assert!(m.path(&m.records[1], FieldKind::Image).is_err());
    }

    #[test]
    fn rejects_duplicates_and_junk() {
        let dup = "{\"id\":\"a\"}\n{\"id\":\"a\"}\n";
        assert!(matches!(
            Manifest::parse(dup, "."),
            Err(Error::Manifest { line: 2, .. })
        ));
        assert!(matches!(
            Manifest::parse("{\"id\":\"a\",\"colour\":1}", "."),
            Err(Error::Manifest { line: 1, .. })
        ));
        assert!(Manifest::parse("{\"id\":\"../x\"}", ".").is_err());
    }

    #[test]
    fn require_lists_every_problem() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.png"), b"").unwrap();
        let text =
            "{\"id\":\"a\",\"image_path\":\"x.png\"}\n{\"id\":\"b\",\"image_path\":\"y.png\"}\n";
        let m = Manifest::parse(text, dir.path()).unwrap();
        assert!(m.require(&[FieldKind::Image]).is_err());
        let err = m
            .require(&[FieldKind::Image, FieldKind::Depth])
            .unwrap_err()
            .to_string();
        assert!(err.contains("`a`: no depth_path"));
        assert!(err.contains("`b`: image_path"));
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![ManifestRecord {
            id: "z".into(),
            image_path: Some("i.png".into()),
            label_path: Some("l.png".into()),
            ..Default::default()
        }];
        let m = Manifest::parse(&Manifest::to_jsonl(&recs), ".").unwrap();
        assert_eq!(m.records, recs);
    }
}
