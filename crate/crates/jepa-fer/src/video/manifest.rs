//! Dataset manifests: one CSV row per stored video.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs::{self, File};
use std::path::Path;

/// Which label vocabulary a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetTag {
    #[serde(rename = "RAVDESS")]
    Ravdess,
    #[serde(rename = "CREMAD")]
    Cremad,
    #[serde(rename = "SYNTH")]
    Synth,
}

impl DatasetTag {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "RAVDESS" => Ok(DatasetTag::Ravdess),
            "CREMAD" => Ok(DatasetTag::Cremad),
            "SYNTH" => Ok(DatasetTag::Synth),
            other => Err(Error::config(format!("unknown dataset tag '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetTag::Ravdess => "RAVDESS",
            DatasetTag::Cremad => "CREMAD",
            DatasetTag::Synth => "SYNTH",
        }
    }
}

impl std::fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One stored video and its metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoRecord {
    pub id: String,
    /// Path relative to the manifest's directory.
    pub path: String,
    pub subject_id: String,
    pub label: String,
    pub dataset: DatasetTag,
    pub duration_frames: usize,
}

/// All records of one dataset plus the directory that anchors their paths.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub records: Vec<VideoRecord>,
    pub base_dir: std::path::PathBuf,
}

impl Manifest {
    /// Load `manifest.csv` and validate labels against the dataset's
    /// vocabulary (synthetic datasets carry a free-form label set).
    pub fn load(path: &Path) -> Result<Manifest> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut records = Vec::new();
        for row in reader.deserialize::<VideoRecord>() {
            let rec = row.map_err(|e| Error::protocol(format!("{}: {e}", path.display())))?;
            if rec.dataset != DatasetTag::Synth {
                let known = crate::eval::LabelSet::for_dataset(rec.dataset)
                    .expect("ravdess/cremad label sets are built in");
                if known.index_of(&rec.label).is_none() {
                    return Err(Error::protocol(format!(
                        "record '{}' has label '{}' outside the {} label set",
                        rec.id, rec.label, rec.dataset
                    )));
                }
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(Error::protocol(format!("{}: manifest holds no records", path.display())));
        }
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Manifest { records, base_dir })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        {
            let file = File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
            let mut w = csv::Writer::from_writer(file);
            for rec in &self.records {
                w.serialize(rec)
                    .map_err(|e| Error::protocol(format!("{}: {e}", tmp.display())))?;
            }
            w.flush().map_err(|e| Error::io(tmp.display().to_string(), e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn subjects(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.subject_id.clone()).collect()
    }

    /// Distinct labels in manifest order of first appearance, then sorted.
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.records.iter().map(|r| r.label.clone()).collect();
        set.into_iter().collect()
    }

    pub fn dataset(&self) -> Result<DatasetTag> {
        let tags: BTreeSet<&'static str> = self.records.iter().map(|r| r.dataset.as_str()).collect();
        if tags.len() != 1 {
            return Err(Error::protocol(format!(
                "manifest mixes dataset tags: {tags:?}"
            )));
        }
        Ok(self.records[0].dataset)
    }

    pub fn video_path(&self, rec: &VideoRecord) -> std::path::PathBuf {
        self.base_dir.join(&rec.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_subjects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let records = vec![
            VideoRecord {
                id: "a".into(),
                path: "a.rvt".into(),
                subject_id: "s01".into(),
                label: "c0".into(),
                dataset: DatasetTag::Synth,
                duration_frames: 70,
            },
            VideoRecord {
                id: "b".into(),
                path: "b.rvt".into(),
                subject_id: "s02".into(),
                label: "c1".into(),
                dataset: DatasetTag::Synth,
                duration_frames: 61,
            },
        ];
        let m = Manifest {
            records,
            base_dir: dir.path().into(),
        };
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back.records.len(), 2);
        assert_eq!(back.subjects().len(), 2);
        assert_eq!(back.labels(), vec!["c0".to_string(), "c1".to_string()]);
        assert_eq!(back.dataset().unwrap(), DatasetTag::Synth);
    }

    #[test]
    fn foreign_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        std::fs::write(
            &path,
            "id,path,subject_id,label,dataset,duration_frames\n\
             x,x.rvt,1001,boredom,CREMAD,70\n",
        )
        .unwrap();
        assert!(Manifest::load(&path).is_err());
    }
}
