//! Subject-independent cross-validation folds.
//!
//! A fold plan partitions subject ids into k disjoint sets; a video's fold
//! is its subject's fold, so no person appears on both sides of a split.
//! The CREMA-D plan ships built in; any other dataset gets seeded balanced
//! partitions or a user-supplied plan file.

use super::Manifest;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

/// Where a plan came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldSource {
    Table,
    Generated { seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub source: FoldSource,
    pub folds: Vec<Vec<String>>,
}

/// CREMA-D subject numbers per split, leading digits stripped as published;
/// re-prefixed below to the official 1001..=1091 numbering.
const CREMAD_SPLITS: [&[u32]; 5] = [
    &[2, 3, 8, 10, 14, 16, 22, 32, 51, 54, 60, 66, 68, 70, 72, 77, 78, 86, 88],
    &[4, 11, 12, 13, 19, 30, 33, 35, 39, 40, 48, 49, 53, 57, 67, 71, 73, 81],
    &[5, 6, 17, 26, 28, 34, 42, 44, 50, 59, 64, 69, 82, 83, 84, 87, 90, 91],
    &[7, 9, 15, 21, 23, 29, 36, 37, 38, 41, 45, 52, 55, 58, 61, 62, 74, 76],
    &[1, 18, 20, 24, 25, 27, 31, 43, 46, 47, 56, 63, 65, 75, 79, 80, 85, 89],
];

impl FoldPlan {
    /// The built-in 5-fold CREMA-D plan over subjects 1001..=1091.
    pub fn cremad_table() -> FoldPlan {
        let folds = CREMAD_SPLITS
            .iter()
            .map(|split| split.iter().map(|n| (1000 + n).to_string()).collect())
            .collect();
        FoldPlan {
            k: 5,
            source: FoldSource::Table,
            folds,
        }
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.folds.iter().map(|f| f.len()).collect()
    }

    /// Subjects of the validation fold `idx`.
    pub fn validation_subjects(&self, idx: usize) -> Result<BTreeSet<&str>> {
        let fold = self
            .folds
            .get(idx)
            .ok_or_else(|| Error::config(format!("fold index {idx} out of range for k={}", self.k)))?;
        Ok(fold.iter().map(|s| s.as_str()).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::protocol(format!("fold plan serialization: {e}")))?;
        std::fs::write(&tmp, body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<FoldPlan> {
        let body =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&body)
            .map_err(|e| Error::protocol(format!("{}: invalid fold plan: {e}", path.display())))
    }
}

/// Build a fold plan for `manifest`.
///
/// `Table` is only valid for CREMA-D manifests and returns the built-in
/// plan. `Generated` shuffles the subject ids with the given seed and deals
/// them round-robin, so fold sizes differ by at most one.
pub fn make_folds(manifest: &Manifest, k: usize, source: FoldSource) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config(format!("fold count must be >= 2, got {k}")));
    }
    match source {
        FoldSource::Table => {
            let tag = manifest.dataset()?;
            if tag != super::DatasetTag::Cremad {
                return Err(Error::protocol(format!(
                    "the built-in table plan is CREMA-D only, manifest is {tag}"
                )));
            }
            Ok(FoldPlan::cremad_table())
        }
        FoldSource::Generated { seed } => {
            let mut subjects: Vec<String> = manifest.subjects().into_iter().collect();
            if subjects.len() < k {
                return Err(Error::config(format!(
                    "{} subjects cannot fill {k} folds",
                    subjects.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            subjects.shuffle(&mut rng);
            let mut folds = vec![Vec::new(); k];
            for (i, s) in subjects.into_iter().enumerate() {
                folds[i % k].push(s);
            }
            for f in &mut folds {
                f.sort();
            }
            Ok(FoldPlan {
                k,
                source: FoldSource::Generated { seed },
                folds,
            })
        }
    }
}

/// Per-fold counts produced by [`verify_folds`].
#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub fold_subjects: Vec<usize>,
    pub fold_videos: Vec<usize>,
    pub total_subjects: usize,
    pub total_videos: usize,
    /// Plan subjects that have no videos in the manifest (reported, not fatal).
    pub unused_plan_subjects: Vec<String>,
}

impl fmt::Display for FoldReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fold  subjects  videos")?;
        for (i, (s, v)) in self.fold_subjects.iter().zip(&self.fold_videos).enumerate() {
            writeln!(f, "{i:>4}  {s:>8}  {v:>6}")?;
        }
        write!(
            f,
            "total {} subjects, {} videos",
            self.total_subjects, self.total_videos
        )?;
        if !self.unused_plan_subjects.is_empty() {
            write!(f, "; {} plan subjects unused", self.unused_plan_subjects.len())?;
        }
        Ok(())
    }
}

/// Assert disjointness and coverage of `plan` against `manifest`.
///
/// Fails (naming the offenders) when a subject appears in two folds or when
/// a manifest subject is missing from every fold.
pub fn verify_folds(plan: &FoldPlan, manifest: &Manifest) -> Result<FoldReport> {
    if plan.folds.len() != plan.k {
        return Err(Error::protocol(format!(
            "plan declares k={} but holds {} folds",
            plan.k,
            plan.folds.len()
        )));
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    let mut duplicated = BTreeSet::new();
    for (i, fold) in plan.folds.iter().enumerate() {
        for s in fold {
            if let Some(prev) = owner.insert(s.as_str(), i) {
                if prev != i {
                    duplicated.insert(s.clone());
                } else {
                    duplicated.insert(s.clone()); // repeated within one fold
                }
            }
        }
    }
    if !duplicated.is_empty() {
        return Err(Error::protocol(format!(
            "subjects assigned to more than one fold: {:?}",
            duplicated.into_iter().collect::<Vec<_>>()
        )));
    }

    let manifest_subjects = manifest.subjects();
    let missing: Vec<&String> = manifest_subjects
        .iter()
        .filter(|s| !owner.contains_key(s.as_str()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::protocol(format!(
            "fold plan does not cover manifest subjects: {missing:?}"
        )));
    }

    let mut fold_subjects = vec![0usize; plan.k];
    for (i, fold) in plan.folds.iter().enumerate() {
        fold_subjects[i] = fold
            .iter()
            .filter(|s| manifest_subjects.contains(s.as_str()))
            .count();
    }
    let mut fold_videos = vec![0usize; plan.k];
    for rec in &manifest.records {
        let fold = owner[rec.subject_id.as_str()];
        fold_videos[fold] += 1;
    }
    let unused: Vec<String> = owner
        .keys()
        .filter(|s| !manifest_subjects.contains(**s))
        .map(|s| s.to_string())
        .collect();
    Ok(FoldReport {
        fold_subjects,
        fold_videos,
        total_subjects: manifest_subjects.len(),
        total_videos: manifest.records.len(),
        unused_plan_subjects: unused,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::{DatasetTag, VideoRecord};

    fn manifest_for(subjects: &[String], tag: DatasetTag, label: &str) -> Manifest {
        let records = subjects
            .iter()
            .enumerate()
            .map(|(i, s)| VideoRecord {
                id: format!("v{i}"),
                path: format!("v{i}.rvt"),
                subject_id: s.clone(),
                label: label.to_string(),
                dataset: tag,
                duration_frames: 61,
            })
            .collect();
        Manifest {
            records,
            base_dir: ".".into(),
        }
    }

    fn cremad_manifest() -> Manifest {
        let subjects: Vec<String> = (1001..=1091).map(|n| n.to_string()).collect();
        manifest_for(&subjects, DatasetTag::Cremad, "anger")
    }

    #[test]
    fn table_plan_matches_published_splits() {
        let plan = FoldPlan::cremad_table();
        assert_eq!(plan.fold_sizes(), vec![19, 18, 18, 18, 18]);
        let union: BTreeSet<&String> = plan.folds.iter().flatten().collect();
        assert_eq!(union.len(), 91, "folds must be pairwise disjoint over 91 subjects");
        let all: BTreeSet<String> = (1001..=1091).map(|n| n.to_string()).collect();
        assert!(union.iter().all(|s| all.contains(*s)));
        // split 1 holds bare id 2 -> official 1002, and only fold 0 has it
        assert!(plan.folds[0].contains(&"1002".to_string()));
        for f in &plan.folds[1..] {
            assert!(!f.contains(&"1002".to_string()));
        }
    }

    #[test]
    fn table_plan_verifies_against_full_manifest() {
        let plan = FoldPlan::cremad_table();
        let report = verify_folds(&plan, &cremad_manifest()).unwrap();
        assert_eq!(report.fold_subjects, vec![19, 18, 18, 18, 18]);
        assert_eq!(report.total_subjects, 91);
    }

    #[test]
    fn table_source_requires_cremad() {
        let subjects: Vec<String> = (0..10).map(|n| format!("s{n:02}")).collect();
        let m = manifest_for(&subjects, DatasetTag::Synth, "c0");
        assert!(matches!(
            make_folds(&m, 5, FoldSource::Table),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn generated_folds_are_balanced_and_verify() {
        let subjects: Vec<String> = (0..24).map(|n| format!("s{n:02}")).collect();
        let m = manifest_for(&subjects, DatasetTag::Synth, "c0");
        let plan = make_folds(&m, 5, FoldSource::Generated { seed: 11 }).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 5, 5, 5, 5]);
        verify_folds(&plan, &m).unwrap();
        // determinism
        let again = make_folds(&m, 5, FoldSource::Generated { seed: 11 }).unwrap();
        assert_eq!(plan.folds, again.folds);
    }

    #[test]
    fn duplicate_subject_fails_naming_it() {
        let mut plan = FoldPlan::cremad_table();
        plan.folds[1].push("1002".to_string());
        let err = verify_folds(&plan, &cremad_manifest()).unwrap_err();
        assert!(err.to_string().contains("1002"), "{err}");
    }

    #[test]
    fn missing_subject_is_coverage_failure() {
        let mut plan = FoldPlan::cremad_table();
        plan.folds[0].retain(|s| s != "1002");
        let err = verify_folds(&plan, &cremad_manifest()).unwrap_err();
        assert!(err.to_string().contains("cover"), "{err}");
        assert!(err.to_string().contains("1002"), "{err}");
    }

    #[test]
    fn plan_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("folds.json");
        let plan = FoldPlan::cremad_table();
        plan.save(&path).unwrap();
        let back = FoldPlan::load(&path).unwrap();
        assert_eq!(back.k, 5);
        assert_eq!(back.source, FoldSource::Table);
        assert_eq!(back.folds, plan.folds);
    }
}
