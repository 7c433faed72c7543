//! Label vocabularies in canonical (alphabetical) order.

use crate::error::{Error, Result};
use crate::video::DatasetTag;

pub const RAVDESS_LABELS: [&str; 8] = [
    "anger", "calm", "disgust", "fear", "happy", "neutral", "sad", "surprise",
];
pub const CREMAD_LABELS: [&str; 6] = ["anger", "disgust", "fear", "happy", "neutral", "sad"];

/// An ordered set of class names. Class indices used by probes, voting,
/// and confusion matrices all refer to this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub dataset: DatasetTag,
    names: Vec<String>,
}

impl LabelSet {
    /// The built-in vocabulary of a lab dataset; `None` for synthetic tags,
    /// whose labels come from the manifest.
    pub fn for_dataset(tag: DatasetTag) -> Option<LabelSet> {
        let names: Vec<String> = match tag {
            DatasetTag::Ravdess => RAVDESS_LABELS.iter().map(|s| s.to_string()).collect(),
            DatasetTag::Cremad => CREMAD_LABELS.iter().map(|s| s.to_string()).collect(),
            DatasetTag::Synth => return None,
        };
        Some(LabelSet { dataset: tag, names })
    }

    /// A synthetic vocabulary from manifest labels (sorted, deduplicated).
    pub fn from_labels(tag: DatasetTag, labels: &[String]) -> Result<LabelSet> {
        let mut names = labels.to_vec();
        names.sort();
        names.dedup();
        if names.len() < 2 {
            return Err(Error::protocol("a label set needs at least 2 classes"));
        }
        Ok(LabelSet { dataset: tag, names })
    }

    /// The vocabulary appropriate for a manifest: built-in for lab tags,
    /// derived from the records otherwise.
    pub fn for_manifest(manifest: &crate::video::Manifest) -> Result<LabelSet> {
        let tag = manifest.dataset()?;
        match LabelSet::for_dataset(tag) {
            Some(set) => Ok(set),
            None => LabelSet::from_labels(tag, &manifest.labels()),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cremad_is_ravdess_minus_calm_surprise() {
        let r = LabelSet::for_dataset(DatasetTag::Ravdess).unwrap();
        let c = LabelSet::for_dataset(DatasetTag::Cremad).unwrap();
        let filtered: Vec<&String> = r
            .names()
            .iter()
            .filter(|n| n.as_str() != "calm" && n.as_str() != "surprise")
            .collect();
        assert_eq!(filtered.len(), c.len());
        assert!(filtered.iter().zip(c.names()).all(|(a, b)| *a == b));
    }

    #[test]
    fn orders_are_alphabetical_and_unique() {
        for tag in [DatasetTag::Ravdess, DatasetTag::Cremad] {
            let set = LabelSet::for_dataset(tag).unwrap();
            let mut sorted = set.names().to_vec();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted, set.names());
        }
    }

    #[test]
    fn class_counts_match_datasets() {
        assert_eq!(LabelSet::for_dataset(DatasetTag::Ravdess).unwrap().len(), 8);
        assert_eq!(LabelSet::for_dataset(DatasetTag::Cremad).unwrap().len(), 6);
    }
}
