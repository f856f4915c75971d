//! Embedding records, the `FUSEID1` container, pairing, and synthetic data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

mod format;
mod synth;

pub use format::{decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, MAGIC};
pub use synth::{generate_synthetic, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Split::Train),
            1 => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!(
                "unknown split {other:?} (expected train or test)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Voice,
    Face,
}

impl Modality {
    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Modality::Voice => 0,
            Modality::Face => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Modality::Voice),
            1 => Some(Modality::Face),
            _ => None,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Voice => "voice",
            Modality::Face => "face",
        })
    }
}

/// One modality vector for one (speaker, clip).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub speaker_id: String,
    pub clip_id: String,
    pub split: Split,
    pub modality: Modality,
    pub vector: Vec<f32>,
}

/// Aligned voice/face embeddings of one clip, labelled with a dense speaker index.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub speaker_index: usize,
    pub voice: Vec<f32>,
    pub face: Vec<f32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityCounts {
    pub voice: usize,
    pub face: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub train: ModalityCounts,
    pub test: ModalityCounts,
}

impl RecordCounts {
    fn bump(&mut self, split: Split, modality: Modality) {
        let m = match split {
            Split::Train => &mut self.train,
            Split::Test => &mut self.test,
        };
        match modality {
            Modality::Voice => m.voice += 1,
            Modality::Face => m.face += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub num_speakers: usize,
    pub voice_dim: usize,
    pub face_dim: usize,
    pub counts: RecordCounts,
    pub label_map: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn from_records(records: &[EmbeddingRecord], voice_dim: usize, face_dim: usize) -> Self {
        let mut counts = RecordCounts::default();
        for r in records {
            counts.bump(r.split, r.modality);
        }
        let label_map = label_map(records);
        DatasetManifest {
            num_speakers: label_map.len(),
            voice_dim,
            face_dim,
            counts,
            label_map,
        }
    }

    /// Speaker ids ordered by index.
    pub fn labels(&self) -> Vec<String> {
        let mut labels = vec![String::new(); self.label_map.len()];
        for (id, &idx) in &self.label_map {
            labels[idx] = id.clone();
        }
        labels
    }

    /// Checks the conditions a dataset must meet before a classifier can be
    /// trained on it: at least two speakers, each present in the train split.
    pub fn check_trainable(&self, records: &[EmbeddingRecord]) -> Result<()> {
        if self.num_speakers < 2 {
            return Err(Error::InvalidConfig(format!(
                "dataset has {} speaker(s); at least 2 are required",
                self.num_speakers
            )));
        }
        let in_train: BTreeSet<&str> = records
            .iter()
            .filter(|r| r.split == Split::Train)
            .map(|r| r.speaker_id.as_str())
            .collect();
        if let Some(missing) = self
            .label_map
            .keys()
            .find(|id| !in_train.contains(id.as_str()))
        {
            return Err(Error::EmptyDataset(format!(
                "speaker {missing:?} has no train-split records"
            )));
        }
        Ok(())
    }
}

/// Dense speaker indices: speaker ids sorted lexicographically, then enumerated.
pub fn label_map(records: &[EmbeddingRecord]) -> BTreeMap<String, usize> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.speaker_id.as_str()).collect();
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| (id.to_string(), i))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    /// Sorted by (speaker_id, clip_id).
    pub pairs: Vec<PairedSample>,
    /// Clips in the split that carry only one of the two modalities.
    pub skipped: usize,
}

/// Voice and face vectors seen so far for one clip.
type ClipSlot<'a> = (Option<&'a [f32]>, Option<&'a [f32]>);

/// Joins voice and face records of the same (speaker, clip) within `split`.
///
/// Clips missing a modality are skipped and counted, never zero-filled.
pub fn pair_samples(records: &[EmbeddingRecord], split: Split) -> Result<Pairing> {
    let labels = label_map(records);
    let mut clips: BTreeMap<(&str, &str), ClipSlot> = BTreeMap::new();
    for r in records.iter().filter(|r| r.split == split) {
        let slot = clips
            .entry((r.speaker_id.as_str(), r.clip_id.as_str()))
            .or_default();
        let target = match r.modality {
            Modality::Voice => &mut slot.0,
            Modality::Face => &mut slot.1,
        };
        if target.is_some() {
            return Err(Error::DuplicateRecord {
                speaker_id: r.speaker_id.clone(),
                clip_id: r.clip_id.clone(),
                modality: r.modality.to_string(),
                split: r.split.to_string(),
            });
        }
        *target = Some(&r.vector);
    }

    let mut pairs = Vec::new();
    let mut skipped = 0;
    for ((speaker, _clip), (voice, face)) in clips {
        match (voice, face) {
            (Some(v), Some(f)) => pairs.push(PairedSample {
                speaker_index: labels[speaker],
                voice: v.to_vec(),
                face: f.to_vec(),
            }),
            _ => skipped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no clip in the {split} split has both voice and face embeddings"
        )));
    }
    Ok(Pairing { pairs, skipped })
}

/// Voice vectors of `split` with their speaker indices, in (speaker_id, clip_id) order.
pub fn voice_samples(
    records: &[EmbeddingRecord],
    split: Split,
) -> Result<(Vec<Vec<f32>>, Vec<usize>)> {
    let labels = label_map(records);
    let mut voice: Vec<&EmbeddingRecord> = records
        .iter()
        .filter(|r| r.split == split && r.modality == Modality::Voice)
        .collect();
    voice.sort_by(|a, b| (&a.speaker_id, &a.clip_id).cmp(&(&b.speaker_id, &b.clip_id)));
    if voice.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no voice records in the {split} split"
        )));
    }
    Ok(voice
        .into_iter()
        .map(|r| (r.vector.clone(), labels[&r.speaker_id]))
        .unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(
        speaker: &str,
        clip: &str,
        split: Split,
        modality: Modality,
        v: &[f32],
    ) -> EmbeddingRecord {
        EmbeddingRecord {
            speaker_id: speaker.into(),
            clip_id: clip.into(),
            split,
            modality,
            vector: v.to_vec(),
        }
    }

    #[test]
    fn label_map_uses_sorted_ids() {
        let records = vec![
            rec("b", "1", Split::Train, Modality::Voice, &[1.0]),
            rec("a", "1", Split::Train, Modality::Voice, &[1.0]),
        ];
        let map = label_map(&records);
        assert_eq!(map["a"], 0);
        assert_eq!(map["b"], 1);
    }

    #[test]
    fn one_complete_clip_gives_one_pair() {
        let records = vec![
            rec("a", "1", Split::Train, Modality::Voice, &[1.0, 2.0]),
            rec("a", "1", Split::Train, Modality::Face, &[3.0]),
        ];
        let p = pair_samples(&records, Split::Train).unwrap();
        assert_eq!(p.pairs.len(), 1);
        assert_eq!(p.skipped, 0);
        assert_eq!(p.pairs[0].voice, vec![1.0, 2.0]);
        assert_eq!(p.pairs[0].face, vec![3.0]);
    }

    #[test]
    fn voice_only_clip_is_skipped() {
        let records = vec![
            rec("a", "1", Split::Train, Modality::Voice, &[1.0]),
            rec("a", "2", Split::Train, Modality::Voice, &[1.0]),
            rec("a", "2", Split::Train, Modality::Face, &[1.0]),
        ];
        let p = pair_samples(&records, Split::Train).unwrap();
        assert_eq!(p.pairs.len(), 1);
        assert_eq!(p.skipped, 1);

        let only = vec![rec("a", "1", Split::Train, Modality::Voice, &[1.0])];
        assert!(matches!(
            pair_samples(&only, Split::Train),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn pairing_respects_split() {
        let records = vec![
            rec("a", "1", Split::Train, Modality::Voice, &[1.0]),
            rec("a", "1", Split::Test, Modality::Face, &[1.0]),
        ];
        assert!(pair_samples(&records, Split::Train).is_err());
    }

    #[test]
    fn check_trainable_requires_two_speakers_in_train() {
        let one = vec![rec("a", "1", Split::Train, Modality::Voice, &[1.0])];
        let m = DatasetManifest::from_records(&one, 1, 0);
        assert!(m.check_trainable(&one).is_err());

        let test_only = vec![
            rec("a", "1", Split::Train, Modality::Voice, &[1.0]),
            rec("b", "1", Split::Test, Modality::Voice, &[1.0]),
        ];
        let m = DatasetManifest::from_records(&test_only, 1, 0);
        assert!(matches!(
            m.check_trainable(&test_only),
            Err(Error::EmptyDataset(_))
        ));
    }
}
