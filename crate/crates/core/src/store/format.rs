//! `FUSEID1` container.
//!
//! Layout: 8-byte magic `FUSEID1\0`, u32 little-endian header length, UTF-8
//! JSON header `{"voice_dim","face_dim","record_count"}`, then per record:
//! u16 speaker-id length + bytes, u16 clip-id length + bytes, u8 split
//! (0 train, 1 test), u8 modality (0 voice, 1 face), and the vector as
//! little-endian f32 of the modality's declared dimension.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetManifest, EmbeddingRecord, Modality, Split};
use crate::binio::{self, Cursor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FUSEID1\0";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    voice_dim: usize,
    face_dim: usize,
    record_count: usize,
}

fn modality_dims(records: &[EmbeddingRecord]) -> Result<(usize, usize)> {
    let mut voice = None;
    let mut face = None;
    for r in records {
        let slot = match r.modality {
            Modality::Voice => &mut voice,
            Modality::Face => &mut face,
        };
        match *slot {
            None => *slot = Some(r.vector.len()),
            Some(d) if d != r.vector.len() => {
                return Err(Error::dim(
                    format!("{} record ({}, {})", r.modality, r.speaker_id, r.clip_id),
                    d,
                    r.vector.len(),
                ))
            }
            Some(_) => {}
        }
    }
    Ok((voice.unwrap_or(0), face.unwrap_or(0)))
}

fn put_id(out: &mut Vec<u8>, id: &str, what: &str) -> Result<()> {
    let len = u16::try_from(id.len())
        .map_err(|_| Error::InvalidLabel(format!("{what} longer than 65535 bytes")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(id.as_bytes());
    Ok(())
}

pub fn encode_embeddings(records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    let (voice_dim, face_dim) = modality_dims(records)?;
    let mut out = Vec::with_capacity(64 + records.len() * (16 + 4 * voice_dim.max(face_dim)));
    out.extend_from_slice(MAGIC);
    binio::put_json_header(
        &mut out,
        &Header {
            voice_dim,
            face_dim,
            record_count: records.len(),
        },
    );
    for r in records {
        put_id(&mut out, &r.speaker_id, "speaker_id")?;
        put_id(&mut out, &r.clip_id, "clip_id")?;
        out.push(r.split.to_byte());
        out.push(r.modality.to_byte());
        binio::put_f32s(&mut out, &r.vector);
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<(DatasetManifest, Vec<EmbeddingRecord>)> {
    let mut cur = Cursor::new(bytes, "FUSEID1");
    cur.expect_magic(MAGIC)?;
    let header: Header = cur.json_header()?;
    let mut records = Vec::with_capacity(header.record_count.min(1 << 20));
    let mut seen = HashSet::new();
    for _ in 0..header.record_count {
        let n = cur.u16()? as usize;
        let speaker_id = cur.string(n)?;
        let n = cur.u16()? as usize;
        let clip_id = cur.string(n)?;
        let split = Split::from_byte(cur.u8()?)
            .ok_or_else(|| Error::Corrupt("FUSEID1: bad split byte".into()))?;
        let modality = Modality::from_byte(cur.u8()?)
            .ok_or_else(|| Error::Corrupt("FUSEID1: bad modality byte".into()))?;
        let dim = match modality {
            Modality::Voice => header.voice_dim,
            Modality::Face => header.face_dim,
        };
        let vector = cur.f32s(dim)?;
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                speaker_id,
                clip_id,
            });
        }
        if !seen.insert((speaker_id.clone(), clip_id.clone(), modality, split)) {
            return Err(Error::DuplicateRecord {
                speaker_id,
                clip_id,
                modality: modality.to_string(),
                split: split.to_string(),
            });
        }
        records.push(EmbeddingRecord {
            speaker_id,
            clip_id,
            split,
            modality,
            vector,
        });
    }
    cur.finish()?;
    let manifest = DatasetManifest::from_records(&records, header.voice_dim, header.face_dim);
    Ok((manifest, records))
}

pub fn write_embeddings(records: &[EmbeddingRecord], path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_embeddings(records)?;
    binio::write_file(path.as_ref(), &bytes)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<EmbeddingRecord>)> {
    decode_embeddings(&binio::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(speaker: &str, clip: &str, modality: Modality, v: Vec<f32>) -> EmbeddingRecord {
        EmbeddingRecord {
            speaker_id: speaker.into(),
            clip_id: clip.into(),
            split: Split::Train,
            modality,
            vector: v,
        }
    }

    #[test]
    fn empty_file_round_trips() {
        let bytes = encode_embeddings(&[]).unwrap();
        let (m, r) = decode_embeddings(&bytes).unwrap();
        assert!(r.is_empty());
        assert_eq!(m.num_speakers, 0);
    }

    #[test]
    fn single_voice_record_round_trips() {
        let r = vec![rec(
            "spk",
            "c0",
            Modality::Voice,
            vec![0.5, -1.25, 3.0, 1e-30],
        )];
        let (m, back) = decode_embeddings(&encode_embeddings(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(m.voice_dim, 4);
        assert_eq!(m.face_dim, 0);
        assert_eq!(m.counts.train.voice, 1);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let r = vec![
            rec("a", "1", Modality::Voice, vec![1.0, 2.0]),
            rec("a", "2", Modality::Voice, vec![1.0]),
        ];
        assert!(matches!(
            encode_embeddings(&r),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nan_names_the_record() {
        let r = vec![rec("alice", "clip7", Modality::Face, vec![1.0, f32::NAN])];
        let bytes = encode_embeddings(&r).unwrap();
        match decode_embeddings(&bytes) {
            Err(Error::NonFinite {
                speaker_id,
                clip_id,
            }) => {
                assert_eq!(speaker_id, "alice");
                assert_eq!(clip_id, "clip7");
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_rejected() {
        let r = vec![
            rec("a", "1", Modality::Voice, vec![1.0]),
            rec("a", "1", Modality::Voice, vec![2.0]),
        ];
        let bytes = encode_embeddings(&r).unwrap();
        assert!(matches!(
            decode_embeddings(&bytes),
            Err(Error::DuplicateRecord { .. })
        ));
    }

    #[test]
    fn truncation_and_bad_magic_are_corrupt() {
        let r = vec![rec("a", "1", Modality::Voice, vec![1.0, 2.0])];
        let bytes = encode_embeddings(&r).unwrap();
        assert!(matches!(
            decode_embeddings(&bytes[..bytes.len() - 1]),
            Err(Error::Corrupt(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_embeddings(&bad), Err(Error::Corrupt(_))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode_embeddings(&long), Err(Error::Corrupt(_))));
    }
}
