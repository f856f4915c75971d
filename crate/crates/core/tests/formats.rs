use fuseid_core::store::{
    decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, EmbeddingRecord,
    Modality, Split,
};
use fuseid_core::svm::{decode_svm, encode_svm, load_svm, save_svm, train_multiclass, SvmSettings};
use fuseid_core::two_branch::{build_model, decode_model, encode_model, ArchitectureSpec};
use fuseid_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn finite_f32() -> impl Strategy<Value = f32> {
    prop_oneof![
        any::<f32>().prop_filter("finite", |x| x.is_finite()),
        Just(-0.0f32),
        Just(f32::MIN_POSITIVE / 4.0),
        Just(f32::MAX),
    ]
}

/// Unique `(speaker, clip, split, modality)` keys with fixed per-modality widths.
fn records() -> impl Strategy<Value = Vec<EmbeddingRecord>> {
    (1usize..5, 1usize..5).prop_flat_map(|(vd, fd)| {
        prop::collection::btree_map(
            (
                "[a-zé]{1,6}",
                "[0-9a-z_]{0,5}",
                any::<bool>(),
                any::<bool>(),
            ),
            prop::collection::vec(finite_f32(), vd.max(fd)),
            0..30,
        )
        .prop_map(move |m| {
            m.into_iter()
                .map(|((speaker_id, clip_id, test, face), v)| {
                    let modality = if face {
                        Modality::Face
                    } else {
                        Modality::Voice
                    };
                    let dim = if face { fd } else { vd };
                    EmbeddingRecord {
                        speaker_id,
                        clip_id,
                        split: if test { Split::Test } else { Split::Train },
                        modality,
                        vector: v[..dim].to_vec(),
                    }
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn embeddings_round_trip_bit_exactly(recs in records()) {
        let bytes = encode_embeddings(&recs).unwrap();
        let (manifest, back) = decode_embeddings(&bytes).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            prop_assert_eq!(&a.speaker_id, &b.speaker_id);
            prop_assert_eq!(&a.clip_id, &b.clip_id);
            prop_assert_eq!(a.split, b.split);
            prop_assert_eq!(a.modality, b.modality);
            prop_assert_eq!(bits(&a.vector), bits(&b.vector));
        }
        prop_assert_eq!(manifest.counts.train.voice + manifest.counts.train.face
            + manifest.counts.test.voice + manifest.counts.test.face, recs.len());
        prop_assert_eq!(encode_embeddings(&back).unwrap(), bytes);
    }
}

fn mixed_records(n: usize) -> Vec<EmbeddingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    (0..n)
        .map(|i| {
            let face = i % 2 == 1;
            EmbeddingRecord {
                speaker_id: format!("spk{}", (i / 2) % 97),
                clip_id: format!("c{}", i / 2),
                split: if (i / 2) % 5 == 0 {
                    Split::Test
                } else {
                    Split::Train
                },
                modality: if face {
                    Modality::Face
                } else {
                    Modality::Voice
                },
                vector: (0..if face { 12 } else { 8 })
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            }
        })
        .collect()
}

#[test]
fn embeddings_file_digest_is_stable() {
    let recs = mixed_records(10_000);
    let dir = tempfile::tempdir().unwrap();
    let digest = |name: &str| {
        let p = dir.path().join(name);
        write_embeddings(&recs, &p).unwrap();
        hex_digest(&std::fs::read(&p).unwrap())
    };
    let a = digest("a.bin");
    let b = digest("b.bin");
    assert_eq!(a, b);
    let (manifest, back) = read_embeddings(dir.path().join("a.bin")).unwrap();
    assert_eq!(back, recs);
    assert_eq!((manifest.voice_dim, manifest.face_dim), (8, 12));
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn model_file_round_trips_bit_exactly() {
    let spec = ArchitectureSpec {
        voice_hidden_dims: vec![16, 8],
        face_hidden_dims: vec![8],
        fusion_dim: 8,
        post_fusion_hidden_dims: vec![8],
        ..ArchitectureSpec::new(6, 4, 3)
    };
    let mut model = build_model::<f32>(&spec, 3).unwrap();
    // Values that a lossy float encoding would disturb.
    model.voice_branch[0].weights[0] = -0.0;
    model.voice_branch[0].weights[1] = f32::MIN_POSITIVE / 8.0;
    model.classifier_head.bias[0] = 0.1;
    let bytes = encode_model(&model);
    let back = decode_model(&bytes).unwrap();
    for (a, b) in model.layers().zip(back.layers()) {
        assert_eq!(bits(&a.weights), bits(&b.weights));
        assert_eq!(bits(&a.bias), bits(&b.bias));
    }
    assert_eq!(back.spec, model.spec);
    assert_eq!(encode_model(&back), bytes);
}

#[test]
fn svm_file_round_trips_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x: Vec<Vec<f64>> = (0..45)
        .map(|i| {
            (0..4)
                .map(|k| rng.random_range(-1.0..1.0) + if k == i % 3 { 2.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let y: Vec<usize> = (0..45).map(|i| i % 3).collect();
    let model = train_multiclass(&x, &y, 3, &SvmSettings::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.svm");
    save_svm(&model, &path).unwrap();
    let back = load_svm(&path).unwrap();
    assert_eq!(back, model);
    for (a, b) in model.machines.iter().zip(&back.machines) {
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
        assert!(a
            .dual_coef
            .iter()
            .zip(&b.dual_coef)
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    for (a, b) in model.stats.mean.iter().zip(&back.stats.mean) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"FUSESVM1");
    assert_eq!(encode_svm(&back), bytes);
}

#[test]
fn svm_file_rejects_damage() {
    let x = vec![
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![0.1, 0.9],
        vec![0.9, 0.1],
    ];
    let model = train_multiclass(&x, &[0, 1, 0, 1], 2, &SvmSettings::default()).unwrap();
    let bytes = encode_svm(&model);
    assert!(matches!(
        decode_svm(&bytes[..bytes.len() - 1]),
        Err(Error::Corrupt(_))
    ));
    assert!(matches!(decode_svm(b"FUSEMDL1"), Err(Error::Corrupt(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode_svm(&extra), Err(Error::Corrupt(_))));
}
