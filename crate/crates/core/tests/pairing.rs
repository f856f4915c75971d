use fuseid_core::store::{generate_synthetic, pair_samples, voice_samples, Split, SynthConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pairing_ignores_record_order() {
    let cfg = SynthConfig {
        num_identities: 7,
        clips_per_identity_train: 5,
        clips_per_identity_test: 3,
        ..SynthConfig::default()
    };
    let mut records = generate_synthetic(&cfg).unwrap();
    // Drop one face so a clip is skipped.
    records.remove(1);
    let reference = pair_samples(&records, Split::Train).unwrap();
    let voices = voice_samples(&records, Split::Test).unwrap();
    assert_eq!(reference.skipped, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        records.shuffle(&mut rng);
        assert_eq!(pair_samples(&records, Split::Train).unwrap(), reference);
        assert_eq!(voice_samples(&records, Split::Test).unwrap(), voices);
    }
}
