use proptest::prelude::*;
use ted_core::decoder::LinearDecoder;
use ted_core::io::{FeatureFile, ModelArtifact, RunReport, SampleRecord};
use ted_core::linalg::Matrix;
use ted_core::rng::Rng;
use ted_core::subspace::PrincipalSubspace;
use ted_core::Error;

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<f32>().prop_filter("finite", |v| v.is_finite())
}

fn feature_file() -> impl Strategy<Value = FeatureFile> {
    (0usize..6, 1usize..6, any::<bool>()).prop_flat_map(|(n, d, labelled)| {
        (
            proptest::collection::vec(finite_f32(), n * d),
            proptest::collection::vec(any::<u32>(), n),
        )
            .prop_map(move |(data, labels)| {
                FeatureFile::new(n, d, data, labelled.then_some(labels)).unwrap()
            })
    })
}

fn random_artifact(seed: u64, with_subspace: bool) -> ModelArtifact {
    let mut rng = Rng::new(seed);
    let (n, d, c) = (9, 5, 3);
    let z = Matrix::new(n, d, (0..n * d).map(|_| rng.normal() * 3.0).collect()).unwrap();
    let w = Matrix::new(c, d, (0..c * d).map(|_| rng.normal()).collect()).unwrap();
    let mut hash = [0u8; 32];
    for b in hash.iter_mut() {
        *b = (rng.next_u64() & 0xff) as u8;
    }
    ModelArtifact {
        subspace: with_subspace.then(|| PrincipalSubspace::fit(&z, 1 + (seed % 5) as usize).unwrap()),
        decoder: Some(LinearDecoder::new(w, (0..c).map(|_| rng.normal()).collect()).unwrap()),
        seed: rng.next_u64(),
        config_hash: hash,
    }
}

proptest! {
    #[test]
    fn feature_roundtrip_is_bit_exact(f in feature_file()) {
        let bytes = f.to_bytes();
        let back = FeatureFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        let same_bits = back.data().iter().zip(f.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same_bits);
        prop_assert_eq!(back, f);
    }

    #[test]
    fn feature_truncation_is_rejected(f in feature_file(), cut in 1usize..8) {
        let bytes = f.to_bytes();
        let cut = cut.min(bytes.len());
        prop_assert!(FeatureFile::from_bytes(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn artifact_roundtrip_is_bit_exact(seed in any::<u64>(), full in any::<bool>()) {
        let a = random_artifact(seed, full);
        let bytes = a.to_bytes().unwrap();
        let back = ModelArtifact::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        prop_assert_eq!(back, a);
    }
}

#[test]
fn files_on_disk_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let f = FeatureFile::new(2, 2, vec![0.5, -1.25, 3.0, 1e-30], None).unwrap();
    let p = dir.path().join("x.latf");
    f.write(&p).unwrap();
    assert_eq!(FeatureFile::read(&p).unwrap(), f);

    let a = random_artifact(7, true);
    let q = dir.path().join("m.tedm");
    a.write(&q).unwrap();
    assert_eq!(ModelArtifact::read(&q).unwrap(), a);
    assert!(matches!(ModelArtifact::read(&p), Err(Error::Format(_))));
    assert!(matches!(FeatureFile::read(dir.path().join("missing")), Err(Error::Io(_))));
}

#[test]
fn artifact_corruption_is_detected() {
    let bytes = random_artifact(3, true).to_bytes().unwrap();
    let mut version = bytes.clone();
    version[4] = 9;
    assert!(ModelArtifact::from_bytes(&version).is_err());
    assert!(ModelArtifact::from_bytes(&bytes[..bytes.len() - 8]).is_err());
    // Section count beyond the table.
    let mut count = bytes;
    count[8] = 200;
    assert!(ModelArtifact::from_bytes(&count).is_err());
}

#[test]
fn report_aggregates_match_rows() {
    let mut rng = Rng::new(5);
    let records: Vec<SampleRecord> = (0..50)
        .map(|i| SampleRecord {
            index: i,
            true_label: Some(rng.below(3) as u32),
            noadapt_class: rng.below(3) as usize,
            noadapt_entropy: rng.uniform(),
            adapted_class: rng.below(3) as usize,
            adapted_entropy: rng.uniform() * 0.5,
            evaluations: 97,
            saturations: 0,
            sigma_clamps: 0,
            error: None,
            wall_ms: rng.uniform(),
        })
        .collect();
    let report = RunReport {
        settings: Default::default(),
        records: records.clone(),
    };
    let parsed = RunReport::records_from_csv(&report.to_csv().unwrap()).unwrap();
    assert_eq!(parsed, records);
    let hits = records
        .iter()
        .filter(|r| r.adapted_class == r.true_label.unwrap() as usize)
        .count();
    let agg = report.aggregates();
    assert_eq!(agg.accuracy_adapted, Some(100.0 * hits as f64 / 50.0));
}
