use edgeal::io::write_tensor;
use edgeal::precomputed::{count_passes, pass_path, read_precomputed_pass, PrecomputedProvider};
use edgeal_core::round::PredictionProvider;
use edgeal_core::tensor::{Tensor, TensorData};
use edgeal_core::uncertainty::ProbabilityMap;

fn write_pass(dir: &std::path::Path, name: &str, k: usize, classes: usize, first: f32) {
    let (h, w) = (4, 5);
    let rest = (1.0 - first) / (classes - 1) as f32;
    let mut data = vec![first; h * w];
    data.extend(vec![rest; (classes - 1) * h * w]);
    let t = Tensor::new(vec![classes, h, w], TensorData::F32(data)).unwrap();
    write_tensor(pass_path(dir, name, k), &t).unwrap();
}

#[test]
fn well_formed_passes_load() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..3 {
        write_pass(dir.path(), "s000", k, 3, 0.5);
    }
    assert_eq!(count_passes(dir.path(), "s000"), 3);
    let map = read_precomputed_pass(dir.path(), "s000", 1, Some(3)).unwrap();
    assert_eq!(map.dims(), (3, 4, 5));
    assert!((map.get(0, 7) - 0.5).abs() < 1e-7);

    let provider = PrecomputedProvider {
        dir: dir.path().to_path_buf(),
        names: vec!["s000".into()],
        classes: 3,
    };
    assert_eq!(provider.predict_deterministic(0).unwrap(), provider.predict_pass(0, 0).unwrap());
}

#[test]
fn unnormalized_map_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = vec![0.4f32; 2 * 3 * 3];
    let t = Tensor::new(vec![2, 3, 3], TensorData::F32(data)).unwrap();
    write_tensor(pass_path(dir.path(), "x", 0), &t).unwrap();
    let msg = read_precomputed_pass(dir.path(), "x", 0, None).unwrap_err().to_string();
    assert!(msg.contains("x_pass0.ealt"), "{msg}");
    assert!(msg.to_lowercase().contains("sum") || msg.contains("normal"), "{msg}");
}

#[test]
fn class_count_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_pass(dir.path(), "x", 0, 2, 0.3);
    assert!(read_precomputed_pass(dir.path(), "x", 0, Some(2)).is_ok());
    let msg = read_precomputed_pass(dir.path(), "x", 0, Some(3)).unwrap_err().to_string();
    assert!(msg.contains("2 classes"), "{msg}");
}

#[test]
fn provider_errors_carry_image_id() {
    let dir = tempfile::tempdir().unwrap();
    write_pass(dir.path(), "a", 0, 3, 0.2);
    let provider = PrecomputedProvider {
        dir: dir.path().to_path_buf(),
        names: vec!["a".into(), "b".into()],
        classes: 3,
    };
    assert!(provider.predict_pass(0, 0).is_ok());
    match provider.predict_pass(1, 0).unwrap_err() {
        edgeal_core::Error::Provider { image, .. } => assert_eq!(image, 1),
        e => panic!("unexpected {e}"),
    }
    assert!(provider.predict_pass(0, 1).is_err());
}

#[test]
fn round_trips_through_probability_map() {
    let p = ProbabilityMap::uniform(4, 3, 2);
    let back = Tensor::from_probability_map(&p).to_probability_map(1e-6).unwrap();
    assert_eq!(back, p);
}
