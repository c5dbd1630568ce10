use wlrni::datagen::{
    corruption_is_minimal, generate_dataset, validate_dataset, Dataset, GeneratorConfig, Subset,
};
use wlrni::logic::is_satisfiable;

fn small(seed: u64, corrupt_fraction: f64) -> GeneratorConfig {
    GeneratorConfig { num_pairs: 12, corrupt_fraction, seed, ..GeneratorConfig::default() }
}

#[test]
fn generation_ignores_thread_count() {
    let a = generate_dataset(&small(4, 0.5), 1).unwrap().to_jsonl().unwrap();
    let b = generate_dataset(&small(4, 0.5), 3).unwrap().to_jsonl().unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(&small(5, 0.5), 1).unwrap().to_jsonl().unwrap();
    assert_ne!(a, c);
}

#[test]
fn mixed_dataset_is_valid_and_round_trips() {
    let ds = generate_dataset(&small(9, 0.5), 1).unwrap();
    let counts = ds.counts();
    assert_eq!((counts.exp, counts.corrupt), (6, 6));
    let report = validate_dataset(&ds, 1).unwrap();
    assert!(report.is_valid(), "{:?}", report.failures().collect::<Vec<_>>());
    for p in ds.pairs.iter().filter(|p| p.subset == Subset::Corrupt) {
        assert!(is_satisfiable(&p.sat_formula) && !is_satisfiable(&p.unsat_formula));
        assert!(corruption_is_minimal(p).unwrap());
    }
    let bytes = ds.to_jsonl().unwrap();
    assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 24);
    let back = Dataset::read_jsonl(&bytes[..]).unwrap();
    assert_eq!(back.to_jsonl().unwrap(), bytes);
    assert_eq!(back.pairs.len(), 12);
}

#[test]
fn manifest_describes_the_records() {
    let ds = generate_dataset(&small(2, 0.0), 1).unwrap();
    let (mut records, mut manifest) = (Vec::new(), Vec::new());
    ds.write(&mut records, &mut manifest).unwrap();
    let m: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(m["num_pairs"], 12);
    assert_eq!(m["num_graphs"], 24);
    assert_eq!(m["checksum"], wlrni::datagen::dataset::checksum(&records));
}
