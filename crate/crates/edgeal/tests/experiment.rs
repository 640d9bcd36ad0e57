use std::fs;
use std::path::Path;

use edgeal::config::ExperimentConfig;
use edgeal::dataset::load_dataset;
use edgeal::experiment::{
    budget_pixels, cell_dir, prepare, read_curves, run_experiment, run_prepared, CurveRow, CURVES_FILE,
};
use edgeal::synth::{generate_synthetic, SynthConfig};
use edgeal::Error;
use edgeal_core::baselines::Strategy;

fn small_data(root: &Path) {
    let cfg = SynthConfig { n_images: 8, height: 24, width: 24, seed: 5, ..SynthConfig::default() };
    generate_synthetic(root, &cfg).unwrap();
}

fn small_config(root: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        dataset: root.to_path_buf(),
        strategies: vec![Strategy::EdgeAl, Strategy::Random],
        seeds: vec![1, 2],
        rounds: 2,
        mc_passes: 3,
        superpixels: 16,
        seed_fraction: 0.1,
        ..ExperimentConfig::default()
    };
    cfg.train.epochs = 10;
    cfg
}

fn rows_for<'a>(rows: &'a [CurveRow], strategy: &str, seed: u64) -> Vec<&'a CurveRow> {
    rows.iter().filter(|r| r.strategy == strategy && r.seed == seed).collect()
}

#[test]
fn zero_rounds_gives_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let mut cfg = small_config(dir.path());
    cfg.rounds = 0;
    let ds = load_dataset(dir.path()).unwrap();
    let out = run_experiment(&cfg, &ds).unwrap();
    assert_eq!(out.rows.len(), cfg.strategies.len() * cfg.seeds.len());
    assert!(out.rows.iter().all(|r| r.round == 0));
}

#[test]
fn round_zero_is_shared_and_fractions_follow_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let mut cfg = small_config(dir.path());
    cfg.strategies = Strategy::ALL.to_vec();
    let ds = load_dataset(dir.path()).unwrap();
    let prepared = prepare(&ds, &cfg).unwrap();
    let out = run_prepared(&cfg, &prepared).unwrap();
    let largest_region = prepared
        .superpixels
        .iter()
        .flat_map(|s| s.region_sizes())
        .max()
        .unwrap() as f64
        / prepared.total_pixels() as f64;
    let step = budget_pixels(&prepared, cfg.budget) as f64 / prepared.total_pixels() as f64;
    for &seed in &cfg.seeds {
        let reference = rows_for(&out.rows, "edgeal", seed)[0].clone();
        for s in Strategy::ALL {
            let rows = rows_for(&out.rows, s.name(), seed);
            assert_eq!(rows.len(), cfg.rounds + 1);
            let mut r0 = rows[0].clone();
            r0.strategy = reference.strategy.clone();
            assert_eq!(r0, reference, "{s}");
            for w in rows.windows(2) {
                assert!(w[1].labeled_fraction > w[0].labeled_fraction);
                let gained = w[1].labeled_fraction - w[0].labeled_fraction;
                assert!(gained >= step - 1e-12 && gained <= step + largest_region, "{s}: {gained}");
            }
        }
    }
}

#[test]
fn outputs_are_reproducible_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_data(&data);
    let ds = load_dataset(&data).unwrap();
    let mut cfg = small_config(&data);
    let prepared = prepare(&ds, &cfg).unwrap();

    cfg.out = Some(dir.path().join("a"));
    let a = run_prepared(&cfg, &prepared).unwrap();
    cfg.out = Some(dir.path().join("b"));
    run_prepared(&cfg, &prepared).unwrap();
    let curves_a = fs::read(dir.path().join("a").join(CURVES_FILE)).unwrap();
    assert_eq!(curves_a, fs::read(dir.path().join("b").join(CURVES_FILE)).unwrap());
    assert_eq!(read_curves(&dir.path().join("a").join(CURVES_FILE)).unwrap(), a.rows);

    // Interrupt one cell after round 1, then resume.
    let cell = cell_dir(&dir.path().join("b"), Strategy::EdgeAl, 2);
    fs::remove_dir_all(cell.join("mask_round2")).unwrap();
    fs::remove_file(cell.join("model_round2.ealt")).unwrap();
    fs::remove_file(dir.path().join("b").join(CURVES_FILE)).unwrap();
    run_prepared(&cfg, &prepared).unwrap();
    assert_eq!(curves_a, fs::read(dir.path().join("b").join(CURVES_FILE)).unwrap());

    // A shorter run followed by the full one matches too.
    cfg.out = Some(dir.path().join("c"));
    cfg.rounds = 1;
    run_prepared(&cfg, &prepared).unwrap();
    cfg.rounds = 2;
    run_prepared(&cfg, &prepared).unwrap();
    assert_eq!(curves_a, fs::read(dir.path().join("c").join(CURVES_FILE)).unwrap());

    let selection = fs::read_to_string(cell.join("selection_round1.csv")).unwrap();
    assert!(selection.starts_with("image_id,region_id,mean_ee,mean_ed,pixels\n"));
}

#[test]
fn tampered_mask_is_reported_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_data(&data);
    let ds = load_dataset(&data).unwrap();
    let mut cfg = small_config(&data);
    cfg.strategies = vec![Strategy::Random];
    cfg.seeds = vec![3];
    cfg.out = Some(dir.path().join("out"));
    run_experiment(&cfg, &ds).unwrap();

    let mask_dir = cell_dir(&dir.path().join("out"), Strategy::Random, 3).join("mask_round1");
    let first = fs::read_dir(&mask_dir).unwrap().next().unwrap().unwrap().path();
    let mut mask = edgeal::io::read_class_map(&first).unwrap();
    let flipped: Vec<u8> = mask.as_slice().iter().map(|&v| if v == 255 { 255 } else { (v + 1) % 3 }).collect();
    mask.as_mut_slice().copy_from_slice(&flipped);
    edgeal::io::write_class_map(&first, &mask).unwrap();

    match run_experiment(&cfg, &ds).unwrap_err() {
        Error::Cell { strategy, seed, round, .. } => {
            assert_eq!((strategy.as_str(), seed, round), ("random", 3, 1));
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn curves_csv_has_header_and_quoting() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let rows = vec![CurveRow {
        strategy: "edgeal".into(),
        seed: 1,
        round: 0,
        labeled_fraction: 0.025,
        mean_dice: 0.5,
        per_class_dice: vec![Some(1.0), None, Some(0.0)],
    }];
    edgeal::experiment::write_curves(&path, &rows).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("strategy,seed,round,labeled_fraction,mean_dice,per_class_dice\n"));
    assert_eq!(read_curves(&path).unwrap(), rows);
}
