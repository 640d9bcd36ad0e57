use std::fs;
use std::path::Path;

use edgeal::config::ExperimentConfig;
use edgeal::dataset::load_dataset;
use edgeal::experiment::{full_label_dice, prepare};
use edgeal::synth::{generate_synthetic, in_low_contrast, synthesize, SynthConfig};
use edgeal_core::edge::sobel_magnitude;
use edgeal_core::labels::sample_seed_set;

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["images", "labels"] {
        let mut entries: Vec<_> = fs::read_dir(root.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
    out.push(("splits.txt".into(), fs::read(root.join("splits.txt")).unwrap()));
    out
}

#[test]
fn fixed_seed_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = SynthConfig { n_images: 6, seed: 9, ..SynthConfig::default() };
    generate_synthetic(a.path(), &cfg).unwrap();
    generate_synthetic(b.path(), &cfg).unwrap();
    assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));

    let c = tempfile::tempdir().unwrap();
    generate_synthetic(c.path(), &SynthConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(tree_bytes(a.path()), tree_bytes(c.path()));
}

#[test]
fn default_split_sizes() {
    let cfg = SynthConfig::default();
    assert_eq!(cfg.split_sizes(), [40, 13, 13]);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = SynthConfig::default();
    for bad in [
        SynthConfig { classes: 1, ..base.clone() },
        SynthConfig { height: 15, ..base.clone() },
        SynthConfig { width: 8, ..base.clone() },
        SynthConfig { noise: -0.1, ..base.clone() },
        SynthConfig { n_images: 0, ..base.clone() },
    ] {
        assert!(synthesize(&bad).is_err(), "{bad:?}");
    }
}

/// Without noise, gradients only appear next to a class change or the
/// column where contrast drops.
#[test]
fn noiseless_images_have_edges_only_at_structure() {
    let cfg = SynthConfig { n_images: 10, noise: 0.0, seed: 4, ..SynthConfig::default() };
    for (_, s) in synthesize(&cfg).unwrap() {
        let (h, w) = s.image.dims();
        let sobel = sobel_magnitude(&s.image).unwrap();
        for m in 0..h {
            for n in 0..w {
                if sobel.get(m, n) <= 1e-6 {
                    continue;
                }
                let near = (m.saturating_sub(1)..=(m + 1).min(h - 1)).any(|mm| {
                    (n.saturating_sub(1)..=(n + 1).min(w - 1)).any(|nn| {
                        s.label.get(mm, nn) != s.label.get(m, n)
                            || in_low_contrast(nn, w) != in_low_contrast(n, w)
                    })
                });
                assert!(near, "{}: edge at ({m}, {n}) away from structure", s.name);
            }
        }
        // Piecewise constant: each (class, side) pair has one intensity.
        for m in 0..h {
            for n in 1..w {
                if s.label.get(m, n) == s.label.get(m, n - 1)
                    && in_low_contrast(n, w) == in_low_contrast(n - 1, w)
                {
                    assert_eq!(s.image.get(m, n), s.image.get(m, n - 1));
                }
            }
        }
    }
}

#[test]
fn bands_are_ordered_top_to_bottom() {
    let cfg = SynthConfig { n_images: 4, ..SynthConfig::default() };
    for (_, s) in synthesize(&cfg).unwrap() {
        let (h, w) = s.label.dims();
        for n in 0..w {
            for m in 1..h {
                assert!(s.label.get(m, n) >= s.label.get(m - 1, n));
            }
            assert_eq!(s.label.get(0, n), 0);
            assert_eq!(s.label.get(h - 1, n), 2);
        }
    }
}

#[test]
fn default_set_seed_fraction_is_one_image() {
    let samples = synthesize(&SynthConfig::default()).unwrap();
    let gt: Vec<_> = samples
        .iter()
        .filter(|(split, _)| *split == edgeal::dataset::Split::Train)
        .map(|(_, s)| s.label.clone())
        .collect();
    let state = sample_seed_set(&gt, 0.02, 1).unwrap();
    assert_eq!(state.seed_images().len(), 1);
    assert!((state.labeled_fraction() - 0.025).abs() < 1e-12);
}

#[test]
fn full_labels_give_high_dice_on_default_set() {
    let dir = tempfile::tempdir().unwrap();
    generate_synthetic(dir.path(), &SynthConfig::default()).unwrap();
    let ds = load_dataset(dir.path()).unwrap();
    let cfg = ExperimentConfig::default();
    let prepared = prepare(&ds, &cfg).unwrap();
    let report = full_label_dice(&prepared, &cfg.train, 1).unwrap();
    assert!(report.mean >= 0.85, "{report:?}");
}
