//! Synthetic layered images: horizontal class bands whose boundaries wander
//! as clamped random walks, with reduced contrast over the right third.

use std::path::Path;

use edgeal_core::rng;
use edgeal_core::Grid;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{write_sample, write_splits, DatasetIndex, Sample, Split};
use crate::{Error, Result};

/// Standard deviation of one boundary step, in pixels.
const STEP_STD: f32 = 0.5;
/// Minimum vertical gap between neighbouring boundaries.
const MIN_GAP: f32 = 2.0;
/// Contrast multiplier inside the low-visibility right third.
pub const LOW_CONTRAST: f32 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Training images; validation and test each get a third as many.
    pub n_images: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub noise: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_images: 40,
            height: 64,
            width: 64,
            classes: 3,
            noise: 0.08,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.classes > 254 {
            return Err(Error::Dataset(format!("classes must be in 2..=254, got {}", self.classes)));
        }
        if self.height < 16 || self.width < 16 {
            return Err(Error::Dataset(format!(
                "synthetic images must be at least 16x16, got {}x{}",
                self.height, self.width
            )));
        }
        if self.height < 4 * self.classes {
            return Err(Error::Dataset(format!(
                "height {} too small for {} bands",
                self.height, self.classes
            )));
        }
        if self.n_images == 0 {
            return Err(Error::Dataset("n_images must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Dataset(format!("bad noise level {}", self.noise)));
        }
        Ok(())
    }

    /// Sizes of the train, validation and test splits.
    pub fn split_sizes(&self) -> [usize; 3] {
        let held_out = (self.n_images as f64 / 3.0).round().max(1.0) as usize;
        [self.n_images, held_out, held_out]
    }
}

/// Whether column `n` lies in the reduced-contrast right third.
pub fn in_low_contrast(n: usize, width: usize) -> bool {
    3 * n >= 2 * width
}

/// Clean intensity of class `c`, before noise.
pub fn band_intensity(c: usize, classes: usize, low_contrast: bool) -> f32 {
    let v = c as f32 / (classes - 1) as f32;
    if low_contrast {
        0.5 + (v - 0.5) * LOW_CONTRAST
    } else {
        v
    }
}

/// Boundary rows (fractional) per column: `boundaries[k][n]` separates band
/// `k` from band `k + 1`.
fn boundaries(cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<Vec<f32>> {
    let h = cfg.height as f32;
    let band = h / cfg.classes as f32;
    let jitter = band / 6.0;
    let reach = band / 4.0;
    let step = Normal::new(0.0f32, STEP_STD).expect("finite std");
    let mut rows: Vec<Vec<f32>> = (1..cfg.classes)
        .map(|k| {
            let base = k as f32 * band + rng.random_range(-jitter..=jitter);
            let mut offset = 0.0f32;
            (0..cfg.width)
                .map(|_| {
                    offset = (offset + step.sample(rng)).clamp(-reach, reach);
                    base + offset
                })
                .collect()
        })
        .collect();
    for n in 0..cfg.width {
        for k in 0..rows.len() {
            let lo = if k == 0 { MIN_GAP } else { rows[k - 1][n] + MIN_GAP };
            let hi = h - MIN_GAP * (rows.len() - k) as f32;
            rows[k][n] = rows[k][n].clamp(lo, hi.max(lo));
        }
    }
    rows
}

/// Generates one sample deterministically from `(seed, index)`.
pub fn synth_sample(cfg: &SynthConfig, index: usize, name: String) -> Sample {
    let mut rng = rng::keyed(cfg.seed, &[rng::tag::SYNTHETIC, index as u64]);
    let rows = boundaries(cfg, &mut rng);
    let label = Grid::from_fn(cfg.height, cfg.width, |m, n| {
        let centre = m as f32 + 0.5;
        rows.iter().filter(|b| centre >= b[n]).count() as u8
    });
    let noise = (cfg.noise > 0.0).then(|| Normal::new(0.0f32, cfg.noise).expect("finite std"));
    let mut image = Grid::from_fn(cfg.height, cfg.width, |m, n| {
        band_intensity(
            label.as_slice()[m * cfg.width + n] as usize,
            cfg.classes,
            in_low_contrast(n, cfg.width),
        )
    });
    if let Some(noise) = noise {
        for v in image.as_mut_slice() {
            *v += noise.sample(&mut rng);
        }
    }
    Sample { name, image, label }
}

/// The full dataset in memory, in split order.
pub fn synthesize(cfg: &SynthConfig) -> Result<Vec<(Split, Sample)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let mut index = 0;
    for (split, count) in Split::ALL.into_iter().zip(cfg.split_sizes()) {
        for _ in 0..count {
            out.push((split, synth_sample(cfg, index, format!("s{index:03}"))));
            index += 1;
        }
    }
    Ok(out)
}

/// Writes a synthetic dataset under `root` in the standard layout.
pub fn generate_synthetic(root: impl AsRef<Path>, cfg: &SynthConfig) -> Result<DatasetIndex> {
    let root = root.as_ref();
    let samples = synthesize(cfg)?;
    let mut index = DatasetIndex {
        root: root.to_path_buf(),
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        classes: cfg.classes,
    };
    for (split, sample) in &samples {
        write_sample(root, sample)?;
        match split {
            Split::Train => index.train.push(sample.name.clone()),
            Split::Val => index.val.push(sample.name.clone()),
            Split::Test => index.test.push(sample.name.clone()),
        }
    }
    write_splits(root, &index)?;
    Ok(index)
}
