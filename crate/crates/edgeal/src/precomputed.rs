//! Probability maps produced by an external model, read from a directory of
//! `<name>_pass<k>.ealt` files.

use std::path::{Path, PathBuf};

use edgeal_core::round::PredictionProvider;
use edgeal_core::uncertainty::ProbabilityMap;

use crate::io::read_tensor;
use crate::{Error, Result};

/// Per-pixel sums of external maps must be within this of 1.
pub const PRECOMPUTED_TOLERANCE: f32 = 1e-4;

pub fn pass_path(dir: &Path, name: &str, pass: usize) -> PathBuf {
    dir.join(format!("{name}_pass{pass}.ealt"))
}

/// Loads and validates one pass. A class count, when given, must match.
pub fn read_precomputed_pass(
    dir: &Path,
    name: &str,
    pass: usize,
    classes: Option<usize>,
) -> Result<ProbabilityMap> {
    let path = pass_path(dir, name, pass);
    let map = read_tensor(&path)?
        .to_probability_map(PRECOMPUTED_TOLERANCE)
        .map_err(|e| Error::file(&path, e))?;
    if let Some(c) = classes {
        if map.classes() != c {
            return Err(Error::file(
                &path,
                format!("{} classes, dataset has {c}", map.classes()),
            ));
        }
    }
    Ok(map)
}

/// Number of consecutive pass files `_pass0`, `_pass1`, ... present.
pub fn count_passes(dir: &Path, name: &str) -> usize {
    (0..).take_while(|&k| pass_path(dir, name, k).is_file()).count()
}

pub struct PrecomputedProvider {
    pub dir: PathBuf,
    /// Sample names indexed by image id.
    pub names: Vec<String>,
    pub classes: usize,
}

impl PrecomputedProvider {
    fn load(&self, image: usize, pass: usize) -> edgeal_core::Result<ProbabilityMap> {
        let name = self.names.get(image).ok_or_else(|| edgeal_core::Error::Provider {
            image,
            message: "no sample name for image".into(),
        })?;
        read_precomputed_pass(&self.dir, name, pass, Some(self.classes)).map_err(|e| {
            edgeal_core::Error::Provider {
                image,
                message: e.to_string(),
            }
        })
    }
}

impl PredictionProvider for PrecomputedProvider {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn predict_pass(&self, image: usize, pass: usize) -> edgeal_core::Result<ProbabilityMap> {
        self.load(image, pass)
    }

    /// External models supply no separate deterministic output; pass 0
    /// stands in for it.
    fn predict_deterministic(&self, image: usize) -> edgeal_core::Result<ProbabilityMap> {
        self.load(image, 0)
    }
}
