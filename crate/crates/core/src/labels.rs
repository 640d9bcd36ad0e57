//! Partial annotation bookkeeping and the simulated oracle.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::acquisition::SelectionResult;
use crate::grid::Grid;
use crate::rng;
use crate::superpixel::SuperpixelMap;
use crate::{Error, Result};

/// Mask value for pixels whose class is still unknown.
pub const UNLABELED: u8 = 255;

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub pixels_revealed: usize,
    pub fraction: f64,
}

/// Per-image annotation masks for the training pool.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelState {
    masks: Vec<Grid<u8>>,
    revealed: usize,
    seed_pixels: usize,
    seed_images: Vec<usize>,
    total_pixels: usize,
    history: Vec<RoundRecord>,
}

impl LabelState {
    /// Rebuilds a state from persisted masks; `seed_pixels` is the count
    /// revealed before the first acquisition round.
    pub fn from_masks(masks: Vec<Grid<u8>>, seed_images: Vec<usize>) -> Self {
        let total_pixels = masks.iter().map(Grid::len).sum();
        let revealed = count_revealed(&masks);
        let seed_pixels = seed_images.iter().map(|&i| masks[i].len()).sum();
        LabelState {
            masks,
            revealed,
            seed_pixels,
            seed_images,
            total_pixels,
            history: Vec::new(),
        }
    }

    /// Appends a history record without touching masks, for replaying
    /// persisted rounds.
    pub fn push_history(&mut self, record: RoundRecord) {
        self.history.push(record);
    }

    pub fn masks(&self) -> &[Grid<u8>] {
        &self.masks
    }

    pub fn mask(&self, image: usize) -> &Grid<u8> {
        &self.masks[image]
    }

    pub fn image_count(&self) -> usize {
        self.masks.len()
    }

    pub fn labeled_mask(&self, image: usize) -> Grid<bool> {
        self.masks[image].map(|v| v != UNLABELED)
    }

    pub fn unlabeled_in(&self, image: usize) -> usize {
        self.masks[image]
            .as_slice()
            .iter()
            .filter(|&&v| v == UNLABELED)
            .count()
    }

    pub fn revealed_pixel_count(&self) -> usize {
        self.revealed
    }

    pub fn seed_pixels(&self) -> usize {
        self.seed_pixels
    }

    pub fn seed_images(&self) -> &[usize] {
        &self.seed_images
    }

    pub fn total_pixels(&self) -> usize {
        self.total_pixels
    }

    pub fn labeled_fraction(&self) -> f64 {
        self.revealed as f64 / self.total_pixels as f64
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    /// Copies ground truth into every pixel of every selected region and
    /// records the round. The state is left untouched on error.
    pub fn reveal(
        &mut self,
        selection: &SelectionResult,
        superpixels: &[SuperpixelMap],
        ground_truth: &[Grid<u8>],
    ) -> Result<usize> {
        if selection.is_empty() {
            return Ok(0);
        }
        if superpixels.len() != self.masks.len() || ground_truth.len() != self.masks.len() {
            return Err(Error::shape(
                "reveal inputs",
                self.masks.len(),
                (superpixels.len(), ground_truth.len()),
            ));
        }
        let mut indexed: Vec<Option<Vec<Vec<usize>>>> = alloc::vec![None; self.masks.len()];
        for (image, region) in selection.regions() {
            let sp = superpixels.get(image).ok_or_else(|| {
                Error::InvalidArgument(alloc::format!("selection names unknown image {image}"))
            })?;
            if region >= sp.region_count() {
                return Err(Error::RegionOutOfRange {
                    region,
                    count: sp.region_count(),
                });
            }
            if sp.dims() != self.masks[image].dims() || ground_truth[image].dims() != sp.dims() {
                return Err(Error::shape(
                    "ground truth vs superpixels",
                    sp.dims(),
                    ground_truth[image].dims(),
                ));
            }
            let pixels = &indexed[image].get_or_insert_with(|| sp.region_index())[region as usize];
            if pixels.iter().all(|&px| self.masks[image].as_slice()[px] != UNLABELED) {
                return Err(Error::AlreadyRevealed { image, region });
            }
        }

        let mut newly = 0;
        for (image, region) in selection.regions() {
            let pixels = &indexed[image].as_ref().expect("indexed above")[region as usize];
            let truth = ground_truth[image].as_slice();
            let mask = self.masks[image].as_mut_slice();
            for &px in pixels {
                if mask[px] == UNLABELED {
                    mask[px] = truth[px];
                    newly += 1;
                }
            }
        }
        self.revealed += newly;
        self.history.push(RoundRecord {
            round: self.history.len() + 1,
            pixels_revealed: newly,
            fraction: self.labeled_fraction(),
        });
        Ok(newly)
    }
}

fn count_revealed(masks: &[Grid<u8>]) -> usize {
    masks
        .iter()
        .map(|m| m.as_slice().iter().filter(|&&v| v != UNLABELED).count())
        .sum()
}

/// Reveals whole images, drawn uniformly without replacement, until at
/// least `fraction` of all pool pixels are labeled.
pub fn sample_seed_set(ground_truth: &[Grid<u8>], fraction: f64, seed: u64) -> Result<LabelState> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "seed fraction {fraction} outside (0, 1)"
        )));
    }
    if ground_truth.is_empty() {
        return Err(Error::Empty("seed-set pool"));
    }
    let total: usize = ground_truth.iter().map(Grid::len).sum();
    let mut order: Vec<usize> = (0..ground_truth.len()).collect();
    order.shuffle(&mut rng::keyed(seed, &[rng::tag::SEED_SET]));

    let mut chosen = Vec::new();
    let mut labeled = 0usize;
    for i in order {
        if labeled as f64 >= fraction * total as f64 {
            break;
        }
        labeled += ground_truth[i].len();
        chosen.push(i);
    }
    if chosen.is_empty() {
        return Err(Error::InvalidArgument(
            "seed fraction selects no images".into(),
        ));
    }
    chosen.sort_unstable();

    let masks = ground_truth
        .iter()
        .enumerate()
        .map(|(i, gt)| {
            if chosen.binary_search(&i).is_ok() {
                gt.clone()
            } else {
                Grid::filled(gt.height(), gt.width(), UNLABELED)
            }
        })
        .collect();
    Ok(LabelState::from_masks(masks, chosen))
}
