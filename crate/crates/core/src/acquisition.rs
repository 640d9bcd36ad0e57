//! Region scoring and budgeted selection.
//!
//! A round scores every superpixel by the mean edge entropy and mean edge
//! divergence of its still-unlabeled pixels, anchors on the region with the
//! highest mean entropy, keeps the regions lying mostly inside the
//! high-entropy territory defined by that anchor, and then takes regions in
//! decreasing mean divergence until the pixel budget is met.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::grid::Grid;
use crate::superpixel::SuperpixelMap;
use crate::uncertainty::ScoreMap;
use crate::{Error, Result};

/// Fraction of a region's unlabeled pixels that must be high-entropy for it
/// to join the candidate set.
pub const OVERLAP_FRACTION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionScore {
    pub image_id: usize,
    pub region_id: u32,
    pub mean_ee: f32,
    pub mean_ed: f32,
    pub unlabeled_count: usize,
}

impl RegionScore {
    pub fn key(&self) -> RegionKey {
        (self.image_id, self.region_id)
    }
}

pub type RegionKey = (usize, u32);

/// One chosen region. `score` drives the ranking and `tie_score` breaks
/// ties before falling back to (image id, region id).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectedRegion {
    pub image_id: usize,
    pub region_id: u32,
    pub score: f32,
    pub tie_score: f32,
    pub pixels: usize,
}

impl SelectedRegion {
    pub fn key(&self) -> RegionKey {
        (self.image_id, self.region_id)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectionResult {
    pub selected: Vec<SelectedRegion>,
    pub pixels_revealed: usize,
    pub budget_target: usize,
}

impl SelectionResult {
    pub fn regions(&self) -> impl Iterator<Item = RegionKey> + '_ {
        self.selected.iter().map(SelectedRegion::key)
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Means of EE and ED over the unlabeled pixels of each region. Regions
/// with no unlabeled pixels are left out.
pub fn regional_means(
    image_id: usize,
    ee: &ScoreMap,
    ed: &ScoreMap,
    superpixels: &SuperpixelMap,
    labeled: &Grid<bool>,
) -> Result<Vec<RegionScore>> {
    let dims = superpixels.dims();
    for (what, d) in [
        ("edge entropy map", ee.dims()),
        ("edge divergence map", ed.dims()),
        ("labeled mask", labeled.dims()),
    ] {
        if d != dims {
            return Err(Error::shape(what, dims, d));
        }
    }
    let regions = superpixels.region_count() as usize;
    let mut sum_ee = vec![0.0f64; regions];
    let mut sum_ed = vec![0.0f64; regions];
    let mut count = vec![0usize; regions];
    let ids = superpixels.labels().as_slice();
    for px in 0..ids.len() {
        if labeled.as_slice()[px] {
            continue;
        }
        let r = ids[px] as usize;
        sum_ee[r] += ee.as_slice()[px] as f64;
        sum_ed[r] += ed.as_slice()[px] as f64;
        count[r] += 1;
    }
    Ok((0..regions)
        .filter(|&r| count[r] > 0)
        .map(|r| RegionScore {
            image_id,
            region_id: r as u32,
            mean_ee: (sum_ee[r] / count[r] as f64) as f32,
            mean_ed: (sum_ed[r] / count[r] as f64) as f32,
            unlabeled_count: count[r],
        })
        .collect())
}

/// Per-image inputs for candidate-set construction; the slice index is the
/// image id.
#[derive(Clone, Copy, Debug)]
pub struct ImageView<'a> {
    pub entropy: &'a ScoreMap,
    pub superpixels: &'a SuperpixelMap,
    pub labeled: &'a Grid<bool>,
}

/// Highest mean edge entropy; ties go to the lower (image, region).
pub fn anchor(scores: &[RegionScore]) -> Option<&RegionScore> {
    scores.iter().min_by(|a, b| {
        b.mean_ee
            .total_cmp(&a.mean_ee)
            .then(a.image_id.cmp(&b.image_id))
            .then(a.region_id.cmp(&b.region_id))
    })
}

/// Regions whose unlabeled pixels sit at or above the anchor's mean edge
/// entropy on at least half of those pixels. The anchor is always included.
pub fn build_candidate_set(
    scores: &[RegionScore],
    images: &[ImageView<'_>],
) -> Result<BTreeSet<RegionKey>> {
    let anchor = anchor(scores).ok_or(Error::Empty("region scores"))?;
    let threshold = anchor.mean_ee;
    let mut candidates = BTreeSet::new();
    candidates.insert(anchor.key());

    let mut by_image: Vec<Vec<&RegionScore>> = vec![Vec::new(); images.len()];
    for s in scores {
        let slot = by_image.get_mut(s.image_id).ok_or_else(|| {
            Error::InvalidArgument(alloc::format!("score for unknown image {}", s.image_id))
        })?;
        slot.push(s);
    }

    for (image_id, view) in images.iter().enumerate() {
        if by_image[image_id].is_empty() {
            continue;
        }
        let overlap = high_entropy_overlap(view, threshold);
        for s in &by_image[image_id] {
            if overlap[s.region_id as usize].is_some_and(|f| f >= OVERLAP_FRACTION) {
                candidates.insert(s.key());
            }
        }
    }
    Ok(candidates)
}

/// Per region, the fraction of its unlabeled pixels whose edge entropy is
/// at least `threshold`; `None` for regions with nothing unlabeled.
pub fn high_entropy_overlap(view: &ImageView<'_>, threshold: f32) -> Vec<Option<f64>> {
    let regions = view.superpixels.region_count() as usize;
    let mut high = vec![0usize; regions];
    let mut unlabeled = vec![0usize; regions];
    let ids = view.superpixels.labels().as_slice();
    for (px, &r) in ids.iter().enumerate() {
        if view.labeled.as_slice()[px] {
            continue;
        }
        unlabeled[r as usize] += 1;
        if view.entropy.as_slice()[px] >= threshold {
            high[r as usize] += 1;
        }
    }
    high.iter()
        .zip(&unlabeled)
        .map(|(&h, &u)| (u > 0).then(|| h as f64 / u as f64))
        .collect()
}

/// Ranking order: higher score, then higher tie score, then lower image id,
/// then lower region id.
pub fn rank_order(a: &SelectedRegion, b: &SelectedRegion) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.tie_score.total_cmp(&a.tie_score))
        .then(a.image_id.cmp(&b.image_id))
        .then(a.region_id.cmp(&b.region_id))
}

/// Takes regions in the given order until the cumulative pixel count reaches
/// `budget_pixels` or the list runs out.
pub fn fill_budget(
    ordered: impl IntoIterator<Item = SelectedRegion>,
    budget_pixels: usize,
) -> SelectionResult {
    let mut result = SelectionResult {
        budget_target: budget_pixels,
        ..SelectionResult::default()
    };
    for region in ordered {
        if result.pixels_revealed >= budget_pixels {
            break;
        }
        result.pixels_revealed += region.pixels;
        result.selected.push(region);
    }
    result
}

/// Greedy selection by score under a pixel budget.
pub fn greedy_select(mut candidates: Vec<SelectedRegion>, budget_pixels: usize) -> SelectionResult {
    candidates.sort_by(rank_order);
    fill_budget(candidates, budget_pixels)
}

/// Repeatedly takes the candidate with the largest mean edge divergence
/// until the unlabeled pixels taken reach `budget_pixels`.
pub fn select_regions(
    scores: &[RegionScore],
    candidates: &BTreeSet<RegionKey>,
    budget_pixels: usize,
) -> SelectionResult {
    let pool = scores
        .iter()
        .filter(|s| candidates.contains(&s.key()))
        .map(|s| SelectedRegion {
            image_id: s.image_id,
            region_id: s.region_id,
            score: s.mean_ed,
            tie_score: s.mean_ee,
            pixels: s.unlabeled_count,
        })
        .collect();
    greedy_select(pool, budget_pixels)
}
