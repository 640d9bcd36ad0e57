//! Comparison strategies scored per region and fed through the same
//! budgeted greedy loop.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::acquisition::{fill_budget, greedy_select, RegionScore, SelectedRegion, SelectionResult};
use crate::rng;
use crate::uncertainty::{entropy, map_pixels, ProbabilityMap, ScoreMap};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    EdgeAl,
    Random,
    /// Softmax entropy of a single deterministic prediction.
    Ent,
    /// One minus the top class probability.
    Conf,
    /// Negative gap between the two most likely classes.
    Mar,
    /// Entropy of the MC-dropout mean.
    Rmcdr,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::EdgeAl,
        Strategy::Random,
        Strategy::Ent,
        Strategy::Conf,
        Strategy::Mar,
        Strategy::Rmcdr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::EdgeAl => "edgeal",
            Strategy::Random => "random",
            Strategy::Ent => "ent",
            Strategy::Conf => "conf",
            Strategy::Mar => "mar",
            Strategy::Rmcdr => "rmcdr",
        }
    }

    /// Whether the strategy needs several dropout passes per image.
    pub fn uses_mc_passes(self) -> bool {
        matches!(self, Strategy::EdgeAl | Strategy::Rmcdr)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.trim().to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == lower)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

pub fn confidence_score(dist: &[f64]) -> f64 {
    1.0 - dist.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn margin_score(dist: &[f64]) -> f64 {
    let (mut top1, mut top2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in dist {
        if v > top1 {
            top2 = top1;
            top1 = v;
        } else if v > top2 {
            top2 = v;
        }
    }
    if top2 == f64::NEG_INFINITY {
        top2 = 0.0;
    }
    -(top1 - top2)
}

/// Per-pixel score map for an uncertainty strategy; `None` for strategies
/// that do not score pixels.
pub fn pixel_scores(strategy: Strategy, p: &ProbabilityMap) -> Option<ScoreMap> {
    match strategy {
        Strategy::Ent | Strategy::Rmcdr => Some(map_pixels(p, entropy)),
        Strategy::Conf => Some(map_pixels(p, confidence_score)),
        Strategy::Mar => Some(map_pixels(p, margin_score)),
        Strategy::EdgeAl | Strategy::Random => None,
    }
}

/// Greedy selection on a per-region uncertainty score, carried in
/// `RegionScore::mean_ee`. Ties fall back to (image id, region id).
pub fn score_select(scores: &[RegionScore], budget_pixels: usize) -> SelectionResult {
    let pool = scores
        .iter()
        .map(|s| SelectedRegion {
            image_id: s.image_id,
            region_id: s.region_id,
            score: s.mean_ee,
            tie_score: 0.0,
            pixels: s.unlabeled_count,
        })
        .collect();
    greedy_select(pool, budget_pixels)
}

/// Uniformly random region order, keyed by `(seed, round)`.
pub fn random_select(
    scores: &[RegionScore],
    budget_pixels: usize,
    seed: u64,
    round: usize,
) -> SelectionResult {
    let mut pool: Vec<SelectedRegion> = scores
        .iter()
        .map(|s| SelectedRegion {
            image_id: s.image_id,
            region_id: s.region_id,
            score: 0.0,
            tie_score: 0.0,
            pixels: s.unlabeled_count,
        })
        .collect();
    pool.sort_by_key(SelectedRegion::key);
    pool.shuffle(&mut rng::keyed(
        seed,
        &[rng::tag::RANDOM_BASELINE, round as u64],
    ));
    fill_budget(pool, budget_pixels)
}

/// Lists the valid strategy names.
pub fn strategy_names() -> String {
    Strategy::ALL
        .iter()
        .map(|s| s.name())
        .collect::<Vec<_>>()
        .join(",")
}
