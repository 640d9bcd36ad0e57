//! Dice overlap between predicted and reference class maps.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::Grid;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DiceReport {
    /// `None` for classes absent from both maps.
    pub per_class: Vec<Option<f32>>,
    pub mean: f32,
    pub classes_evaluated: usize,
}

/// Per-class intersection and size counts; accumulate several images to get
/// a dataset-level dice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiceCounts {
    intersection: Vec<u64>,
    pred: Vec<u64>,
    truth: Vec<u64>,
}

impl DiceCounts {
    pub fn new(classes: usize) -> Self {
        DiceCounts {
            intersection: vec![0; classes],
            pred: vec![0; classes],
            truth: vec![0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.pred.len()
    }

    pub fn add(&mut self, pred: &Grid<u8>, gt: &Grid<u8>) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::shape("prediction vs ground truth", gt.dims(), pred.dims()));
        }
        let classes = self.classes();
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            let (p, g) = (p as usize, g as usize);
            if p >= classes || g >= classes {
                return Err(Error::InvalidArgument(alloc::format!(
                    "class id {} out of range for {classes} classes",
                    p.max(g)
                )));
            }
            self.pred[p] += 1;
            self.truth[g] += 1;
            if p == g {
                self.intersection[p] += 1;
            }
        }
        Ok(())
    }

    pub fn report(&self) -> DiceReport {
        let per_class: Vec<Option<f32>> = (0..self.classes())
            .map(|c| {
                let denom = self.pred[c] + self.truth[c];
                (denom > 0).then(|| (2 * self.intersection[c]) as f64 / denom as f64)
                    .map(|d| d as f32)
            })
            .collect();
        let evaluated: Vec<f64> = per_class.iter().flatten().map(|&d| d as f64).collect();
        let mean = if evaluated.is_empty() {
            0.0
        } else {
            (evaluated.iter().sum::<f64>() / evaluated.len() as f64) as f32
        };
        DiceReport {
            per_class,
            mean,
            classes_evaluated: evaluated.len(),
        }
    }
}

/// Per-class `2|A∩B| / (|A| + |B|)`. Classes missing from both maps are
/// skipped; a class predicted but absent from `gt` scores 0.
pub fn dice(pred: &Grid<u8>, gt: &Grid<u8>, classes: usize) -> Result<DiceReport> {
    let mut counts = DiceCounts::new(classes);
    counts.add(pred, gt)?;
    Ok(counts.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn identical_maps() {
        let g = Grid::from_fn(5, 5, |m, n| ((m + n) % 3) as u8);
        let r = dice(&g, &g, 3).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.classes_evaluated, 3);
    }

    #[test]
    fn disjoint_foregrounds() {
        let a = Grid::from_fn(4, 4, |m, _| (m < 2) as u8);
        let b = Grid::from_fn(4, 4, |m, _| (m >= 2) as u8);
        let r = dice(&a, &b, 2).unwrap();
        assert_eq!(r.per_class[1], Some(0.0));
    }

    #[test]
    fn absent_and_spurious_classes() {
        let gt = Grid::filled(2, 2, 0u8);
        let pred = Grid::from_vec(2, 2, vec![0, 0, 0, 1]).unwrap();
        let r = dice(&pred, &gt, 3).unwrap();
        assert_eq!(r.per_class[2], None);
        assert_eq!(r.per_class[1], Some(0.0));
        assert_eq!(r.classes_evaluated, 2);
        assert!((r.mean - (6.0 / 7.0) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let a = Grid::filled(2, 2, 0u8);
        assert!(dice(&a, &Grid::filled(2, 3, 0u8), 2).is_err());
        assert!(dice(&a, &Grid::filled(2, 2, 2u8), 2).is_err());
    }

    fn set_oracle(pred: &Grid<u8>, gt: &Grid<u8>, c: u8) -> Option<f32> {
        let a: BTreeSet<usize> = (0..pred.len()).filter(|&i| pred.as_slice()[i] == c).collect();
        let b: BTreeSet<usize> = (0..gt.len()).filter(|&i| gt.as_slice()[i] == c).collect();
        if a.is_empty() && b.is_empty() {
            return None;
        }
        let inter = a.intersection(&b).count();
        Some((2.0 * inter as f64 / (a.len() + b.len()) as f64) as f32)
    }

    proptest! {
        #[test]
        fn matches_set_counting(p in proptest::collection::vec(0u8..3, 64),
                                g in proptest::collection::vec(0u8..3, 64)) {
            let pred = Grid::from_vec(8, 8, p).unwrap();
            let gt = Grid::from_vec(8, 8, g).unwrap();
            let r = dice(&pred, &gt, 3).unwrap();
            for c in 0..3u8 {
                prop_assert_eq!(r.per_class[c as usize], set_oracle(&pred, &gt, c));
            }
            let swapped = dice(&gt, &pred, 3).unwrap();
            prop_assert_eq!(r.per_class, swapped.per_class);
            prop_assert!((0.0..=1.0).contains(&r.mean));
        }
    }
}
