//! One acquisition round: predictions in, region selection out.

use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::acquisition::{build_candidate_set, regional_means, select_regions, ImageView, SelectionResult};
use crate::baselines::{pixel_scores, random_select, score_select, Strategy};
use crate::edge::EdgeMap;
use crate::grid::Grid;
use crate::labels::LabelState;
use crate::learner::{LinearSoftmaxModel, PixelFeatures};
use crate::superpixel::SuperpixelMap;
use crate::uncertainty::{edge_scores, mc_average, ProbabilityMap, ScoreMap};
use crate::{Error, Result};

/// Source of per-image class probabilities.
pub trait PredictionProvider {
    fn num_classes(&self) -> usize;
    /// One stochastic forward pass.
    fn predict_pass(&self, image: usize, pass: usize) -> Result<ProbabilityMap>;
    /// A single prediction with dropout off.
    fn predict_deterministic(&self, image: usize) -> Result<ProbabilityMap>;
}

/// MC-dropout passes of a trained model over precomputed features.
pub struct McDropoutProvider<'a> {
    pub model: &'a LinearSoftmaxModel,
    pub features: &'a [PixelFeatures],
    pub seed: u64,
}

impl McDropoutProvider<'_> {
    fn features(&self, image: usize) -> Result<&PixelFeatures> {
        self.features.get(image).ok_or_else(|| Error::Provider {
            image,
            message: "no features for image".to_string(),
        })
    }
}

impl PredictionProvider for McDropoutProvider<'_> {
    fn num_classes(&self) -> usize {
        self.model.classes()
    }

    fn predict_pass(&self, image: usize, pass: usize) -> Result<ProbabilityMap> {
        Ok(self
            .model
            .predict_pass(self.features(image)?, image, pass, self.seed))
    }

    fn predict_deterministic(&self, image: usize) -> Result<ProbabilityMap> {
        Ok(self.model.predict(self.features(image)?))
    }
}

/// Everything a round needs besides the predictions. Slices are indexed by
/// training-pool image id.
#[derive(Clone, Copy)]
pub struct RoundInputs<'a> {
    pub edges: &'a [EdgeMap],
    pub superpixels: &'a [SuperpixelMap],
    pub labels: &'a LabelState,
    pub mc_passes: usize,
    pub budget_pixels: usize,
    pub seed: u64,
    pub round: usize,
}

impl RoundInputs<'_> {
    fn check(&self) -> Result<()> {
        let n = self.labels.image_count();
        if self.edges.len() != n || self.superpixels.len() != n {
            return Err(Error::shape(
                "round inputs",
                n,
                (self.edges.len(), self.superpixels.len()),
            ));
        }
        if self.mc_passes == 0 {
            return Err(Error::InvalidArgument("mc_passes must be at least 1".into()));
        }
        if self.budget_pixels == 0 {
            return Err(Error::InvalidArgument("budget must be at least 1 pixel".into()));
        }
        Ok(())
    }
}

fn wrap(image: usize, e: Error) -> Error {
    match e {
        Error::Provider { .. } => e,
        other => Error::Provider {
            image,
            message: other.to_string(),
        },
    }
}

fn checked(
    provider: &dyn PredictionProvider,
    image: usize,
    dims: (usize, usize),
    p: Result<ProbabilityMap>,
) -> Result<ProbabilityMap> {
    let p = p.map_err(|e| wrap(image, e))?;
    if p.classes() != provider.num_classes() || (p.height(), p.width()) != dims {
        return Err(wrap(
            image,
            Error::shape(
                "prediction",
                (provider.num_classes(), dims.0, dims.1),
                p.dims(),
            ),
        ));
    }
    Ok(p)
}

fn mc_passes(
    provider: &dyn PredictionProvider,
    image: usize,
    dims: (usize, usize),
    passes: usize,
) -> Result<Vec<ProbabilityMap>> {
    (0..passes)
        .map(|k| checked(provider, image, dims, provider.predict_pass(image, k)))
        .collect()
}

/// Images that still have unlabeled pixels.
fn open_images(labels: &LabelState) -> impl Iterator<Item = usize> + '_ {
    (0..labels.image_count()).filter(|&i| labels.unlabeled_in(i) > 0)
}

/// The EdgeAL round: MC passes, edge calibration, score maps, regional
/// means, candidate set and greedy selection by edge divergence.
pub fn edgeal_round(provider: &dyn PredictionProvider, inputs: &RoundInputs<'_>) -> Result<SelectionResult> {
    inputs.check()?;
    let n = inputs.labels.image_count();
    let masks: Vec<Grid<bool>> = (0..n).map(|i| inputs.labels.labeled_mask(i)).collect();
    let mut entropy: Vec<Option<ScoreMap>> = (0..n).map(|_| None).collect();
    let mut scores = Vec::new();
    for image in open_images(inputs.labels) {
        let sp = &inputs.superpixels[image];
        let passes = mc_passes(provider, image, sp.dims(), inputs.mc_passes)?;
        let maps = edge_scores(&passes, &inputs.edges[image]).map_err(|e| wrap(image, e))?;
        scores.extend(regional_means(
            image,
            &maps.entropy,
            &maps.divergence,
            sp,
            &masks[image],
        )?);
        entropy[image] = Some(maps.entropy);
    }
    if scores.is_empty() {
        return Ok(empty(inputs.budget_pixels));
    }
    // Images without scores are skipped by the candidate search.
    let blank: ScoreMap = Grid::filled(0, 0, 0.0);
    let views: Vec<ImageView<'_>> = (0..n)
        .map(|i| ImageView {
            entropy: entropy[i].as_ref().unwrap_or(&blank),
            superpixels: &inputs.superpixels[i],
            labeled: &masks[i],
        })
        .collect();
    // When a candidate set runs dry before the budget is met, a new anchor
    // is taken among the regions left and selection continues.
    let mut result = empty(inputs.budget_pixels);
    let mut remaining = scores;
    while result.pixels_revealed < inputs.budget_pixels && !remaining.is_empty() {
        let candidates = build_candidate_set(&remaining, &views)?;
        let part = select_regions(
            &remaining,
            &candidates,
            inputs.budget_pixels - result.pixels_revealed,
        );
        let taken: BTreeSet<_> = part.regions().collect();
        remaining.retain(|s| !taken.contains(&s.key()));
        result.pixels_revealed += part.pixels_revealed;
        result.selected.extend(part.selected);
    }
    Ok(result)
}

fn empty(budget: usize) -> SelectionResult {
    SelectionResult {
        budget_target: budget,
        ..SelectionResult::default()
    }
}

/// Runs one round of any strategy.
pub fn select(
    strategy: Strategy,
    provider: &dyn PredictionProvider,
    inputs: &RoundInputs<'_>,
) -> Result<SelectionResult> {
    if strategy == Strategy::EdgeAl {
        return edgeal_round(provider, inputs);
    }
    inputs.check()?;
    let mut scores = Vec::new();
    for image in open_images(inputs.labels) {
        let sp = &inputs.superpixels[image];
        let labeled = inputs.labels.labeled_mask(image);
        let map = match strategy {
            Strategy::Random => Grid::filled(sp.dims().0, sp.dims().1, 0.0),
            Strategy::Rmcdr => {
                let passes = mc_passes(provider, image, sp.dims(), inputs.mc_passes)?;
                let p = mc_average(&passes).map_err(|e| wrap(image, e))?;
                pixel_scores(strategy, &p).expect("uncertainty strategy")
            }
            _ => {
                let p = checked(provider, image, sp.dims(), provider.predict_deterministic(image))?;
                pixel_scores(strategy, &p).expect("uncertainty strategy")
            }
        };
        scores.extend(regional_means(image, &map, &map, sp, &labeled)?);
    }
    Ok(match strategy {
        Strategy::Random => random_select(&scores, inputs.budget_pixels, inputs.seed, inputs.round),
        _ => score_select(&scores, inputs.budget_pixels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::sample_seed_set;
    use crate::superpixel::initial_grid;
    use alloc::vec;

    struct Fixed {
        classes: usize,
        h: usize,
        w: usize,
        fail_on: Option<usize>,
    }

    impl PredictionProvider for Fixed {
        fn num_classes(&self) -> usize {
            self.classes
        }

        fn predict_pass(&self, image: usize, _pass: usize) -> Result<ProbabilityMap> {
            if self.fail_on == Some(image) {
                return Err(Error::InvalidArgument("boom".into()));
            }
            Ok(ProbabilityMap::uniform(self.classes, self.h, self.w))
        }

        fn predict_deterministic(&self, image: usize) -> Result<ProbabilityMap> {
            self.predict_pass(image, 0)
        }
    }

    struct Fixture {
        edges: Vec<EdgeMap>,
        sp: Vec<SuperpixelMap>,
        labels: LabelState,
    }

    fn fixture(n: usize) -> Fixture {
        let gt: Vec<Grid<u8>> = (0..n).map(|_| Grid::from_fn(8, 8, |m, _| (m / 3) as u8)).collect();
        Fixture {
            edges: (0..n).map(|_| EdgeMap::constant(8, 8, 0.5)).collect(),
            sp: vec![initial_grid(8, 8, 4).unwrap(); n],
            labels: sample_seed_set(&gt, 0.1, 3).unwrap(),
        }
    }

    fn inputs(f: &Fixture, budget: usize) -> RoundInputs<'_> {
        RoundInputs {
            edges: &f.edges,
            superpixels: &f.sp,
            labels: &f.labels,
            mc_passes: 3,
            budget_pixels: budget,
            seed: 1,
            round: 1,
        }
    }

    #[test]
    fn uniform_provider_is_deterministic() {
        let f = fixture(4);
        let p = Fixed { classes: 3, h: 8, w: 8, fail_on: None };
        let a = edgeal_round(&p, &inputs(&f, 40)).unwrap();
        let b = edgeal_round(&p, &inputs(&f, 40)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.selected.len(), 3);
        assert!(a.pixels_revealed >= 40);
        let seed = f.labels.seed_images()[0];
        assert!(a.regions().all(|(i, _)| i != seed));
        // All ties: lowest image, then lowest region ids first.
        let first = (0..4).find(|&i| i != seed).unwrap();
        assert_eq!(a.selected[0].key(), (first, 0));
    }

    #[test]
    fn fully_labeled_gives_empty_selection() {
        let gt: Vec<Grid<u8>> = vec![Grid::filled(8, 8, 1u8)];
        let f = Fixture {
            edges: vec![EdgeMap::constant(8, 8, 0.0)],
            sp: vec![initial_grid(8, 8, 4).unwrap()],
            labels: sample_seed_set(&gt, 0.5, 0).unwrap(),
        };
        let p = Fixed { classes: 2, h: 8, w: 8, fail_on: None };
        for s in Strategy::ALL {
            assert!(select(s, &p, &inputs(&f, 10)).unwrap().is_empty());
        }
    }

    #[test]
    fn provider_errors_carry_the_image() {
        let f = fixture(3);
        let bad = (0..3).find(|&i| !f.labels.seed_images().contains(&i)).unwrap();
        let p = Fixed { classes: 3, h: 8, w: 8, fail_on: Some(bad) };
        for s in [Strategy::EdgeAl, Strategy::Ent, Strategy::Rmcdr] {
            match select(s, &p, &inputs(&f, 10)).unwrap_err() {
                Error::Provider { image, .. } => assert_eq!(image, bad),
                e => panic!("unexpected {e:?}"),
            }
        }
        let wrong = Fixed { classes: 3, h: 8, w: 9, fail_on: None };
        assert!(matches!(
            select(Strategy::Conf, &wrong, &inputs(&f, 10)),
            Err(Error::Provider { .. })
        ));
    }

    struct Confident;

    impl PredictionProvider for Confident {
        fn num_classes(&self) -> usize {
            3
        }

        fn predict_pass(&self, _image: usize, _pass: usize) -> Result<ProbabilityMap> {
            let mut data = vec![0.9f32; 64];
            data.extend(vec![0.05f32; 128]);
            ProbabilityMap::new(3, 8, 8, data)
        }

        fn predict_deterministic(&self, image: usize) -> Result<ProbabilityMap> {
            self.predict_pass(image, 0)
        }
    }

    #[test]
    fn exhausted_candidate_set_is_refilled() {
        // Edge strength grows with the image id, so only the flattest open
        // image clears the anchor threshold and one candidate set is too
        // small for the budget.
        let mut f = fixture(4);
        f.edges = (0..4).map(|i| EdgeMap::constant(8, 8, i as f32 / 4.0)).collect();
        let first = edgeal_round(&Confident, &inputs(&f, 10)).unwrap();
        let images: BTreeSet<usize> = first.regions().map(|(i, _)| i).collect();
        assert_eq!(images.len(), 1);

        let budget = 100;
        let r = edgeal_round(&Confident, &inputs(&f, budget)).unwrap();
        assert!(r.pixels_revealed >= budget, "{}", r.pixels_revealed);
        let images: BTreeSet<usize> = r.regions().map(|(i, _)| i).collect();
        assert!(images.len() >= 2);
        let keys: BTreeSet<_> = r.regions().collect();
        assert_eq!(keys.len(), r.selected.len());
    }

    #[test]
    fn strategies_spend_comparable_budgets() {
        let f = fixture(5);
        let p = Fixed { classes: 3, h: 8, w: 8, fail_on: None };
        let spent: Vec<usize> = Strategy::ALL
            .iter()
            .map(|&s| select(s, &p, &inputs(&f, 50)).unwrap().pixels_revealed)
            .collect();
        let lo = *spent.iter().min().unwrap();
        let hi = *spent.iter().max().unwrap();
        assert!(hi - lo <= 16, "{spent:?}");
        assert!(lo >= 50);
    }
}
