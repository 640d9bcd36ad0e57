use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::features::{PixelFeatures, FEATURE_COUNT, INPUT_COUNT};
use crate::rng::{self, KeyedRng};
use crate::tensor::{Tensor, TensorData};
use crate::uncertainty::{softmax_in_place, ProbabilityMap};
use crate::{Error, Result};

pub const DEFAULT_DROPOUT: f64 = 0.5;

/// Class scores `W · [features, 1]` followed by a softmax. Weights are
/// stored class-major, `classes × INPUT_COUNT`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSoftmaxModel {
    classes: usize,
    weights: Vec<f64>,
    dropout: f64,
}

impl LinearSoftmaxModel {
    pub fn zeroed(classes: usize, dropout: f64) -> Self {
        LinearSoftmaxModel {
            classes,
            weights: vec![0.0; classes * INPUT_COUNT],
            dropout,
        }
    }

    pub fn from_weights(classes: usize, weights: Vec<f64>, dropout: f64) -> Result<Self> {
        if classes < 2 || weights.len() != classes * INPUT_COUNT {
            return Err(Error::shape(
                "model weights",
                (classes, INPUT_COUNT),
                weights.len(),
            ));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(alloc::format!(
                "dropout rate {dropout} outside [0, 1)"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model weight".into()));
        }
        Ok(LinearSoftmaxModel {
            classes,
            weights,
            dropout,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    /// C×7 f32 checkpoint tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.classes, INPUT_COUNT],
            TensorData::F32(self.weights.iter().map(|&w| w as f32).collect()),
        )
        .expect("checkpoint shape")
    }

    pub fn from_tensor(tensor: &Tensor, dropout: f64) -> Result<Self> {
        match (tensor.dims(), tensor.data()) {
            ([c, k], TensorData::F32(w)) if *k == INPUT_COUNT => {
                Self::from_weights(*c, w.iter().map(|&v| v as f64).collect(), dropout)
            }
            _ => Err(Error::shape(
                "model checkpoint",
                ("C", INPUT_COUNT, "f32"),
                (tensor.dims(), tensor.dtype()),
            )),
        }
    }

    #[inline]
    fn distribution(&self, input: &[f64; INPUT_COUNT], out: &mut [f64]) {
        for (c, z) in out.iter_mut().enumerate() {
            let row = &self.weights[c * INPUT_COUNT..(c + 1) * INPUT_COUNT];
            *z = row.iter().zip(input).map(|(w, x)| w * x).sum();
        }
        softmax_in_place(out);
    }

    fn predict_with(
        &self,
        features: &PixelFeatures,
        mut mask: Option<(&mut KeyedRng, f64)>,
    ) -> ProbabilityMap {
        let (h, w) = features.dims();
        let plane = h * w;
        let mut data = vec![0.0f32; self.classes * plane];
        let mut dist = vec![0.0f64; self.classes];
        let mut input = [0.0f64; INPUT_COUNT];
        for (px, f) in features.as_slice().iter().enumerate() {
            fill_input(f, &mut input, mask.as_mut().map(|(r, p)| (&mut **r, *p)));
            self.distribution(&input, &mut dist);
            for (c, &v) in dist.iter().enumerate() {
                data[c * plane + px] = v as f32;
            }
        }
        ProbabilityMap::from_parts(self.classes, h, w, data)
    }

    /// Deterministic prediction with dropout off.
    pub fn predict(&self, features: &PixelFeatures) -> ProbabilityMap {
        self.predict_with(features, None)
    }

    /// One stochastic pass with dropout active; the mask stream is keyed by
    /// `(seed, image_id, pass_index)`.
    pub fn predict_pass(
        &self,
        features: &PixelFeatures,
        image_id: usize,
        pass_index: usize,
        seed: u64,
    ) -> ProbabilityMap {
        if self.dropout == 0.0 {
            return self.predict(features);
        }
        let mut rng = rng::keyed(
            seed,
            &[rng::tag::MC_PASS, image_id as u64, pass_index as u64],
        );
        self.predict_with(features, Some((&mut rng, self.dropout)))
    }
}

/// Copies features into an input vector with a trailing bias of 1, applying
/// inverted dropout to the features when a mask stream is given.
#[inline]
pub(crate) fn fill_input(
    features: &[f32; FEATURE_COUNT],
    input: &mut [f64; INPUT_COUNT],
    mask: Option<(&mut KeyedRng, f64)>,
) {
    match mask {
        None => {
            for k in 0..FEATURE_COUNT {
                input[k] = features[k] as f64;
            }
        }
        Some((rng, rate)) => {
            let keep_scale = 1.0 / (1.0 - rate);
            for k in 0..FEATURE_COUNT {
                let keep = rng.random::<f64>() >= rate;
                input[k] = if keep { features[k] as f64 * keep_scale } else { 0.0 };
            }
        }
    }
    input[FEATURE_COUNT] = 1.0;
}
