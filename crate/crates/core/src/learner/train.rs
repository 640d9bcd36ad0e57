use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::features::{PixelFeatures, INPUT_COUNT};
use super::model::{fill_input, LinearSoftmaxModel, DEFAULT_DROPOUT};
use crate::grid::Grid;
use crate::labels::UNLABELED;
use crate::rng;
use crate::uncertainty::softmax_in_place;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Maximum images per optimizer step.
    pub batch_size: usize,
    pub dropout: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Weight of cross-entropy; soft dice gets the rest.
    pub ce_weight: f64,
    /// Evaluate the full-batch loss (dropout off) after every epoch.
    pub record_loss: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            weight_decay: 0.0004,
            epochs: 100,
            batch_size: 10,
            dropout: DEFAULT_DROPOUT,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            ce_weight: 0.5,
            record_loss: false,
        }
    }
}

/// One training image: standardized features plus its annotation mask
/// (`UNLABELED` where unknown). `id` keys the dropout stream.
#[derive(Clone, Copy, Debug)]
pub struct TrainingImage<'a> {
    pub id: usize,
    pub features: &'a PixelFeatures,
    pub mask: &'a Grid<u8>,
}

impl TrainingImage<'_> {
    fn labeled(&self) -> usize {
        self.mask
            .as_slice()
            .iter()
            .filter(|&&v| v != UNLABELED)
            .count()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Full-batch loss after each epoch, when recorded.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Labeled pixels of one optimizer step.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub inputs: Vec<[f64; INPUT_COUNT]>,
    pub labels: Vec<u8>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn push_image(&mut self, image: &TrainingImage<'_>, dropout: Option<(u64, usize, f64)>) {
        let mut mask_rng = dropout.map(|(seed, epoch, rate)| {
            (
                rng::keyed(seed, &[rng::tag::TRAIN_DROPOUT, epoch as u64, image.id as u64]),
                rate,
            )
        });
        let mut input = [0.0f64; INPUT_COUNT];
        for (px, &label) in image.mask.as_slice().iter().enumerate() {
            if label == UNLABELED {
                continue;
            }
            fill_input(
                image.features.pixel(px),
                &mut input,
                mask_rng.as_mut().map(|(r, p)| (r, *p)),
            );
            self.inputs.push(input);
            self.labels.push(label);
        }
    }
}

struct Forward {
    probs: Vec<f64>,
    ce: f64,
    intersection: Vec<f64>,
    pred_sum: Vec<f64>,
    truth_sum: Vec<f64>,
}

fn forward(weights: &[f64], classes: usize, batch: &Batch) -> Forward {
    let n = batch.len();
    let mut probs = vec![0.0f64; n * classes];
    let mut ce = 0.0;
    let mut intersection = vec![0.0; classes];
    let mut pred_sum = vec![0.0; classes];
    let mut truth_sum = vec![0.0; classes];
    for (i, (x, &y)) in batch.inputs.iter().zip(&batch.labels).enumerate() {
        let p = &mut probs[i * classes..(i + 1) * classes];
        for (c, z) in p.iter_mut().enumerate() {
            let row = &weights[c * INPUT_COUNT..(c + 1) * INPUT_COUNT];
            *z = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
        softmax_in_place(p);
        let y = y as usize;
        ce -= libm::log(p[y].max(1e-300));
        intersection[y] += p[y];
        truth_sum[y] += 1.0;
        for c in 0..classes {
            pred_sum[c] += p[c];
        }
    }
    Forward {
        probs,
        ce: ce / n as f64,
        intersection,
        pred_sum,
        truth_sum,
    }
}

fn combine(f: &Forward, ce_weight: f64) -> (f64, usize) {
    let mut dice_sum = 0.0;
    let mut present = 0;
    for c in 0..f.truth_sum.len() {
        if f.truth_sum[c] > 0.0 {
            dice_sum += (2.0 * f.intersection[c] + 1.0) / (f.pred_sum[c] + f.truth_sum[c] + 1.0);
            present += 1;
        }
    }
    let dice = dice_sum / present as f64;
    (ce_weight * f.ce + (1.0 - ce_weight) * (1.0 - dice), present)
}

/// `w·CE + (1−w)·(1 − soft dice)` over the batch, where soft dice per class
/// is `(2Σp·y + 1) / (Σp + Σy + 1)`, averaged over classes present in the
/// batch labels.
pub fn mixed_loss(weights: &[f64], classes: usize, batch: &Batch, ce_weight: f64) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    combine(&forward(weights, classes, batch), ce_weight).0
}

/// Loss and its analytic gradient with respect to the class-major weights.
pub fn mixed_loss_and_gradient(
    weights: &[f64],
    classes: usize,
    batch: &Batch,
    ce_weight: f64,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    if batch.is_empty() {
        return 0.0;
    }
    let f = forward(weights, classes, batch);
    let (loss, present) = combine(&f, ce_weight);
    let n = batch.len() as f64;

    // d(loss)/d(pred_sum_c) and d(loss)/d(intersection_c) pieces of the
    // dice term: D_c = (2I + 1) / (U + 1) with U = Σp + Σy.
    let dice_scale = -(1.0 - ce_weight) / present as f64;
    let mut d_inter = vec![0.0; classes];
    let mut d_pred = vec![0.0; classes];
    for c in 0..classes {
        if f.truth_sum[c] > 0.0 {
            let u1 = f.pred_sum[c] + f.truth_sum[c] + 1.0;
            d_inter[c] = dice_scale * 2.0 / u1;
            d_pred[c] = -dice_scale * (2.0 * f.intersection[c] + 1.0) / (u1 * u1);
        }
    }

    let mut g = vec![0.0f64; classes];
    let mut dz = vec![0.0f64; classes];
    for (i, (x, &y)) in batch.inputs.iter().zip(&batch.labels).enumerate() {
        let p = &f.probs[i * classes..(i + 1) * classes];
        let y = y as usize;
        for c in 0..classes {
            g[c] = d_pred[c] + if c == y { d_inter[c] } else { 0.0 };
        }
        let gp: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
        for k in 0..classes {
            let onehot = if k == y { 1.0 } else { 0.0 };
            dz[k] = ce_weight * (p[k] - onehot) / n + p[k] * (g[k] - gp);
        }
        for k in 0..classes {
            let row = &mut grad[k * INPUT_COUNT..(k + 1) * INPUT_COUNT];
            for (gw, &xv) in row.iter_mut().zip(x) {
                *gw += dz[k] * xv;
            }
        }
    }
    loss
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, weights: &mut [f64], grad: &[f64], config: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(config.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(config.beta2, self.t as f64);
        for i in 0..weights.len() {
            // Coupled L2 weight decay, as in torch.optim.Adam.
            let g = grad[i] + config.weight_decay * weights[i];
            self.m[i] = config.beta1 * self.m[i] + (1.0 - config.beta1) * g;
            self.v[i] = config.beta2 * self.v[i] + (1.0 - config.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            weights[i] -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.epsilon);
        }
    }
}

/// Trains a freshly zero-initialized model.
///
/// Images without labeled pixels are skipped. Each epoch shuffles the
/// remaining images (sorted by id first, so caller order does not matter)
/// with a stream keyed by `(seed, epoch)` and steps Adam once per batch of
/// at most `batch_size` images; dropout masks are keyed by
/// `(seed, epoch, image id)`.
pub fn train(
    images: &[TrainingImage<'_>],
    classes: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<(LinearSoftmaxModel, TrainReport)> {
    if classes < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    let mut pool: Vec<&TrainingImage<'_>> = images.iter().filter(|im| im.labeled() > 0).collect();
    if pool.is_empty() {
        return Err(Error::NoLabeledPixels);
    }
    for im in &pool {
        if im.features.dims() != im.mask.dims() {
            return Err(Error::shape("features vs mask", im.features.dims(), im.mask.dims()));
        }
        if let Some(&bad) = im.mask.as_slice().iter().find(|&&v| v != UNLABELED && v as usize >= classes) {
            return Err(Error::InvalidArgument(alloc::format!(
                "label {bad} in image {} out of range for {classes} classes",
                im.id
            )));
        }
    }
    pool.sort_by_key(|im| im.id);

    let mut model = LinearSoftmaxModel::zeroed(classes, config.dropout);
    let mut adam = Adam {
        m: vec![0.0; classes * INPUT_COUNT],
        v: vec![0.0; classes * INPUT_COUNT],
        t: 0,
    };
    let mut grad = vec![0.0; classes * INPUT_COUNT];
    let mut report = TrainReport::default();
    let full = config.record_loss.then(|| {
        let mut b = Batch::default();
        for im in &pool {
            b.push_image(im, None);
        }
        b
    });
    let batch_size = config.batch_size.max(1);

    for epoch in 0..config.epochs {
        let mut order = pool.clone();
        order.shuffle(&mut rng::keyed(seed, &[rng::tag::TRAIN_SHUFFLE, epoch as u64]));
        for chunk in order.chunks(batch_size) {
            let mut batch = Batch::default();
            for im in chunk {
                batch.push_image(im, (config.dropout > 0.0).then_some((seed, epoch, config.dropout)));
            }
            mixed_loss_and_gradient(model.weights(), classes, &batch, config.ce_weight, &mut grad);
            adam.step(model.weights_mut(), &grad, config);
            report.steps += 1;
        }
        if let Some(full) = &full {
            report
                .epoch_losses
                .push(mixed_loss(model.weights(), classes, full, config.ce_weight));
        }
    }
    Ok((model, report))
}
