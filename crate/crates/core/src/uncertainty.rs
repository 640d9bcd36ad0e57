//! MC-dropout aggregation, edge-contextual calibration, edge entropy and
//! edge divergence.
//!
//! Everything is computed per pixel in f64 and stored as f32. Logarithms are
//! natural, so entropies are bounded by `ln C`.

use alloc::vec::Vec;

use crate::edge::EdgeMap;
use crate::grid::Grid;
use crate::{Error, Result};

/// Tolerance on per-pixel class sums for a [`ProbabilityMap`].
pub const NORMALIZATION_TOLERANCE: f32 = 1e-5;

/// Clamp floor used inside the KL divergence.
pub const KL_EPSILON: f64 = 1e-8;

/// Per-pixel class distribution laid out C×H×W.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    classes: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ProbabilityMap {
    /// Validates shape and per-pixel normalization at
    /// [`NORMALIZATION_TOLERANCE`].
    pub fn new(classes: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        Self::with_tolerance(classes, height, width, data, NORMALIZATION_TOLERANCE)
    }

    pub fn with_tolerance(
        classes: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
        tolerance: f32,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "probability maps need at least 2 classes, got {classes}"
            )));
        }
        if data.len() != classes * height * width {
            return Err(Error::shape(
                "probability map",
                (classes, height, width),
                data.len(),
            ));
        }
        let map = ProbabilityMap {
            classes,
            height,
            width,
            data,
        };
        map.validate(tolerance)?;
        Ok(map)
    }

    /// Builds a map without checking normalization. Callers must produce
    /// per-pixel distributions (softmax outputs, means of distributions).
    pub(crate) fn from_parts(classes: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), classes * height * width);
        ProbabilityMap {
            classes,
            height,
            width,
            data,
        }
    }

    /// Uniform 1/C everywhere.
    pub fn uniform(classes: usize, height: usize, width: usize) -> Self {
        Self::from_parts(
            classes,
            height,
            width,
            alloc::vec![1.0 / classes as f32; classes * height * width],
        )
    }

    fn validate(&self, tolerance: f32) -> Result<()> {
        let plane = self.plane_len();
        for px in 0..plane {
            let mut sum = 0.0f64;
            for c in 0..self.classes {
                let v = self.data[c * plane + px];
                if !(v >= 0.0) {
                    return Err(Error::NotNormalized { pixel: px, sum: v });
                }
                sum += v as f64;
            }
            if (sum - 1.0).abs() > tolerance as f64 {
                return Err(Error::NotNormalized {
                    pixel: px,
                    sum: sum as f32,
                });
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.classes, self.height, self.width)
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, class: usize, pixel: usize) -> f32 {
        self.data[class * self.plane_len() + pixel]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Copies the distribution at one pixel (row-major index) into `out`.
    #[inline]
    pub fn pixel_into(&self, pixel: usize, out: &mut [f64]) {
        let plane = self.plane_len();
        for (c, slot) in out.iter_mut().enumerate().take(self.classes) {
            *slot = self.data[c * plane + pixel] as f64;
        }
    }

    /// Most probable class per pixel; ties go to the lower class id.
    pub fn argmax(&self) -> Grid<u8> {
        let plane = self.plane_len();
        Grid::from_fn(self.height, self.width, |m, n| {
            let px = m * self.width + n;
            let mut best = 0usize;
            for c in 1..self.classes {
                if self.data[c * plane + px] > self.data[best * plane + px] {
                    best = c;
                }
            }
            best as u8
        })
    }
}

/// Per-pixel score: edge entropy, edge divergence or a baseline score.
pub type ScoreMap = Grid<f32>;

/// Arithmetic mean of D stochastic passes.
pub fn mc_average(passes: &[ProbabilityMap]) -> Result<ProbabilityMap> {
    let first = passes.first().ok_or(Error::Empty("MC passes"))?;
    let dims = first.dims();
    let mut acc = alloc::vec![0.0f64; first.data.len()];
    for pass in passes {
        if pass.dims() != dims {
            return Err(Error::shape("MC pass", dims, pass.dims()));
        }
        for (a, &v) in acc.iter_mut().zip(&pass.data) {
            *a += v as f64;
        }
    }
    let d = passes.len() as f64;
    let data = acc.into_iter().map(|a| (a / d) as f32).collect();
    Ok(ProbabilityMap::from_parts(dims.0, dims.1, dims.2, data))
}

/// Per-pixel softmax over classes of `P(c) · S(m, n)`.
pub fn contextual_probability(p: &ProbabilityMap, s: &EdgeMap) -> Result<ProbabilityMap> {
    let edges = s.values();
    if edges.dims() != (p.height, p.width) {
        return Err(Error::shape(
            "edge map vs probability map",
            (p.height, p.width),
            edges.dims(),
        ));
    }
    let plane = p.plane_len();
    let classes = p.classes;
    let mut out = alloc::vec![0.0f32; p.data.len()];
    let mut logits = alloc::vec![0.0f64; classes];
    for (px, &scale) in edges.as_slice().iter().enumerate() {
        p.pixel_into(px, &mut logits);
        let scale = scale as f64;
        for z in logits.iter_mut() {
            *z *= scale;
        }
        softmax_in_place(&mut logits);
        for (c, &v) in logits.iter().enumerate() {
            out[c * plane + px] = v as f32;
        }
    }
    Ok(ProbabilityMap::from_parts(classes, p.height, p.width, out))
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Shannon entropy of a distribution with `0 ln 0 = 0`.
#[inline]
pub fn entropy(dist: &[f64]) -> f64 {
    -dist
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * libm::log(v))
        .sum::<f64>()
}

/// Per-pixel entropy of the contextual probability.
pub fn edge_entropy(phi: &ProbabilityMap) -> ScoreMap {
    map_pixels(phi, entropy)
}

/// Applies `f` to each pixel's class distribution.
pub fn map_pixels(p: &ProbabilityMap, mut f: impl FnMut(&[f64]) -> f64) -> ScoreMap {
    let mut dist = alloc::vec![0.0f64; p.classes];
    let data = (0..p.plane_len())
        .map(|px| {
            p.pixel_into(px, &mut dist);
            f(&dist) as f32
        })
        .collect();
    Grid::from_vec(p.height, p.width, data).expect("plane length")
}

/// `KL(p || q)` with both sides clamped to `[KL_EPSILON, 1]`, no
/// renormalization.
#[inline]
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let a = a.clamp(KL_EPSILON, 1.0);
            let b = b.clamp(KL_EPSILON, 1.0);
            a * libm::log(a / b)
        })
        .sum();
    // Inputs are f32 distributions whose sums are off by rounding; near
    // p == q that can push the sum a hair below zero.
    kl.max(0.0)
}

/// Per-pixel `KL(P || φ)`.
pub fn edge_divergence(p: &ProbabilityMap, phi: &ProbabilityMap) -> Result<ScoreMap> {
    if p.dims() != phi.dims() {
        return Err(Error::shape("edge divergence", p.dims(), phi.dims()));
    }
    let mut a = alloc::vec![0.0f64; p.classes];
    let mut b = alloc::vec![0.0f64; p.classes];
    let data = (0..p.plane_len())
        .map(|px| {
            p.pixel_into(px, &mut a);
            phi.pixel_into(px, &mut b);
            kl_divergence(&a, &b) as f32
        })
        .collect();
    Grid::from_vec(p.height, p.width, data)
}

/// Edge entropy and edge divergence maps for one image.
#[derive(Clone, Debug)]
pub struct EdgeScores {
    pub entropy: ScoreMap,
    pub divergence: ScoreMap,
}

/// Full per-image chain: MC mean, calibration by the edge prior, then both
/// score maps.
pub fn edge_scores(passes: &[ProbabilityMap], edges: &EdgeMap) -> Result<EdgeScores> {
    let p = mc_average(passes)?;
    let phi = contextual_probability(&p, edges)?;
    Ok(EdgeScores {
        entropy: edge_entropy(&phi),
        divergence: edge_divergence(&p, &phi)?,
    })
}
