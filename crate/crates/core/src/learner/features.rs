use alloc::vec::Vec;

use crate::edge::sobel_magnitude;
use crate::grid::Grid;
use crate::Result;

/// Intensity, Sobel magnitude, Gaussian σ=1, Gaussian σ=2, row m/H, col n/W.
pub const FEATURE_COUNT: usize = 6;
/// Features plus a constant bias input.
pub const INPUT_COUNT: usize = FEATURE_COUNT + 1;

/// Normalized 1-D Gaussian taps over `[-⌈3σ⌉, ⌈3σ⌉]`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = libm::ceilf(3.0 * sigma) as isize;
    let two_s2 = 2.0 * (sigma as f64) * (sigma as f64);
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / two_s2))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| (v / total) as f32).collect()
}

/// Separable Gaussian blur with replicate padding.
pub fn gaussian_blur(img: &Grid<f32>, sigma: f32) -> Grid<f32> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (h, w) = img.dims();
    let rows = Grid::from_fn(h, w, |m, n| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &t)| t * img.get_clamped(m as isize, n as isize + k as isize - radius))
            .sum::<f32>()
    });
    Grid::from_fn(h, w, |m, n| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &t)| t * rows.get_clamped(m as isize + k as isize - radius, n as isize))
            .sum::<f32>()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelFeatures {
    height: usize,
    width: usize,
    data: Vec<[f32; FEATURE_COUNT]>,
}

impl PixelFeatures {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel(&self, px: usize) -> &[f32; FEATURE_COUNT] {
        &self.data[px]
    }

    pub fn as_slice(&self) -> &[[f32; FEATURE_COUNT]] {
        &self.data
    }
}

/// Raw (unstandardized) per-pixel features.
pub fn extract_features(img: &Grid<f32>) -> Result<PixelFeatures> {
    let (h, w) = img.dims();
    let sobel = sobel_magnitude(img)?;
    let smooth1 = gaussian_blur(img, 1.0);
    let smooth2 = gaussian_blur(img, 2.0);
    let mut data = Vec::with_capacity(h * w);
    for m in 0..h {
        for n in 0..w {
            data.push([
                img.get(m, n),
                sobel.get(m, n),
                smooth1.get(m, n),
                smooth2.get(m, n),
                m as f32 / h as f32,
                n as f32 / w as f32,
            ]);
        }
    }
    Ok(PixelFeatures {
        height: h,
        width: w,
        data,
    })
}

/// Per-feature mean and standard deviation, fitted once per experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
}

impl FeatureStats {
    pub fn fit<'a>(images: impl IntoIterator<Item = &'a PixelFeatures>) -> Self {
        let mut sum = [0.0f64; FEATURE_COUNT];
        let mut sumsq = [0.0f64; FEATURE_COUNT];
        let mut n = 0usize;
        for f in images {
            for px in &f.data {
                for k in 0..FEATURE_COUNT {
                    let v = px[k] as f64;
                    sum[k] += v;
                    sumsq[k] += v * v;
                }
                n += 1;
            }
        }
        let mut mean = [0.0; FEATURE_COUNT];
        let mut std = [1.0; FEATURE_COUNT];
        if n > 0 {
            for k in 0..FEATURE_COUNT {
                mean[k] = sum[k] / n as f64;
                let var = (sumsq[k] / n as f64 - mean[k] * mean[k]).max(0.0);
                let sd = libm::sqrt(var);
                // Constant features are only centred.
                std[k] = if sd > 1e-12 { sd } else { 1.0 };
            }
        }
        FeatureStats { mean, std }
    }

    pub fn standardize(&self, features: &PixelFeatures) -> PixelFeatures {
        let data = features
            .data
            .iter()
            .map(|px| {
                let mut out = [0.0f32; FEATURE_COUNT];
                for k in 0..FEATURE_COUNT {
                    out[k] = ((px[k] as f64 - self.mean[k]) / self.std[k]) as f32;
                }
                out
            })
            .collect();
        PixelFeatures {
            height: features.height,
            width: features.width,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    /// Direct 2-D convolution with the analytic, renormalized Gaussian and
    /// explicit replicate padding.
    fn blur_oracle(img: &Grid<f32>, sigma: f64) -> Vec<f64> {
        let r = (3.0 * sigma).ceil() as isize;
        let (h, w) = img.dims();
        let mut weights = vec![];
        for i in -r..=r {
            for j in -r..=r {
                weights.push((i, j, (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp()));
            }
        }
        let total: f64 = weights.iter().map(|w| w.2).sum();
        let mut out = vec![];
        for m in 0..h as isize {
            for n in 0..w as isize {
                let mut acc = 0.0;
                for &(i, j, wt) in &weights {
                    let mm = (m + i).clamp(0, h as isize - 1) as usize;
                    let nn = (n + j).clamp(0, w as isize - 1) as usize;
                    acc += wt / total * img.get(mm, nn) as f64;
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn impulse_response_is_the_kernel() {
        let mut img = Grid::filled(15, 15, 0.0f32);
        img.set(7, 7, 1.0);
        let blurred = gaussian_blur(&img, 1.0);
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        for di in -3isize..=3 {
            for dj in -3isize..=3 {
                let want = k[(di + 3) as usize] * k[(dj + 3) as usize];
                let got = blurred.get((7 + di) as usize, (7 + dj) as usize);
                assert!((got - want).abs() < 1e-6);
            }
        }
        // Analytic check of the centre tap.
        let e = (-0.5f64).exp();
        let e4 = (-2.0f64).exp();
        let e9 = (-4.5f64).exp();
        let norm = 1.0 + 2.0 * (e + e4 + e9);
        assert!((k[3] as f64 - 1.0 / norm).abs() < 1e-7);
    }

    #[test]
    fn constant_image_features() {
        let f = extract_features(&Grid::filled(8, 8, 0.4)).unwrap();
        for m in 0..8 {
            for n in 0..8 {
                let px = f.pixel(m * 8 + n);
                assert!((px[0] - 0.4).abs() < 1e-7);
                assert!(px[1].abs() < 1e-6);
                assert!((px[2] - 0.4).abs() < 1e-6);
                assert!((px[3] - 0.4).abs() < 1e-6);
                assert_eq!(px[4], m as f32 / 8.0);
                assert_eq!(px[5], n as f32 / 8.0);
            }
        }
    }

    #[test]
    fn centre_pixel_coordinates() {
        let f = extract_features(&Grid::filled(64, 64, 0.0)).unwrap();
        let px = f.pixel(32 * 64 + 32);
        assert!((px[4] - 0.5).abs() <= 1.0 / 128.0);
        assert!((px[5] - 0.5).abs() <= 1.0 / 128.0);
    }

    #[test]
    fn standardized_features_are_centred() {
        let imgs: Vec<_> = (0..3)
            .map(|i| extract_features(&Grid::from_fn(10, 12, |m, n| ((m * n + i) % 7) as f32 / 7.0)).unwrap())
            .collect();
        let stats = FeatureStats::fit(&imgs);
        let std: Vec<_> = imgs.iter().map(|f| stats.standardize(f)).collect();
        let again = FeatureStats::fit(&std);
        for k in 0..FEATURE_COUNT {
            assert!(again.mean[k].abs() < 1e-5);
            assert!((again.std[k] - 1.0).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn blur_matches_direct_convolution(v in prop::collection::vec(0.0f32..1.0, 16 * 16)) {
            let img = Grid::from_vec(16, 16, v).unwrap();
            for sigma in [1.0f32, 2.0] {
                let got = gaussian_blur(&img, sigma);
                for (a, b) in got.as_slice().iter().zip(blur_oracle(&img, sigma as f64)) {
                    prop_assert!((*a as f64 - b).abs() <= 1e-5);
                }
            }
        }
    }
}
