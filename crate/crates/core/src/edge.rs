//! Sobel gradient magnitude and the min-max normalized edge prior.

use crate::grid::Grid;
use crate::{Error, Result};

const SOBEL_X: [[f32; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

/// Edge prior: gradient magnitude rescaled into [0, 1] over the whole image.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap(Grid<f32>);

impl EdgeMap {
    pub fn values(&self) -> &Grid<f32> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f32> {
        self.0
    }

    /// Wraps a grid, checking every value is in [0, 1].
    pub fn from_grid(grid: Grid<f32>) -> Result<Self> {
        if let Some(v) = grid.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "edge map value {v} outside [0, 1]"
            )));
        }
        Ok(EdgeMap(grid))
    }

    /// A constant prior, mostly useful for cross-checks.
    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        EdgeMap(Grid::filled(height, width, value.clamp(0.0, 1.0)))
    }
}

/// Per-pixel `sqrt(gx² + gy²)` with replicate border padding.
pub fn sobel_magnitude(img: &Grid<f32>) -> Result<Grid<f32>> {
    let (h, w) = img.dims();
    if h < 3 || w < 3 {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
        });
    }
    Ok(Grid::from_fn(h, w, |m, n| {
        let mut gx = 0.0f32;
        let mut gy = 0.0f32;
        for (i, row) in SOBEL_X.iter().enumerate() {
            for (j, &kx) in row.iter().enumerate() {
                let v = img.get_clamped(m as isize + i as isize - 1, n as isize + j as isize - 1);
                gx += kx * v;
                // Gy is the transpose of Gx.
                gy += SOBEL_X[j][i] * v;
            }
        }
        libm::sqrtf(gx * gx + gy * gy)
    }))
}

/// `(g - min) / (max - min)`; a constant map normalizes to all zeros.
pub fn normalize_edges(grad: &Grid<f32>) -> EdgeMap {
    let (lo, hi) = grad
        .as_slice()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return EdgeMap(grad.map(|_| 0.0));
    }
    EdgeMap(grad.map(|v| ((v - lo) / range).clamp(0.0, 1.0)))
}

/// Sobel followed by normalization.
pub fn edge_prior(img: &Grid<f32>) -> Result<EdgeMap> {
    Ok(normalize_edges(&sobel_magnitude(img)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    /// Straightforward 3×3 correlation over an explicitly padded copy.
    fn oracle(img: &Grid<f32>) -> Vec<f64> {
        let (h, w) = img.dims();
        let mut padded = vec![vec![0.0f64; w + 2]; h + 2];
        for (pm, row) in padded.iter_mut().enumerate() {
            for (pn, cell) in row.iter_mut().enumerate() {
                let m = (pm as isize - 1).clamp(0, h as isize - 1) as usize;
                let n = (pn as isize - 1).clamp(0, w as isize - 1) as usize;
                *cell = img.get(m, n) as f64;
            }
        }
        let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        let mut out = Vec::new();
        for m in 0..h {
            for n in 0..w {
                let (mut gx, mut gy) = (0.0, 0.0);
                for i in 0..3 {
                    for j in 0..3 {
                        gx += kx[i][j] * padded[m + i][n + j];
                        gy += ky[i][j] * padded[m + i][n + j];
                    }
                }
                out.push((gx * gx + gy * gy).sqrt());
            }
        }
        out
    }

    #[test]
    fn constant_image_has_no_gradient() {
        let g = sobel_magnitude(&Grid::filled(5, 7, 0.3)).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        let s = normalize_edges(&g);
        assert!(s.values().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn column_ramp_center_is_eight() {
        let img = Grid::from_fn(3, 3, |_, n| n as f32);
        let g = sobel_magnitude(&img).unwrap();
        assert_eq!(g.get(1, 1), 8.0);
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(matches!(
            sobel_magnitude(&Grid::filled(2, 5, 0.0)),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn normalize_small_example() {
        let g = Grid::from_vec(1, 3, vec![2.0, 4.0, 6.0]).unwrap();
        assert_eq!(normalize_edges(&g).values().as_slice(), &[0.0, 0.5, 1.0]);
    }

    fn image(h: usize, w: usize) -> impl Strategy<Value = Grid<f32>> {
        prop::collection::vec(0.0f32..1.0, h * w)
            .prop_map(move |v| Grid::from_vec(h, w, v).unwrap())
    }

    proptest! {
        #[test]
        fn matches_convolution_oracle(img in image(16, 16)) {
            let g = sobel_magnitude(&img).unwrap();
            for (a, b) in g.as_slice().iter().zip(oracle(&img)) {
                prop_assert!((*a as f64 - b).abs() <= 1e-5);
                prop_assert!(*a >= 0.0);
            }
        }

        #[test]
        fn mirror_symmetry(img in image(9, 12)) {
            let mirrored = Grid::from_fn(9, 12, |m, n| img.get(m, 11 - n));
            let a = sobel_magnitude(&img).unwrap();
            let b = sobel_magnitude(&mirrored).unwrap();
            for m in 0..9 {
                for n in 0..12 {
                    prop_assert!((a.get(m, n) - b.get(m, 11 - n)).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn normalized_spans_unit_interval(g in image(6, 5)) {
            let s = normalize_edges(&g);
            let v = s.values().as_slice();
            let lo = v.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = v.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let constant = g.as_slice().iter().all(|&x| x == g.as_slice()[0]);
            if constant {
                prop_assert!(v.iter().all(|&x| x == 0.0));
            } else {
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 1.0);
            }
        }
    }
}
