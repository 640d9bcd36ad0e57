//! SEEDS-style superpixels: a regular block grid refined by pixel-level
//! boundary moves that increase histogram homogeneity.
//!
//! Each region keeps a 16-bin histogram of the image intensity (min-max
//! normalized to [0, 1]); the partition energy is `Σ_R Σ_bins (count/|R|)²`.
//! Pixel moves use the SEEDS update test: a boundary pixel with bin `b`
//! leaves its region A for a 4-neighbouring region B when
//! `h_B(b) / |B| > h_{A∖p}(b) / |A∖p|`, i.e. B explains its colour strictly
//! better than what remains of A, and removing it keeps A 4-connected.
//! Regions never become empty, so the region count is exactly the requested
//! count.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::grid::Grid;
use crate::rng;
use crate::{Error, Result};

pub const HISTOGRAM_BINS: usize = 16;
pub const DEFAULT_REGION_COUNT: usize = 64;
pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct SuperpixelMap {
    labels: Grid<u32>,
    region_count: u32,
}

impl SuperpixelMap {
    /// Validates that ids lie in `[0, region_count)` and that every region
    /// is non-empty.
    pub fn from_labels(labels: Grid<u32>, region_count: u32) -> Result<Self> {
        if region_count == 0 {
            return Err(Error::InvalidArgument("region count must be at least 1".into()));
        }
        let mut seen = vec![false; region_count as usize];
        for &id in labels.as_slice() {
            if id >= region_count {
                return Err(Error::RegionOutOfRange {
                    region: id,
                    count: region_count,
                });
            }
            seen[id as usize] = true;
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(alloc::format!("region {r} is empty")));
        }
        Ok(SuperpixelMap {
            labels,
            region_count,
        })
    }

    pub fn labels(&self) -> &Grid<u32> {
        &self.labels
    }

    pub fn region_count(&self) -> u32 {
        self.region_count
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    #[inline]
    pub fn region_of(&self, pixel: usize) -> u32 {
        self.labels.as_slice()[pixel]
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.region_count as usize];
        for &id in self.labels.as_slice() {
            sizes[id as usize] += 1;
        }
        sizes
    }

    /// Row-major pixel indices of every region, indexed by region id.
    pub fn region_index(&self) -> Vec<Vec<usize>> {
        let mut index = vec![Vec::new(); self.region_count as usize];
        for (px, &id) in self.labels.as_slice().iter().enumerate() {
            index[id as usize].push(px);
        }
        index
    }

    /// Pixels `(m, n)` of region `r` in row-major order.
    pub fn region_pixels(&self, region: u32) -> Result<Vec<(usize, usize)>> {
        if region >= self.region_count {
            return Err(Error::RegionOutOfRange {
                region,
                count: self.region_count,
            });
        }
        let w = self.labels.width();
        Ok(self
            .labels
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &id)| id == region)
            .map(|(px, _)| (px / w, px % w))
            .collect())
    }
}

/// Initial block grid: as close to square as the image allows, with the
/// last block row holding fewer, wider blocks so exactly `count` regions
/// exist.
pub fn initial_grid(height: usize, width: usize, count: usize) -> Result<SuperpixelMap> {
    if count == 0 || count > height * width {
        return Err(Error::InvalidArgument(alloc::format!(
            "target count {count} outside [1, {}]",
            height * width
        )));
    }
    let side = ceil_sqrt(count);
    let cols = side.max(count.div_ceil(height)).min(width);
    let rows = count.div_ceil(cols);
    let last_row_cols = count - (rows - 1) * cols;
    let labels = Grid::from_fn(height, width, |m, n| {
        let row = m * rows / height;
        let row_cols = if row == rows - 1 { last_row_cols } else { cols };
        let col = n * row_cols / width;
        (row * cols + col) as u32
    });
    Ok(SuperpixelMap {
        labels,
        region_count: count as u32,
    })
}

fn ceil_sqrt(n: usize) -> usize {
    let mut r = libm::sqrt(n as f64) as usize;
    while r * r < n {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Quantizes intensities into histogram bins after min-max normalization.
fn quantize(img: &Grid<f32>) -> Vec<u8> {
    let (lo, hi) = img
        .as_slice()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    img.as_slice()
        .iter()
        .map(|&v| {
            if !(range > 0.0) {
                return 0;
            }
            let t = (v - lo) / range;
            ((t * HISTOGRAM_BINS as f32) as usize).min(HISTOGRAM_BINS - 1) as u8
        })
        .collect()
}

struct RegionStats {
    hist: Vec<[u32; HISTOGRAM_BINS]>,
    size: Vec<u32>,
}

impl RegionStats {
    fn collect(labels: &[u32], bins: &[u8], regions: usize) -> Self {
        let mut stats = RegionStats {
            hist: vec![[0; HISTOGRAM_BINS]; regions],
            size: vec![0; regions],
        };
        for (&id, &bin) in labels.iter().zip(bins) {
            stats.hist[id as usize][bin as usize] += 1;
            stats.size[id as usize] += 1;
        }
        stats
    }

    /// Share of bin `bin` in region `to` if the pixel joined it, compared
    /// with its share in `from` once the pixel left, as a fraction pair
    /// `(h_B, |B|)` when B wins strictly.
    fn better_home(&self, from: usize, to: usize, bin: usize) -> Option<(u64, u64)> {
        let ha = self.hist[from][bin] as u64 - 1;
        let sa = self.size[from] as u64 - 1;
        let hb = self.hist[to][bin] as u64;
        let sb = self.size[to] as u64;
        (hb * sa > ha * sb).then_some((hb, sb))
    }

    fn apply_move(&mut self, from: usize, to: usize, bin: usize) {
        self.hist[from][bin] -= 1;
        self.hist[to][bin] += 1;
        self.size[from] -= 1;
        self.size[to] += 1;
    }

    /// Partition energy `Σ_R Σ_bins (count / |R|)²`.
    #[cfg(test)]
    fn energy(&self) -> f64 {
        self.hist
            .iter()
            .zip(&self.size)
            .map(|(h, &s)| {
                let s = s as f64;
                h.iter().map(|&c| (c as f64 / s) * (c as f64 / s)).sum::<f64>()
            })
            .sum()
    }
}

/// Partitions `img` into `target_count` connected superpixels.
///
/// Deterministic in `(img, target_count, iterations, seed)`; the seed picks
/// the raster direction of each refinement sweep.
pub fn seeds_partition(
    img: &Grid<f32>,
    target_count: usize,
    iterations: usize,
    seed: u64,
) -> Result<SuperpixelMap> {
    let (h, w) = img.dims();
    let mut map = initial_grid(h, w, target_count)?;
    if target_count == 1 || iterations == 0 {
        return Ok(map);
    }

    let bins = quantize(img);
    let regions = target_count;
    let mut stats = RegionStats::collect(map.labels.as_slice(), &bins, regions);

    let mut sweep_rng = rng::keyed(seed, &[rng::tag::SUPERPIXEL]);
    let labels = map.labels.as_mut_slice();
    for _ in 0..iterations {
        let reverse_rows: bool = sweep_rng.random();
        let reverse_cols: bool = sweep_rng.random();
        let mut moved = false;
        for i in 0..h {
            let m = if reverse_rows { h - 1 - i } else { i };
            for j in 0..w {
                let n = if reverse_cols { w - 1 - j } else { j };
                moved |= try_move(labels, h, w, m, n, &bins, &mut stats);
            }
        }
        if !moved {
            break;
        }
    }
    Ok(map)
}

const NEIGHBOURS: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

fn try_move(
    labels: &mut [u32],
    h: usize,
    w: usize,
    m: usize,
    n: usize,
    bins: &[u8],
    stats: &mut RegionStats,
) -> bool {
    let px = m * w + n;
    let from = labels[px] as usize;
    if stats.size[from] <= 1 {
        return false;
    }
    let bin = bins[px] as usize;
    let mut best: Option<(usize, (u64, u64))> = None;
    for (dm, dn) in NEIGHBOURS {
        let (Some(mm), Some(nn)) = (offset(m, dm, h), offset(n, dn, w)) else {
            continue;
        };
        let to = labels[mm * w + nn] as usize;
        if to == from {
            continue;
        }
        if let Some((num, den)) = stats.better_home(from, to, bin) {
            if best.is_none_or(|(_, (bn, bd))| num * bd > bn * den) {
                best = Some((to, (num, den)));
            }
        }
    }
    let Some((to, _)) = best else {
        return false;
    };
    if !removal_keeps_connected(labels, h, w, m, n) {
        return false;
    }
    labels[px] = to as u32;
    stats.apply_move(from, to, bin);
    true
}

#[inline]
fn offset(i: usize, d: isize, len: usize) -> Option<usize> {
    let j = i as isize + d;
    (0..len as isize).contains(&j).then_some(j as usize)
}

/// Local simple-point test: the 4-neighbours of `(m, n)` sharing its label
/// must all lie on one run of same-label pixels around the 8-ring. Then any
/// path through the pixel can be rerouted around it.
fn removal_keeps_connected(labels: &[u32], h: usize, w: usize, m: usize, n: usize) -> bool {
    // Ring in circular order; even indices are the 4-neighbours.
    const RING: [(isize, isize); 8] = [
        (-1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
        (1, 0),
        (1, -1),
        (0, -1),
        (-1, -1),
    ];
    let own = labels[m * w + n];
    let mut inside = [false; 8];
    for (k, (dm, dn)) in RING.iter().enumerate() {
        if let (Some(mm), Some(nn)) = (offset(m, *dm, h), offset(n, *dn, w)) {
            inside[k] = labels[mm * w + nn] == own;
        }
    }
    if inside.iter().all(|&x| x) {
        return true;
    }
    // Walk runs starting just after an outside position.
    let start = inside.iter().position(|&x| !x).unwrap();
    let mut runs_with_neighbour = 0;
    let mut in_run = false;
    let mut run_has_neighbour = false;
    for step in 1..=8 {
        let k = (start + step) % 8;
        if inside[k] {
            in_run = true;
            run_has_neighbour |= k % 2 == 0;
        } else if in_run {
            runs_with_neighbour += run_has_neighbour as usize;
            in_run = false;
            run_has_neighbour = false;
        }
    }
    runs_with_neighbour <= 1
}
