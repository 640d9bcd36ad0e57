//! The simulated-oracle loop: seed set, train, evaluate, then per round
//! select, reveal, retrain from scratch and evaluate again.
//!
//! With an output directory each (strategy, seed) cell lives under
//! `<out>/<strategy>/seed<s>/` and holds `mask_round<k>/<name>.ealt`,
//! `selection_round<k>.csv`, `model_round<k>.ealt` and its own
//! `curves.csv`; the combined `<out>/curves.csv` is written once all cells
//! finish. A cell whose mask directories already exist replays them instead
//! of selecting again, which yields the same rows as an uninterrupted run.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use edgeal_core::acquisition::SelectionResult;
use edgeal_core::baselines::Strategy;
use edgeal_core::edge::{edge_prior, EdgeMap};
use edgeal_core::labels::{sample_seed_set, LabelState, RoundRecord, UNLABELED};
use edgeal_core::learner::{extract_features, train, FeatureStats, LinearSoftmaxModel, PixelFeatures, TrainConfig, TrainingImage};
use edgeal_core::metrics::{DiceCounts, DiceReport};
use edgeal_core::rng;
use edgeal_core::round::{select, McDropoutProvider, RoundInputs};
use edgeal_core::superpixel::{seeds_partition, SuperpixelMap};
use edgeal_core::Grid;

use crate::config::ExperimentConfig;
use crate::dataset::Dataset;
use crate::io::{create_dir, read_class_map, write_class_map, write_tensor};
use crate::{Error, Result};

pub const CURVES_FILE: &str = "curves.csv";
pub const CURVE_HEADER: [&str; 6] = [
    "strategy",
    "seed",
    "round",
    "labeled_fraction",
    "mean_dice",
    "per_class_dice",
];

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub strategy: String,
    pub seed: u64,
    pub round: usize,
    pub labeled_fraction: f64,
    pub mean_dice: f32,
    /// `None` for classes absent from both prediction and ground truth.
    pub per_class_dice: Vec<Option<f32>>,
}

impl CurveRow {
    fn record(&self) -> [String; 6] {
        let per_class = self
            .per_class_dice
            .iter()
            .map(|d| d.map(|v| v.to_string()).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(";");
        [
            self.strategy.clone(),
            self.seed.to_string(),
            self.round.to_string(),
            self.labeled_fraction.to_string(),
            self.mean_dice.to_string(),
            per_class,
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| Error::Dataset(format!("curves row: bad {what}: {rec:?}"));
        let per_class = field(5)
            .split(';')
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad("per_class_dice"))
                }
            })
            .collect::<Result<_>>()?;
        Ok(CurveRow {
            strategy: field(0).to_string(),
            seed: field(1).parse().map_err(|_| bad("seed"))?,
            round: field(2).parse().map_err(|_| bad("round"))?,
            labeled_fraction: field(3).parse().map_err(|_| bad("labeled_fraction"))?,
            mean_dice: field(4).parse().map_err(|_| bad("mean_dice"))?,
            per_class_dice: per_class,
        })
    }
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CURVE_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(CurveRow::from_record(&rec?)?);
    }
    Ok(rows)
}

/// Per-image inputs shared by every cell: standardized features, edge
/// priors and superpixels of the training pool plus the test split.
pub struct Prepared {
    pub classes: usize,
    pub train_names: Vec<String>,
    pub features: Vec<PixelFeatures>,
    pub edges: Vec<EdgeMap>,
    pub superpixels: Vec<SuperpixelMap>,
    pub ground_truth: Vec<Grid<u8>>,
    pub test_features: Vec<PixelFeatures>,
    pub test_truth: Vec<Grid<u8>>,
}

impl Prepared {
    pub fn total_pixels(&self) -> usize {
        self.ground_truth.iter().map(Grid::len).sum()
    }
}

pub fn prepare(dataset: &Dataset, config: &ExperimentConfig) -> Result<Prepared> {
    let raw: Vec<PixelFeatures> = dataset
        .train
        .iter()
        .map(|s| extract_features(&s.image))
        .collect::<edgeal_core::Result<_>>()?;
    let stats = FeatureStats::fit(&raw);
    let test_features = dataset
        .test
        .iter()
        .map(|s| Ok(stats.standardize(&extract_features(&s.image)?)))
        .collect::<Result<_>>()?;
    let superpixels = thread::scope(|scope| {
        let handles: Vec<_> = dataset
            .train
            .iter()
            .enumerate()
            .map(|(i, s)| {
                scope.spawn(move || {
                    seeds_partition(&s.image, config.superpixels, config.superpixel_iterations, i as u64)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("superpixel worker panicked"))
            .collect::<edgeal_core::Result<Vec<_>>>()
    })?;
    Ok(Prepared {
        classes: dataset.classes(),
        train_names: dataset.train.iter().map(|s| s.name.clone()).collect(),
        features: raw.iter().map(|f| stats.standardize(f)).collect(),
        edges: dataset
            .train
            .iter()
            .map(|s| edge_prior(&s.image))
            .collect::<edgeal_core::Result<_>>()?,
        superpixels,
        ground_truth: dataset.train.iter().map(|s| s.label.clone()).collect(),
        test_features,
        test_truth: dataset.test.iter().map(|s| s.label.clone()).collect(),
    })
}

/// Trains a fresh model on whatever the masks reveal.
pub fn train_on_masks(
    prepared: &Prepared,
    masks: &[Grid<u8>],
    config: &TrainConfig,
    seed: u64,
) -> Result<LinearSoftmaxModel> {
    let images: Vec<TrainingImage<'_>> = masks
        .iter()
        .enumerate()
        .map(|(id, mask)| TrainingImage {
            id,
            features: &prepared.features[id],
            mask,
        })
        .collect();
    Ok(train(&images, prepared.classes, config, seed)?.0)
}

/// Dataset-level dice on the test split: counts pooled over all images.
pub fn evaluate(model: &LinearSoftmaxModel, prepared: &Prepared) -> Result<DiceReport> {
    let mut counts = DiceCounts::new(prepared.classes);
    for (f, gt) in prepared.test_features.iter().zip(&prepared.test_truth) {
        counts.add(&model.predict(f).argmax(), gt)?;
    }
    Ok(counts.report())
}

/// Test dice of a model trained on every training label.
pub fn full_label_dice(prepared: &Prepared, config: &TrainConfig, seed: u64) -> Result<DiceReport> {
    let model = train_on_masks(prepared, &prepared.ground_truth, config, train_seed(seed, 0))?;
    evaluate(&model, prepared)
}

fn train_seed(seed: u64, round: usize) -> u64 {
    rng::mix(seed, &[rng::tag::TRAIN_INIT, round as u64])
}

fn mc_seed(seed: u64, round: usize) -> u64 {
    rng::mix(seed, &[rng::tag::MC_PASS, round as u64])
}

pub fn budget_pixels(prepared: &Prepared, budget: f64) -> usize {
    ((budget * prepared.total_pixels() as f64).round() as usize).max(1)
}

/// Everything one (strategy, seed) cell produced.
#[derive(Clone, Debug, Default)]
pub struct CellOutcome {
    pub rows: Vec<CurveRow>,
    /// Selections by round (index 0 is the seed round and always `None`);
    /// `None` for replayed rounds.
    pub selections: Vec<Option<SelectionResult>>,
    pub history: Vec<RoundRecord>,
}

pub fn cell_dir(out: &Path, strategy: Strategy, seed: u64) -> PathBuf {
    out.join(strategy.name()).join(format!("seed{seed}"))
}

fn mask_dir(dir: &Path, round: usize) -> PathBuf {
    dir.join(format!("mask_round{round}"))
}

fn persist_masks(dir: &Path, round: usize, names: &[String], masks: &[Grid<u8>]) -> Result<()> {
    let final_dir = mask_dir(dir, round);
    let tmp = dir.join(format!("mask_round{round}.partial"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    create_dir(&tmp)?;
    for (name, mask) in names.iter().zip(masks) {
        write_class_map(tmp.join(format!("{name}.ealt")), mask)?;
    }
    fs::rename(&tmp, &final_dir).map_err(|e| Error::io(&final_dir, e))
}

fn load_masks(dir: &Path, round: usize, prepared: &Prepared) -> Result<Option<Vec<Grid<u8>>>> {
    let d = mask_dir(dir, round);
    if !d.is_dir() {
        return Ok(None);
    }
    let mut masks = Vec::with_capacity(prepared.train_names.len());
    for (name, gt) in prepared.train_names.iter().zip(&prepared.ground_truth) {
        let path = d.join(format!("{name}.ealt"));
        let mask = read_class_map(&path)?;
        let consistent = mask.dims() == gt.dims()
            && mask
                .as_slice()
                .iter()
                .zip(gt.as_slice())
                .all(|(&m, &g)| m == UNLABELED || m == g);
        if !consistent {
            return Err(Error::file(&path, "persisted mask disagrees with ground truth"));
        }
        masks.push(mask);
    }
    Ok(Some(masks))
}

/// Columns `image_id, region_id, mean_ee, mean_ed, pixels`. Baselines rank
/// by a single regional score, reported under `mean_ee` with `mean_ed` empty.
fn write_selection(path: &Path, strategy: Strategy, selection: &SelectionResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["image_id", "region_id", "mean_ee", "mean_ed", "pixels"])?;
    for s in &selection.selected {
        let (ee, ed) = if strategy == Strategy::EdgeAl {
            (s.tie_score.to_string(), s.score.to_string())
        } else {
            (s.score.to_string(), String::new())
        };
        w.write_record([
            s.image_id.to_string(),
            s.region_id.to_string(),
            ee,
            ed,
            s.pixels.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct RowLog {
    writer: Option<csv::Writer<fs::File>>,
    path: PathBuf,
}

impl RowLog {
    fn open(dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(RowLog { writer: None, path: PathBuf::new() });
        };
        let path = dir.join(CURVES_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(CURVE_HEADER)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(RowLog { writer: Some(w), path })
    }

    fn append(&mut self, row: &CurveRow) -> Result<()> {
        if let Some(w) = &mut self.writer {
            w.write_record(row.record())?;
            w.flush().map_err(|e| Error::io(&self.path, e))?;
            w.get_ref().sync_data().map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(())
    }
}

/// Runs one (strategy, seed) cell. Errors carry the round they came from.
pub fn run_cell(
    prepared: &Prepared,
    config: &ExperimentConfig,
    strategy: Strategy,
    seed: u64,
    out: Option<&Path>,
) -> Result<CellOutcome> {
    let ctx = |round: usize| {
        move |e: Error| Error::Cell {
            strategy: strategy.name().to_string(),
            seed,
            round,
            cause: Box::new(e),
        }
    };
    let dir = out.map(|o| cell_dir(o, strategy, seed));
    if let Some(d) = &dir {
        create_dir(d).map_err(ctx(0))?;
    }
    let mut log = RowLog::open(dir.as_deref()).map_err(ctx(0))?;
    let mut labels =
        sample_seed_set(&prepared.ground_truth, config.seed_fraction, seed).map_err(|e| ctx(0)(e.into()))?;
    let seed_images = labels.seed_images().to_vec();
    let budget = budget_pixels(prepared, config.budget);
    let mut outcome = CellOutcome::default();
    let mut model: Option<LinearSoftmaxModel> = None;

    for round in 0..=config.rounds {
        let mut step = || -> Result<Option<SelectionResult>> {
            let mut selection = None;
            if round == 0 {
                if let Some(d) = &dir {
                    if !mask_dir(d, 0).is_dir() {
                        persist_masks(d, 0, &prepared.train_names, labels.masks())?;
                    }
                }
            } else if let Some(masks) = dir
                .as_deref()
                .map(|d| load_masks(d, round, prepared))
                .transpose()?
                .flatten()
            {
                let before = labels.revealed_pixel_count();
                let history = labels.history().to_vec();
                labels = LabelState::from_masks(masks, seed_images.clone());
                for h in history {
                    labels.push_history(h);
                }
                labels.push_history(RoundRecord {
                    round,
                    pixels_revealed: labels.revealed_pixel_count() - before,
                    fraction: labels.labeled_fraction(),
                });
            } else {
                let model = model.as_ref().expect("model trained in the previous round");
                let provider = McDropoutProvider {
                    model,
                    features: &prepared.features,
                    seed: mc_seed(seed, round),
                };
                let inputs = RoundInputs {
                    edges: &prepared.edges,
                    superpixels: &prepared.superpixels,
                    labels: &labels,
                    mc_passes: config.mc_passes,
                    budget_pixels: budget,
                    seed,
                    round,
                };
                let sel = select(strategy, &provider, &inputs)?;
                labels.reveal(&sel, &prepared.superpixels, &prepared.ground_truth)?;
                if let Some(d) = &dir {
                    write_selection(
                        &d.join(format!("selection_round{round}.csv")),
                        strategy,
                        &sel,
                    )?;
                    persist_masks(d, round, &prepared.train_names, labels.masks())?;
                }
                selection = Some(sel);
            }
            Ok(selection)
        };
        let selection = step().map_err(ctx(round))?;
        let trained = train_on_masks(prepared, labels.masks(), &config.train, train_seed(seed, round))
            .map_err(ctx(round))?;
        let report = evaluate(&trained, prepared).map_err(ctx(round))?;
        if let Some(d) = &dir {
            write_tensor(d.join(format!("model_round{round}.ealt")), &trained.to_tensor())
                .map_err(ctx(round))?;
        }
        let row = CurveRow {
            strategy: strategy.name().to_string(),
            seed,
            round,
            labeled_fraction: labels.labeled_fraction(),
            mean_dice: report.mean,
            per_class_dice: report.per_class,
        };
        log.append(&row).map_err(ctx(round))?;
        outcome.rows.push(row);
        outcome.selections.push(selection);
        model = Some(trained);
    }
    outcome.history = labels.history().to_vec();
    Ok(outcome)
}

/// All cells of an experiment, strategy-major then seed order.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<CurveRow>,
    pub cells: Vec<((Strategy, u64), CellOutcome)>,
}

/// Runs every (strategy, seed) cell, concurrently, and returns rows in a
/// fixed order. With `config.out` set, writes `<out>/curves.csv`.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentOutcome> {
    config.validate()?;
    let prepared = prepare(dataset, config)?;
    run_prepared(config, &prepared)
}

pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExperimentOutcome> {
    config.validate()?;
    let out = config.out.as_deref();
    if let Some(o) = out {
        create_dir(o)?;
    }
    let keys: Vec<(Strategy, u64)> = config
        .strategies
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(keys.len().max(1));
    let results: Vec<Result<CellOutcome>> = thread::scope(|scope| {
        let chunks: Vec<Vec<usize>> = (0..workers)
            .map(|w| (w..keys.len()).step_by(workers).collect())
            .collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|idx| {
                let keys = &keys;
                scope.spawn(move || {
                    idx.into_iter()
                        .map(|i| (i, run_cell(prepared, config, keys[i].0, keys[i].1, out)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<(usize, Result<CellOutcome>)> = handles
            .into_iter()
            .flat_map(|h| h.join().expect("experiment worker panicked"))
            .collect();
        all.sort_by_key(|(i, _)| *i);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let mut cells = Vec::with_capacity(keys.len());
    let mut rows = Vec::new();
    for (key, result) in keys.into_iter().zip(results) {
        let cell = result?;
        rows.extend(cell.rows.iter().cloned());
        cells.push((key, cell));
    }
    if let Some(o) = out {
        let path = o.join(CURVES_FILE);
        write_curves(&path, &rows)?;
    }
    Ok(ExperimentOutcome { rows, cells })
}
