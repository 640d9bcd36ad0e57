use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use edgeal::config::ExperimentConfig;
use edgeal::core::edge::edge_prior;
use edgeal::core::metrics::dice;
use edgeal::core::superpixel::{seeds_partition, DEFAULT_ITERATIONS, DEFAULT_REGION_COUNT};
use edgeal::core::tensor::{Tensor, TensorData};
use edgeal::core::uncertainty::edge_scores;
use edgeal::core::Grid;
use edgeal::dataset::load_dataset;
use edgeal::experiment::{read_curves, run_experiment, write_curves, CURVES_FILE};
use edgeal::io::{read_class_map, read_image, write_image, write_tensor};
use edgeal::precomputed::{count_passes, read_precomputed_pass};
use edgeal::summary::{emit_summary, format_table, write_summary_csv};
use edgeal::synth::{generate_synthetic, SynthConfig};

#[derive(Parser)]
#[command(name = "edgeal", version, about = "Edge-prior active learning for segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic layered dataset.
    Synth(SynthArgs),
    /// Run the active-learning loop and write curves and a summary.
    Run(Box<RunArgs>),
    /// Edge entropy and edge divergence maps from precomputed passes.
    Score {
        image: PathBuf,
        /// Directory holding `<name>_pass<k>.ealt`.
        #[arg(long)]
        passes: PathBuf,
        /// Output directory; defaults to the passes directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Superpixel partition of an image.
    Superpixels {
        image: PathBuf,
        #[arg(short = 'n', long, default_value_t = DEFAULT_REGION_COUNT)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Normalized Sobel edge map of an image.
    Edges {
        image: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Dice between a predicted and a ground-truth class map.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        /// Number of classes; inferred from both maps when omitted.
        #[arg(long)]
        classes: Option<usize>,
        /// Append a result row to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Mean ± sd table from a curves file.
    Summarize {
        curves: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    n_images: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 0.08)]
    noise: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Every flag overrides the key of the same name in the config file.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    /// Comma list of edgeal, random, ent, conf, mar, rmcdr.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    seed_fraction: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    mc_passes: Option<String>,
    #[arg(long)]
    superpixels: Option<String>,
    #[arg(long)]
    superpixel_iterations: Option<String>,
    /// Comma list, e.g. 1,2,3,4,5.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    weight_decay: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    dropout: Option<String>,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("dataset", &self.dataset),
            ("strategy", &self.strategy),
            ("seed_fraction", &self.seed_fraction),
            ("budget", &self.budget),
            ("rounds", &self.rounds),
            ("mc_passes", &self.mc_passes),
            ("superpixels", &self.superpixels),
            ("superpixel_iterations", &self.superpixel_iterations),
            ("seeds", &self.seeds),
            ("out", &self.out),
            ("learning_rate", &self.learning_rate),
            ("weight_decay", &self.weight_decay),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("dropout", &self.dropout),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn stem(path: &Path) -> anyhow::Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("{}: no file name", path.display()))
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        n_images: args.n_images,
        height: args.height,
        width: args.width,
        classes: args.classes,
        noise: args.noise,
        seed: args.seed,
    };
    let index = generate_synthetic(&args.out, &cfg)?;
    println!(
        "wrote {} train, {} val, {} test images ({} classes) to {}",
        index.train.len(),
        index.val.len(),
        index.test.len(),
        index.classes,
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = args.config()?;
    let dataset = load_dataset(&cfg.dataset)?;
    let outcome = run_experiment(&cfg, &dataset)?;
    let summary = emit_summary(&outcome.rows);
    if let Some(out) = &cfg.out {
        write_summary_csv(&out.join("summary.csv"), &summary)?;
    } else {
        // Without an output directory the curves still go somewhere useful.
        write_curves(Path::new(CURVES_FILE), &outcome.rows)?;
    }
    print!("{}", format_table(&summary));
    Ok(())
}

fn score(image: &Path, passes: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let name = stem(image)?;
    let img = read_image(image)?;
    let edges = edge_prior(&img)?;
    let n = count_passes(passes, &name);
    if n == 0 {
        bail!("no {name}_pass0.ealt in {}", passes.display());
    }
    let maps = (0..n)
        .map(|k| read_precomputed_pass(passes, &name, k, None))
        .collect::<edgeal::Result<Vec<_>>>()?;
    let scores = edge_scores(&maps, &edges).with_context(|| format!("scoring {name}"))?;
    let out = out.unwrap_or_else(|| passes.to_path_buf());
    write_image(out.join(format!("{name}_ee.ealt")), &scores.entropy)?;
    write_image(out.join(format!("{name}_ed.ealt")), &scores.divergence)?;
    println!("{name}: {n} passes, maps written to {}", out.display());
    Ok(())
}

/// Region ids fit a u8 map up to 256 regions. Beyond that the low byte goes
/// to `out` and the high byte to `<stem>_hi.ealt` next to it.
fn superpixels(
    image: &Path,
    count: usize,
    iterations: usize,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let img = read_image(image)?;
    let map = seeds_partition(&img, count, iterations, seed)?;
    let labels = map.labels();
    let (h, w) = labels.dims();
    let byte = |shift: u32| {
        let data = labels.as_slice().iter().map(|&r| (r >> shift) as u8).collect();
        Tensor::new(vec![h, w], TensorData::U8(data))
    };
    if map.region_count() <= 256 {
        write_tensor(out, &byte(0)?)?;
    } else {
        if map.region_count() > 65536 {
            bail!("{} regions exceed the two-byte map", map.region_count());
        }
        let hi = out.with_file_name(format!("{}_hi.ealt", stem(out)?));
        write_tensor(out, &byte(0)?)?;
        write_tensor(&hi, &byte(8)?)?;
    }
    println!("{} regions", map.region_count());
    Ok(())
}

fn eval(pred: &Path, gt: &Path, classes: Option<usize>, csv_path: Option<PathBuf>) -> anyhow::Result<()> {
    let p = read_class_map(pred)?;
    let g = read_class_map(gt)?;
    let max = |m: &Grid<u8>| m.as_slice().iter().copied().max().unwrap_or(0) as usize;
    let classes = classes.unwrap_or_else(|| max(&p).max(max(&g)) + 1);
    let report = dice(&p, &g, classes)?;
    let cell = |d: Option<f32>| d.map(|v| format!("{v:.6}")).unwrap_or_default();
    for (c, d) in report.per_class.iter().enumerate() {
        println!("class {c}: {}", d.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()));
    }
    println!("mean: {:.6}", report.mean);
    if let Some(path) = csv_path {
        let fresh = !path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        let mut w = csv::Writer::from_writer(file);
        if fresh {
            w.write_record(["pred", "gt", "mean_dice", "per_class_dice"])?;
        }
        let per_class: Vec<String> = report.per_class.iter().map(|&d| cell(d)).collect();
        w.write_record([
            pred.display().to_string(),
            gt.display().to_string(),
            format!("{:.6}", report.mean),
            per_class.join(";"),
        ])?;
        w.flush()?;
    }
    Ok(())
}

fn summarize(curves: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let rows = read_curves(curves)?;
    if rows.is_empty() {
        bail!("{} has no rows", curves.display());
    }
    let summary = emit_summary(&rows);
    if let Some(out) = out {
        write_summary_csv(&out, &summary)?;
    }
    print!("{}", format_table(&summary));
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => synth(args),
        Command::Run(args) => run(*args),
        Command::Score { image, passes, out } => score(&image, &passes, out),
        Command::Superpixels { image, count, iterations, seed, out } => {
            superpixels(&image, count, iterations, seed, &out)
        }
        Command::Edges { image, out } => {
            let edges = edge_prior(&read_image(&image)?)?;
            write_image(&out, edges.values())?;
            Ok(())
        }
        Command::Eval { pred, gt, classes, csv } => eval(&pred, &gt, classes, csv),
        Command::Summarize { curves, out } => summarize(&curves, out),
    }
}
