//! Dataset directory layout: `images/<name>.ealt`, `labels/<name>.ealt` and
//! a `splits.txt` of `<split>\t<name>` lines.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use edgeal_core::Grid;

use crate::io::{read_class_map, read_image};
use crate::{Error, Result};

pub const SPLITS_FILE: &str = "splits.txt";
pub const IMAGES_DIR: &str = "images";
pub const LABELS_DIR: &str = "labels";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| Error::Dataset(format!("unknown split {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    /// One more than the largest label value in any split.
    pub classes: usize,
}

impl DatasetIndex {
    pub fn split(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn image_path(&self, name: &str) -> PathBuf {
        image_path(&self.root, name)
    }

    pub fn label_path(&self, name: &str) -> PathBuf {
        label_path(&self.root, name)
    }
}

pub fn image_path(root: &Path, name: &str) -> PathBuf {
    root.join(IMAGES_DIR).join(format!("{name}.ealt"))
}

pub fn label_path(root: &Path, name: &str) -> PathBuf {
    root.join(LABELS_DIR).join(format!("{name}.ealt"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub name: String,
    pub image: Grid<f32>,
    pub label: Grid<u8>,
}

/// A validated dataset with every split loaded.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub index: DatasetIndex,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn classes(&self) -> usize {
        self.index.classes
    }

    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn parse_splits(text: &str) -> Result<[Vec<String>; 3]> {
    let mut lists: [Vec<String>; 3] = Default::default();
    let mut seen = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (split, name) = line.split_once('\t').ok_or_else(|| {
            Error::Dataset(format!("{SPLITS_FILE} line {}: expected <split>\\t<name>", lineno + 1))
        })?;
        let split: Split = split.trim().parse()?;
        let name = name.trim();
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(Error::Dataset(format!(
                "{SPLITS_FILE} line {}: bad sample name {name:?}",
                lineno + 1
            )));
        }
        if !seen.insert(name.to_string()) {
            return Err(Error::Dataset(format!("sample {name} listed twice")));
        }
        lists[split as usize].push(name.to_string());
    }
    Ok(lists)
}

fn load_sample(root: &Path, name: &str) -> Result<Sample> {
    let sample_err = |message: String| Error::Sample {
        name: name.to_string(),
        message,
    };
    let image = read_image(image_path(root, name))?;
    let label = read_class_map(label_path(root, name))?;
    if image.dims() != label.dims() {
        return Err(sample_err(format!(
            "label {}x{} vs image {}x{}",
            label.height(),
            label.width(),
            image.height(),
            image.width()
        )));
    }
    if image.height() < 3 || image.width() < 3 {
        return Err(sample_err("images must be at least 3x3".into()));
    }
    if let Some(v) = image.as_slice().iter().find(|v| !v.is_finite()) {
        return Err(sample_err(format!("non-finite pixel {v}")));
    }
    Ok(Sample {
        name: name.to_string(),
        image,
        label,
    })
}

/// Reads and validates every listed sample. The class count is inferred
/// from the labels.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let splits_path = root.join(SPLITS_FILE);
    let text = fs::read_to_string(&splits_path).map_err(|e| Error::io(&splits_path, e))?;
    let [train, val, test] = parse_splits(&text)?;
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    let load = |names: &[String]| -> Result<Vec<Sample>> {
        names.iter().map(|n| load_sample(root, n)).collect()
    };
    let train_s = load(&train)?;
    let val_s = load(&val)?;
    let test_s = load(&test)?;

    let max_label = train_s
        .iter()
        .chain(&val_s)
        .chain(&test_s)
        .flat_map(|s| s.label.as_slice().iter().copied())
        .max()
        .unwrap_or(0);
    if max_label == edgeal_core::labels::UNLABELED {
        return Err(Error::Dataset(format!(
            "label value {max_label} is reserved for unlabeled pixels"
        )));
    }
    let classes = max_label as usize + 1;
    if classes < 2 {
        return Err(Error::Dataset("labels contain a single class".into()));
    }
    Ok(Dataset {
        index: DatasetIndex {
            root: root.to_path_buf(),
            train,
            val,
            test,
            classes,
        },
        train: train_s,
        val: val_s,
        test: test_s,
    })
}

/// Writes one sample's image and label files.
pub fn write_sample(root: &Path, sample: &Sample) -> Result<()> {
    crate::io::create_dir(&root.join(IMAGES_DIR))?;
    crate::io::create_dir(&root.join(LABELS_DIR))?;
    crate::io::write_image(image_path(root, &sample.name), &sample.image)?;
    crate::io::write_class_map(label_path(root, &sample.name), &sample.label)
}

pub fn write_splits(root: &Path, index: &DatasetIndex) -> Result<()> {
    let mut text = String::new();
    for split in Split::ALL {
        for name in index.split(split) {
            text.push_str(&format!("{split}\t{name}\n"));
        }
    }
    let path = root.join(SPLITS_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
