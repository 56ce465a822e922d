//! Scene directory layout.
//!
//! ```text
//! scenes/
//!   split.txt                  one `<name> <train|val|test>` line per scene
//!   scene.toml                 layout the scenes were rendered from
//!   cbf.toml                   pipeline settings suited to the layout
//!   scene_000.cbft             [H, W, 3] f32 image
//!   scene_000.truth.png        ground truth (+ .truth.palette)
//!   scene_000.preview.png      RGB preview
//!   scene_000.corrupt.cbft     corrupted probability map (with --corrupt)
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cbf_core::io::{read_image, read_label_png, read_text};
use cbf_core::{Image, LabelMap, Sample, Taxonomy};

use crate::failure::{CliResult, Failure};

pub const SPLIT_FILE: &str = "split.txt";

pub fn scene_name(index: usize) -> String {
    format!("scene_{index:03}")
}

pub fn image_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.cbft"))
}

pub fn truth_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.truth.png"))
}

pub fn preview_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.preview.png"))
}

pub fn corrupt_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.corrupt.cbft"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }
}

pub fn split_text(entries: &[(String, Part)]) -> String {
    entries
        .iter()
        .map(|(n, p)| format!("{n} {}\n", p.as_str()))
        .collect()
}

pub fn read_split(dir: &Path) -> CliResult<Vec<(String, Part)>> {
    let path = dir.join(SPLIT_FILE);
    let text = read_text(&path).map_err(Failure::data)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || {
            Failure::Data(format!(
                "{}:{}: expected `<name> <train|val|test>`",
                path.display(),
                i + 1
            ))
        };
        let mut it = line.split_whitespace();
        let (Some(name), Some(part), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad());
        };
        let part = match part {
            "train" => Part::Train,
            "val" => Part::Val,
            "test" => Part::Test,
            _ => return Err(bad()),
        };
        out.push((name.to_string(), part));
    }
    Ok(out)
}

/// A scene loaded from disk.
pub struct Scene {
    pub name: String,
    pub sample: Sample<f64>,
}

pub struct Dataset {
    pub taxonomy: Arc<Taxonomy>,
    pub train: Vec<Scene>,
    pub val: Vec<Scene>,
    pub test: Vec<String>,
}

fn load_scene(dir: &Path, name: &str, taxonomy: &Arc<Taxonomy>) -> CliResult<Scene> {
    let image: Image = read_image(&image_path(dir, name))?;
    let path = truth_path(dir, name);
    let truth: LabelMap = read_label_png(&path)?;
    if truth.taxonomy() != taxonomy {
        return Err(Failure::Data(format!(
            "{}: palette differs from the other scenes",
            path.display()
        )));
    }
    Ok(Scene {
        name: name.to_string(),
        sample: Sample { image, truth },
    })
}

impl Dataset {
    /// Training and validation scenes of a scene directory. All truth
    /// palettes must describe the same taxonomy.
    pub fn load(dir: &Path) -> CliResult<Dataset> {
        let split = read_split(dir)?;
        let first = split
            .iter()
            .find(|(_, p)| *p != Part::Test)
            .ok_or_else(|| {
                Failure::Data(format!(
                    "{}: no training or validation scenes",
                    dir.display()
                ))
            })?;
        let taxonomy = read_label_png(&truth_path(dir, &first.0))?
            .taxonomy()
            .clone();
        let mut ds = Dataset {
            taxonomy: taxonomy.clone(),
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (name, part) in split {
            match part {
                Part::Test => ds.test.push(name),
                Part::Train => ds.train.push(load_scene(dir, &name, &taxonomy)?),
                Part::Val => ds.val.push(load_scene(dir, &name, &taxonomy)?),
            }
        }
        if ds.train.is_empty() || ds.val.is_empty() {
            return Err(Failure::Data(format!(
                "{}: need at least one training and one validation scene",
                dir.display()
            )));
        }
        Ok(ds)
    }
}
