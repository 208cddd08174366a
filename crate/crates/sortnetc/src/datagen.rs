//! Synthetic datasets: binary images holding c non-overlapping random
//! patches where the class says whether at least half of the patches are
//! identical, and length-10 number lists where the class says whether some
//! value appears at least five times.
//!
//! Labels are chosen first and images built to conform, because for large
//! patches a random image essentially never lands in the identical class.
//! Every sample is re-checked against the multiplicity oracle before it
//! leaves the generator, so stored labels are sound by construction and at
//! the bit level. Sample i draws from substream (seed, i), which makes
//! parallel and serial generation byte-identical.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patchcodec::{Patch, MAX_SIDE};
use crate::rng::Stream;

/// Candidate placements drawn per image before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

/// Whole-set redraws for class-two pattern collisions before giving up.
const PATTERN_ATTEMPTS: usize = 1000;

/// Length of a number-list sample.
pub const LIST_LEN: usize = 10;

/// A list is class one when some value is repeated this often.
pub const LIST_REPEATS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    /// At least half of the patches (values) are identical.
    One,
    /// No pattern reaches half.
    Two,
}

/// Class one needs a pattern repeated at least ceil(c/2) times; for even c
/// exactly half already counts, reading "at least half" literally.
pub fn majority_threshold(c: usize) -> usize {
    c.div_ceil(2)
}

/// Highest multiplicity of any bit-exact pattern.
pub fn max_multiplicity(patterns: &[Patch]) -> usize {
    let mut counts: HashMap<&Patch, usize> = HashMap::new();
    for p in patterns {
        *counts.entry(p).or_insert(0) += 1;
    }
    counts.into_values().max().unwrap_or(0)
}

/// Ground-truth label from the patterns alone.
pub fn majority_label(patterns: &[Patch]) -> ClassLabel {
    if max_multiplicity(patterns) >= majority_threshold(patterns.len()) {
        ClassLabel::One
    } else {
        ClassLabel::Two
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub image_side: usize,
    pub patch_side: usize,
    pub min_patches: usize,
    pub max_patches: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub balanced: bool,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.patch_side;
        if n == 0 || n > MAX_SIDE {
            return Err(Error::PatchTooLarge { side: n, max: MAX_SIDE });
        }
        if self.min_patches < 3 {
            return Err(Error::InfeasibleConfig(format!(
                "min_patches {} but the task needs at least 3 patches",
                self.min_patches
            )));
        }
        if self.max_patches < self.min_patches {
            return Err(Error::InfeasibleConfig(format!(
                "max_patches {} below min_patches {}",
                self.max_patches, self.min_patches
            )));
        }
        // a ceil(sqrt(c)) × ceil(sqrt(c)) grid of patches must fit, which
        // guarantees placements exist at all
        let mut r = (self.max_patches as f64).sqrt() as usize;
        while r * r < self.max_patches {
            r += 1;
        }
        if n * r > self.image_side {
            return Err(Error::InfeasibleConfig(format!(
                "{} patches of side {n} cannot fit a {}-pixel image",
                self.max_patches, self.image_side
            )));
        }
        // class two needs max_patches pairwise distinct patterns
        let n2 = n * n;
        if n2 < usize::BITS as usize && (1usize << n2) < self.max_patches {
            return Err(Error::InfeasibleConfig(format!(
                "only {} distinct {n}x{n} patterns exist, class two needs up to {}",
                1usize << n2,
                self.max_patches
            )));
        }
        if self.sample_count == 0 {
            return Err(Error::InfeasibleConfig("sample_count must be positive".into()));
        }
        if self.balanced && !self.sample_count.is_multiple_of(2) {
            return Err(Error::InfeasibleConfig(
                "balanced generation needs an even sample_count".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedPatch {
    pub row: usize,
    pub col: usize,
    pub patch: Patch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityImage {
    /// Row-major binary pixels, image_side × image_side.
    pub pixels: Vec<u8>,
    pub side: usize,
    pub patches: Vec<PlacedPatch>,
    pub class_label: ClassLabel,
}

/// Reads the n×n window at (row, col) out of a binary pixel buffer.
pub fn extract_patch(
    pixels: &[u8],
    image_side: usize,
    row: usize,
    col: usize,
    patch_side: usize,
) -> Result<Patch> {
    if row + patch_side > image_side || col + patch_side > image_side {
        return Err(Error::PositionOutOfBounds { row, col });
    }
    let mut bits = Vec::with_capacity(patch_side * patch_side);
    for r in row..row + patch_side {
        bits.extend_from_slice(&pixels[r * image_side + col..r * image_side + col + patch_side]);
    }
    Patch::new(patch_side, bits)
}

impl IdentityImage {
    pub fn extract(&self, row: usize, col: usize, patch_side: usize) -> Result<Patch> {
        extract_patch(&self.pixels, self.side, row, col, patch_side)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub images: Vec<IdentityImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub file: String,
    pub class_label: ClassLabel,
    pub patches: Vec<PlacedPatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: DatasetConfig,
    pub images: Vec<ImageRecord>,
}

fn random_patch(stream: &mut Stream, side: usize) -> Patch {
    let bits = (0..side * side).map(|_| u8::from(stream.bit())).collect();
    Patch::new(side, bits).expect("generated bits are binary")
}

fn boxes_overlap(a: (usize, usize), b: (usize, usize), side: usize) -> bool {
    a.0.abs_diff(b.0) < side && a.1.abs_diff(b.1) < side
}

fn place_patches(
    stream: &mut Stream,
    image_side: usize,
    patch_side: usize,
    count: usize,
) -> Result<Vec<(usize, usize)>> {
    let span = image_side - patch_side + 1;
    let mut placed: Vec<(usize, usize)> = Vec::with_capacity(count);
    let mut attempts = 0;
    while placed.len() < count {
        if attempts >= PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementFailed { attempts });
        }
        attempts += 1;
        let cand = (stream.below(span as u64) as usize, stream.below(span as u64) as usize);
        if placed.iter().all(|&p| !boxes_overlap(p, cand, patch_side)) {
            placed.push(cand);
        }
    }
    Ok(placed)
}

fn class_one_patterns(stream: &mut Stream, side: usize, c: usize) -> Vec<Patch> {
    let threshold = majority_threshold(c);
    let copies = threshold + stream.below((c - threshold + 1) as u64) as usize;
    let base = random_patch(stream, side);
    let mut patterns = vec![base; copies];
    // fillers are unconstrained: they can only raise some multiplicity,
    // never push the base below the threshold
    patterns.extend((copies..c).map(|_| random_patch(stream, side)));
    patterns
}

fn class_two_patterns(stream: &mut Stream, side: usize, c: usize) -> Result<Vec<Patch>> {
    for _ in 0..PATTERN_ATTEMPTS {
        let patterns: Vec<Patch> = (0..c).map(|_| random_patch(stream, side)).collect();
        let distinct =
            patterns.iter().enumerate().all(|(i, p)| patterns[..i].iter().all(|q| q != p));
        if distinct {
            return Ok(patterns);
        }
    }
    Err(Error::InfeasibleConfig(format!(
        "could not draw {c} distinct {side}x{side} patterns in {PATTERN_ATTEMPTS} attempts"
    )))
}

/// Builds image `index` of the dataset. Draw order within the substream is
/// fixed: patch count, label coin (unbalanced only), patterns, positions.
fn generate_image(cfg: &DatasetConfig, index: usize) -> Result<IdentityImage> {
    let mut stream = Stream::new(cfg.seed, index as u64);
    let c = cfg.min_patches
        + stream.below((cfg.max_patches - cfg.min_patches + 1) as u64) as usize;
    let label = if cfg.balanced {
        if index.is_multiple_of(2) {
            ClassLabel::One
        } else {
            ClassLabel::Two
        }
    } else if stream.bit() {
        ClassLabel::One
    } else {
        ClassLabel::Two
    };
    let patterns = match label {
        ClassLabel::One => class_one_patterns(&mut stream, cfg.patch_side, c),
        ClassLabel::Two => class_two_patterns(&mut stream, cfg.patch_side, c)?,
    };
    let positions = place_patches(&mut stream, cfg.image_side, cfg.patch_side, c)?;

    let mut pixels = vec![0u8; cfg.image_side * cfg.image_side];
    for (&(row, col), patch) in positions.iter().zip(&patterns) {
        for r in 0..cfg.patch_side {
            for cc in 0..cfg.patch_side {
                pixels[(row + r) * cfg.image_side + col + cc] = patch.bit(r, cc);
            }
        }
    }

    // labels must be recoverable from pixels alone: re-extract and re-judge
    for (&(row, col), patch) in positions.iter().zip(&patterns) {
        let back = extract_patch(&pixels, cfg.image_side, row, col, cfg.patch_side)?;
        assert_eq!(&back, patch, "patch did not rasterize faithfully");
    }
    assert_eq!(majority_label(&patterns), label, "constructed label failed the oracle");

    let patches = positions
        .into_iter()
        .zip(patterns)
        .map(|((row, col), patch)| PlacedPatch { row, col, patch })
        .collect();
    Ok(IdentityImage { pixels, side: cfg.image_side, patches, class_label: label })
}

pub fn generate_identity_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let images = (0..cfg.sample_count)
        .into_par_iter()
        .map(|i| generate_image(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { config: cfg.clone(), images })
}

impl Dataset {
    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            config: self.config.clone(),
            images: self
                .images
                .iter()
                .enumerate()
                .map(|(i, img)| ImageRecord {
                    file: format!("img_{i:05}.pgm"),
                    class_label: img.class_label,
                    patches: img.patches.clone(),
                })
                .collect(),
        }
    }

    /// Writes one PGM per image plus manifest.json; same dataset in, same
    /// bytes out.
    pub fn write(&self, dir: &Path) -> Result<DatasetManifest> {
        fs::create_dir_all(dir)?;
        let manifest = self.manifest();
        for (record, image) in manifest.images.iter().zip(&self.images) {
            write_pgm(&dir.join(&record.file), &image.pixels, image.side)?;
        }
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        fs::write(dir.join("manifest.json"), json)?;
        Ok(manifest)
    }
}

fn write_pgm(path: &Path, pixels: &[u8], side: usize) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "P5\n{side} {side}\n255\n")?;
    let bytes: Vec<u8> = pixels.iter().map(|&p| if p == 0 { 0 } else { 255 }).collect();
    out.write_all(&bytes)?;
    Ok(())
}

fn read_pgm(path: &Path) -> Result<(Vec<u8>, usize)> {
    let data = fs::read(path)?;
    let bad = |why: &str| Error::BadDataset(format!("{}: {why}", path.display()));
    let header_end = data
        .windows(4)
        .position(|w| w == b"255\n")
        .ok_or_else(|| bad("missing maxval"))?
        + 4;
    let header = std::str::from_utf8(&data[..header_end]).map_err(|_| bad("non-ascii header"))?;
    let mut fields = header.split_ascii_whitespace();
    if fields.next() != Some("P5") {
        return Err(bad("not a raw PGM"));
    }
    let width: usize =
        fields.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad width"))?;
    let height: usize =
        fields.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad height"))?;
    if width != height {
        return Err(bad("image is not square"));
    }
    let raw = &data[header_end..];
    if raw.len() != width * height {
        return Err(bad("pixel payload has the wrong size"));
    }
    let pixels = raw
        .iter()
        .map(|&b| match b {
            0 => Ok(0u8),
            255 => Ok(1u8),
            other => Err(Error::NonBinaryPixel { value: other }),
        })
        .collect::<Result<_>>()?;
    Ok((pixels, width))
}

/// Loads a written dataset back and replays the oracle on every image.
pub fn read_identity_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest =
        serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let images = manifest
        .images
        .iter()
        .map(|record| {
            let (pixels, side) = read_pgm(&dir.join(&record.file))?;
            if side != manifest.config.image_side {
                return Err(Error::BadDataset(format!(
                    "{} is {side} pixels wide, manifest says {}",
                    record.file, manifest.config.image_side
                )));
            }
            let extracted = record
                .patches
                .iter()
                .map(|p| extract_patch(&pixels, side, p.row, p.col, manifest.config.patch_side))
                .collect::<Result<Vec<_>>>()?;
            if majority_label(&extracted) != record.class_label {
                return Err(Error::BadDataset(format!(
                    "{}: stored label disagrees with the pixels",
                    record.file
                )));
            }
            Ok(IdentityImage {
                pixels,
                side,
                patches: record.patches.clone(),
                class_label: record.class_label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { config: manifest.config, images })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumberListSample {
    /// The view consumers train on; ascending when generated with
    /// sorted_output, otherwise in generation order.
    pub values: Vec<f64>,
    pub label: ClassLabel,
    /// Always the ascending copy of the values.
    pub sorted_view: Vec<f64>,
}

/// Label from the values alone: class one iff some value occurs at least
/// five times, compared bit-exactly.
pub fn list_label(values: &[f64]) -> ClassLabel {
    let max = values
        .iter()
        .map(|v| values.iter().filter(|w| w == &v).count())
        .max()
        .unwrap_or(0);
    if max >= LIST_REPEATS {
        ClassLabel::One
    } else {
        ClassLabel::Two
    }
}

/// Generates `count` alternating-class number lists. Class one repeats one
/// base value 5 to 10 times; class two draws fresh uniforms, which tie
/// with probability 0 but are re-checked against the oracle anyway.
pub fn generate_list_dataset(
    count: usize,
    seed: u64,
    sorted_output: bool,
) -> Result<Vec<NumberListSample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut stream = Stream::new(seed, i as u64);
            let label = if i % 2 == 0 { ClassLabel::One } else { ClassLabel::Two };
            let values = loop {
                let candidate = match label {
                    ClassLabel::One => {
                        let copies =
                            LIST_REPEATS + stream.below((LIST_LEN - LIST_REPEATS + 1) as u64) as usize;
                        let base = stream.unit_f64();
                        let mut v = vec![base; copies];
                        v.extend((copies..LIST_LEN).map(|_| stream.unit_f64()));
                        stream.shuffle(&mut v);
                        v
                    }
                    ClassLabel::Two => (0..LIST_LEN).map(|_| stream.unit_f64()).collect(),
                };
                if list_label(&candidate) == label {
                    break candidate;
                }
            };
            let mut sorted_view = values.clone();
            sorted_view.sort_by(|a, b| a.partial_cmp(b).expect("unit draws are never NaN"));
            let values = if sorted_output { sorted_view.clone() } else { values };
            NumberListSample { values, label, sorted_view }
        })
        .collect())
}

/// CSV with one row per sample: ten value columns then the label. Values
/// print in shortest round-trip form, so reading parses back bit-exactly.
pub fn write_list_csv(path: &Path, samples: &[NumberListSample]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (1..=LIST_LEN).map(|i| format!("v{i}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    for s in samples {
        let row: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
        let label = match s.label {
            ClassLabel::One => "one",
            ClassLabel::Two => "two",
        };
        writeln!(out, "{},{label}", row.join(","))?;
    }
    Ok(())
}

pub fn read_list_csv(path: &Path) -> Result<Vec<NumberListSample>> {
    let text = fs::read_to_string(path)?;
    let bad = |why: String| Error::BadDataset(format!("{}: {why}", path.display()));
    let mut lines = text.lines();
    lines.next().ok_or_else(|| bad("empty file".into()))?;
    lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != LIST_LEN + 1 {
                return Err(bad(format!("expected {} columns", LIST_LEN + 1)));
            }
            let values = fields[..LIST_LEN]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(format!("bad value {f:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let label = match fields[LIST_LEN] {
                "one" => ClassLabel::One,
                "two" => ClassLabel::Two,
                other => return Err(bad(format!("bad label {other:?}"))),
            };
            if list_label(&values) != label {
                return Err(bad("stored label disagrees with the values".into()));
            }
            let mut sorted_view = values.clone();
            sorted_view.sort_by(|a, b| a.partial_cmp(b).expect("parsed values are finite"));
            Ok(NumberListSample { values, label, sorted_view })
        })
        .collect()
}
