//! End-to-end classifier for the identity task: extract patches at known
//! positions, encode each as a real, sort the codes through a compiled
//! ReLU network, and read the class off the longest run of equal
//! neighbors.
//!
//! One sorter is compiled for max_patches inputs; images with fewer
//! patches pad the remaining slots with 0. Padding needs no sentinel
//! value: codes are nonnegative, so the ascending output keeps the c
//! largest entries at the top, and if z real codes are themselves 0 then
//! exactly z zeros of the combined multiset re-enter the top c. The top c
//! outputs therefore equal the real code multiset no matter how many
//! zeros collide with padding.
//!
//! Equality of neighbors is tested bit-exactly, never with a tolerance.
//! That is sound because codes are dyadic rationals (pack / 2^(n²)) whose
//! pairwise differences and sums the comparator gadget reproduces without
//! rounding, so the sorter permutes the code multiset exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{majority_label, majority_threshold, ClassLabel, Dataset, IdentityImage};
use crate::error::{Error, Result};
use crate::nncompiler::compile;
use crate::nnruntime::DenseNetwork;
use crate::patchcodec::{encode, Patch, PatchCode, PrecisionModel};
use crate::sortnet::make_merge_network;

/// The outcome of classifying one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineVerdict {
    pub predicted_class: ClassLabel,
    /// Ascending codes of the image's real patches (padding removed).
    pub sorted_codes: Vec<f64>,
    pub max_run_length: usize,
    pub patch_count: usize,
}

/// A compiled classifier for images with up to `max_patches` patches of
/// side `patch_side`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    sorter: DenseNetwork,
    max_patches: usize,
    patch_side: usize,
    precision: PrecisionModel,
}

impl Pipeline {
    /// Compiles the sorter and fixes the codec precision. Fails when the
    /// surviving code bits outgrow a double's mantissa, because then the
    /// sorted floats could merge distinct patches.
    pub fn new(max_patches: usize, patch_side: usize, precision: PrecisionModel) -> Result<Self> {
        if max_patches < 2 {
            return Err(Error::InvalidArgument("need at least two patch slots".into()));
        }
        let precision = precision.validate()?;
        let n2 = (patch_side * patch_side) as u32;
        let effective = precision.mantissa_bits().map_or(n2, |m| m.min(n2));
        if effective > f64::MANTISSA_DIGITS {
            return Err(Error::PrecisionInsufficient {
                needed: effective as usize,
                available: f64::MANTISSA_DIGITS as usize,
            });
        }
        // probe the codec's side cap before compiling anything
        encode(&Patch::new(patch_side, vec![0; patch_side * patch_side])?, precision)?;
        let sorter = compile(&make_merge_network(max_patches)?, true);
        Ok(Pipeline { sorter, max_patches, patch_side, precision })
    }

    pub fn max_patches(&self) -> usize {
        self.max_patches
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn precision(&self) -> PrecisionModel {
        self.precision
    }

    pub fn sorter(&self) -> &DenseNetwork {
        &self.sorter
    }

    fn sort_codes(&self, codes: &[PatchCode]) -> Result<Vec<f64>> {
        let c = codes.len();
        if c < 3 || c > self.max_patches {
            return Err(Error::InvalidArgument(format!(
                "{c} patches given, pipeline handles 3..={}",
                self.max_patches
            )));
        }
        let mut inputs = vec![0.0; self.max_patches];
        for (slot, code) in inputs.iter_mut().zip(codes) {
            *slot = code.value();
        }
        let sorted = self.sorter.forward(&inputs)?;
        // drop the padded prefix; the top c outputs are the code multiset
        Ok(sorted[self.max_patches - c..].to_vec())
    }

    /// Classifies from pixels plus the ground-truth patch positions.
    pub fn classify_image(&self, image: &IdentityImage) -> Result<PipelineVerdict> {
        let codes = image
            .patches
            .iter()
            .map(|p| {
                let patch = image.extract(p.row, p.col, self.patch_side)?;
                encode(&patch, self.precision)
            })
            .collect::<Result<Vec<_>>>()?;
        self.classify_codes(&codes)
    }

    /// Classifies pre-encoded patches; the sorted-scan decision itself.
    pub fn classify_codes(&self, codes: &[PatchCode]) -> Result<PipelineVerdict> {
        let sorted_codes = self.sort_codes(codes)?;
        let max_run_length = longest_equal_run(&sorted_codes);
        let patch_count = codes.len();
        let predicted_class = if max_run_length >= majority_threshold(patch_count) {
            ClassLabel::One
        } else {
            ClassLabel::Two
        };
        Ok(PipelineVerdict { predicted_class, sorted_codes, max_run_length, patch_count })
    }

    /// Classifies a whole dataset and counts agreement with stored labels.
    pub fn classify_dataset(&self, dataset: &Dataset) -> Result<PipelineSummary> {
        let verdicts: Vec<PipelineVerdict> = dataset
            .images
            .par_iter()
            .map(|img| self.classify_image(img))
            .collect::<Result<_>>()?;
        let agreeing = verdicts
            .iter()
            .zip(&dataset.images)
            .filter(|(v, img)| v.predicted_class == img.class_label)
            .count();
        Ok(PipelineSummary {
            total: verdicts.len(),
            agreeing,
            verdicts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub total: usize,
    pub agreeing: usize,
    pub verdicts: Vec<PipelineVerdict>,
}

impl PipelineSummary {
    pub fn agreement(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.total as f64
        }
    }
}

fn longest_equal_run(sorted: &[f64]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = f64::NAN;
    for &v in sorted {
        // bit-exact comparison; codes are dyadic so sorting never rounds
        if v == prev {
            run += 1;
        } else {
            run = 1;
            prev = v;
        }
        best = best.max(run);
    }
    best
}

/// Ground truth from the patterns alone: class one iff at least half of
/// the `c` patterns are bit-identical.
pub fn oracle_classify(patterns: &[Patch], c: usize) -> Result<ClassLabel> {
    if patterns.len() != c || c < 3 {
        return Err(Error::InvalidArgument(format!(
            "need the full pattern list, got {} of {c}",
            patterns.len()
        )));
    }
    Ok(majority_label(patterns))
}
