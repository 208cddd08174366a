//! Lowers a sorting network to an exact ReLU network, and evaluates the
//! closed-form weight-count formulas for scaled-up scenarios.
//!
//! Each comparator becomes three hidden neurons
//!   z1 = relu(a), z2 = relu(b), z3 = relu(b - a)
//! (a on the low wire, b on the high wire) and two recombination neurons
//!   min = z2 - z3, max = z1 + z3.
//! This is exact for nonnegative inputs; a negative input is clamped by
//! z1/z2 and the output is wrong, which is why the code domain is \[0,1\].

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnruntime::{Activation, DenseLayer, DenseNetwork};
use crate::sortnet::{ceil_log2, SortingNetwork};

/// The constant weight pattern of one compiled comparator.
///
/// Hidden rows map (a, b) = (low wire, high wire) to (z1, z2, z3); output
/// rows map (z1, z2, z3) to (min, max).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorGadget {
    pub hidden: [[f64; 2]; 3],
    pub output: [[f64; 3]; 2],
}

impl ComparatorGadget {
    pub fn canonical() -> Self {
        ComparatorGadget {
            hidden: [[1.0, 0.0], [0.0, 1.0], [-1.0, 1.0]],
            output: [[0.0, 1.0, -1.0], [1.0, 0.0, 1.0]],
        }
    }
}

/// Hidden width reserved per sorting layer when not pruning: ceil(1.5x).
pub fn padded_width(x: usize) -> usize {
    (3 * x).div_ceil(2)
}

/// Worst-case deviation of a compiled sorter from exact sorting on \[0,1\]
/// inputs: 4 ulp per element, with ulp taken at the top of the unit
/// interval (ulp(1.0) = 2^-52).
///
/// Each comparator output suffers at most two roundings of 2^-54 each, and
/// the networks compiled for widths up to 8 are at most 6 comparators deep,
/// so 6·2^-53 < 4·2^-52 makes this bound deterministic, not statistical.
/// On {0,1} inputs every intermediate value is a small integer and the
/// compiled network is bit-exact.
pub const COMPILED_SORT_TOLERANCE: f64 = 4.0 * f64::EPSILON;

/// Compiles every sorting layer into two dense ReLU layers.
///
/// Unpruned, the first of the pair is padded with zero-weight neurons to
/// ceil(1.5x) so the weight-only count is exactly 2·d·ceil(1.5x)·x. Pruned,
/// it shrinks to x + (comparators in the layer): pass-through wires keep a
/// single weight-1 neuron and unused slots disappear.
pub fn compile(net: &SortingNetwork, prune: bool) -> DenseNetwork {
    let x = net.wires();
    let gadget = ComparatorGadget::canonical();
    let mut layers = Vec::with_capacity(2 * net.depth());
    for sort_layer in net.layers() {
        let k = sort_layer.len();
        let hidden = if prune { x + k } else { padded_width(x) };
        let mut a = Array2::zeros((hidden, x));
        let mut b = Array2::zeros((x, hidden));
        let mut used = vec![false; x];
        let mut slot = 0;
        for c in sort_layer {
            used[c.lo] = true;
            used[c.hi] = true;
            for (offset, row) in gadget.hidden.iter().enumerate() {
                a[[slot + offset, c.lo]] = row[0];
                a[[slot + offset, c.hi]] = row[1];
            }
            for (wire, row) in [(c.lo, gadget.output[0]), (c.hi, gadget.output[1])] {
                for (offset, &w) in row.iter().enumerate() {
                    b[[wire, slot + offset]] = w;
                }
            }
            slot += 3;
        }
        for w in (0..x).filter(|&w| !used[w]) {
            a[[slot, w]] = 1.0;
            b[[w, slot]] = 1.0;
            slot += 1;
        }
        debug_assert!(slot <= hidden);
        let first = DenseLayer::new(a, Array1::zeros(hidden), Activation::Relu).expect("valid");
        let second = DenseLayer::new(b, Array1::zeros(x), Activation::Relu).expect("valid");
        layers.push(first);
        layers.push(second);
    }
    DenseNetwork::new(layers).expect("widths chain by construction")
}

/// The 12-weight network sorting one pair: 2 inputs, 3 hidden neurons,
/// 2 outputs. Repeated application of this single block is the cheapest
/// sorter expressible in this scheme.
pub fn compile_single_comparator() -> DenseNetwork {
    let pair = SortingNetwork::new(
        2,
        vec![vec![crate::sortnet::Comparator::new(0, 1)]],
    )
    .expect("valid");
    compile(&pair, false)
}

/// How to pick the sorting-network depth in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthRule {
    /// ceil(log2 x), the optimistic information-theoretic floor.
    InfoTheoreticCeil,
    Explicit(usize),
}

/// Weight counts for sorting x patch codes extracted from an N×N image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamScenario {
    pub image_side: usize,
    pub patch_side: usize,
    pub attention: bool,
    /// Numbers to sort: the patch count with attention, the window-position
    /// count without.
    pub x: u64,
    pub depth: u64,
    /// 2·d·ceil(1.5x)·x, the weight count of the unrolled sorter.
    pub p_feedforward: u64,
    /// 4·ceil(1.5x)·x, the weight count when one two-layer block is applied
    /// repeatedly instead of unrolled.
    pub p_iterative: u64,
    pub notes: Vec<String>,
}

/// Evaluates the closed-form counts for one scenario.
///
/// With attention the sorter sees one code per placed patch: x = floor(N/n)².
/// Without attention it must see every candidate window, taken here as
/// x = (N-n)²; the off-by-one against the sliding-window count (N-n+1)² is
/// deliberate and flagged in the notes.
pub fn estimate_parameters(
    image_side: usize,
    patch_side: usize,
    attention: bool,
    depth_rule: DepthRule,
) -> Result<ParamScenario> {
    if patch_side == 0 || image_side < patch_side {
        return Err(Error::InvalidArgument(format!(
            "need image side >= patch side >= 1, got {image_side} and {patch_side}"
        )));
    }
    let x: u128 = if attention {
        let per_axis = (image_side / patch_side) as u128;
        per_axis * per_axis
    } else {
        let per_axis = (image_side - patch_side) as u128;
        per_axis * per_axis
    };
    if x < 2 {
        return Err(Error::InvalidArgument(format!(
            "scenario leaves only {x} value(s) to sort"
        )));
    }
    let depth: u128 = match depth_rule {
        DepthRule::InfoTheoreticCeil => ceil_log2(x as usize) as u128,
        DepthRule::Explicit(d) => {
            if d == 0 {
                return Err(Error::InvalidArgument("depth must be at least 1".into()));
            }
            d as u128
        }
    };
    let wide = (3 * x).div_ceil(2);
    let p_feedforward = 2 * depth * wide * x;
    let p_iterative = 4 * wide * x;

    let mut notes = Vec::new();
    if !attention {
        notes.push(format!(
            "window positions counted as (N-n)^2 = {x}; the sliding-window count would be (N-n+1)^2 = {}",
            (image_side - patch_side + 1).pow(2)
        ));
    }
    if !attention && x == 46_656 && depth == 16 {
        let alt_x: u128 = 36_864;
        let alt_wide = (3 * alt_x).div_ceil(2);
        let alt = 2 * depth * alt_wide * alt_x;
        notes.push(format!(
            "feedforward count for x=46656 at depth 16 is {p_feedforward}; a commonly quoted \
             ~65.3e9 for this scenario instead matches x=36864 (192^2), which gives {alt}"
        ));
    }
    if x == 784 || (!attention && x == 46_656) {
        notes.push(format!(
            "iterative count 4*ceil(1.5x)*x = {p_iterative} prices one application of the \
             two-layer block; the commonly quoted figure for this scenario is twice that \
             ({}), i.e. it prices two applications",
            2 * p_iterative
        ));
    }

    let to_u64 = |v: u128, name: &str| -> Result<u64> {
        u64::try_from(v).map_err(|_| Error::Overflow(format!("{name} exceeds u64")))
    };
    Ok(ParamScenario {
        image_side,
        patch_side,
        attention,
        x: to_u64(x, "x")?,
        depth: to_u64(depth, "depth")?,
        p_feedforward: to_u64(p_feedforward, "p_feedforward")?,
        p_iterative: to_u64(p_iterative, "p_iterative")?,
        notes,
    })
}
