//! Sorting networks: construction, application, and verification.
//!
//! A network is a list of layers, each layer a set of comparators on
//! disjoint wire pairs. Everything here uses the ascending convention: after
//! a comparator fires, the lower wire index carries the smaller value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Constant from Kahale's depth lower bound c·log2(x).
pub const KAHALE_C: f64 = 3.27;

/// Default cap on exhaustive binary verification; 2^22 vectors stay cheap.
pub const DEFAULT_VERIFY_CAP: usize = 22;

/// One comparator: puts min(values) on `lo` and max on `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Comparator {
    pub lo: usize,
    pub hi: usize,
}

impl Comparator {
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo < hi);
        Comparator { lo, hi }
    }
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    wires: usize,
    layers: Vec<Vec<(usize, usize)>>,
}

/// A layered comparator network on `wires` wires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct SortingNetwork {
    wires: usize,
    layers: Vec<Vec<Comparator>>,
}

impl TryFrom<RawNetwork> for SortingNetwork {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        let layers = raw
            .layers
            .into_iter()
            .map(|layer| layer.into_iter().map(|(lo, hi)| Comparator { lo, hi }).collect())
            .collect();
        SortingNetwork::new(raw.wires, layers)
    }
}

impl From<SortingNetwork> for RawNetwork {
    fn from(net: SortingNetwork) -> Self {
        RawNetwork {
            wires: net.wires,
            layers: net
                .layers
                .iter()
                .map(|layer| layer.iter().map(|c| (c.lo, c.hi)).collect())
                .collect(),
        }
    }
}

impl SortingNetwork {
    /// Builds a network, rejecting out-of-range wires and layers that touch
    /// a wire twice.
    pub fn new(wires: usize, layers: Vec<Vec<Comparator>>) -> Result<Self> {
        if wires == 0 {
            return Err(Error::InvalidArgument("network needs at least one wire".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        let mut touched = vec![false; wires];
        for layer in &layers {
            touched.iter_mut().for_each(|t| *t = false);
            for c in layer {
                if c.lo >= c.hi {
                    return Err(Error::InvalidArgument(format!(
                        "comparator ({}, {}) is not ordered",
                        c.lo, c.hi
                    )));
                }
                if c.hi >= wires {
                    return Err(Error::InvalidArgument(format!(
                        "comparator ({}, {}) exceeds {} wires",
                        c.lo, c.hi, wires
                    )));
                }
                for w in [c.lo, c.hi] {
                    if touched[w] {
                        return Err(Error::InvalidArgument(format!(
                            "wire {w} is connected to two comparators in one layer"
                        )));
                    }
                    touched[w] = true;
                }
            }
        }
        Ok(SortingNetwork { wires, layers })
    }

    pub fn wires(&self) -> usize {
        self.wires
    }

    pub fn layers(&self) -> &[Vec<Comparator>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn comparator_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Runs the comparators over a copy of `values`.
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.wires {
            return Err(Error::LengthMismatch { expected: self.wires, actual: values.len() });
        }
        let mut v = values.to_vec();
        self.apply_in_place(&mut v);
        Ok(v)
    }

    /// Applies the whole network `times` times in sequence.
    pub fn apply_repeated(&self, values: &[f64], times: usize) -> Result<Vec<f64>> {
        if values.len() != self.wires {
            return Err(Error::LengthMismatch { expected: self.wires, actual: values.len() });
        }
        let mut v = values.to_vec();
        for _ in 0..times {
            self.apply_in_place(&mut v);
        }
        Ok(v)
    }

    fn apply_in_place(&self, v: &mut [f64]) {
        for layer in &self.layers {
            for c in layer {
                if v[c.lo] > v[c.hi] {
                    v.swap(c.lo, c.hi);
                }
            }
        }
    }

    /// One pass over a binary vector packed as bits (bit w = value on wire w).
    fn apply_binary(&self, mut m: u32) -> u32 {
        for layer in &self.layers {
            for c in layer {
                let a = (m >> c.lo) & 1;
                let b = (m >> c.hi) & 1;
                // min = a & b on the low wire, max = a | b on the high wire
                m = (m & !(1 << c.lo) & !(1 << c.hi)) | ((a & b) << c.lo) | ((a | b) << c.hi);
            }
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Hardcoded minimal networks for 2..=4 wires (smallest size and depth).
pub fn make_optimal_small(x: usize) -> Result<SortingNetwork> {
    let layers: Vec<Vec<(usize, usize)>> = match x {
        2 => vec![vec![(0, 1)]],
        3 => vec![vec![(0, 1)], vec![(1, 2)], vec![(0, 1)]],
        4 => vec![vec![(0, 2), (1, 3)], vec![(0, 1), (2, 3)], vec![(1, 2)]],
        _ => return Err(Error::UnsupportedSize { wires: x }),
    };
    let layers = layers
        .into_iter()
        .map(|l| l.into_iter().map(|(lo, hi)| Comparator::new(lo, hi)).collect())
        .collect();
    SortingNetwork::new(x, layers)
}

/// Odd-even mergesort on any width, O(log²x) depth.
///
/// The construction runs on the next power of two; comparators touching the
/// phantom high wires are dropped, which is sound because a missing wire
/// behaves like a +inf sentinel that would never move.
pub fn make_merge_network(x: usize) -> Result<SortingNetwork> {
    if x < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 wires, got {x}")));
    }
    let n = x.next_power_of_two();
    let mut layers: Vec<Vec<Comparator>> = Vec::new();
    let mut p = 1;
    while p < n {
        let mut k = p;
        loop {
            let mut layer = Vec::new();
            let mut j = k % p;
            while j + k < n {
                for i in 0..k.min(n - j - k) {
                    if (i + j) / (2 * p) == (i + j + k) / (2 * p) {
                        let (lo, hi) = (i + j, i + j + k);
                        if hi < x {
                            layer.push(Comparator::new(lo, hi));
                        }
                    }
                }
                j += 2 * k;
            }
            if !layer.is_empty() {
                layers.push(layer);
            }
            if k == 1 {
                break;
            }
            k /= 2;
        }
        p *= 2;
    }
    SortingNetwork::new(x, layers)
}

/// The 2-layer alternating-pairs network: (0,1),(2,3),... then (1,2),(3,4),...
///
/// One application is not a sorter for x > 2; x applications always are.
pub fn make_brick_network(x: usize) -> Result<SortingNetwork> {
    if x < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 wires, got {x}")));
    }
    let even: Vec<Comparator> = (0..x / 2).map(|i| Comparator::new(2 * i, 2 * i + 1)).collect();
    let odd: Vec<Comparator> =
        (0..(x - 1) / 2).map(|i| Comparator::new(2 * i + 1, 2 * i + 2)).collect();
    SortingNetwork::new(x, vec![even, odd])
}

/// Outcome of a sorting check over binary or random vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub vectors_tested: u64,
    pub applications: usize,
    /// True when the check sampled random vectors instead of enumerating
    /// all binary ones, i.e. a pass is strong evidence, not proof.
    pub probabilistic: bool,
    pub first_failure: Option<Vec<f64>>,
}

/// Exhaustive binary check of the sorting property (single application).
///
/// Sound by the zero-one principle: a comparator network sorts every input
/// iff it sorts every 0/1 input.
pub fn verify_zero_one(net: &SortingNetwork, cap: usize) -> Result<VerificationReport> {
    verify_zero_one_repeated(net, 1, cap)
}

/// Exhaustive binary check after `applications` passes of the network.
///
/// Concatenating a comparator network with itself is again a comparator
/// network, so the zero-one principle covers repeated application too.
pub fn verify_zero_one_repeated(
    net: &SortingNetwork,
    applications: usize,
    cap: usize,
) -> Result<VerificationReport> {
    let x = net.wires();
    if x > cap {
        return Err(Error::TooManyWires { wires: x, cap });
    }
    let total: u32 = 1 << x;
    let first_fail = (0..total)
        .into_par_iter()
        .filter(|&m| {
            let mut out = m;
            for _ in 0..applications {
                out = net.apply_binary(out);
            }
            !binary_sorted(out, x)
        })
        .min();
    Ok(VerificationReport {
        pass: first_fail.is_none(),
        vectors_tested: u64::from(total),
        applications,
        probabilistic: false,
        first_failure: first_fail.map(|m| {
            (0..x).map(|w| f64::from((m >> w) & 1)).collect()
        }),
    })
}

/// Ascending iff the set bits occupy the top wire indices.
fn binary_sorted(m: u32, x: usize) -> bool {
    let k = m.count_ones() as usize;
    m == (((1u32 << k) - 1) << (x - k)) & (if x == 32 { u32::MAX } else { (1 << x) - 1 })
}

/// Verifies sorting, exhaustively when the width fits under `cap` and with
/// 100,000 random vectors (flagged probabilistic) otherwise.
pub fn verify_sorts(
    net: &SortingNetwork,
    applications: usize,
    cap: usize,
    seed: u64,
) -> VerificationReport {
    if net.wires() <= cap {
        return verify_zero_one_repeated(net, applications, cap).expect("within cap");
    }
    let samples = 100_000u64;
    let x = net.wires();
    let failure = (0..samples).into_par_iter().find_map_first(|i| {
        let mut stream = Stream::new(seed, i);
        let v: Vec<f64> = (0..x).map(|_| stream.unit_f64()).collect();
        let got = net.apply_repeated(&v, applications).expect("length matches");
        let mut want = v.clone();
        want.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if got != want {
            Some(v)
        } else {
            None
        }
    });
    VerificationReport {
        pass: failure.is_none(),
        vectors_tested: samples,
        applications,
        probabilistic: true,
        first_failure: failure,
    }
}

/// Depth lower bounds for sorting x values, and the depth assumed by the
/// parameter analytics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBound {
    /// log2(x): comparisons needed to tell x! orders apart, per layer gain.
    pub info_theoretic: f64,
    /// 3.27·log2(x), the sharper known lower bound for comparator networks.
    pub kahale: f64,
    /// ceil(log2 x): the optimistic depth the closed-form estimates assume.
    pub chosen_depth: usize,
}

pub fn depth_bounds(x: usize) -> Result<DepthBound> {
    if x < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 values, got {x}")));
    }
    let info = (x as f64).log2();
    Ok(DepthBound { info_theoretic: info, kahale: KAHALE_C * info, chosen_depth: ceil_log2(x) })
}

/// Smallest d with 2^d >= x.
pub fn ceil_log2(x: usize) -> usize {
    debug_assert!(x >= 1);
    (usize::BITS - (x - 1).leading_zeros()) as usize
}
