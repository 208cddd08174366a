//! Symbol-set growth for the same-pattern task.
//!
//! A patch of n² binary pixels needs 2^(n²) encoder symbols. Each merge
//! level replaces an unordered pair of symbols by one new symbol, so with
//! s = |S_{i-1}| the next alphabet has s(s+1)/2 entries (s choose 2
//! unordered distinct pairs plus s equal pairs, equivalently s² minus the
//! double-counted half). The cardinality squares per level, hence all
//! arithmetic runs in log-space on L_i = log2 |S_i|:
//!
//!   L_i = 2 L_{i-1} - 1 + log2(1 + 2^-L_{i-1})
//!
//! The compression factor C_i = 2 L_{i-1} / L_i tends to 1 from above,
//! and C_i - 1 is the locality estimate at the last computed level. Exact
//! big-integer counts are carried alongside for the first levels as a
//! cross-check; they are never the primary representation because for
//! n = 8 the count at level 10 already needs about 65,000 bits.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levels are cheap to compute but the receptive field is 2^i; past a few
/// hundred doublings the trace is pure asymptotics.
pub const MAX_LEVELS: usize = 512;

/// Exact counts are tracked until they exceed this many bits.
const MAX_EXACT_BITS: u64 = 4096;

/// One level of the alphabet hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityLevel {
    pub level: usize,
    /// L_i, the alphabet size in bits.
    pub log2_cardinality: f64,
    /// C_i = 2 L_{i-1} / L_i; absent at level 0 which has no predecessor.
    pub compression_factor: Option<f64>,
    /// Pixels covered by one symbol, 2^i patches expressed as a real
    /// because it outgrows any integer type within the level budget.
    pub receptive_field_size: f64,
    /// log2 of the exact big-integer count, while still tracked.
    pub exact_log2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityTrace {
    pub levels: Vec<LocalityLevel>,
    /// C at the last computed level minus 1; no extrapolation beyond the
    /// computed horizon.
    pub locality_estimate: f64,
}

impl LocalityTrace {
    pub fn last(&self) -> &LocalityLevel {
        self.levels.last().expect("a trace has at least level 0")
    }
}

/// The limit shape of the compression factor once the +1 inside the pair
/// count stops mattering: C ≈ 2L / (2L - 1).
pub fn asymptotic_compression(log2_cardinality: f64) -> f64 {
    2.0 * log2_cardinality / (2.0 * log2_cardinality - 1.0)
}

fn log2_biguint(s: &BigUint) -> f64 {
    let bits = s.bits();
    let shift = bits.saturating_sub(53);
    let top = (s >> shift).to_f64().expect("53-bit value fits f64");
    top.log2() + shift as f64
}

/// Runs the log-space recurrence from an arbitrary starting alphabet of
/// `l0` bits. Exact cross-check counts are seeded only when `l0` is a
/// whole number of bits.
pub fn trace_from_bits(l0: f64, levels: usize) -> Result<LocalityTrace> {
    if !l0.is_finite() || l0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "starting alphabet of {l0} bits has no compression factor"
        )));
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    if levels > MAX_LEVELS {
        return Err(Error::InvalidArgument(format!(
            "{levels} levels requested, cap is {MAX_LEVELS}"
        )));
    }

    let mut exact: Option<BigUint> = (l0.fract() == 0.0 && l0 <= MAX_EXACT_BITS as f64)
        .then(|| BigUint::from(1u32) << l0 as usize);
    let mut out = Vec::with_capacity(levels + 1);
    out.push(LocalityLevel {
        level: 0,
        log2_cardinality: l0,
        compression_factor: None,
        receptive_field_size: 1.0,
        exact_log2: exact.as_ref().map(log2_biguint),
    });

    let mut l = l0;
    for i in 1..=levels {
        // log2(s + 1) = L + log2(1 + 2^-L); the correction underflows to
        // zero once L passes the exponent range, exactly as it should
        let correction = f64::exp2(-l).ln_1p() / std::f64::consts::LN_2;
        let next = 2.0 * l - 1.0 + correction;
        exact = exact.and_then(|s| {
            let grown: BigUint = (&s * (&s + 1u32)) >> 1u32;
            (grown.bits() <= MAX_EXACT_BITS).then_some(grown)
        });
        out.push(LocalityLevel {
            level: i,
            log2_cardinality: next,
            compression_factor: Some(2.0 * l / next),
            receptive_field_size: f64::exp2(i as f64),
            exact_log2: exact.as_ref().map(log2_biguint),
        });
        l = next;
    }

    let estimate = out.last().unwrap().compression_factor.unwrap() - 1.0;
    Ok(LocalityTrace { levels: out, locality_estimate: estimate })
}

/// Traces the hierarchy for an n×n-pixel patch alphabet: L_0 = n².
pub fn trace_identity_locality(n: usize, levels: usize) -> Result<LocalityTrace> {
    if n == 0 {
        return Err(Error::InvalidArgument("patch side must be at least 1".into()));
    }
    trace_from_bits((n * n) as f64, levels)
}

/// Comparison of the traced factors against their closed asymptotic form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    /// Trace from a binary alphabet (L_0 = 1 bit).
    pub trace: LocalityTrace,
    /// Per level i ≥ 1: |C_i - 2 L_{i-1} / (2 L_{i-1} - 1)|.
    pub asymptote_gaps: Vec<f64>,
    /// (s + 1) / (2s + 1) on the levels where s still fits 64 bits.
    pub pair_ratios: Vec<f64>,
    /// Twice the last pair ratio minus 1; the exact-arithmetic route to
    /// the limit locality of 0.
    pub locality_limit: f64,
}

/// Traces from a two-symbol alphabet and checks the limit identities: the
/// compression factor collapses onto 2L/(2L-1) and the pair ratio
/// (s+1)/(2s+1) falls to 1/2, so the locality limit is 0.
pub fn locality_closed_form_check(levels: usize) -> Result<ClosedFormReport> {
    if levels < 2 {
        return Err(Error::InvalidArgument("need at least two levels".into()));
    }
    let trace = trace_from_bits(1.0, levels)?;

    let asymptote_gaps = trace
        .levels
        .windows(2)
        .map(|w| {
            let c = w[1].compression_factor.unwrap();
            (c - asymptotic_compression(w[0].log2_cardinality)).abs()
        })
        .collect();

    let mut pair_ratios = Vec::new();
    let mut s: u128 = 2;
    loop {
        pair_ratios.push((s + 1) as f64 / (2 * s + 1) as f64);
        if pair_ratios.len() >= levels || s > u64::MAX as u128 {
            break;
        }
        s = s * (s + 1) / 2;
    }
    let locality_limit = 2.0 * pair_ratios.last().unwrap() - 1.0;

    Ok(ClosedFormReport { trace, asymptote_gaps, pair_ratios, locality_limit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_pixel_alphabet_first_level() {
        let trace = trace_identity_locality(1, 5).unwrap();
        assert_eq!(trace.levels[0].log2_cardinality, 1.0);
        assert_eq!(trace.levels[0].compression_factor, None);
        // two symbols pair up into 3 = 4 - (2 choose 2 doubles removed)
        assert_abs_diff_eq!(trace.levels[1].log2_cardinality, 3f64.log2(), epsilon = 1e-15);
        let c1 = trace.levels[1].compression_factor.unwrap();
        assert_abs_diff_eq!(c1, 2.0 / 3f64.log2(), epsilon = 1e-15);
        assert_abs_diff_eq!(c1, 1.26186, epsilon = 1e-5);
    }

    #[test]
    fn factors_decrease_toward_one() {
        let trace = trace_identity_locality(3, 30).unwrap();
        let factors: Vec<f64> =
            trace.levels.iter().filter_map(|l| l.compression_factor).collect();
        assert_eq!(factors.len(), 30);
        for pair in factors.windows(2) {
            assert!(pair[1] < pair[0]);
        }
        for &c in &factors {
            assert!(c > 1.0);
        }
        assert!(trace.locality_estimate > 0.0);
        assert!(trace.locality_estimate < 1e-3);
    }

    #[test]
    fn estimate_tightens_once_alphabet_is_large() {
        let trace = trace_identity_locality(3, 40).unwrap();
        for w in trace.levels.windows(2) {
            if w[0].log2_cardinality > 500.0 {
                assert!(w[1].compression_factor.unwrap() - 1.0 < 1e-3);
            }
        }
    }

    #[test]
    fn factor_bounded_by_inverse_bits() {
        for n in [2usize, 3, 5, 8] {
            let trace = trace_identity_locality(n, 25).unwrap();
            for w in trace.levels.windows(2) {
                let l_prev = w[0].log2_cardinality;
                if l_prev >= 8.0 {
                    let c = w[1].compression_factor.unwrap();
                    assert!(c - 1.0 < 1.0 / (2.0 * l_prev - 1.0) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn log_space_matches_exact_counts() {
        for n in [1usize, 2, 3, 4] {
            let trace = trace_identity_locality(n, 20).unwrap();
            let mut checked64 = 0;
            for level in &trace.levels {
                let Some(exact) = level.exact_log2 else { continue };
                if exact <= 64.0 {
                    // s fits a machine word: demand near-exact agreement
                    assert_abs_diff_eq!(level.log2_cardinality, exact, epsilon = 1e-12);
                    checked64 += 1;
                } else {
                    assert_abs_diff_eq!(level.log2_cardinality, exact, epsilon = 1e-9);
                }
            }
            assert!(checked64 >= 3);
        }
    }

    #[test]
    fn exact_tracking_stops_at_the_bit_cap() {
        let trace = trace_identity_locality(8, 12).unwrap();
        assert!(trace.levels[0].exact_log2.is_some());
        assert!(trace.last().exact_log2.is_none());
        // levels double the bit count; 64-bit start passes 4096 after 6
        let tracked = trace.levels.iter().filter(|l| l.exact_log2.is_some()).count();
        assert_eq!(tracked, 7);
    }

    #[test]
    fn pair_count_identity() {
        // s² - (s choose 2) = s(s+1)/2
        for s in 1u128..=1000 {
            assert_eq!(s * s - s * (s - 1) / 2, s * (s + 1) / 2);
        }
        let s = BigUint::from(u64::MAX);
        let lhs = &s * &s - (&s * (&s - 1u32)) / 2u32;
        let rhs = (&s * (&s + 1u32)) / 2u32;
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn sixty_four_bit_alphabet_reaches_sixty_five_thousand_bits() {
        let trace = trace_identity_locality(8, 10).unwrap();
        let l10 = trace.last().log2_cardinality;
        assert!((60_000.0..70_000.0).contains(&l10), "L_10 = {l10}");
    }

    #[test]
    fn receptive_field_doubles() {
        let trace = trace_identity_locality(3, 10).unwrap();
        for level in &trace.levels {
            assert_eq!(level.receptive_field_size, f64::exp2(level.level as f64));
        }
    }

    #[test]
    fn closed_form_report() {
        let report = locality_closed_form_check(25).unwrap();
        // binary alphabet: (2+1)/(2·2+1) = 3/5
        assert_eq!(report.pair_ratios[0], 0.6);
        // counts stay exactly representable for the first seven levels, so
        // the ratios there decrease strictly; beyond that the +1 falls
        // under float resolution and the ratio saturates at 1/2
        for pair in report.pair_ratios[..7].windows(2) {
            assert!(pair[1] < pair[0]);
        }
        for &r in &report.pair_ratios {
            assert!((0.5 - 1e-15..=0.6).contains(&r));
        }
        assert!(report.locality_limit.abs() < 1e-15);
        let gaps = &report.asymptote_gaps;
        assert_eq!(gaps.len(), 25);
        assert!(gaps.last().unwrap() < &1e-12);
        // the asymptote takes over as soon as the cardinality is large
        for w in gaps.windows(2).skip(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn asymptote_at_one_hundred_bits() {
        assert_eq!(asymptotic_compression(100.0), 200.0 / 199.0);
        let report = locality_closed_form_check(12).unwrap();
        // trace levels whose alphabet is near 100 bits sit on the asymptote
        for w in report.trace.levels.windows(2) {
            let l = w[0].log2_cardinality;
            if (50.0..200.0).contains(&l) {
                let c = w[1].compression_factor.unwrap();
                assert_abs_diff_eq!(c, asymptotic_compression(l), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rejects_degenerate_alphabets() {
        assert!(trace_from_bits(0.0, 5).is_err());
        assert!(trace_from_bits(-2.0, 5).is_err());
        assert!(trace_from_bits(f64::NAN, 5).is_err());
        assert!(trace_from_bits(1.0, 0).is_err());
        assert!(trace_from_bits(1.0, MAX_LEVELS + 1).is_err());
        assert!(trace_identity_locality(0, 5).is_err());
        assert!(locality_closed_form_check(1).is_err());
    }

    #[test]
    fn fractional_start_skips_exact_tracking() {
        let trace = trace_from_bits(1.5, 4).unwrap();
        assert!(trace.levels.iter().all(|l| l.exact_log2.is_none()));
        assert_eq!(trace.levels.len(), 5);
    }
}
