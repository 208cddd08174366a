//! Encodes an n×n binary patch as a single real in [0,1).
//!
//! The kernel weight for pixel i (row-major, starting at 1) is 2^-i, so the
//! code is 0.b1 b2 b3 ... in binary. Internally a code is the n² pixel bits
//! packed into an integer with b1 as the most significant bit; the float is
//! only a view of that integer, value = pack / 2^(n²). This makes
//! round-trip behaviour a statement about integers, independent of platform
//! rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported patch side; n² must fit the 128-bit pack.
pub const MAX_SIDE: usize = 11;

/// Proving injectivity needs a pass over all 2^(n²) patches; bounded here.
pub const INJECTIVITY_ENUMERATION_CAP: usize = 24;

/// An n×n grid of binary pixels, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPatch", into = "RawPatch")]
pub struct Patch {
    side: usize,
    bits: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct RawPatch {
    side: usize,
    bits: String,
}

impl TryFrom<RawPatch> for Patch {
    type Error = Error;

    fn try_from(raw: RawPatch) -> Result<Self> {
        let bits: Vec<u8> = raw
            .bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::NonBinaryPixel { value: other as u8 }),
            })
            .collect::<Result<_>>()?;
        Patch::new(raw.side, bits)
    }
}

impl From<Patch> for RawPatch {
    fn from(p: Patch) -> Self {
        RawPatch { side: p.side, bits: p.bit_string() }
    }
}

impl Patch {
    pub fn new(side: usize, bits: Vec<u8>) -> Result<Self> {
        if side == 0 || side > MAX_SIDE {
            return Err(Error::PatchTooLarge { side, max: MAX_SIDE });
        }
        if bits.len() != side * side {
            return Err(Error::InvalidArgument(format!(
                "{} pixels given for a {side}x{side} patch",
                bits.len()
            )));
        }
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::NonBinaryPixel { value: bad });
        }
        Ok(Patch { side, bits })
    }

    /// Rebuilds a patch from its packed bits (b1 = most significant).
    pub fn from_pack(side: usize, pack: u128) -> Result<Self> {
        if side == 0 || side > MAX_SIDE {
            return Err(Error::PatchTooLarge { side, max: MAX_SIDE });
        }
        let n2 = side * side;
        if n2 < 128 && pack >> n2 != 0 {
            return Err(Error::InvalidArgument(format!("pack has more than {n2} bits")));
        }
        let bits = (0..n2).map(|i| ((pack >> (n2 - 1 - i)) & 1) as u8).collect();
        Ok(Patch { side, bits })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bit(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.side + col]
    }

    /// The pixels as an integer, top-left pixel in the most significant bit.
    pub fn pack(&self) -> u128 {
        self.bits.iter().fold(0u128, |acc, &b| (acc << 1) | u128::from(b))
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| char::from(b'0' + b)).collect()
    }

    /// Parses an ASCII grid: one row per line, characters 0/1, blank lines
    /// and spaces ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Vec<u8>> = text
            .lines()
            .map(|l| {
                l.chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        other => Err(Error::NonBinaryPixel { value: other as u8 }),
                    })
                    .collect::<Result<Vec<u8>>>()
            })
            .filter(|r| !matches!(r, Ok(v) if v.is_empty()))
            .collect::<Result<_>>()?;
        let side = rows.len();
        if rows.iter().any(|r| r.len() != side) {
            return Err(Error::InvalidArgument("patch grid is not square".into()));
        }
        Patch::new(side, rows.into_iter().flatten().collect())
    }

    pub fn to_grid_string(&self) -> String {
        self.bits
            .chunks(self.side)
            .map(|row| row.iter().map(|&b| char::from(b'0' + b)).collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// The float budget the encoder is allowed to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionModel {
    /// No truncation; the pack keeps all n² bits.
    Exact,
    /// Only the top `mantissa bits` of the code survive, emulating a float
    /// type with that many fraction bits.
    Mantissa(u32),
}

impl PrecisionModel {
    pub fn validate(self) -> Result<Self> {
        if let PrecisionModel::Mantissa(0) = self {
            return Err(Error::InvalidMantissa);
        }
        Ok(self)
    }

    /// Bits available for an n²-bit patch; `None` means unlimited.
    pub fn mantissa_bits(self) -> Option<u32> {
        match self {
            PrecisionModel::Exact => None,
            PrecisionModel::Mantissa(m) => Some(m),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.eq_ignore_ascii_case("exact") {
            return Ok(PrecisionModel::Exact);
        }
        let m: u32 = text
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad precision {text:?}")))?;
        PrecisionModel::Mantissa(m).validate()
    }
}

impl std::fmt::Display for PrecisionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrecisionModel::Exact => write!(f, "exact"),
            PrecisionModel::Mantissa(m) => write!(f, "{m}"),
        }
    }
}

/// An encoded patch: the surviving bits plus the context to invert them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchCode {
    pack: u128,
    side: usize,
    precision: PrecisionModel,
}

impl PatchCode {
    pub fn pack(&self) -> u128 {
        self.pack
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn precision(&self) -> PrecisionModel {
        self.precision
    }

    /// The code as a float: pack / 2^(n²). Exact whenever the surviving
    /// bits fit a double's mantissa (n² ≤ 53, or mantissa budget ≤ 53).
    pub fn value(&self) -> f64 {
        let n2 = (self.side * self.side) as i32;
        self.pack as f64 * 2f64.powi(-n2)
    }
}

/// Packs the pixels and truncates to the precision budget. Total function:
/// oversized patches lose their trailing bits, they do not fail.
pub fn encode(patch: &Patch, precision: PrecisionModel) -> Result<PatchCode> {
    precision.validate()?;
    let n2 = patch.side() * patch.side();
    let mut pack = patch.pack();
    if let Some(m) = precision.mantissa_bits() {
        if n2 as u32 > m {
            let drop = n2 as u32 - m;
            pack = pack >> drop << drop;
        }
    }
    Ok(PatchCode { pack, side: patch.side(), precision })
}

/// A decoded patch; `lossy` reports whether the precision budget was too
/// small to guarantee the round-trip (truncated pixels come back as 0).
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPatch {
    pub patch: Patch,
    pub lossy: bool,
}

pub fn decode(code: &PatchCode) -> DecodedPatch {
    let n2 = code.side * code.side;
    let lossy = code
        .precision
        .mantissa_bits()
        .is_some_and(|m| n2 as u32 > m);
    let patch = Patch::from_pack(code.side, code.pack).expect("pack came from a valid patch");
    DecodedPatch { patch, lossy }
}

/// The kernel as an explicit weight vector: w_i = 2^-i for i = 1..=n².
pub fn kernel_weights(side: usize) -> Result<Vec<f64>> {
    if side == 0 || side > MAX_SIDE {
        return Err(Error::PatchTooLarge { side, max: MAX_SIDE });
    }
    Ok((1..=(side * side) as i32).map(|i| 2f64.powi(-i)).collect())
}

/// Result of the injectivity check over every patch of one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub injective: bool,
    pub patches_checked: u64,
    /// Two distinct patches with equal codes, when any exist.
    pub collision: Option<(Patch, Patch)>,
}

/// Checks whether encoding is injective over all 2^(n²) patches.
///
/// Truncation is monotone in the pack, so any collision already occurs at
/// two consecutive packs; scanning adjacent pairs in increasing order is
/// therefore complete. When the budget is smaller than n² a collision is
/// guaranteed and the scan stops at the first witness, so no enumeration
/// cap applies; proving injectivity needs the full pass and is capped.
pub fn codes_injective(side: usize, precision: PrecisionModel) -> Result<InjectivityReport> {
    precision.validate()?;
    if side == 0 || side > MAX_SIDE {
        return Err(Error::PatchTooLarge { side, max: MAX_SIDE });
    }
    let n2 = side * side;
    let survives = precision.mantissa_bits().is_none_or(|m| n2 as u32 <= m);
    if survives {
        if n2 > INJECTIVITY_ENUMERATION_CAP {
            return Err(Error::EnumerationTooLarge { bits: n2, cap: INJECTIVITY_ENUMERATION_CAP });
        }
        let truncate = |pack: u128| encode(&Patch::from_pack(side, pack)?, precision).map(|c| c.pack);
        let mut prev = truncate(0)?;
        for pack in 1..(1u128 << n2) {
            let here = truncate(pack)?;
            if here == prev {
                return Ok(InjectivityReport {
                    injective: false,
                    patches_checked: pack as u64 + 1,
                    collision: Some((
                        Patch::from_pack(side, pack - 1)?,
                        Patch::from_pack(side, pack)?,
                    )),
                });
            }
            prev = here;
        }
        Ok(InjectivityReport { injective: true, patches_checked: 1 << n2, collision: None })
    } else {
        // more patches than codes: walk until the guaranteed first witness
        let mut prev = encode(&Patch::from_pack(side, 0)?, precision)?.pack;
        for pack in 1..(1u128 << n2.min(127)) {
            let here = encode(&Patch::from_pack(side, pack)?, precision)?.pack;
            if here == prev {
                return Ok(InjectivityReport {
                    injective: false,
                    patches_checked: pack as u64 + 1,
                    collision: Some((
                        Patch::from_pack(side, pack - 1)?,
                        Patch::from_pack(side, pack)?,
                    )),
                });
            }
            prev = here;
        }
        unreachable!("pigeonhole guarantees a collision when codes are fewer than patches")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn patch_of(side: usize, bits: &[u8]) -> Patch {
        Patch::new(side, bits.to_vec()).unwrap()
    }

    #[test]
    fn all_ones_three_by_three_encodes_to_511_512ths() {
        let p = patch_of(3, &[1; 9]);
        let code = encode(&p, PrecisionModel::Exact).unwrap();
        assert_eq!(code.value(), 511.0 / 512.0);
        assert_eq!(code.value(), 0.998046875);
    }

    #[test]
    fn all_zeros_encodes_to_zero() {
        for side in [1, 3, 5] {
            let p = patch_of(side, &vec![0; side * side]);
            assert_eq!(encode(&p, PrecisionModel::Exact).unwrap().value(), 0.0);
        }
    }

    #[test]
    fn first_pixel_carries_one_half() {
        let mut bits = vec![0u8; 9];
        bits[0] = 1;
        let code = encode(&patch_of(3, &bits), PrecisionModel::Exact).unwrap();
        assert_eq!(code.value(), 0.5);
    }

    #[test]
    fn encode_matches_kernel_dot_product() {
        // partial sums of distinct powers of two are exact up to 53 bits
        for side in 1..=7usize {
            let n2 = side * side;
            let weights = kernel_weights(side).unwrap();
            let mut stream = crate::rng::Stream::new(9, side as u64);
            for _ in 0..50 {
                let bits: Vec<u8> = (0..n2).map(|_| u8::from(stream.bit())).collect();
                let p = patch_of(side, &bits);
                let dot: f64 =
                    bits.iter().zip(&weights).map(|(&b, &w)| f64::from(b) * w).sum();
                assert_eq!(encode(&p, PrecisionModel::Exact).unwrap().value(), dot);
            }
        }
    }

    #[test]
    fn exact_round_trip_all_two_by_two() {
        for pack in 0..16u128 {
            let p = Patch::from_pack(2, pack).unwrap();
            let decoded = decode(&encode(&p, PrecisionModel::Exact).unwrap());
            assert_eq!(decoded.patch, p);
            assert!(!decoded.lossy);
        }
    }

    #[test]
    fn four_by_four_round_trips_at_24_bits() {
        let precision = PrecisionModel::Mantissa(24);
        for pack in 0..(1u128 << 16) {
            let p = Patch::from_pack(4, pack).unwrap();
            let decoded = decode(&encode(&p, precision).unwrap());
            assert_eq!(decoded.patch, p);
            assert!(!decoded.lossy);
        }
    }

    #[test]
    fn five_by_five_at_24_bits_loses_the_last_pixel() {
        let mut bits = vec![0u8; 25];
        bits[24] = 1;
        let p = patch_of(5, &bits);
        let decoded = decode(&encode(&p, PrecisionModel::Mantissa(24)).unwrap());
        assert!(decoded.lossy);
        assert_eq!(decoded.patch.bits()[24], 0);
        assert_ne!(decoded.patch, p);
    }

    #[test]
    fn codes_stay_in_unit_interval() {
        let mut stream = crate::rng::Stream::new(10, 0);
        for side in 1..=7usize {
            for _ in 0..100 {
                let bits: Vec<u8> =
                    (0..side * side).map(|_| u8::from(stream.bit())).collect();
                let v = encode(&patch_of(side, &bits), PrecisionModel::Exact).unwrap().value();
                assert!((0.0..1.0).contains(&v));
            }
        }
    }

    #[test]
    fn injective_for_small_sides_exact() {
        let r = codes_injective(2, PrecisionModel::Exact).unwrap();
        assert!(r.injective);
        assert_eq!(r.patches_checked, 16);
    }

    #[test]
    fn injective_for_four_by_four_at_24_bits() {
        let r = codes_injective(4, PrecisionModel::Mantissa(24)).unwrap();
        assert!(r.injective);
        assert_eq!(r.patches_checked, 65_536);
    }

    #[test]
    fn collision_witness_for_five_by_five_at_24_bits() {
        let r = codes_injective(5, PrecisionModel::Mantissa(24)).unwrap();
        assert!(!r.injective);
        let (a, b) = r.collision.expect("witness");
        assert_ne!(a, b);
        let ca = encode(&a, PrecisionModel::Mantissa(24)).unwrap();
        let cb = encode(&b, PrecisionModel::Mantissa(24)).unwrap();
        assert_eq!(ca.pack(), cb.pack());
        assert_eq!(ca.value(), cb.value());
    }

    #[test]
    fn injectivity_proof_is_capped() {
        assert!(matches!(
            codes_injective(6, PrecisionModel::Exact),
            Err(Error::EnumerationTooLarge { bits: 36, cap: 24 })
        ));
        // a 6x6 collision hunt at a small budget still runs: witness is early
        let r = codes_injective(6, PrecisionModel::Mantissa(24)).unwrap();
        assert!(!r.injective);
    }

    #[test]
    fn grid_parse_and_print_round_trip() {
        let text = "010\n101\n010";
        let p = Patch::parse(text).unwrap();
        assert_eq!(p.to_grid_string(), text);
        assert_eq!(p.bit(0, 1), 1);
        assert_eq!(p.bit(1, 1), 0);
        assert!(Patch::parse("01\n0").is_err());
        assert!(Patch::parse("0x\n01").is_err());
    }

    #[test]
    fn rejects_unsupported_shapes() {
        assert!(matches!(Patch::new(12, vec![0; 144]), Err(Error::PatchTooLarge { .. })));
        assert!(Patch::new(2, vec![0, 1, 2, 0]).is_err());
        assert!(Patch::new(2, vec![0, 1]).is_err());
        assert!(PrecisionModel::Mantissa(0).validate().is_err());
    }

    #[test]
    fn precision_parsing() {
        assert_eq!(PrecisionModel::parse("exact").unwrap(), PrecisionModel::Exact);
        assert_eq!(PrecisionModel::parse("24").unwrap(), PrecisionModel::Mantissa(24));
        assert!(PrecisionModel::parse("0").is_err());
        assert!(PrecisionModel::parse("wat").is_err());
    }

    #[test]
    fn patch_serde_uses_bit_strings() {
        let p = patch_of(2, &[1, 0, 0, 1]);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"1001\""));
        let back: Patch = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn exact_codes_separate_patches_iff_bits_differ(
            a in proptest::collection::vec(0u8..=1, 16),
            b in proptest::collection::vec(0u8..=1, 16),
        ) {
            let pa = patch_of(4, &a);
            let pb = patch_of(4, &b);
            let ca = encode(&pa, PrecisionModel::Exact).unwrap();
            let cb = encode(&pb, PrecisionModel::Exact).unwrap();
            prop_assert_eq!(ca.value() == cb.value(), a == b);
        }

        #[test]
        fn exact_round_trip_random_sides(
            side in 1usize..=7,
            seed in 0u64..1000,
        ) {
            let mut stream = crate::rng::Stream::new(seed, 0);
            let bits: Vec<u8> = (0..side * side).map(|_| u8::from(stream.bit())).collect();
            let p = patch_of(side, &bits);
            let decoded = decode(&encode(&p, PrecisionModel::Exact).unwrap());
            prop_assert_eq!(decoded.patch, p);
            prop_assert!(!decoded.lossy);
        }

        #[test]
        fn mantissa_round_trip_iff_bits_fit(
            side in 1usize..=6,
            mantissa in 1u32..=30,
            seed in 0u64..1000,
        ) {
            let mut stream = crate::rng::Stream::new(seed, 1);
            let bits: Vec<u8> = (0..side * side).map(|_| u8::from(stream.bit())).collect();
            let p = patch_of(side, &bits);
            let decoded = decode(&encode(&p, PrecisionModel::Mantissa(mantissa)).unwrap());
            let fits = (side * side) as u32 <= mantissa;
            prop_assert_eq!(decoded.lossy, !fits);
            if fits {
                prop_assert_eq!(decoded.patch, p);
            }
        }
    }
}
