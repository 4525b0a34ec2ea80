//! The DialectFP4 formatbook: sixteen 8-value magnitude sets on a 0.5 grid,
//! arranged as eight pairs that share a maximum magnitude and differ in one
//! large value.

use std::fmt;

use crate::error::{Error, Result};
use crate::fixedpoint::QuarterCode;

pub const NUM_DIALECTS: usize = 16;
pub const NUM_PAIRS: usize = 8;
pub const VALUES_PER_DIALECT: usize = 8;

/// Six smallest FP4 E2M1 magnitudes, in half-units.
pub const BASE_VALUES: [u8; 6] = [0, 1, 2, 3, 4, 6];

/// A magnitude in units of 0.5, in `[0, 15]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfUnit(u8);

impl HalfUnit {
    pub const MAX: HalfUnit = HalfUnit(15);

    pub fn new(v: u8) -> Result<Self> {
        if v > 15 {
            return Err(Error::Domain(format!("half-unit value {v} exceeds 15")));
        }
        Ok(HalfUnit(v))
    }

    #[inline]
    pub(crate) const fn new_unchecked(v: u8) -> Self {
        HalfUnit(v)
    }

    #[inline]
    pub const fn get(self) -> u8 {
        self.0
    }

    /// Magnitude as a real number.
    pub fn to_f64(self) -> f64 {
        f64::from(self.0) * 0.5
    }
}

/// Index of a dialect in the formatbook, `[0, 15]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DialectId(u8);

impl DialectId {
    pub fn new(id: usize) -> Result<Self> {
        if id >= NUM_DIALECTS {
            return Err(Error::Domain(format!("dialect id {id} outside [0, 15]")));
        }
        Ok(DialectId(id as u8))
    }

    #[inline]
    pub(crate) const fn new_unchecked(id: u8) -> Self {
        DialectId(id)
    }

    #[inline]
    pub const fn get(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub const fn pair(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub const fn is_even(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn all() -> impl Iterator<Item = DialectId> {
        (0..NUM_DIALECTS as u8).map(DialectId)
    }
}

impl fmt::Display for DialectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Eight representable magnitudes of one dialect, in half-units.
///
/// Construction does not validate; a set only becomes usable for quantization
/// once it is part of a validated [`Formatbook`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DialectValueSet {
    values: [u8; VALUES_PER_DIALECT],
}

impl DialectValueSet {
    pub const fn new(values: [u8; VALUES_PER_DIALECT]) -> Self {
        DialectValueSet { values }
    }

    #[inline]
    pub fn values(&self) -> &[u8; VALUES_PER_DIALECT] {
        &self.values
    }

    #[inline]
    pub fn value(&self, index: usize) -> HalfUnit {
        HalfUnit(self.values[index])
    }

    #[inline]
    pub fn max(&self) -> HalfUnit {
        HalfUnit(self.values[VALUES_PER_DIALECT - 1])
    }

    pub fn contains(&self, v: u8) -> bool {
        self.values.contains(&v)
    }

    /// Real magnitudes, ascending.
    pub fn to_f64(&self) -> [f64; VALUES_PER_DIALECT] {
        self.values.map(|v| f64::from(v) * 0.5)
    }
}

/// Quarter-code interval `[lo, hi)` where a dialect's unique value beats its
/// pair partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeneficialRange {
    pub lo: u8,
    pub hi: u8,
}

impl BeneficialRange {
    #[inline]
    pub fn contains(&self, q: QuarterCode) -> bool {
        (self.lo..self.hi).contains(&q.get())
    }

    /// Bounds as real scaled magnitudes.
    pub fn to_f64(&self) -> (f64, f64) {
        (f64::from(self.lo) * 0.25, f64::from(self.hi) * 0.25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PairInfo {
    max: u8,
    even_differing: u8,
    odd_differing: u8,
    /// Neighbours of each differing value inside its own dialect.
    even_below: u8,
    even_above: u8,
    odd_below: u8,
    odd_above: u8,
}

impl PairInfo {
    /// Each range is the part of the differing value's own quantization
    /// interval that lies on its side of the midpoint between the two
    /// differing values.
    fn ranges(&self) -> (BeneficialRange, BeneficialRange) {
        let de = self.even_differing;
        let d_o = self.odd_differing;
        (
            BeneficialRange {
                lo: self.even_below.max(d_o) + de,
                hi: de + self.even_above,
            },
            BeneficialRange {
                lo: self.odd_below + d_o,
                hi: d_o + self.odd_above.min(de),
            },
        )
    }
}

fn neighbours(set: &DialectValueSet, v: u8) -> (u8, u8) {
    let i = set.values.iter().position(|&x| x == v).expect("member");
    (set.values[i - 1], set.values[i + 1])
}

/// A validated set of 16 dialects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formatbook {
    dialects: [DialectValueSet; NUM_DIALECTS],
    pairs: [PairInfo; NUM_PAIRS],
}

impl Formatbook {
    /// Validates the table and precomputes per-pair data.
    pub fn new(dialects: [DialectValueSet; NUM_DIALECTS]) -> Result<Self> {
        let violations = validate_formatbook(&dialects);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let pairs = std::array::from_fn(|p| {
            let even = &dialects[2 * p];
            let odd = &dialects[2 * p + 1];
            let even_differing = differing_value(even, odd).expect("validated");
            let odd_differing = differing_value(odd, even).expect("validated");
            let (even_below, even_above) = neighbours(even, even_differing);
            let (odd_below, odd_above) = neighbours(odd, odd_differing);
            PairInfo {
                max: even.max().get(),
                even_differing,
                odd_differing,
                even_below,
                even_above,
                odd_below,
                odd_above,
            }
        });
        Ok(Formatbook { dialects, pairs })
    }

    #[inline]
    pub fn dialect(&self, id: DialectId) -> &DialectValueSet {
        &self.dialects[id.index()]
    }

    pub fn dialects(&self) -> &[DialectValueSet; NUM_DIALECTS] {
        &self.dialects
    }

    /// The value that distinguishes `id` from its pair partner.
    pub fn differing(&self, id: DialectId) -> HalfUnit {
        let p = &self.pairs[id.pair()];
        HalfUnit(if id.is_even() {
            p.even_differing
        } else {
            p.odd_differing
        })
    }

    pub fn pair_max(&self, pair: usize) -> HalfUnit {
        HalfUnit(self.pairs[pair].max)
    }
}

impl Default for Formatbook {
    fn default() -> Self {
        build_default_formatbook()
    }
}

/// Writes the line-oriented config document read by [`load_formatbook`].
impl fmt::Display for Formatbook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# dialect  eight ascending magnitudes in half-units")?;
        for (i, d) in self.dialects.iter().enumerate() {
            write!(f, "{i}")?;
            for v in d.values() {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn differing_value(a: &DialectValueSet, b: &DialectValueSet) -> Option<u8> {
    let mut it = a.values.iter().copied().filter(|&v| !b.contains(v));
    match (it.next(), it.next()) {
        (Some(v), None) => Some(v),
        _ => None,
    }
}

/// Builds the default 16-dialect table.
///
/// Pair `p` has maximum `M = 15 - p`. The even dialect adds `round(10M/13)` and
/// the odd dialect `round(8M/13)` to the FP4 base set. A value that collides
/// with the base set, the maximum or the partner's value is nudged upward
/// (even) or downward (odd) by one half-unit until it is free.
pub fn build_default_formatbook() -> Formatbook {
    let dialects: [DialectValueSet; NUM_DIALECTS] = std::array::from_fn(|i| {
        let max = 15 - (i / 2) as u8;
        let (de, d_o) = default_differing(max);
        let extra = if i % 2 == 0 { de } else { d_o };
        let mut values = [0u8; VALUES_PER_DIALECT];
        values[..6].copy_from_slice(&BASE_VALUES);
        values[6] = extra;
        values[7] = max;
        values.sort_unstable();
        DialectValueSet::new(values)
    });
    Formatbook::new(dialects).expect("default formatbook is valid")
}

fn default_differing(max: u8) -> (u8, u8) {
    // round(max * k / 13) without floats; never an exact tie for max < 13
    let round13 = |k: u32| ((2 * k * u32::from(max) + 13) / 26) as u8;
    let taken = |v: u8, other: Option<u8>| BASE_VALUES.contains(&v) || v == max || Some(v) == other;

    let mut de = round13(10);
    while taken(de, None) {
        de += 1;
        assert!(de < max, "no free even value below max {max}");
    }
    let mut d_o = round13(8);
    while taken(d_o, Some(de)) {
        d_o -= 1;
        assert!(d_o > 0, "no free odd value above zero for max {max}");
    }
    (de, d_o)
}

/// Pair whose shared maximum equals `block_max`.
pub fn pair_index_for_max(block_max: HalfUnit) -> Result<usize> {
    match block_max.get() {
        m @ 8..=15 => Ok(15 - m as usize),
        m => Err(Error::Domain(format!(
            "block max {m} half-units outside [8, 15]"
        ))),
    }
}

/// Beneficial ranges `(even, odd)` of `pair`, in quarter codes.
///
/// Bounds are midpoints between adjacent half-unit values; the midpoint of
/// half-units `a` and `b` is quarter code `a + b`.
pub fn beneficial_ranges(fb: &Formatbook, pair: usize) -> (BeneficialRange, BeneficialRange) {
    fb.pairs[pair].ranges()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    WrongDialectCount(usize),
    FirstNotZero,
    NotAscending,
    ValueTooLarge(u8),
    MaxMismatch { expected: u8, actual: u8 },
    PairIdentical,
    PairDiffersInMoreThanOne,
    EvenNotLarger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    /// Offending dialect; for pair-level violations, the even member.
    pub dialect: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = self.dialect {
            write!(f, "dialect {d}: ")?;
        }
        match self.kind {
            ViolationKind::WrongDialectCount(n) => write!(f, "expected 16 dialects, found {n}"),
            ViolationKind::FirstNotZero => write!(f, "smallest value is not zero"),
            ViolationKind::NotAscending => write!(f, "values not strictly ascending"),
            ViolationKind::ValueTooLarge(v) => write!(f, "value {v} exceeds 15"),
            ViolationKind::MaxMismatch { expected, actual } => {
                write!(f, "max {actual} but its pair requires {expected}")
            }
            ViolationKind::PairIdentical => write!(f, "pair dialects are identical"),
            ViolationKind::PairDiffersInMoreThanOne => {
                write!(f, "pair differs in more than one value")
            }
            ViolationKind::EvenNotLarger => {
                write!(f, "even differing value not larger than odd")
            }
        }
    }
}

/// Every invariant violation of a candidate dialect table, by dialect index.
pub fn validate_formatbook(dialects: &[DialectValueSet]) -> Vec<Violation> {
    let mut out = Vec::new();
    if dialects.len() != NUM_DIALECTS {
        out.push(Violation {
            dialect: None,
            kind: ViolationKind::WrongDialectCount(dialects.len()),
        });
        return out;
    }
    let mut dialect_ok = [true; NUM_DIALECTS];
    for (i, d) in dialects.iter().enumerate() {
        let mut push = |kind| {
            dialect_ok[i] = false;
            out.push(Violation {
                dialect: Some(i),
                kind,
            });
        };
        let v = d.values();
        if v[0] != 0 {
            push(ViolationKind::FirstNotZero);
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            push(ViolationKind::NotAscending);
        }
        if let Some(&big) = v.iter().find(|&&x| x > 15) {
            push(ViolationKind::ValueTooLarge(big));
        }
        let expected = 15 - (i / 2) as u8;
        if v[7] != expected {
            push(ViolationKind::MaxMismatch {
                expected,
                actual: v[7],
            });
        }
    }
    for p in 0..NUM_PAIRS {
        let (e, o) = (2 * p, 2 * p + 1);
        if !(dialect_ok[e] && dialect_ok[o]) {
            continue;
        }
        let only_even = dialects[e]
            .values()
            .iter()
            .filter(|&&v| !dialects[o].contains(v))
            .count();
        let kind = match only_even {
            0 => Some(ViolationKind::PairIdentical),
            1 => {
                let de = differing_value(&dialects[e], &dialects[o]).unwrap();
                let d_o = differing_value(&dialects[o], &dialects[e]).unwrap();
                (de <= d_o).then_some(ViolationKind::EvenNotLarger)
            }
            _ => Some(ViolationKind::PairDiffersInMoreThanOne),
        };
        if let Some(kind) = kind {
            out.push(Violation {
                dialect: Some(e),
                kind,
            });
        }
    }
    out
}

/// Parses a formatbook config document: one dialect per line, the dialect
/// index followed by eight half-unit integers. Blank lines and lines starting
/// with `#` are ignored.
pub fn load_formatbook(text: &str) -> Result<Formatbook> {
    let mut slots: [Option<DialectValueSet>; NUM_DIALECTS] = [None; NUM_DIALECTS];
    let mut seen = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        let nums = line
            .split_whitespace()
            .map(|t| t.parse::<u8>().map_err(|e| err(format!("bad integer {t:?}: {e}"))))
            .collect::<Result<Vec<u8>>>()?;
        if nums.len() != 1 + VALUES_PER_DIALECT {
            return Err(err(format!(
                "expected index plus 8 values, found {} fields",
                nums.len()
            )));
        }
        let idx = nums[0] as usize;
        if idx >= NUM_DIALECTS {
            return Err(err(format!("dialect index {idx} outside [0, 15]")));
        }
        if slots[idx].is_some() {
            return Err(err(format!("dialect {idx} listed twice")));
        }
        let mut values = [0u8; VALUES_PER_DIALECT];
        values.copy_from_slice(&nums[1..]);
        slots[idx] = Some(DialectValueSet::new(values));
        seen += 1;
    }
    if seen != NUM_DIALECTS {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("expected 16 dialects, found {seen}"),
        });
    }
    Formatbook::new(slots.map(|d| d.expect("all 16 present")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: u8) -> QuarterCode {
        QuarterCode::new(v).unwrap()
    }

    #[test]
    fn default_table_matches_construction_rule() {
        let expected = [
            (12, 9),
            (11, 9),
            (10, 8),
            (9, 7),
            (8, 7),
            (8, 5),
            (7, 5),
            (7, 5),
        ];
        let fb = build_default_formatbook();
        for (p, &(de, d_o)) in expected.iter().enumerate() {
            let even = DialectId::new(2 * p).unwrap();
            let odd = DialectId::new(2 * p + 1).unwrap();
            assert_eq!(fb.differing(even).get(), de, "pair {p}");
            assert_eq!(fb.differing(odd).get(), d_o, "pair {p}");
            assert_eq!(fb.pair_max(p).get(), 15 - p as u8);
        }
    }

    #[test]
    fn dialect_4_and_5() {
        let fb = build_default_formatbook();
        assert_eq!(
            fb.dialect(DialectId::new(4).unwrap()).values(),
            &[0, 1, 2, 3, 4, 6, 10, 13]
        );
        assert_eq!(
            fb.dialect(DialectId::new(5).unwrap()).values(),
            &[0, 1, 2, 3, 4, 6, 8, 13]
        );
        assert_eq!(
            fb.dialect(DialectId::new(4).unwrap()).to_f64(),
            [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 6.5]
        );
    }

    #[test]
    fn top_pair_shares_seven_values() {
        let fb = build_default_formatbook();
        let d0 = fb.dialect(DialectId::new(0).unwrap());
        let d1 = fb.dialect(DialectId::new(1).unwrap());
        assert_eq!(d0.max(), d1.max());
        assert_eq!(d0.max().get(), 15);
        let shared = d0.values().iter().filter(|&&v| d1.contains(v)).count();
        assert_eq!(shared, 7);
    }

    #[test]
    fn pair_index_examples() {
        assert_eq!(pair_index_for_max(HalfUnit::new(13).unwrap()).unwrap(), 2);
        assert_eq!(pair_index_for_max(HalfUnit::new(15).unwrap()).unwrap(), 0);
        assert_eq!(pair_index_for_max(HalfUnit::new(8).unwrap()).unwrap(), 7);
        assert!(matches!(
            pair_index_for_max(HalfUnit::new(7).unwrap()),
            Err(Error::Domain(_))
        ));
        assert!(HalfUnit::new(16).is_err());
    }

    #[test]
    fn pair_index_inverts_pair_max() {
        let fb = build_default_formatbook();
        for p in 0..NUM_PAIRS {
            let m = fb.dialect(DialectId::new(2 * p).unwrap()).max();
            assert_eq!(pair_index_for_max(m).unwrap(), p);
        }
    }

    #[test]
    fn pair_2_beneficial_ranges() {
        let fb = build_default_formatbook();
        let (even, odd) = beneficial_ranges(&fb, 2);
        assert_eq!(even, BeneficialRange { lo: 18, hi: 23 });
        assert_eq!(even.to_f64(), (4.5, 5.75));
        assert_eq!(odd, BeneficialRange { lo: 14, hi: 18 });
        assert_eq!(odd.to_f64(), (3.5, 4.5));
        // last included code of dialect 4's range is 5'b10110
        assert_eq!(even.hi - 1, 0b10110);
        assert!(even.contains(q(0b10110)));
        assert!(!even.contains(q(0b10111)));
    }

    #[test]
    fn ranges_are_ordered_and_nonempty() {
        let fb = build_default_formatbook();
        for p in 0..NUM_PAIRS {
            let (even, odd) = beneficial_ranges(&fb, p);
            assert!(even.lo < even.hi && odd.lo < odd.hi, "pair {p}");
            assert!(odd.hi <= even.lo, "pair {p}");
        }
    }

    #[test]
    fn adjacent_differing_values_give_contiguous_ranges() {
        let fb = build_default_formatbook();
        for p in 0..5 {
            let (even, odd) = beneficial_ranges(&fb, p);
            assert_eq!(even.lo, odd.hi, "pair {p}");
        }
    }

    #[test]
    fn low_pairs_skip_the_shared_value() {
        // pair 5: {.., 4, 6, 8, 10} against {.., 4, 5, 6, 10}
        let fb = build_default_formatbook();
        let (even, odd) = beneficial_ranges(&fb, 5);
        assert_eq!(even, BeneficialRange { lo: 14, hi: 18 });
        assert_eq!(odd, BeneficialRange { lo: 9, hi: 11 });
        assert!(!even.contains(q(12)) && !odd.contains(q(12)));
    }

    #[test]
    fn default_contains_base_values() {
        let fb = build_default_formatbook();
        for d in fb.dialects() {
            let n = BASE_VALUES.iter().filter(|&&b| d.contains(b)).count();
            assert!(n >= 6, "{d:?}");
        }
    }

    #[test]
    fn default_validates() {
        let fb = build_default_formatbook();
        assert!(validate_formatbook(fb.dialects()).is_empty());
    }

    #[test]
    fn duplicated_value_is_reported() {
        let mut table = *build_default_formatbook().dialects();
        table[3] = DialectValueSet::new([0, 1, 2, 2, 4, 6, 9, 14]);
        let v = validate_formatbook(&table);
        assert!(v
            .iter()
            .any(|x| x.dialect == Some(3) && x.to_string().contains("values not strictly ascending")));
    }

    #[test]
    fn pair_differing_twice_is_reported() {
        let mut table = *build_default_formatbook().dialects();
        // pair 3 is dialects 6 and 7, max 12
        table[7] = DialectValueSet::new([0, 1, 2, 3, 5, 6, 7, 12]);
        let v = validate_formatbook(&table);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].dialect, Some(6));
        assert!(v[0].to_string().contains("pair differs in more than one value"));
    }

    #[test]
    fn swapped_pair_order_is_reported() {
        let mut table = *build_default_formatbook().dialects();
        table.swap(4, 5);
        let v = validate_formatbook(&table);
        assert_eq!(v[0].kind, ViolationKind::EvenNotLarger);
    }

    #[test]
    fn wrong_count_is_reported() {
        let table = build_default_formatbook().dialects()[..15].to_vec();
        let v = validate_formatbook(&table);
        assert_eq!(v[0].kind, ViolationKind::WrongDialectCount(15));
    }

    #[test]
    fn config_round_trip() {
        let fb = build_default_formatbook();
        let text = fb.to_string();
        assert_eq!(load_formatbook(&text).unwrap(), fb);
    }

    #[test]
    fn config_with_fifteen_dialects_fails_to_parse() {
        let fb = build_default_formatbook();
        let text: String = fb
            .to_string()
            .lines()
            .filter(|l| !l.starts_with("15 "))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(load_formatbook(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn config_with_max_16_fails_validation() {
        let fb = build_default_formatbook();
        let text = fb
            .to_string()
            .replace("0 0 1 2 3 4 6 12 15", "0 0 1 2 3 4 6 12 16");
        match load_formatbook(&text) {
            Err(Error::Validation(v)) => assert!(v.iter().any(|x| x.dialect == Some(0))),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn config_rejects_garbage() {
        assert!(matches!(
            load_formatbook("0 0 1 2 x 4 6 12 15\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            load_formatbook("# only a comment\n0 0 1 2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
