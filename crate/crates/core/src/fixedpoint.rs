//! Block preprocessing: shared-exponent extraction and truncation of each
//! element to a 5-bit unsigned Q3.2 magnitude.

use crate::error::{Error, Result};
use crate::formatbook::HalfUnit;
use crate::scalar::{floor_log2, pow2, Scalar};

pub const MAX_BLOCK_LEN: usize = 64;

/// Byte used for [`SharedExponent::ZeroBlock`] in serialized form.
pub const ZERO_BLOCK_SENTINEL: i8 = i8::MIN;

/// Per-block power-of-two scale.
///
/// For a nonzero block with maximum magnitude `m`, `4 * 2^e <= m < 8 * 2^e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SharedExponent {
    ZeroBlock,
    Exponent(i8),
}

impl SharedExponent {
    pub fn is_zero_block(self) -> bool {
        matches!(self, SharedExponent::ZeroBlock)
    }

    pub fn exponent(self) -> Option<i8> {
        match self {
            SharedExponent::ZeroBlock => None,
            SharedExponent::Exponent(e) => Some(e),
        }
    }

    /// Signed byte with `-128` marking a zero block.
    pub fn to_byte(self) -> i8 {
        self.exponent().unwrap_or(ZERO_BLOCK_SENTINEL)
    }

    pub fn from_byte(b: i8) -> Self {
        if b == ZERO_BLOCK_SENTINEL {
            SharedExponent::ZeroBlock
        } else {
            SharedExponent::Exponent(b)
        }
    }

    /// Shifts the exponent by `k`, as when the block is multiplied by `2^k`.
    pub fn shifted(self, k: i32) -> Result<Self> {
        match self {
            SharedExponent::ZeroBlock => Ok(self),
            SharedExponent::Exponent(e) => exponent_from_i32(i32::from(e) + k),
        }
    }
}

fn exponent_from_i32(e: i32) -> Result<SharedExponent> {
    if (-127..=127).contains(&e) {
        Ok(SharedExponent::Exponent(e as i8))
    } else {
        Err(Error::ExponentOutOfRange(e))
    }
}

/// Q3.2 magnitude: units of 0.25 after scaling by `2^-SE`, in `[0, 31]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuarterCode(u8);

impl QuarterCode {
    pub const MAX: QuarterCode = QuarterCode(31);

    pub fn new(v: u8) -> Result<Self> {
        if v > 31 {
            return Err(Error::Domain(format!("quarter code {v} exceeds 31")));
        }
        Ok(QuarterCode(v))
    }

    #[inline]
    pub const fn get(self) -> u8 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) * 0.25
    }

    pub fn all() -> impl Iterator<Item = QuarterCode> {
        (0..32).map(QuarterCode)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessedBlock {
    pub signs: Vec<bool>,
    pub mags: Vec<QuarterCode>,
    pub se: SharedExponent,
}

impl PreprocessedBlock {
    /// Shared exponent plus preprocessing in one step.
    pub fn from_block<T: Scalar>(block: &[T]) -> Result<Self> {
        let se = shared_exponent(block)?;
        preprocess_block(block, se)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.mags.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.mags.is_empty()
    }

    pub fn max_code(&self) -> QuarterCode {
        self.mags.iter().copied().max().unwrap_or(QuarterCode(0))
    }
}

fn check_block<T: Scalar>(block: &[T]) -> Result<()> {
    if block.is_empty() || block.len() > MAX_BLOCK_LEN {
        return Err(Error::BlockLength {
            len: block.len(),
            max: MAX_BLOCK_LEN,
        });
    }
    if let Some(index) = block.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

pub(crate) fn max_abs<T: Scalar>(block: &[T]) -> f64 {
    block
        .iter()
        .map(|x| x.as_f64().abs())
        .fold(0.0, f64::max)
}

/// `floor(log2(max |x|)) - 2`, or [`SharedExponent::ZeroBlock`].
pub fn shared_exponent<T: Scalar>(block: &[T]) -> Result<SharedExponent> {
    check_block(block)?;
    let m = max_abs(block);
    if m == 0.0 {
        return Ok(SharedExponent::ZeroBlock);
    }
    exponent_from_i32(floor_log2(m) - 2)
}

/// Truncates `|x| / 2^se` to a quarter code, saturating at 31.
#[inline]
pub(crate) fn to_quarter_code(abs: f64, se: i8) -> QuarterCode {
    // |x| * 2^(2 - se) is exact in binary64 for every i8 exponent
    let scaled = abs * pow2(2 - i32::from(se));
    if scaled >= 31.0 {
        QuarterCode(31)
    } else {
        QuarterCode(scaled as u8)
    }
}

/// Converts each element to sign plus truncated Q3.2 magnitude under `se`.
pub fn preprocess_block<T: Scalar>(block: &[T], se: SharedExponent) -> Result<PreprocessedBlock> {
    check_block(block)?;
    let (signs, mags) = match se {
        SharedExponent::ZeroBlock => (vec![false; block.len()], vec![QuarterCode(0); block.len()]),
        SharedExponent::Exponent(e) => block
            .iter()
            .map(|&x| {
                let v = x.as_f64();
                (v < 0.0, to_quarter_code(v.abs(), e))
            })
            .unzip(),
    };
    Ok(PreprocessedBlock { signs, mags, se })
}

/// Rounds a quarter code to the nearest half-unit, ties up, clamped to 7.5.
#[inline]
pub fn round_to_half(q: QuarterCode) -> HalfUnit {
    HalfUnit::new_unchecked(((q.0 + 1) >> 1).min(15))
}
