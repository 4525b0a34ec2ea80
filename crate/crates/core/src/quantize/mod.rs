//! DialectFP4 block quantization and dequantization, plus the MXFP4 and NVFP4
//! baselines.

mod baseline;
pub mod minifloat;

pub use baseline::{
    dequantize_block_mx, dequantize_block_nv, quantize_block_mx, quantize_block_nv, MxBlock,
    NvBlock,
};

use crate::error::{Error, Result};
use crate::fixedpoint::{preprocess_block, PreprocessedBlock, QuarterCode, SharedExponent};
use crate::formatbook::{DialectId, DialectValueSet, Formatbook};
use crate::scalar::{pow2, Scalar};
use crate::fixedpoint::shared_exponent;
use crate::selection::{select_dialect_mse, select_dialect_two_stage};

/// Dialect used for all-zero blocks.
pub const ZERO_BLOCK_DIALECT: DialectId = DialectId::new_unchecked(15);

/// Sign plus 3-bit index into the block's dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Code {
    pub sign: bool,
    pub index: u8,
}

impl Code {
    /// Canonical code: the sign of index 0 is always cleared.
    pub fn new(sign: bool, index: u8) -> Self {
        debug_assert!(index < 8);
        Code {
            sign: sign && index != 0,
            index,
        }
    }

    /// Nibble with bit 3 as sign and bits 2..0 as index.
    #[inline]
    pub fn to_nibble(self) -> u8 {
        (u8::from(self.sign) << 3) | self.index
    }

    #[inline]
    pub fn from_nibble(n: u8) -> Self {
        Code::new(n & 0b1000 != 0, n & 0b111)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedBlock {
    pub se: SharedExponent,
    pub dialect: DialectId,
    pub codes: Vec<Code>,
}

impl QuantizedBlock {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub(crate) fn zero(len: usize, dialect: DialectId) -> Self {
        QuantizedBlock {
            se: SharedExponent::ZeroBlock,
            dialect,
            codes: vec![Code::default(); len],
        }
    }
}

/// Index of the nearest dialect value to `q`, with midpoint ties going to the
/// larger value.
///
/// Value `i` owns the quarter codes `[v[i-1] + v[i], v[i] + v[i+1])`.
#[inline]
pub fn quantize_element(q: QuarterCode, v: &DialectValueSet) -> u8 {
    let vals = v.values();
    let q = q.get();
    (1..8).filter(|&i| q >= vals[i - 1] + vals[i]).count() as u8
}

pub(crate) fn quantize_preprocessed(
    pre: &PreprocessedBlock,
    dialect: DialectId,
    fb: &Formatbook,
) -> QuantizedBlock {
    if pre.se.is_zero_block() {
        return QuantizedBlock::zero(pre.len(), dialect);
    }
    let set = fb.dialect(dialect);
    let codes = pre
        .signs
        .iter()
        .zip(&pre.mags)
        .map(|(&s, &q)| Code::new(s, quantize_element(q, set)))
        .collect();
    QuantizedBlock {
        se: pre.se,
        dialect,
        codes,
    }
}

/// Full online path: shared exponent, Q3.2 preprocessing, two-stage dialect
/// selection and per-element nearest-value quantization.
pub fn quantize_block<T: Scalar>(block: &[T], fb: &Formatbook) -> Result<QuantizedBlock> {
    let pre = PreprocessedBlock::from_block(block)?;
    if pre.se.is_zero_block() {
        return Ok(QuantizedBlock::zero(pre.len(), ZERO_BLOCK_DIALECT));
    }
    let dialect = select_dialect_two_stage(&pre, fb)?;
    Ok(quantize_preprocessed(&pre, dialect, fb))
}

/// Quantizes under a caller-chosen exponent and dialect.
pub fn quantize_block_with_dialect<T: Scalar>(
    block: &[T],
    se: SharedExponent,
    dialect: usize,
    fb: &Formatbook,
) -> Result<QuantizedBlock> {
    let dialect = DialectId::new(dialect)?;
    let pre = preprocess_block(block, se)?;
    Ok(quantize_preprocessed(&pre, dialect, fb))
}

/// Weight path with exhaustive dialect search: every block gets the dialect
/// of minimum MSE against the exact inputs.
pub fn quantize_block_mse<T: Scalar>(block: &[T], fb: &Formatbook) -> Result<QuantizedBlock> {
    let se = shared_exponent(block)?;
    if se.is_zero_block() {
        return Ok(QuantizedBlock::zero(block.len(), ZERO_BLOCK_DIALECT));
    }
    let (id, _) = select_dialect_mse(block, se, fb)?;
    let pre = preprocess_block(block, se)?;
    Ok(quantize_preprocessed(&pre, id, fb))
}

/// `(-1)^sign * v[index] * 0.5 * 2^se` per element.
pub fn dequantize_block<T: Scalar>(qb: &QuantizedBlock, fb: &Formatbook) -> Vec<T> {
    let Some(e) = qb.se.exponent() else {
        return vec![T::zero(); qb.len()];
    };
    let scale = pow2(i32::from(e) - 1);
    let set = fb.dialect(qb.dialect);
    qb.codes
        .iter()
        .map(|c| {
            let m = f64::from(set.values()[c.index as usize]) * scale;
            T::round_from(if c.sign { -m } else { m })
        })
        .collect()
}

/// Mean squared error between two equal-length slices.
pub fn block_mse<T: Scalar>(original: &[T], dequantized: &[T]) -> Result<T> {
    if original.len() != dequantized.len() {
        return Err(Error::LengthMismatch {
            expected: original.len(),
            actual: dequantized.len(),
        });
    }
    if original.is_empty() {
        return Ok(T::zero());
    }
    let sum: f64 = original
        .iter()
        .zip(dequantized)
        .map(|(&o, &d)| {
            let e = d.as_f64() - o.as_f64();
            e * e
        })
        .sum();
    Ok(T::round_from(sum / original.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formatbook::build_default_formatbook;

    fn qc(v: u8) -> QuarterCode {
        QuarterCode::new(v).unwrap()
    }

    fn d(id: usize) -> DialectId {
        DialectId::new(id).unwrap()
    }

    #[test]
    fn worked_example_code_17_in_dialect_4() {
        let fb = build_default_formatbook();
        let set = fb.dialect(d(4));
        assert_eq!(quantize_element(qc(0b10001), set), 0b110);
        assert_eq!(quantize_element(qc(16), set), 6);
        assert_eq!(quantize_element(qc(15), set), 5);
        assert_eq!(quantize_element(qc(22), set), 6);
        assert_eq!(quantize_element(qc(23), set), 7);
        assert_eq!(quantize_element(qc(0), set), 0);
    }

    #[test]
    fn quantize_block_hand_trace() {
        let fb = build_default_formatbook();
        let qb = quantize_block(&[6.5f64, 5.0, -2.0, 0.25], &fb).unwrap();
        assert_eq!(qb.se, SharedExponent::Exponent(0));
        assert_eq!(qb.dialect, d(4));
        let codes: Vec<(bool, u8)> = qb.codes.iter().map(|c| (c.sign, c.index)).collect();
        // 0.25 -> code 1, the midpoint of 0 and 0.5, ties up to index 1
        assert_eq!(codes, vec![(false, 7), (false, 6), (true, 4), (false, 1)]);
    }

    #[test]
    fn zero_block_convention() {
        let fb = build_default_formatbook();
        let qb = quantize_block(&[0.0f64; 8], &fb).unwrap();
        assert_eq!(qb.dialect, d(15));
        assert!(qb.se.is_zero_block());
        assert!(qb.codes.iter().all(|c| *c == Code::default()));
        assert_eq!(dequantize_block::<f64>(&qb, &fb), vec![0.0; 8]);
    }

    #[test]
    fn representable_block_round_trips() {
        let fb = build_default_formatbook();
        for se in [-3i32, 0, 2] {
            let block: Vec<f64> = fb
                .dialect(d(4))
                .to_f64()
                .iter()
                .cycle()
                .take(32)
                .map(|v| v * pow2(se))
                .collect();
            let qb = quantize_block(&block, &fb).unwrap();
            assert_eq!(qb.dialect, d(4));
            let back: Vec<f64> = dequantize_block(&qb, &fb);
            assert_eq!(back, block);
            assert_eq!(block_mse(&block, &back).unwrap(), 0.0);
        }
    }

    #[test]
    fn dequantize_examples() {
        let fb = build_default_formatbook();
        let qb = QuantizedBlock {
            se: SharedExponent::Exponent(0),
            dialect: d(4),
            codes: vec![Code::new(false, 6)],
        };
        assert_eq!(dequantize_block::<f64>(&qb, &fb), vec![5.0]);
        let qb = QuantizedBlock {
            se: SharedExponent::Exponent(-2),
            dialect: d(0),
            codes: vec![Code::new(true, 7)],
        };
        assert_eq!(dequantize_block::<f32>(&qb, &fb), vec![-1.875]);
    }

    #[test]
    fn with_dialect_rejects_bad_id() {
        let fb = build_default_formatbook();
        let r = quantize_block_with_dialect(&[1.0f64], SharedExponent::Exponent(-2), 17, &fb);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn with_dialect_reproduces_two_stage() {
        let fb = build_default_formatbook();
        let block = [3.1f64, -0.7, 5.9, 2.2, -4.4, 0.01, 1.5, 6.2];
        let qb = quantize_block(&block, &fb).unwrap();
        let fixed =
            quantize_block_with_dialect(&block, qb.se, qb.dialect.index(), &fb).unwrap();
        assert_eq!(fixed, qb);
    }

    #[test]
    fn mse_path_matches_oracle_choice() {
        let fb = build_default_formatbook();
        let block = [3.1f64, -0.7, 5.9, 2.2, -4.4, 0.01, 1.5, 6.2];
        let qb = quantize_block_mse(&block, &fb).unwrap();
        let (id, _) = select_dialect_mse(&block, qb.se, &fb).unwrap();
        assert_eq!(qb.dialect, id);
        assert_eq!(quantize_block_mse(&[0.0f64; 3], &fb).unwrap().dialect, d(15));
    }

    #[test]
    fn nibble_layout() {
        assert_eq!(Code::new(true, 6).to_nibble(), 0b1110);
        assert_eq!(Code::from_nibble(0b1110), Code::new(true, 6));
        assert_eq!(Code::from_nibble(0b1000), Code::default());
        assert_eq!(Code::new(true, 0), Code::default());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(block_mse(&[1.0f64, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(block_mse(&[1.0f64, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(
            block_mse(&[1.0f64], &[0.0, 0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
