//! Per-block dialect selection.
//!
//! The online method first fixes the pair whose maximum matches the block's
//! rounded maximum, then keeps whichever pair member has more elements inside
//! its beneficial range. [`select_dialect_mse`] is the exhaustive reference.

use crate::error::{Error, Result};
use crate::fixedpoint::{preprocess_block, round_to_half, PreprocessedBlock, SharedExponent};
use crate::formatbook::{
    beneficial_ranges, pair_index_for_max, DialectId, Formatbook, HalfUnit, NUM_DIALECTS,
};
use crate::quantize::{dequantize_block, quantize_preprocessed};
use crate::scalar::Scalar;

/// Stage 1: the pair whose shared maximum equals the block's rounded maximum.
pub fn select_pair(pre: &PreprocessedBlock) -> Result<(usize, HalfUnit)> {
    if pre.se.is_zero_block() {
        return Err(Error::ZeroBlock);
    }
    let block_max = round_to_half(pre.max_code());
    Ok((pair_index_for_max(block_max)?, block_max))
}

/// Stage 1 followed by beneficial-range counting. Equal counts pick the even
/// dialect.
pub fn select_dialect_two_stage(pre: &PreprocessedBlock, fb: &Formatbook) -> Result<DialectId> {
    let (pair, _) = select_pair(pre)?;
    let (even, odd) = beneficial_ranges(fb, pair);
    let (mut n_even, mut n_odd) = (0usize, 0usize);
    for &q in &pre.mags {
        n_even += usize::from(even.contains(q));
        n_odd += usize::from(odd.contains(q));
    }
    let id = if n_even >= n_odd { 2 * pair } else { 2 * pair + 1 };
    Ok(DialectId::new_unchecked(id as u8))
}

/// Exhaustive selection: quantizes the block under all sixteen dialects and
/// returns the one with the smallest MSE against the exact inputs. Ties go to
/// the lower dialect index.
pub fn select_dialect_mse<T: Scalar>(
    block: &[T],
    se: SharedExponent,
    fb: &Formatbook,
) -> Result<(DialectId, T)> {
    if se.is_zero_block() {
        return Err(Error::ZeroBlock);
    }
    let pre = preprocess_block(block, se)?;
    let mut best: Option<(DialectId, f64)> = None;
    for id in DialectId::all() {
        let deq: Vec<f64> = dequantize_block(&quantize_preprocessed(&pre, id, fb), fb);
        let sse: f64 = block
            .iter()
            .zip(&deq)
            .map(|(&x, &d)| (d - x.as_f64()).powi(2))
            .sum();
        let mse = sse / block.len() as f64;
        if best.is_none_or(|(_, b)| mse < b) {
            best = Some((id, mse));
        }
    }
    let (id, mse) = best.expect("sixteen candidates");
    Ok((id, T::round_from(mse)))
}

/// Dialect selection counts over a set of blocks; zero blocks are tallied
/// separately and excluded from the frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectionReport {
    pub counts: [usize; NUM_DIALECTS],
    pub zero_blocks: usize,
}

impl SelectionReport {
    pub fn record(&mut self, id: DialectId) {
        self.counts[id.index()] += 1;
    }

    pub fn merge(&mut self, other: &SelectionReport) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.zero_blocks += other.zero_blocks;
    }

    /// Number of nonzero blocks.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> [f64; NUM_DIALECTS] {
        let total = self.total();
        if total == 0 {
            return [0.0; NUM_DIALECTS];
        }
        self.counts.map(|c| c as f64 / total as f64)
    }
}

pub fn selection_report(blocks: &[PreprocessedBlock], fb: &Formatbook) -> SelectionReport {
    let mut report = SelectionReport::default();
    for b in blocks {
        match select_dialect_two_stage(b, fb) {
            Ok(id) => report.record(id),
            Err(_) => report.zero_blocks += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::QuarterCode;
    use crate::formatbook::build_default_formatbook;

    fn pre_from_codes(codes: &[u8]) -> PreprocessedBlock {
        PreprocessedBlock {
            signs: vec![false; codes.len()],
            mags: codes.iter().map(|&c| QuarterCode::new(c).unwrap()).collect(),
            se: SharedExponent::Exponent(0),
        }
    }

    #[test]
    fn stage_one_examples() {
        assert_eq!(select_pair(&pre_from_codes(&[26, 3])).unwrap(), (2, HalfUnit::new(13).unwrap()));
        assert_eq!(select_pair(&pre_from_codes(&[16])).unwrap().0, 7);
        assert_eq!(select_pair(&pre_from_codes(&[31, 0])).unwrap(), (0, HalfUnit::MAX));
        let zero = PreprocessedBlock::from_block(&[0.0f64; 4]).unwrap();
        assert_eq!(select_pair(&zero), Err(Error::ZeroBlock));
    }

    #[test]
    fn stage_two_examples() {
        let fb = build_default_formatbook();
        let pick = |c: &[u8]| select_dialect_two_stage(&pre_from_codes(c), &fb).unwrap().get();
        assert_eq!(pick(&[26, 18, 20, 22, 15]), 4);
        assert_eq!(pick(&[26, 15, 16, 19]), 5);
        // tie with nothing in either range goes even
        assert_eq!(pick(&[26, 1, 2, 3]), 4);
        assert_eq!(pick(&[26; 32]), 4);
        // one-one tie also goes even
        assert_eq!(pick(&[26, 15, 20]), 4);
    }

    #[test]
    fn mse_oracle_exact_block() {
        let fb = build_default_formatbook();
        let block: Vec<f64> = fb
            .dialect(DialectId::new(4).unwrap())
            .to_f64()
            .iter()
            .cycle()
            .take(32)
            .map(|v| v * 0.25)
            .collect();
        let se = crate::fixedpoint::shared_exponent(&block).unwrap();
        let (id, mse) = select_dialect_mse(&block, se, &fb).unwrap();
        assert_eq!(id.get(), 4);
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn mse_oracle_prefers_dialect_4_for_5_0() {
        let fb = build_default_formatbook();
        let mut block = vec![0.0f64; 8];
        block[0] = 6.5;
        block[1] = 5.0;
        let (id, mse) = select_dialect_mse(&block, SharedExponent::Exponent(0), &fb).unwrap();
        assert_eq!(id.get(), 4);
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn report_counts() {
        let fb = build_default_formatbook();
        let blocks = vec![pre_from_codes(&[26, 20]); 5];
        let r = selection_report(&blocks, &fb);
        assert_eq!(r.counts[4], 5);
        assert_eq!(r.frequencies()[4], 1.0);

        let empty = selection_report(&[], &fb);
        assert_eq!(empty.total(), 0);
        assert_eq!(empty.frequencies(), [0.0; NUM_DIALECTS]);
    }
}
