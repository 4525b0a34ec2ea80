//! Streaming KV cache.
//!
//! Keys are quantized per token as soon as they arrive, in `head_dim / B`
//! blocks along the head dimension. Values are quantized per channel across
//! `B` consecutive tokens, so the newest `N mod B` tokens stay in full
//! precision until the chunk fills and seals.

use crate::error::{Error, Result};
use crate::formatbook::Formatbook;
use crate::gemm::{Axis, BlockFormat, Matrix, QBlock, QuantizedMatrix};
use crate::quantize::{quantize_block, QuantizedBlock};
use crate::scalar::Scalar;

fn check_dims(dim: usize, block_size: usize, what: &str) -> Result<()> {
    if block_size == 0 || block_size > crate::fixedpoint::MAX_BLOCK_LEN {
        return Err(Error::BlockLength {
            len: block_size,
            max: crate::fixedpoint::MAX_BLOCK_LEN,
        });
    }
    if dim == 0 {
        return Err(Error::DimensionMismatch(format!("{what} must be nonzero")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamingKeyCache {
    head_dim: usize,
    block_size: usize,
    rows: Vec<Vec<QuantizedBlock>>,
}

impl StreamingKeyCache {
    pub fn new(head_dim: usize, block_size: usize) -> Result<Self> {
        check_dims(head_dim, block_size, "head_dim")?;
        if !head_dim.is_multiple_of(block_size) {
            return Err(Error::NotDivisible {
                dim: head_dim,
                block_size,
            });
        }
        Ok(StreamingKeyCache {
            head_dim,
            block_size,
            rows: Vec::new(),
        })
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn token_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<QuantizedBlock>] {
        &self.rows
    }

    fn check_row<T>(&self, key_row: &[T]) -> Result<()> {
        if key_row.len() != self.head_dim {
            return Err(Error::LengthMismatch {
                expected: self.head_dim,
                actual: key_row.len(),
            });
        }
        Ok(())
    }

    fn quantize_row<T: Scalar>(&self, key_row: &[T], fb: &Formatbook) -> Result<Vec<QuantizedBlock>> {
        key_row
            .chunks_exact(self.block_size)
            .map(|c| quantize_block(c, fb))
            .collect()
    }

    pub fn append<T: Scalar>(&mut self, key_row: &[T], fb: &Formatbook) -> Result<()> {
        self.check_row(key_row)?;
        let row = self.quantize_row(key_row, fb)?;
        self.rows.push(row);
        Ok(())
    }

    /// Keys as an `N x head_dim` matrix blocked along columns.
    pub fn to_quantized_matrix(&self) -> QuantizedMatrix {
        let blocks = self
            .rows
            .iter()
            .flatten()
            .cloned()
            .map(QBlock::Dialect)
            .collect();
        QuantizedMatrix::from_blocks(
            self.rows.len(),
            self.head_dim,
            self.block_size,
            Axis::Cols,
            BlockFormat::Dialect,
            blocks,
        )
        .expect("cache layout is consistent")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamingValueCache<T> {
    num_channels: usize,
    block_size: usize,
    /// Per channel, one block per sealed chunk of `block_size` tokens.
    sealed: Vec<Vec<QuantizedBlock>>,
    /// Per channel, the unsealed tail.
    residual: Vec<Vec<T>>,
    token_count: usize,
}

impl<T: Scalar> StreamingValueCache<T> {
    pub fn new(num_channels: usize, block_size: usize) -> Result<Self> {
        check_dims(num_channels, block_size, "num_channels")?;
        Ok(StreamingValueCache {
            num_channels,
            block_size,
            sealed: vec![Vec::new(); num_channels],
            residual: vec![Vec::with_capacity(block_size); num_channels],
            token_count: 0,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn sealed_chunks(&self) -> usize {
        self.token_count / self.block_size
    }

    pub fn residual_len(&self) -> usize {
        self.token_count % self.block_size
    }

    pub fn sealed(&self, channel: usize) -> &[QuantizedBlock] {
        &self.sealed[channel]
    }

    pub fn residual(&self, channel: usize) -> &[T] {
        &self.residual[channel]
    }

    fn check_row(&self, value_row: &[T]) -> Result<()> {
        if value_row.len() != self.num_channels {
            return Err(Error::LengthMismatch {
                expected: self.num_channels,
                actual: value_row.len(),
            });
        }
        if let Some(index) = value_row.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(())
    }

    pub fn append(&mut self, value_row: &[T], fb: &Formatbook) -> Result<()> {
        self.check_row(value_row)?;
        self.push_checked(value_row, fb)
    }

    fn push_checked(&mut self, value_row: &[T], fb: &Formatbook) -> Result<()> {
        if self.residual_len() + 1 == self.block_size {
            // quantize every channel before touching state so a failure leaves
            // the cache unchanged
            let chunks = self
                .residual
                .iter()
                .zip(value_row)
                .map(|(res, &v)| {
                    let mut chunk = res.clone();
                    chunk.push(v);
                    quantize_block(&chunk, fb)
                })
                .collect::<Result<Vec<_>>>()?;
            for ((sealed, res), qb) in self.sealed.iter_mut().zip(&mut self.residual).zip(chunks) {
                sealed.push(qb);
                res.clear();
            }
        } else {
            for (res, &v) in self.residual.iter_mut().zip(value_row) {
                res.push(v);
            }
        }
        self.token_count += 1;
        Ok(())
    }

    /// Sealed values as a `floor(N/B)*B x num_channels` matrix blocked along
    /// rows (tokens).
    pub fn to_quantized_matrix(&self) -> QuantizedMatrix {
        let chunks = self.sealed_chunks();
        let mut blocks = Vec::with_capacity(chunks * self.num_channels);
        for t in 0..chunks {
            for ch in &self.sealed {
                blocks.push(QBlock::Dialect(ch[t].clone()));
            }
        }
        QuantizedMatrix::from_blocks(
            chunks * self.block_size,
            self.num_channels,
            self.block_size,
            Axis::Rows,
            BlockFormat::Dialect,
            blocks,
        )
        .expect("cache layout is consistent")
    }

    /// Unsealed tail as an `(N mod B) x num_channels` matrix.
    pub fn residual_matrix(&self) -> Matrix<T> {
        Matrix::from_fn(self.residual_len(), self.num_channels, |r, c| {
            self.residual[c][r]
        })
    }
}

/// Appends one token to both caches. Both rows are validated before either
/// cache changes.
pub fn append_token<T: Scalar>(
    kc: &mut StreamingKeyCache,
    vc: &mut StreamingValueCache<T>,
    key_row: &[T],
    value_row: &[T],
    fb: &Formatbook,
) -> Result<()> {
    kc.check_row(key_row)?;
    vc.check_row(value_row)?;
    let key_blocks = kc.quantize_row(key_row, fb)?;
    vc.push_checked(value_row, fb)?;
    kc.rows.push(key_blocks);
    Ok(())
}

/// Quantized keys, quantized sealed values, and the full-precision value tail.
pub fn materialize<T: Scalar>(
    vc: &StreamingValueCache<T>,
    kc: &StreamingKeyCache,
) -> (QuantizedMatrix, QuantizedMatrix, Matrix<T>) {
    (
        kc.to_quantized_matrix(),
        vc.to_quantized_matrix(),
        vc.residual_matrix(),
    )
}
