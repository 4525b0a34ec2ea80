//! Block-quantized matrices and scaled-integer GEMM.
//!
//! Every representable DialectFP4 or FP4 magnitude is an integer number of
//! half-units, so a block dot product is an integer sum of 4-bit products
//! scaled once by `2^(se_a + se_w - 2)`.

use half::f16;

use crate::error::{Error, Result};
use crate::fixedpoint::{SharedExponent, MAX_BLOCK_LEN};
use crate::formatbook::Formatbook;
use crate::quantize::{
    dequantize_block, dequantize_block_mx, dequantize_block_nv, quantize_block, quantize_block_mx,
    quantize_block_nv, MxBlock, NvBlock, QuantizedBlock,
};
use crate::scalar::{pow2, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// First `n` rows.
    pub fn top_rows(&self, n: usize) -> Self {
        Matrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }
}

/// Direction a block runs in. `Cols`: each block is `B` consecutive columns of
/// one row (the left operand, contraction over columns). `Rows`: each block is
/// `B` consecutive rows of one column (the right operand).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockFormat {
    Dialect,
    Mx,
    Nv,
}

impl BlockFormat {
    pub fn name(self) -> &'static str {
        match self {
            BlockFormat::Dialect => "dialect",
            BlockFormat::Mx => "mx",
            BlockFormat::Nv => "nv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QBlock {
    Dialect(QuantizedBlock),
    Mx(MxBlock),
    Nv(NvBlock),
}

impl QBlock {
    pub fn format(&self) -> BlockFormat {
        match self {
            QBlock::Dialect(_) => BlockFormat::Dialect,
            QBlock::Mx(_) => BlockFormat::Mx,
            QBlock::Nv(_) => BlockFormat::Nv,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            QBlock::Dialect(b) => b.len(),
            QBlock::Mx(b) => b.len(),
            QBlock::Nv(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dequantize<T: Scalar>(&self, fb: &Formatbook) -> Vec<T> {
        match self {
            QBlock::Dialect(b) => dequantize_block(b, fb),
            QBlock::Mx(b) => dequantize_block_mx(b),
            QBlock::Nv(b) => dequantize_block_nv(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    block_size: usize,
    axis: Axis,
    format: BlockFormat,
    blocks: Vec<QBlock>,
}

fn block_grid(rows: usize, cols: usize, b: usize, axis: Axis) -> (usize, usize) {
    match axis {
        Axis::Cols => (rows, cols / b),
        Axis::Rows => (rows / b, cols),
    }
}

fn check_block_size(rows: usize, cols: usize, block_size: usize, axis: Axis) -> Result<()> {
    if block_size == 0 || block_size > MAX_BLOCK_LEN {
        return Err(Error::BlockLength {
            len: block_size,
            max: MAX_BLOCK_LEN,
        });
    }
    let dim = match axis {
        Axis::Cols => cols,
        Axis::Rows => rows,
    };
    if dim % block_size != 0 {
        return Err(Error::NotDivisible {
            dim,
            block_size,
        });
    }
    Ok(())
}

impl QuantizedMatrix {
    /// Assembles a matrix from blocks in row-major block-grid order.
    pub fn from_blocks(
        rows: usize,
        cols: usize,
        block_size: usize,
        axis: Axis,
        format: BlockFormat,
        blocks: Vec<QBlock>,
    ) -> Result<Self> {
        check_block_size(rows, cols, block_size, axis)?;
        let (gr, gc) = block_grid(rows, cols, block_size, axis);
        if blocks.len() != gr * gc {
            return Err(Error::LengthMismatch {
                expected: gr * gc,
                actual: blocks.len(),
            });
        }
        for b in &blocks {
            if b.format() != format {
                return Err(Error::FormatMismatch(format!(
                    "{} block in {} matrix",
                    b.format().name(),
                    format.name()
                )));
            }
            if b.len() != block_size {
                return Err(Error::LengthMismatch {
                    expected: block_size,
                    actual: b.len(),
                });
            }
        }
        Ok(QuantizedMatrix {
            rows,
            cols,
            block_size,
            axis,
            format,
            blocks,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn format(&self) -> BlockFormat {
        self.format
    }

    pub fn blocks(&self) -> &[QBlock] {
        &self.blocks
    }

    /// `(grid rows, grid cols)` of the block grid.
    pub fn grid(&self) -> (usize, usize) {
        block_grid(self.rows, self.cols, self.block_size, self.axis)
    }

    pub fn block(&self, gr: usize, gc: usize) -> &QBlock {
        &self.blocks[gr * self.grid().1 + gc]
    }

    pub fn dequantize<T: Scalar>(&self, fb: &Formatbook) -> Matrix<T> {
        let mut out = Matrix::zeros(self.rows, self.cols);
        let (gr, gc) = self.grid();
        let b = self.block_size;
        for i in 0..gr {
            for j in 0..gc {
                let vals: Vec<T> = self.block(i, j).dequantize(fb);
                for (k, v) in vals.into_iter().enumerate() {
                    match self.axis {
                        Axis::Cols => out.set(i, j * b + k, v),
                        Axis::Rows => out.set(i * b + k, j, v),
                    }
                }
            }
        }
        out
    }
}

/// Splits `m` into `block_size` slices along `axis`, in row-major grid order.
pub fn extract_blocks<T: Scalar>(m: &Matrix<T>, block_size: usize, axis: Axis) -> Result<Vec<Vec<T>>> {
    check_block_size(m.rows, m.cols, block_size, axis)?;
    let (gr, gc) = block_grid(m.rows, m.cols, block_size, axis);
    let mut out = Vec::with_capacity(gr * gc);
    for i in 0..gr {
        for j in 0..gc {
            out.push(match axis {
                Axis::Cols => m.row(i)[j * block_size..(j + 1) * block_size].to_vec(),
                Axis::Rows => (0..block_size).map(|k| m.get(i * block_size + k, j)).collect(),
            });
        }
    }
    Ok(out)
}

/// Quantizes every `block_size` slice along `axis` independently. The
/// dimension along `axis` must be divisible by `block_size`; there is no
/// padding.
pub fn quantize_matrix<T: Scalar>(
    m: &Matrix<T>,
    block_size: usize,
    axis: Axis,
    format: BlockFormat,
    fb: &Formatbook,
) -> Result<QuantizedMatrix> {
    quantize_matrix_with(m, block_size, axis, format, |blk| {
        Ok(match format {
            BlockFormat::Dialect => QBlock::Dialect(quantize_block(blk, fb)?),
            BlockFormat::Mx => QBlock::Mx(quantize_block_mx(blk)?),
            BlockFormat::Nv => QBlock::Nv(quantize_block_nv(blk)?),
        })
    })
}

/// Like [`quantize_matrix`] with a caller-supplied per-block quantizer.
pub fn quantize_matrix_with<T: Scalar>(
    m: &Matrix<T>,
    block_size: usize,
    axis: Axis,
    format: BlockFormat,
    mut f: impl FnMut(&[T]) -> Result<QBlock>,
) -> Result<QuantizedMatrix> {
    let blocks = extract_blocks(m, block_size, axis)?
        .iter()
        .map(|b| f(b))
        .collect::<Result<Vec<_>>>()?;
    QuantizedMatrix::from_blocks(m.rows, m.cols, block_size, axis, format, blocks)
}

/// Integer partial sum of one block pair with its shared exponent sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockPartial {
    pub acc: i32,
    pub exp_sum: i32,
}

fn check_pair_len(a: usize, w: usize) -> Result<()> {
    if a != w {
        return Err(Error::LengthMismatch {
            expected: a,
            actual: w,
        });
    }
    Ok(())
}

fn exp_sum(a: SharedExponent, w: SharedExponent) -> Option<i32> {
    Some(i32::from(a.exponent()?) + i32::from(w.exponent()?))
}

/// Sign-XOR times 4-bit unsigned products over a DialectFP4 block pair.
pub fn mac_block(a: &QuantizedBlock, w: &QuantizedBlock, fb: &Formatbook) -> Result<BlockPartial> {
    check_pair_len(a.len(), w.len())?;
    let Some(exp_sum) = exp_sum(a.se, w.se) else {
        return Ok(BlockPartial::default());
    };
    let va = fb.dialect(a.dialect).values();
    let vw = fb.dialect(w.dialect).values();
    let acc = a
        .codes
        .iter()
        .zip(&w.codes)
        .map(|(ca, cw)| {
            let p = i32::from(va[ca.index as usize]) * i32::from(vw[cw.index as usize]);
            if ca.sign ^ cw.sign {
                -p
            } else {
                p
            }
        })
        .sum();
    Ok(BlockPartial { acc, exp_sum })
}

/// Same integer MAC for MXFP4 blocks, with FP4 magnitudes in half-units.
pub fn mac_block_mx(a: &MxBlock, w: &MxBlock) -> Result<BlockPartial> {
    check_pair_len(a.len(), w.len())?;
    let Some(exp_sum) = exp_sum(a.se, w.se) else {
        return Ok(BlockPartial::default());
    };
    Ok(BlockPartial {
        acc: fp4_dot(&a.codes, &w.codes),
        exp_sum,
    })
}

fn fp4_dot(
    a: &[crate::quantize::minifloat::Fp4E2M1],
    w: &[crate::quantize::minifloat::Fp4E2M1],
) -> i32 {
    a.iter()
        .zip(w)
        .map(|(x, y)| {
            let p = i32::from(x.magnitude_half_units()) * i32::from(y.magnitude_half_units());
            if x.is_negative() ^ y.is_negative() {
                -p
            } else {
                p
            }
        })
        .sum()
}

/// NVFP4 block dot product: integer FP4 MAC times the product of the two
/// E4M3 scales. Exact in binary64.
pub fn dot_block_nv(a: &NvBlock, w: &NvBlock) -> Result<f64> {
    check_pair_len(a.len(), w.len())?;
    let acc = fp4_dot(&a.codes, &w.codes);
    Ok(f64::from(acc) * (a.scale.to_f64() * w.scale.to_f64()) * 0.25)
}

/// `acc * 2^(exp_sum - 2)`, an exponent adjustment rather than a truncating
/// shift.
#[inline]
pub fn block_partial_value(p: BlockPartial) -> f64 {
    f64::from(p.acc) * pow2(p.exp_sum - 2)
}

fn block_dot(a: &QBlock, w: &QBlock, fb: &Formatbook) -> Result<f64> {
    match (a, w) {
        (QBlock::Dialect(a), QBlock::Dialect(w)) => Ok(block_partial_value(mac_block(a, w, fb)?)),
        (QBlock::Mx(a), QBlock::Mx(w)) => Ok(block_partial_value(mac_block_mx(a, w)?)),
        (QBlock::Nv(a), QBlock::Nv(w)) => dot_block_nv(a, w),
        _ => Err(Error::FormatMismatch(format!(
            "{} x {}",
            a.format().name(),
            w.format().name()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AccumulatorMode {
    /// Binary64 accumulation of block partials.
    #[default]
    Exact,
    /// Each partial rounded to binary16 and accumulated in binary16.
    Fp16,
}

/// IEEE binary16 round-to-nearest-even of `x`, returned as binary64.
#[inline]
pub fn fp16_round(x: f64) -> f64 {
    f16::from_f64(x).to_f64()
}

/// `A * W` over block partials. `A` must be blocked along columns and `W`
/// along rows with the same block size and format.
pub fn gemm<T: Scalar>(
    a: &QuantizedMatrix,
    w: &QuantizedMatrix,
    fb: &Formatbook,
    mode: AccumulatorMode,
) -> Result<Matrix<T>> {
    if a.cols != w.rows {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.rows, a.cols, w.rows, w.cols
        )));
    }
    if a.axis != Axis::Cols || w.axis != Axis::Rows {
        return Err(Error::DimensionMismatch(
            "left operand must be blocked along columns, right operand along rows".into(),
        ));
    }
    if a.block_size != w.block_size {
        return Err(Error::DimensionMismatch(format!(
            "block sizes {} and {} differ",
            a.block_size, w.block_size
        )));
    }
    if a.format != w.format {
        return Err(Error::FormatMismatch(format!(
            "{} x {}",
            a.format.name(),
            w.format.name()
        )));
    }
    let kb = a.cols / a.block_size;
    let mut out = Matrix::zeros(a.rows, w.cols);
    for i in 0..a.rows {
        for j in 0..w.cols {
            let mut acc = 0.0f64;
            for k in 0..kb {
                let p = block_dot(a.block(i, k), w.block(k, j), fb)?;
                acc = match mode {
                    AccumulatorMode::Exact => acc + p,
                    AccumulatorMode::Fp16 => fp16_round(acc + fp16_round(p)),
                };
            }
            out.set(i, j, T::round_from(acc));
        }
    }
    Ok(out)
}

/// Full-precision product with binary64 dot products.
pub fn gemm_reference<T: Scalar>(a: &Matrix<T>, w: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols != w.rows {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.rows, a.cols, w.rows, w.cols
        )));
    }
    Ok(Matrix::from_fn(a.rows, w.cols, |i, j| {
        let mut s = 0.0f64;
        for k in 0..a.cols {
            s += a.get(i, k).as_f64() * w.get(k, j).as_f64();
        }
        T::round_from(s)
    }))
}

/// `||test - ref||_F / ||ref||_F`, with `0/0` defined as 0.
pub fn relative_frobenius_error<T: Scalar>(reference: &Matrix<T>, test: &Matrix<T>) -> Result<T> {
    if reference.rows != test.rows || reference.cols != test.cols {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            reference.rows, reference.cols, test.rows, test.cols
        )));
    }
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (&r, &t) in reference.data.iter().zip(&test.data) {
        let (r, t) = (r.as_f64(), t.as_f64());
        num += (t - r) * (t - r);
        den += r * r;
    }
    let e = if num == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    };
    Ok(T::round_from(e))
}

/// Average stored bits per element including per-block overhead: a 5-bit
/// exponent (plus a dialect id for DialectFP4) or an 8-bit E4M3 scale.
pub fn effective_bitwidth(format: BlockFormat, block_size: usize, num_dialects: usize) -> f64 {
    let b = block_size as f64;
    match format {
        BlockFormat::Dialect => 4.0 + (5.0 + (num_dialects as f64).log2()) / b,
        BlockFormat::Mx => 4.0 + 5.0 / b,
        BlockFormat::Nv => 4.0 + 8.0 / b,
    }
}
