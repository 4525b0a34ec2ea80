//! Block-wise mixed-format 4-bit quantization.
//!
//! Every block of up to 64 elements shares a power-of-two exponent and picks
//! one of sixteen FP4 "dialects" from a [`Formatbook`]. Each dialect is a set of
//! eight magnitudes on a 0.5 grid. Elements are stored as a sign bit plus a 3-bit
//! index into the chosen dialect. Because every representable magnitude is a
//! small integer in half-units, block dot products reduce to 4-bit unsigned
//! integer multiplies with a single exponent adjustment per block.
//!
//! The crate also carries the MXFP4 and NVFP4 baselines, a block-quantized
//! GEMM with integer MAC emulation, and a streaming KV cache.
//!
//! Numeric entry points are generic over [`Scalar`] (`f32` or `f64`). The
//! `*F32`/`*F64` aliases below name the common instantiations.

pub mod error;
pub mod fixedpoint;
pub mod formatbook;
pub mod gemm;
pub mod kvcache;
pub mod quantize;
pub mod scalar;
pub mod selection;

pub use error::{Error, Result};
pub use fixedpoint::{
    preprocess_block, round_to_half, shared_exponent, PreprocessedBlock, QuarterCode,
    SharedExponent, MAX_BLOCK_LEN,
};
pub use formatbook::{
    beneficial_ranges, build_default_formatbook, load_formatbook, pair_index_for_max,
    validate_formatbook, BeneficialRange, DialectId, DialectValueSet, Formatbook, HalfUnit,
    Violation, NUM_DIALECTS, NUM_PAIRS,
};
pub use gemm::{
    block_partial_value, effective_bitwidth, extract_blocks, fp16_round, gemm, gemm_reference,
    mac_block, quantize_matrix, quantize_matrix_with, relative_frobenius_error, AccumulatorMode,
    Axis, BlockFormat, BlockPartial, Matrix, QBlock, QuantizedMatrix,
};
pub use kvcache::{append_token, materialize, StreamingKeyCache, StreamingValueCache};
pub use quantize::{
    block_mse, dequantize_block, dequantize_block_mx, dequantize_block_nv, quantize_block,
    quantize_block_mse, quantize_block_mx, quantize_block_nv, quantize_block_with_dialect, quantize_element, Code,
    MxBlock, NvBlock, QuantizedBlock,
};
pub use scalar::Scalar;
pub use selection::{
    select_dialect_mse, select_dialect_two_stage, select_pair, selection_report, SelectionReport,
};

pub type MatrixF32 = Matrix<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type StreamingValueCacheF32 = StreamingValueCache<f32>;
pub type StreamingValueCacheF64 = StreamingValueCache<f64>;
