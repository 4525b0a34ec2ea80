//! `BDQ1` quantized-matrix files.
//!
//! Header: magic, format byte (0 dialect, 1 mx, 2 nv), u16 block size, axis
//! byte (0 = blocks along columns, 1 = along rows), u32 rows, u32 cols, all
//! little-endian. Then one record per block in row-major block-grid order:
//! a scale byte (signed exponent with -128 for a zero block, or the E4M3 bits
//! for nv), a dialect byte (0xFF for mx/nv), and `ceil(B/2)` bytes of nibbles
//! with element `i` in byte `i >> 1`, low nibble first.

use std::fs;
use std::path::Path;

use blockdialect::quantize::minifloat::{Fp4E2M1, E4M3};
use blockdialect::{
    Axis, BlockFormat, Code, DialectId, MxBlock, NvBlock, QBlock, QuantizedBlock,
    QuantizedMatrix, SharedExponent,
};
use byteorder::{ByteOrder, LittleEndian};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"BDQ1";
const HEADER_LEN: usize = 4 + 1 + 2 + 1 + 4 + 4;
const NO_DIALECT: u8 = 0xff;

pub fn format_code(f: BlockFormat) -> u8 {
    match f {
        BlockFormat::Dialect => 0,
        BlockFormat::Mx => 1,
        BlockFormat::Nv => 2,
    }
}

fn axis_code(a: Axis) -> u8 {
    match a {
        Axis::Cols => 0,
        Axis::Rows => 1,
    }
}

fn pack(nibbles: impl ExactSizeIterator<Item = u8>, out: &mut Vec<u8>) {
    let n = nibbles.len();
    let start = out.len();
    out.resize(start + n.div_ceil(2), 0);
    for (i, v) in nibbles.enumerate() {
        out[start + (i >> 1)] |= v << ((i & 1) * 4);
    }
}

pub fn encode(qm: &QuantizedMatrix) -> Vec<u8> {
    let b = qm.block_size();
    let mut out = Vec::with_capacity(HEADER_LEN + qm.blocks().len() * (2 + b.div_ceil(2)));
    out.extend_from_slice(MAGIC);
    out.push(format_code(qm.format()));
    let mut buf = [0u8; 4];
    LittleEndian::write_u16(&mut buf, b as u16);
    out.extend_from_slice(&buf[..2]);
    out.push(axis_code(qm.axis()));
    LittleEndian::write_u32(&mut buf, qm.rows() as u32);
    out.extend_from_slice(&buf);
    LittleEndian::write_u32(&mut buf, qm.cols() as u32);
    out.extend_from_slice(&buf);
    for blk in qm.blocks() {
        match blk {
            QBlock::Dialect(q) => {
                out.push(q.se.to_byte() as u8);
                out.push(q.dialect.get());
                pack(q.codes.iter().map(|c| c.to_nibble()), &mut out);
            }
            QBlock::Mx(m) => {
                out.push(m.se.to_byte() as u8);
                out.push(NO_DIALECT);
                pack(m.codes.iter().map(|c| c.to_bits()), &mut out);
            }
            QBlock::Nv(n) => {
                out.push(n.scale.to_bits());
                out.push(NO_DIALECT);
                pack(n.codes.iter().map(|c| c.to_bits()), &mut out);
            }
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Format(msg.into())
}

/// Decodes and validates; accepts only canonical encodings so that
/// `encode(decode(bytes)) == bytes`.
pub fn decode(bytes: &[u8]) -> Result<QuantizedMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic, expected BDQ1"));
    }
    let format = match bytes[4] {
        0 => BlockFormat::Dialect,
        1 => BlockFormat::Mx,
        2 => BlockFormat::Nv,
        f => return Err(bad(format!("unknown format {f}"))),
    };
    let b = usize::from(LittleEndian::read_u16(&bytes[5..7]));
    let axis = match bytes[7] {
        0 => Axis::Cols,
        1 => Axis::Rows,
        a => return Err(bad(format!("unknown axis {a}"))),
    };
    let rows = LittleEndian::read_u32(&bytes[8..12]) as usize;
    let cols = LittleEndian::read_u32(&bytes[12..16]) as usize;
    if b == 0 || b > blockdialect::MAX_BLOCK_LEN {
        return Err(bad(format!("block size {b} outside [1, 64]")));
    }
    let dim = if axis == Axis::Cols { cols } else { rows };
    if dim % b != 0 {
        return Err(bad(format!("dimension {dim} not divisible by block size {b}")));
    }
    let nblocks = rows
        .checked_mul(cols)
        .ok_or_else(|| bad("shape overflows"))?
        / b;
    let record = 2 + b.div_ceil(2);
    let body = &bytes[HEADER_LEN..];
    if Some(body.len()) != nblocks.checked_mul(record) {
        return Err(bad(format!(
            "body is {} bytes, expected {} blocks of {record}",
            body.len(),
            nblocks
        )));
    }
    let mut blocks = Vec::with_capacity(nblocks);
    for (k, rec) in body.chunks_exact(record).enumerate() {
        let nibbles: Vec<u8> = (0..b).map(|i| (rec[2 + (i >> 1)] >> ((i & 1) * 4)) & 0x0f).collect();
        if b % 2 == 1 && rec[record - 1] >> 4 != 0 {
            return Err(bad(format!("block {k}: nonzero padding nibble")));
        }
        if nibbles.contains(&0b1000) {
            return Err(bad(format!("block {k}: negative zero code")));
        }
        let blk = match format {
            BlockFormat::Dialect => {
                let se = SharedExponent::from_byte(rec[0] as i8);
                let dialect = DialectId::new(usize::from(rec[1]))
                    .map_err(|_| bad(format!("block {k}: dialect id {} outside [0, 15]", rec[1])))?;
                let codes: Vec<Code> = nibbles.iter().map(|&n| Code::from_nibble(n)).collect();
                if se.is_zero_block() && codes.iter().any(|c| c.index != 0) {
                    return Err(bad(format!("block {k}: zero block with nonzero codes")));
                }
                QBlock::Dialect(QuantizedBlock { se, dialect, codes })
            }
            BlockFormat::Mx | BlockFormat::Nv => {
                if rec[1] != NO_DIALECT {
                    return Err(bad(format!("block {k}: dialect byte must be 0xFF")));
                }
                let codes: Vec<Fp4E2M1> = nibbles.iter().map(|&n| Fp4E2M1::from_bits(n)).collect();
                if format == BlockFormat::Mx {
                    let se = SharedExponent::from_byte(rec[0] as i8);
                    if se.is_zero_block() && codes.iter().any(|c| c.to_bits() != 0) {
                        return Err(bad(format!("block {k}: zero block with nonzero codes")));
                    }
                    QBlock::Mx(MxBlock { se, codes })
                } else {
                    let scale = E4M3::from_bits(rec[0]);
                    if scale.is_nan() || rec[0] & 0x80 != 0 {
                        return Err(bad(format!("block {k}: invalid E4M3 scale {:#04x}", rec[0])));
                    }
                    QBlock::Nv(NvBlock { scale, codes })
                }
            }
        };
        blocks.push(blk);
    }
    Ok(QuantizedMatrix::from_blocks(rows, cols, b, axis, format, blocks)?)
}

pub fn load(path: &Path) -> Result<QuantizedMatrix> {
    decode(&fs::read(path)?)
}

pub fn save(qm: &QuantizedMatrix, path: &Path) -> Result<()> {
    fs::write(path, encode(qm))?;
    Ok(())
}
