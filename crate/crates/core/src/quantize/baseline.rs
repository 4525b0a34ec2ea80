use super::minifloat::{Fp4E2M1, E4M3};
use crate::error::Result;
use crate::fixedpoint::{max_abs, shared_exponent, SharedExponent, MAX_BLOCK_LEN};
use crate::scalar::{pow2, Scalar};
use crate::Error;

/// MXFP4 block: power-of-two scale and FP4 E2M1 elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MxBlock {
    pub se: SharedExponent,
    pub codes: Vec<Fp4E2M1>,
}

/// NVFP4 block: E4M3 scale and FP4 E2M1 elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NvBlock {
    pub scale: E4M3,
    pub codes: Vec<Fp4E2M1>,
}

impl MxBlock {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

impl NvBlock {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

pub fn quantize_block_mx<T: Scalar>(block: &[T]) -> Result<MxBlock> {
    let se = shared_exponent(block)?;
    let codes = match se {
        SharedExponent::ZeroBlock => vec![Fp4E2M1::default(); block.len()],
        SharedExponent::Exponent(e) => {
            let inv = pow2(-i32::from(e));
            block
                .iter()
                .map(|x| Fp4E2M1::from_f64(x.as_f64() * inv))
                .collect()
        }
    };
    Ok(MxBlock { se, codes })
}

pub fn dequantize_block_mx<T: Scalar>(b: &MxBlock) -> Vec<T> {
    let scale = b.se.exponent().map_or(0.0, |e| pow2(i32::from(e)));
    b.codes
        .iter()
        .map(|c| T::round_from(c.to_f64() * scale))
        .collect()
}

pub fn quantize_block_nv<T: Scalar>(block: &[T]) -> Result<NvBlock> {
    if block.is_empty() || block.len() > MAX_BLOCK_LEN {
        return Err(Error::BlockLength {
            len: block.len(),
            max: MAX_BLOCK_LEN,
        });
    }
    if let Some(index) = block.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let scale = E4M3::from_f64_saturating(max_abs(block) / Fp4E2M1::MAX);
    let s = scale.to_f64();
    let codes = if s == 0.0 {
        vec![Fp4E2M1::default(); block.len()]
    } else {
        block
            .iter()
            .map(|x| Fp4E2M1::from_f64(x.as_f64() / s))
            .collect()
    };
    Ok(NvBlock { scale, codes })
}

pub fn dequantize_block_nv<T: Scalar>(b: &NvBlock) -> Vec<T> {
    let s = b.scale.to_f64();
    b.codes
        .iter()
        .map(|c| T::round_from(c.to_f64() * s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mx_rne_at_midpoint() {
        let b = quantize_block_mx(&[6.0f64, 5.0, 0.24]).unwrap();
        assert_eq!(b.se, SharedExponent::Exponent(0));
        assert_eq!(dequantize_block_mx::<f64>(&b), vec![6.0, 4.0, 0.0]);
    }

    #[test]
    fn mx_saturates_above_six() {
        let b = quantize_block_mx(&[7.9f64, -7.0]).unwrap();
        assert_eq!(dequantize_block_mx::<f64>(&b), vec![6.0, -6.0]);
    }

    #[test]
    fn mx_representable_round_trip() {
        let x = [0.0f64, 0.5, -1.0, 1.5, 2.0, -3.0, 4.0, 6.0].map(|v| v * 0.125);
        let b = quantize_block_mx(&x).unwrap();
        assert_eq!(dequantize_block_mx::<f64>(&b), x.to_vec());
    }

    #[test]
    fn mx_zero_block() {
        let b = quantize_block_mx(&[0.0f32; 4]).unwrap();
        assert!(b.se.is_zero_block());
        assert_eq!(dequantize_block_mx::<f32>(&b), vec![0.0; 4]);
    }

    #[test]
    fn nv_exact_max() {
        // 1.75 is an exact E4M3 value, so the max reconstructs exactly
        let x = [6.0 * 1.75f64, 1.0, -2.0, 0.3];
        let b = quantize_block_nv(&x).unwrap();
        assert_eq!(b.scale.to_f64(), 1.75);
        assert_eq!(dequantize_block_nv::<f64>(&b)[0], 10.5);
    }

    #[test]
    fn nv_zero_block() {
        let b = quantize_block_nv(&[0.0f64; 16]).unwrap();
        assert_eq!(b.scale.to_bits(), 0);
        assert!(b.codes.iter().all(|c| c.to_bits() == 0));
    }

    #[test]
    fn nv_saturating_scale() {
        let b = quantize_block_nv(&[1e6f64, -1.0]).unwrap();
        assert_eq!(b.scale.to_f64(), 448.0);
        assert_eq!(dequantize_block_nv::<f64>(&b)[0], 448.0 * 6.0);
    }

    #[test]
    fn nv_rejects_non_finite() {
        assert!(quantize_block_nv(&[1.0f64, f64::NAN]).is_err());
    }
}
