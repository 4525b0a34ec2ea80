//! FP4 E2M1 elements and FP8 E4M3 scales, both with round-to-nearest-even and
//! saturation on encode.

use crate::scalar::{floor_log2, pow2};

/// FP4 E2M1 magnitudes indexed by the low three bits.
pub const FP4_MAGNITUDES: [f64; 8] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];

/// A 4-bit E2M1 float: bit 3 sign, bits 2..1 exponent, bit 0 mantissa.
///
/// Encoding canonicalizes negative zero to positive zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp4E2M1(u8);

impl Fp4E2M1 {
    pub const MAX: f64 = 6.0;

    pub fn from_bits(bits: u8) -> Self {
        let b = bits & 0x0f;
        if b == 0b1000 {
            Fp4E2M1(0)
        } else {
            Fp4E2M1(b)
        }
    }

    #[inline]
    pub fn to_bits(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        self.0 & 0b1000 != 0
    }

    /// Magnitude in half-units, `{0, 1, 2, 3, 4, 6, 8, 12}`.
    #[inline]
    pub fn magnitude_half_units(self) -> u8 {
        (FP4_MAGNITUDES[(self.0 & 0b111) as usize] * 2.0) as u8
    }

    pub fn to_f64(self) -> f64 {
        let m = FP4_MAGNITUDES[(self.0 & 0b111) as usize];
        if self.is_negative() {
            -m
        } else {
            m
        }
    }

    /// Round-to-nearest-even, saturating at ±6.
    pub fn from_f64(x: f64) -> Self {
        debug_assert!(!x.is_nan());
        let mag = x.abs();
        let mut index = 7u8;
        for i in 0..7 {
            let mid = (FP4_MAGNITUDES[i] + FP4_MAGNITUDES[i + 1]) * 0.5;
            if mag < mid {
                index = i as u8;
                break;
            }
            if mag == mid {
                // the even code has a zero mantissa bit
                index = if i % 2 == 0 { i as u8 } else { i as u8 + 1 };
                break;
            }
        }
        if index == 0 || x >= 0.0 {
            Fp4E2M1(index)
        } else {
            Fp4E2M1(index | 0b1000)
        }
    }
}

/// An 8-bit E4M3 float (bias 7, no infinities, `S.1111.111` is NaN).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct E4M3(u8);

impl E4M3 {
    pub const MAX_FINITE: f64 = 448.0;
    const MAX_FINITE_BITS: u8 = 0x7e;

    pub fn from_bits(bits: u8) -> Self {
        E4M3(bits)
    }

    #[inline]
    pub fn to_bits(self) -> u8 {
        self.0
    }

    pub fn is_nan(self) -> bool {
        self.0 & 0x7f == 0x7f
    }

    pub fn to_f64(self) -> f64 {
        if self.is_nan() {
            return f64::NAN;
        }
        let exp = i32::from((self.0 >> 3) & 0x0f);
        let man = f64::from(self.0 & 0x07);
        let mag = if exp == 0 {
            man * pow2(-9)
        } else {
            (1.0 + man / 8.0) * pow2(exp - 7)
        };
        if self.0 & 0x80 != 0 {
            -mag
        } else {
            mag
        }
    }

    /// Round-to-nearest-even of a non-negative finite value, saturating to
    /// the largest finite magnitude.
    pub fn from_f64_saturating(x: f64) -> Self {
        debug_assert!(x >= 0.0 && x.is_finite());
        if x == 0.0 {
            return E4M3(0);
        }
        if x >= Self::MAX_FINITE {
            return E4M3(Self::MAX_FINITE_BITS);
        }
        let e = floor_log2(x);
        let bits = if e < -6 {
            // subnormal step is 2^-9; a carry to 8 lands on the smallest normal
            (x * pow2(9)).round_ties_even() as u8
        } else {
            let m = ((x * pow2(-e) - 1.0) * 8.0).round_ties_even() as i32;
            let (e, m) = if m == 8 { (e + 1, 0) } else { (e, m) };
            (((e + 7) << 3) | m) as u8
        };
        E4M3(bits.min(Self::MAX_FINITE_BITS))
    }
}
