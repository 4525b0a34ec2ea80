use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point element type accepted by the quantizers.
///
/// All internal arithmetic that must be bit-exact runs in binary64; `as_f64`
/// is exact for both implementors, and `round_from` rounds to nearest.
pub trait Scalar:
    Float + Debug + Display + Default + Send + Sync + 'static
{
    fn as_f64(self) -> f64;
    fn round_from(v: f64) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn round_from(v: f64) -> Self {
                v as $t
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Exact `2^n` for `n` in the binary64 normal range.
#[inline]
pub(crate) fn pow2(n: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&n));
    f64::from_bits(((n + 1023) as u64) << 52)
}

/// `floor(log2(x))` for finite positive `x`, including subnormals.
pub(crate) fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        let mant = bits & ((1u64 << 52) - 1);
        // highest set bit of the subnormal mantissa
        -1074 + (63 - mant.leading_zeros() as i32)
    } else {
        biased - 1023
    }
}
