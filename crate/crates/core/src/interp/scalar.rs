//! Integer types the interpreter can run on.
//!
//! RelC integers are unbounded. `BigInt` is exact; the machine types are
//! faster and report overflow instead of wrapping, so a run on them either
//! agrees with the exact run or fails.

use std::fmt;
use std::hash::Hash;

use num_bigint::BigInt;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, FromPrimitive, One, ToPrimitive, Zero};

pub trait Scalar:
    Clone
    + Ord
    + Hash
    + fmt::Debug
    + fmt::Display
    + Zero
    + One
    + CheckedAdd
    + CheckedSub
    + CheckedMul
    + CheckedDiv
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Remainder with the sign of the dividend. `None` on a zero divisor
    /// or overflow.
    fn checked_rem_trunc(&self, rhs: &Self) -> Option<Self>;
    fn checked_negate(&self) -> Option<Self>;
    fn from_bigint(v: &BigInt) -> Option<Self>;
    fn to_bigint(&self) -> BigInt;
}

macro_rules! machine_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn checked_rem_trunc(&self, rhs: &Self) -> Option<Self> {
                self.checked_rem(*rhs)
            }
            fn checked_negate(&self) -> Option<Self> {
                self.checked_neg()
            }
            fn from_bigint(v: &BigInt) -> Option<Self> {
                <$t>::try_from(v).ok()
            }
            fn to_bigint(&self) -> BigInt {
                BigInt::from(*self)
            }
        }
    };
}

machine_scalar!(i64);
machine_scalar!(i128);

impl Scalar for BigInt {
    fn checked_rem_trunc(&self, rhs: &Self) -> Option<Self> {
        // BigInt's `%` truncates, like C.
        (!rhs.is_zero()).then(|| self % rhs)
    }
    fn checked_negate(&self) -> Option<Self> {
        Some(-self)
    }
    fn from_bigint(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
}
