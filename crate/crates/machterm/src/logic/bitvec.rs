//! Fixed-width bit-vector values with wrap-around arithmetic.
//!
//! Values are stored as the low `width` bits of a `u64`. Arithmetic wraps
//! modulo `2^width`; signed views use two's complement. Widths up to 60 bits
//! are supported so that template arithmetic can still be widened without
//! leaving the 64-bit representation.

use std::fmt;

pub const MAX_WIDTH: u32 = 60;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    width: u32,
    bits: u64,
}

impl BitVec {
    pub fn new(width: u32, bits: u64) -> Self {
        assert!(width >= 1 && width <= MAX_WIDTH, "unsupported width {width}");
        BitVec { width, bits: bits & Self::mask(width) }
    }

    pub fn from_i64(width: u32, v: i64) -> Self {
        BitVec::new(width, v as u64)
    }

    pub fn bool(b: bool) -> Self {
        BitVec::new(1, b as u64)
    }

    fn mask(width: u32) -> u64 {
        if width == 64 { u64::MAX } else { (1u64 << width) - 1 }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Unsigned value of the low `width` bits.
    pub fn to_u64(&self) -> u64 {
        self.bits
    }

    /// Two's-complement signed value.
    pub fn to_i64(&self) -> i64 {
        let sign = 1u64 << (self.width - 1);
        if self.bits & sign != 0 {
            (self.bits | !Self::mask(self.width)) as i64
        } else {
            self.bits as i64
        }
    }

    pub fn is_true(&self) -> bool {
        debug_assert_eq!(self.width, 1);
        self.bits != 0
    }

    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i < self.width);
        self.bits >> i & 1 != 0
    }

    pub fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.width, rhs.width);
        BitVec::new(self.width, self.bits.wrapping_add(rhs.bits))
    }

    pub fn sub(self, rhs: Self) -> Self {
        debug_assert_eq!(self.width, rhs.width);
        BitVec::new(self.width, self.bits.wrapping_sub(rhs.bits))
    }

    pub fn mul(self, rhs: Self) -> Self {
        debug_assert_eq!(self.width, rhs.width);
        BitVec::new(self.width, self.bits.wrapping_mul(rhs.bits))
    }

    pub fn neg(self) -> Self {
        BitVec::new(self.width, self.bits.wrapping_neg())
    }

    pub fn not(self) -> Self {
        BitVec::new(self.width, !self.bits)
    }

    pub fn and(self, rhs: Self) -> Self {
        debug_assert_eq!(self.width, rhs.width);
        BitVec::new(self.width, self.bits & rhs.bits)
    }

    pub fn or(self, rhs: Self) -> Self {
        debug_assert_eq!(self.width, rhs.width);
        BitVec::new(self.width, self.bits | rhs.bits)
    }

    pub fn xor(self, rhs: Self) -> Self {
        debug_assert_eq!(self.width, rhs.width);
        BitVec::new(self.width, self.bits ^ rhs.bits)
    }

    /// Logical shift left; shift amounts >= width yield 0.
    pub fn shl(self, rhs: Self) -> Self {
        let sh = rhs.bits.min(64);
        BitVec::new(self.width, if sh >= 64 { 0 } else { self.bits << sh })
    }

    pub fn lshr(self, rhs: Self) -> Self {
        let sh = rhs.bits.min(64);
        BitVec::new(self.width, if sh >= 64 { 0 } else { self.bits >> sh })
    }

    pub fn ashr(self, rhs: Self) -> Self {
        let sh = (rhs.bits.min(self.width as u64)) as u32;
        let v = self.to_i64() >> sh.min(63);
        BitVec::from_i64(self.width, v)
    }

    pub fn ult(self, rhs: Self) -> bool {
        self.bits < rhs.bits
    }

    pub fn ule(self, rhs: Self) -> bool {
        self.bits <= rhs.bits
    }

    pub fn slt(self, rhs: Self) -> bool {
        self.to_i64() < rhs.to_i64()
    }

    pub fn sle(self, rhs: Self) -> bool {
        self.to_i64() <= rhs.to_i64()
    }

    /// Truncate or extend to `width`, sign-extending when `sign_extend`.
    pub fn cast(self, width: u32, sign_extend: bool) -> Self {
        if width <= self.width {
            BitVec::new(width, self.bits)
        } else if sign_extend {
            BitVec::from_i64(width, self.to_i64())
        } else {
            BitVec::new(width, self.bits)
        }
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:bv{}", self.bits, self.width)
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsigned_wraps() {
        let a = BitVec::new(8, 255);
        let b = BitVec::new(8, 1);
        assert_eq!(a.add(b).to_u64(), 0);
    }

    #[test]
    fn signed_wraps() {
        let a = BitVec::from_i64(8, 127);
        let b = BitVec::from_i64(8, 1);
        assert_eq!(a.add(b).to_i64(), -128);
    }

    #[test]
    fn signed_view() {
        assert_eq!(BitVec::new(4, 0b1111).to_i64(), -1);
        assert_eq!(BitVec::new(4, 0b0111).to_i64(), 7);
        assert_eq!(BitVec::from_i64(4, -8).to_u64(), 8);
    }

    #[test]
    fn cast_extends() {
        let x = BitVec::new(8, 200);
        assert_eq!(x.cast(9, false).to_i64(), 200);
        let y = BitVec::from_i64(8, -56);
        assert_eq!(y.cast(9, true).to_i64(), -56);
        assert_eq!(y.cast(4, true).to_u64(), 0b1000);
    }

    #[test]
    fn shifts() {
        let x = BitVec::new(8, 0b1000_0001);
        assert_eq!(x.shl(BitVec::new(8, 1)).to_u64(), 0b0000_0010);
        assert_eq!(x.lshr(BitVec::new(8, 1)).to_u64(), 0b0100_0000);
        assert_eq!(x.ashr(BitVec::new(8, 1)).to_u64(), 0b1100_0000);
        assert_eq!(x.shl(BitVec::new(8, 200)).to_u64(), 0);
    }
}
