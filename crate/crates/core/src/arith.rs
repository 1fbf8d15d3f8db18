//! Fixed-width two's-complement words.
//!
//! Every register and datapath value in the simulator is a [`Word`]: an
//! unsigned bit pattern of `width` bits read back as a signed integer.
//! Arithmetic wraps modulo `2^width` like a hardware adder; there is no
//! saturation and no overflow trap.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_WIDTH: u32 = 64;

/// A `width`-bit two's-complement value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    width: u32,
    bits: u64,
}

#[inline]
pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Reduces `value` modulo `2^width` and reads it back as a signed integer.
#[inline]
pub fn wrap_to_width(value: i128, width: u32) -> i64 {
    let bits = (value as u64) & width_mask(width);
    sign_extend(bits, width)
}

#[inline]
fn sign_extend(bits: u64, width: u32) -> i64 {
    let shift = 64 - width;
    ((bits << shift) as i64) >> shift
}

/// True iff `value` is representable as a signed `width`-bit integer.
pub fn fits(value: i64, width: u32) -> bool {
    if width >= 64 {
        return true;
    }
    let lo = -(1i64 << (width - 1));
    let hi = (1i64 << (width - 1)) - 1;
    (lo..=hi).contains(&value)
}

fn check_width(width: u32) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        Err(Error::InvalidWidth(width))
    } else {
        Ok(())
    }
}

impl Word {
    /// Wraps `value` into `width` bits.
    ///
    /// Panics if `width` is outside `1..=64`; use [`Word::try_new`] for
    /// untrusted widths.
    pub fn new(value: i64, width: u32) -> Self {
        Self::try_new(value, width).expect("word width must be 1..=64")
    }

    pub fn try_new(value: i64, width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(Word {
            width,
            bits: (value as u64) & width_mask(width),
        })
    }

    /// Builds a word from a raw bit pattern; bits above `width` are dropped.
    pub fn from_bits(bits: u64, width: u32) -> Self {
        check_width(width).expect("word width must be 1..=64");
        Word {
            width,
            bits: bits & width_mask(width),
        }
    }

    pub fn zero(width: u32) -> Self {
        Self::new(0, width)
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    /// Signed interpretation of the bit pattern.
    pub fn value(self) -> i64 {
        sign_extend(self.bits, self.width)
    }

    pub fn bit(self, bit: u32) -> bool {
        bit < self.width && (self.bits >> bit) & 1 == 1
    }

    /// `(self + other) mod 2^width`.
    pub fn wrap_add(self, other: Word) -> Result<Word> {
        if self.width != other.width {
            return Err(Error::WidthMismatch(self.width, other.width));
        }
        Ok(Word {
            width: self.width,
            bits: self.bits.wrapping_add(other.bits) & width_mask(self.width),
        })
    }

    /// Full signed product of `self` and `other`, reduced modulo
    /// `2^out_width`. Both operands are sign-extended first.
    pub fn wrap_mul(self, other: Word, out_width: u32) -> Result<Word> {
        check_width(out_width)?;
        let widest = self.width.max(other.width);
        if out_width < widest {
            return Err(Error::WidthMismatch(out_width, widest));
        }
        let product = self.value() as i128 * other.value() as i128;
        Ok(Word::new(wrap_to_width(product, out_width), out_width))
    }

    /// Bitwise complement; as a signed value this is `-self - 1`.
    pub fn bit_not(self) -> Word {
        Word {
            width: self.width,
            bits: !self.bits & width_mask(self.width),
        }
    }

    /// Returns `self` with bit `bit` forced to `stuck`.
    pub fn force_bit(self, bit: u32, stuck: bool) -> Result<Word> {
        if bit >= self.width {
            return Err(Error::BitOutOfRange {
                bit,
                width: self.width,
            });
        }
        let bits = if stuck {
            self.bits | (1 << bit)
        } else {
            self.bits & !(1 << bit)
        };
        Ok(Word {
            width: self.width,
            bits,
        })
    }

    /// True iff the two words have equal width and every bit differs.
    pub fn is_bitwise_complement(self, other: Word) -> bool {
        self.width == other.width && self.bits == other.bit_not().bits
    }

    /// Re-reads the signed value at another width (sign extension or
    /// truncation).
    pub fn resize(self, width: u32) -> Word {
        Word::new(self.value(), width)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}i{}", self.value(), self.width)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}
