//! Fixed-width bit words used for challenges and responses.
//!
//! Bit `i` of a word is stored at bit position `i` of a `u128`. The text form
//! is hex with bit 0 as the most significant bit of the first nibble; a word
//! whose width is not a multiple of four is zero-padded on the right.

use crate::error::{PufError, Result};

pub const MAX_WIDTH: usize = 128;

pub(crate) fn mask(width: usize) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

pub(crate) fn to_hex(bits: u128, width: usize) -> String {
    let nibbles = width.div_ceil(4);
    let mut out = String::with_capacity(nibbles);
    for j in 0..nibbles {
        let mut v = 0u32;
        for b in 0..4 {
            let i = 4 * j + b;
            if i < width && (bits >> i) & 1 == 1 {
                v |= 8 >> b;
            }
        }
        out.push(char::from_digit(v, 16).expect("nibble"));
    }
    out
}

pub(crate) fn from_hex(text: &str, width: usize, what: &'static str) -> Result<u128> {
    let text = text.trim();
    let text = text.strip_prefix("0x").unwrap_or(text);
    if width == 0 || width > MAX_WIDTH {
        return Err(PufError::format(what, format!("width {width} outside 1..=128")));
    }
    if text.len() != width.div_ceil(4) {
        return Err(PufError::format(
            what,
            format!("{} hex digits for a {width}-bit word", text.len()),
        ));
    }
    let mut bits = 0u128;
    for (j, c) in text.chars().enumerate() {
        let v = c
            .to_digit(16)
            .ok_or_else(|| PufError::format(what, format!("bad hex digit {c:?}")))?;
        for b in 0..4 {
            if v & (8 >> b) != 0 {
                let i = 4 * j + b;
                if i >= width {
                    return Err(PufError::format(what, "padding bits must be zero"));
                }
                bits |= 1 << i;
            }
        }
    }
    Ok(bits)
}

macro_rules! bit_word {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name {
            width: usize,
            bits: u128,
        }

        impl $name {
            /// Builds a word from the low `width` bits of `bits`; higher bits must be clear.
            pub fn new(width: usize, bits: u128) -> Result<Self> {
                if width == 0 || width > $crate::bits::MAX_WIDTH {
                    return Err(PufError::Shape(format!(
                        concat!($what, " width {} outside 1..=128"),
                        width
                    )));
                }
                if bits & !$crate::bits::mask(width) != 0 {
                    return Err(PufError::Shape(format!(
                        concat!($what, " has bits set above width {}"),
                        width
                    )));
                }
                Ok(Self { width, bits })
            }

            pub fn zero(width: usize) -> Result<Self> {
                Self::new(width, 0)
            }

            pub fn from_bits(bits: &[bool]) -> Result<Self> {
                let packed = bits
                    .iter()
                    .enumerate()
                    .fold(0u128, |acc, (i, &b)| if b { acc | 1 << i } else { acc });
                Self::new(bits.len(), packed)
            }

            /// Parses the `"0110..."` textual form, bit 0 first.
            pub fn from_bit_str(text: &str) -> Result<Self> {
                let bits = text
                    .chars()
                    .filter(|c| *c != '_')
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(PufError::format($what, format!("bad bit {other:?}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::from_bits(&bits)
            }

            pub fn from_hex(text: &str, width: usize) -> Result<Self> {
                let bits = $crate::bits::from_hex(text, width, $what)?;
                Ok(Self { width, bits })
            }

            pub fn to_hex(&self) -> String {
                $crate::bits::to_hex(self.bits, self.width)
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn raw(&self) -> u128 {
                self.bits
            }

            pub fn bit(&self, i: usize) -> bool {
                debug_assert!(i < self.width);
                (self.bits >> i) & 1 == 1
            }

            pub fn with_flipped(&self, i: usize) -> Self {
                assert!(i < self.width, "bit {i} outside width {}", self.width);
                Self { width: self.width, bits: self.bits ^ (1 << i) }
            }

            pub fn complement(&self) -> Self {
                Self { width: self.width, bits: !self.bits & $crate::bits::mask(self.width) }
            }

            pub fn count_ones(&self) -> u32 {
                self.bits.count_ones()
            }

            pub fn hamming(&self, other: &Self) -> Result<u32> {
                if self.width != other.width {
                    return Err(PufError::Shape(format!(
                        concat!($what, " widths differ: {} vs {}"),
                        self.width, other.width
                    )));
                }
                Ok((self.bits ^ other.bits).count_ones())
            }

            pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
                (0..self.width).map(move |i| self.bit(i))
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                for b in self.iter() {
                    f.write_str(if b { "1" } else { "0" })?;
                }
                Ok(())
            }
        }
    };
}

pub(crate) use bit_word;
