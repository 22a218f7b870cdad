//! Fibonacci LFSR over the challenge register.
//!
//! Register bit `i` is challenge bit `i`. Each step shifts every bit one
//! position up and feeds the XOR of the tapped bits into bit 0. Tap positions
//! are 1-based, following the classic maximal-length tables (tap `w` is the
//! bit that falls off the end).

use crate::bits::mask;
use crate::error::{PufError, Result};

/// Maximal-length tap sets, `(width, taps)`.
pub const MAXIMAL_TAPS: &[(usize, &[u32])] = &[
    (2, &[2, 1]),
    (3, &[3, 2]),
    (4, &[4, 3]),
    (5, &[5, 3]),
    (6, &[6, 5]),
    (7, &[7, 6]),
    (8, &[8, 6, 5, 4]),
    (9, &[9, 5]),
    (10, &[10, 7]),
    (11, &[11, 9]),
    (12, &[12, 6, 4, 1]),
    (13, &[13, 4, 3, 1]),
    (14, &[14, 5, 3, 1]),
    (15, &[15, 14]),
    (16, &[16, 15, 13, 4]),
    (17, &[17, 14]),
    (18, &[18, 11]),
    (19, &[19, 6, 2, 1]),
    (20, &[20, 17]),
    (21, &[21, 19]),
    (22, &[22, 21]),
    (23, &[23, 18]),
    (24, &[24, 23, 22, 17]),
    (32, &[32, 22, 2, 1]),
    (64, &[64, 63, 61, 60]),
    (128, &[128, 126, 101, 99]),
];

pub fn taps_for(width: usize) -> Result<&'static [u32]> {
    MAXIMAL_TAPS
        .iter()
        .find(|(w, _)| *w == width)
        .map(|(_, t)| *t)
        .ok_or_else(|| PufError::Parameter(format!("no maximal-length LFSR taps for width {width}")))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lfsr {
    width: usize,
    taps: &'static [u32],
    tap_mask: u128,
    state: u128,
}

impl Lfsr {
    pub fn new(width: usize, state: u128) -> Result<Self> {
        let taps = taps_for(width)?;
        if state == 0 {
            return Err(PufError::DegenerateSeed);
        }
        if state & !mask(width) != 0 {
            return Err(PufError::Shape(format!("LFSR state wider than {width} bits")));
        }
        let tap_mask = taps.iter().fold(0u128, |m, &t| m | 1 << (t - 1));
        Ok(Lfsr {
            width,
            taps,
            tap_mask,
            state,
        })
    }

    pub fn state(&self) -> u128 {
        self.state
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn taps(&self) -> &'static [u32] {
        self.taps
    }

    pub fn step(&mut self) -> u128 {
        let feedback = (self.state & self.tap_mask).count_ones() as u128 & 1;
        self.state = ((self.state << 1) | feedback) & mask(self.width);
        self.state
    }

    /// Header form, e.g. `fibonacci/16/16,15,13,4`.
    pub fn describe(width: usize) -> Result<String> {
        let taps: Vec<String> = taps_for(width)?.iter().map(u32::to_string).collect();
        Ok(format!("fibonacci/{width}/{}", taps.join(",")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_is_refused() {
        assert_eq!(Lfsr::new(16, 0), Err(PufError::DegenerateSeed));
    }

    #[test]
    fn unknown_width_is_refused() {
        assert!(Lfsr::new(33, 1).is_err());
    }

    #[test]
    fn small_widths_have_full_period() {
        for &(width, _) in MAXIMAL_TAPS.iter().filter(|(w, _)| *w <= 12) {
            let mut l = Lfsr::new(width, 1).unwrap();
            let mut period = 0u64;
            loop {
                period += 1;
                if l.step() == 1 {
                    break;
                }
            }
            assert_eq!(period, (1u64 << width) - 1, "width {width}");
        }
    }
}
