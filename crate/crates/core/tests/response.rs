use papuf::circuit::Netlist;
use papuf::device::{synthesize_population, DelayParams};
use papuf::response::{taps_for, Lfsr, MAXIMAL_TAPS};
use papuf::response::{collect_crps, expand_challenge, Challenge, CrpSet};
use papuf::PufError;
use proptest::prelude::*;

#[test]
fn full_period_up_to_24_bits() {
    for width in 2..=24 {
        let mut l = Lfsr::new(width, 1).unwrap();
        let mut steps = 0u64;
        loop {
            steps += 1;
            if l.step() == 1 {
                break;
            }
            assert!(steps < 1 << width, "width {width} stuck");
        }
        assert_eq!(steps, (1 << width) - 1, "width {width}");
    }
}

/// The LFSR step as a linear map, stored as the images of the basis vectors.
#[derive(Clone, PartialEq)]
struct Map(Vec<u128>);

impl Map {
    fn step(width: usize) -> Self {
        Map((0..width)
            .map(|i| {
                let mut l = Lfsr::new(width, 1 << i).unwrap();
                l.step()
            })
            .collect())
    }

    fn identity(width: usize) -> Self {
        Map((0..width).map(|i| 1 << i).collect())
    }

    fn apply(&self, v: u128) -> u128 {
        (0..self.0.len()).filter(|&i| (v >> i) & 1 == 1).fold(0, |acc, i| acc ^ self.0[i])
    }

    fn then(&self, other: &Map) -> Map {
        Map(self.0.iter().map(|&c| other.apply(c)).collect())
    }

    fn pow(&self, mut e: u128) -> Map {
        let mut result = Map::identity(self.0.len());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.then(&base);
            }
            base = base.then(&base);
            e >>= 1;
        }
        result
    }
}

/// The transition has order exactly `2^n - 1` iff it returns to the
/// identity there and at no maximal proper divisor.
#[test]
fn wide_registers_are_maximal() {
    let factors: [(usize, &[u128]); 3] = [
        (32, &[3, 5, 17, 257, 65537]),
        (64, &[3, 5, 17, 257, 641, 65537, 6700417]),
        (128, &[3, 5, 17, 257, 641, 65537, 274177, 6700417, 67280421310721]),
    ];
    for (width, primes) in factors {
        let order = if width == 128 { u128::MAX } else { (1u128 << width) - 1 };
        assert_eq!(primes.iter().product::<u128>(), order, "factorisation of 2^{width}-1");
        let m = Map::step(width);
        let id = Map::identity(width);
        assert!(m.pow(order) == id, "width {width}");
        for q in primes {
            assert!(m.pow(order / q) != id, "width {width} divisor {q}");
        }
    }
}

#[test]
fn tap_table_covers_its_widths() {
    for (width, taps) in MAXIMAL_TAPS {
        assert_eq!(taps_for(*width).unwrap(), *taps);
        assert_eq!(taps[0] as usize, *width);
    }
    assert!(taps_for(25).is_err());
}

#[test]
fn zero_seed_is_degenerate() {
    assert_eq!(Lfsr::new(8, 0).unwrap_err(), PufError::DegenerateSeed);
    assert_eq!(expand_challenge(&Challenge::zero(64).unwrap(), 8).unwrap_err(), PufError::DegenerateSeed);
}

#[test]
fn crp_file_round_trip_and_width_mismatch() {
    let devs = synthesize_population(DelayParams::default(), &Netlist::ff_pa_puf(16, &[(2, 9)]).unwrap(), 2, 4).unwrap();
    let set = collect_crps(&devs, 5, 3, 32, 8).unwrap();
    let csv = set.to_csv();
    assert!(csv.starts_with("# netlist=ff-pa-puf/16/2:9\n# lfsr=fibonacci/16/"));
    assert_eq!(CrpSet::from_csv(&csv).unwrap(), set);
    let bad = csv.replacen(",32\n", ",31\n", 1);
    assert!(CrpSet::from_csv(&bad).is_err());
}

proptest! {
    #[test]
    fn expansion_is_deterministic_and_nonzero(bits in 1u128..u64::MAX as u128, count in 1usize..64) {
        let seed = Challenge::new(64, bits).unwrap();
        let a = expand_challenge(&seed, count).unwrap();
        prop_assert_eq!(&a, &expand_challenge(&seed, count).unwrap());
        prop_assert_eq!(a[0], seed);
        prop_assert!(a.iter().all(|c| c.count_ones() > 0));
    }

    #[test]
    fn hex_round_trip(width in 1usize..=128, bits: u128) {
        let mask = if width == 128 { u128::MAX } else { (1u128 << width) - 1 };
        let c = Challenge::new(width, bits & mask).unwrap();
        prop_assert_eq!(Challenge::from_hex(&c.to_hex(), width).unwrap(), c);
    }
}
