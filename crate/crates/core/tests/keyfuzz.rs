mod support;

use papuf::keyfuzz::{enroll, reproduce, BchCode, Decoding, Reproduction, Word};
use papuf::response::Response;
use papuf::seed::rng;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;
use support::oracle::naive_nearest_codeword;

#[test]
fn bch_15_7_matches_brute_force_everywhere() {
    let code = BchCode::new(4, 2).unwrap();
    for received in 0..1u128 << 15 {
        let (nearest, distance) = naive_nearest_codeword(received, 15, code.generator()).unwrap();
        match code.decode(&Word::new(15, received).unwrap()).unwrap() {
            Decoding::Corrected { message, errors } => {
                assert!(distance <= 2, "word {received:x} decoded from distance {distance}");
                assert_eq!(errors, distance);
                assert_eq!(message.raw(), nearest >> 8);
            }
            Decoding::Failure => assert!(distance > 2, "word {received:x} at distance {distance} rejected"),
        }
    }
}

#[test]
fn oracle_basics() {
    let code = BchCode::new(4, 2).unwrap();
    assert_eq!(naive_nearest_codeword(0, 15, code.generator()).unwrap(), (0, 0));
    assert!(naive_nearest_codeword(0, 31, BchCode::new(5, 2).unwrap().generator()).is_err());
}

#[test]
fn weight_one_errors_always_corrected() {
    for (m, t) in [(3, 1), (4, 2), (5, 3), (6, 5), (7, 10)] {
        let code = BchCode::new(m, t).unwrap();
        let msg = Word::new(code.k(), 0x5A5A_5A5A_5A5A_5A5A & ((1u128 << code.k()) - 1)).unwrap();
        let cw = code.encode(&msg).unwrap();
        for i in 0..code.n() {
            assert_eq!(
                code.decode(&cw.with_flipped(i)).unwrap(),
                Decoding::Corrected { message: msg, errors: 1 },
                "{code} position {i}"
            );
        }
    }
}

fn with_errors(word: &Word, count: usize, seed: u64) -> Word {
    let mut bits = word.raw();
    for i in sample(&mut rng(seed), word.width(), count) {
        bits ^= 1 << i;
    }
    Word::new(word.width(), bits).unwrap()
}

#[test]
fn beyond_t_is_never_silently_the_original() {
    let code = BchCode::default_key_code();
    let mut r = rng(77);
    let mut failures = 0;
    for trial in 0..300 {
        let msg = Word::new(64, r.random::<u64>() as u128).unwrap();
        let cw = code.encode(&msg).unwrap();
        match code.decode(&with_errors(&cw, 15, trial)).unwrap() {
            Decoding::Failure => failures += 1,
            Decoding::Corrected { message, .. } => assert_ne!(message, msg),
        }
    }
    assert!(failures > 290, "only {failures} of 300 flagged");
}

#[test]
fn helper_with_a_foreign_response_does_not_yield_the_key() {
    let code = BchCode::default_key_code();
    let mut r = rng(8);
    for seed in 0..200 {
        let own = Response::new(128, r.random()).unwrap();
        let other = Response::new(128, r.random()).unwrap();
        let (helper, key) = enroll(&own, &code, seed).unwrap();
        assert_ne!(reproduce(&other, &helper).unwrap().key(), Some(key));
    }
}

#[test]
fn half_the_bits_flipped_fails() {
    let code = BchCode::default_key_code();
    let resp = Response::new(128, 0xFEED_FACE_CAFE_BEEF_0000_1111_2222_3333).unwrap();
    let (helper, _) = enroll(&resp, &code, 1).unwrap();
    let mut fails = 0;
    for s in 0..100 {
        let mut bits = resp.raw();
        for i in sample(&mut rng(s), 127, 63) {
            bits ^= 1 << i;
        }
        if reproduce(&Response::new(128, bits).unwrap(), &helper).unwrap() == Reproduction::Failure {
            fails += 1;
        }
    }
    assert!(fails >= 95, "{fails}");
}

fn code_strategy() -> impl Strategy<Value = BchCode> {
    prop_oneof![
        (1usize..=2).prop_map(|t| BchCode::new(4, t).unwrap()),
        (1usize..=7).prop_map(|t| BchCode::new(5, t).unwrap()),
        (1usize..=13).prop_map(|t| BchCode::new(6, t).unwrap()),
        (1usize..=15).prop_map(|t| BchCode::new(7, t).unwrap()),
    ]
}

proptest! {
    #[test]
    fn up_to_t_errors_round_trip(code in code_strategy(), msg: u128, seed: u64, frac in 0.0f64..=1.0) {
        let message = Word::new(code.k(), msg & ((1u128 << code.k()) - 1)).unwrap();
        let cw = code.encode(&message).unwrap();
        prop_assert!(code.is_codeword(&cw));
        let errors = (frac * code.t() as f64).round() as usize;
        prop_assert_eq!(
            code.decode(&with_errors(&cw, errors, seed)).unwrap(),
            Decoding::Corrected { message, errors: errors as u32 }
        );
    }

    #[test]
    fn helper_xor_response_is_a_codeword(bits: u128, key_seed: u64) {
        let code = BchCode::default_key_code();
        let resp = Response::new(128, bits).unwrap();
        let (helper, key) = enroll(&resp, &code, key_seed).unwrap();
        let slice = resp.raw() & ((1u128 << 127) - 1);
        prop_assert!(code.is_codeword(&Word::new(127, slice ^ helper.offset.raw()).unwrap()));
        prop_assert_eq!(reproduce(&resp, &helper).unwrap().key(), Some(key));
    }
}
