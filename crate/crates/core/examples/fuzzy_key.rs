//! Derive a 64-bit key from a noisy PA-PUF with BCH(127,64,10) helper data
//! and count how often it comes back.
//!
//! cargo run --release --example fuzzy_key

use papuf::circuit::Netlist;
use papuf::device::{synthesize_device, DelayParams};
use papuf::keyfuzz::{enroll, reproduce, BchCode, HelperData, Reproduction};
use papuf::response::{evaluate_response, majority_vote, Challenge, Response};
use papuf::seed::{derive_seed, rng};

fn reads(device: &papuf::device::DeviceInstance, c: &Challenge, n: u64, seed: u64) -> papuf::Result<Vec<Response>> {
    (0..n).map(|i| evaluate_response(device, c, 128, derive_seed(seed, i))).collect()
}

fn main() -> papuf::Result<()> {
    let code = BchCode::default_key_code();
    let device = synthesize_device(DelayParams::default(), Netlist::pa_puf(64)?, 5)?;
    let challenge = Challenge::random(64, &mut rng(6))?;

    let reference = majority_vote(&reads(&device, &challenge, 11, 0)?)?;
    let (helper, key) = enroll(&reference, &code, 7)?;
    let stored = HelperData::from_text(&helper.to_text())?;
    println!("{code}, key {}", key.to_hex());

    let (mut single, mut voted, mut corrected) = (0, 0, 0u32);
    let trials = 500;
    for t in 1..=trials {
        let fresh = reads(&device, &challenge, 11, derive_seed(1000, t))?;
        if reproduce(&fresh[0], &stored)?.key() == Some(key) {
            single += 1;
        }
        if let Reproduction::Key { key: k, corrected: c } = reproduce(&majority_vote(&fresh)?, &stored)? {
            voted += (k == key) as u32;
            corrected = corrected.max(c);
        }
    }
    println!("single read: {single}/{trials} keys recovered");
    println!("11-read majority: {voted}/{trials} keys recovered, at most {corrected} bits corrected");
    Ok(())
}
