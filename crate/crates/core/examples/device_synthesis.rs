//! Sample a feed-forward PA-PUF, save it, reload it and watch one challenge
//! race through the stages.
//!
//! cargo run --example device_synthesis

use papuf::circuit::{trace, EvalOptions, Netlist};
use papuf::device::{synthesize_device, DelayParams, DeviceInstance};
use papuf::response::Challenge;

fn main() -> papuf::Result<()> {
    let netlist = Netlist::default_ff();
    let device = synthesize_device(DelayParams::default(), netlist, 42)?;

    let text = device.to_text();
    let reloaded = DeviceInstance::from_text(&text)?;
    assert_eq!(reloaded, device);
    println!("{} bytes of device file, first lines:", text.len());
    for line in text.lines().take(12) {
        println!("  {line}");
    }

    let challenge = Challenge::from_hex("0123456789abcdef", 64)?;
    for eval_seed in 0..5 {
        let t = trace(&device, &challenge, eval_seed, EvalOptions::default())?;
        let times: Vec<String> = t.arrivals.as_slice().iter().map(|x| format!("{x:.2}")).collect();
        println!("read {eval_seed}: arrivals T/C/B = {} -> bit {}", times.join(" / "), t.bit as u8);
    }
    Ok(())
}
