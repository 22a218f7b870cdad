//! Finds the arbiter jitter that gives a 64-stage PA-PUF a target
//! reliability with 128-bit responses.
//!
//! cargo run --release --example noise_calibration [target]

use papuf::circuit::Netlist;
use papuf::device::{synthesize_population, DelayParams, DEFAULT_SIGMA_NOISE};
use papuf::metrics::{calibrate_noise, simulated_reliability, ReliabilityPlan};

fn main() -> papuf::Result<()> {
    let target: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(95.37);
    let devices = synthesize_population(DelayParams::default(), &Netlist::pa_puf(64)?, 30, 99)?;
    let plan = ReliabilityPlan::default();

    for sigma in [0.0, 1.0, 2.0, 3.0, 4.0] {
        println!("sigma_noise {sigma:.1}: reliability {:.3}%", simulated_reliability(&devices, sigma, &plan)?);
    }
    let cal = calibrate_noise(target, &devices, (0.0, 10.0), &plan)?;
    println!(
        "target {target}%: sigma_noise {:.4} gives {:.3}% after {} probes (library default {DEFAULT_SIGMA_NOISE})",
        cal.sigma_noise, cal.reliability, cal.evaluations
    );
    Ok(())
}
