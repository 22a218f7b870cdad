//! The full quality report of a PA-PUF population, plus the one-bit-change
//! intra-HD histogram of a single device.
//!
//! cargo run --release --example quality_metrics

use papuf::circuit::Netlist;
use papuf::device::{synthesize_population, DelayParams};
use papuf::metrics::{neighbor_intra_hd, Enrollment, MetricsReport};
use papuf::response::{collect_crps, Challenge};
use papuf::seed::rng;

fn main() -> papuf::Result<()> {
    let devices = synthesize_population(DelayParams::default(), &Netlist::pa_puf(64)?, 10, 1)?;
    let crps = collect_crps(&devices, 50, 11, 128, 2)?;
    let report = MetricsReport::compute(&crps, Enrollment::default())?;
    print!("{}", report.to_kv());

    let start = Challenge::random(64, &mut rng(3))?;
    let walk = neighbor_intra_hd(&devices[0], &start, 300, 128, 4)?;
    println!(
        "one-bit neighbours: mean {:.2}%, mode {} of 128 bits",
        walk.percent,
        walk.histogram.mode().unwrap_or(0)
    );
    Ok(())
}
