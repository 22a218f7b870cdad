//! Reliability and uniqueness as feed-forward arbiters are added to a
//! 16-stage PA-PUF.
//!
//! cargo run --release --example feed_forward_sweep

use papuf::circuit::Netlist;
use papuf::metrics::{spearman, sweep_csv, sweep_feed_forward, SweepPlan};

fn main() -> papuf::Result<()> {
    let plan = SweepPlan::default();
    let taps: Vec<usize> = (0..=6).collect();
    for k in &taps {
        println!("# {k} taps: {}", Netlist::with_spread_taps(16, *k)?);
    }
    let rows = sweep_feed_forward(&Netlist::pa_puf(16)?, &taps, &plan)?;
    print!("{}", sweep_csv("taps", &rows));

    let x: Vec<f64> = taps.iter().map(|&t| t as f64).collect();
    let rel: Vec<f64> = rows.iter().map(|r| r.reliability).collect();
    let uniq: Vec<f64> = rows.iter().map(|r| r.uniqueness).collect();
    println!("spearman(taps, reliability) = {:?}", spearman(&x, &rel));
    println!("spearman(taps, uniqueness)  = {:?}", spearman(&x, &uniq));
    Ok(())
}
