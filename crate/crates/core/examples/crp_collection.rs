//! Collect repeated multi-bit responses from a small PA-PUF population and
//! write them in the CRP file format.
//!
//! cargo run --example crp_collection [out.csv]

use papuf::circuit::Netlist;
use papuf::device::{synthesize_population, DelayParams};
use papuf::response::{collect_crps, expand_challenge, CrpSet};

fn main() -> papuf::Result<()> {
    let devices = synthesize_population(DelayParams::default(), &Netlist::pa_puf(64)?, 4, 7)?;
    let crps = collect_crps(&devices, 8, 3, 32, 99)?;

    let first = &crps.records()[0];
    let expanded = expand_challenge(&first.seed_challenge, 4)?;
    println!("seed challenge {} expands to:", first.seed_challenge.to_hex());
    for c in &expanded {
        println!("  {}", c.to_hex());
    }

    let csv = crps.to_csv();
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, &csv)?,
        None => print!("{}", csv.lines().take(10).map(|l| format!("{l}\n")).collect::<String>()),
    }
    assert_eq!(CrpSet::from_csv(&csv)?, crps);
    println!("{} records from {} devices", crps.len(), crps.device_ids().len());
    Ok(())
}
