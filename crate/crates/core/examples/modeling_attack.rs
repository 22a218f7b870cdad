//! Logistic-regression attacks on the classical arbiter PUF and on PA-PUF
//! variants under the same CRP budget.
//!
//! cargo run --release --example modeling_attack

use papuf::attack::{compare_csv, compare_designs, AttackBudget, FeatureKind};
use papuf::circuit::Netlist;

fn main() -> papuf::Result<()> {
    let designs = [
        Netlist::apuf(64)?,
        Netlist::pa_puf(64)?,
        Netlist::with_spread_taps(64, 3)?,
    ];
    let seeds: Vec<u64> = (0..5).collect();
    let rows = compare_designs(
        &designs,
        &[FeatureKind::Parity, FeatureKind::RawBits],
        &AttackBudget::default(),
        &seeds,
    )?;
    print!("{}", compare_csv(&rows));
    Ok(())
}
