//! The priority arbiter and feed-forward arbiter on every strict arrival
//! order of the three lines.
//!
//! cargo run --example arbiters

use papuf::circuit::{feed_forward_arbiter, priority_arbiter, ArrivalTimes, B, C, T};

fn main() -> papuf::Result<()> {
    let names = ["T", "C", "B"];
    println!("order  R  F0 F1 F2");
    for order in [[T, C, B], [T, B, C], [C, T, B], [C, B, T], [B, T, C], [B, C, T]] {
        let mut t = [0.0; 3];
        for (rank, &line) in order.iter().enumerate() {
            t[line] = 10.0 + rank as f64;
        }
        let arrivals = ArrivalTimes::three(t[0], t[1], t[2])?;
        let r = priority_arbiter(&arrivals, 0.0, 0);
        let (f0, f1, f2) = feed_forward_arbiter(&arrivals, 0.0, 0);
        let label: String = order.iter().map(|&l| names[l]).collect();
        println!("{label}    {}  {}  {}  {}", r as u8, f0 as u8, f1 as u8, f2 as u8);
    }
    Ok(())
}
