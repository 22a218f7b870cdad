//! Brute-force references for the library under test. Nothing here calls
//! into the code it checks beyond reading device delays and netlist shape.

use papuf::device::DeviceInstance;
use papuf::response::Challenge;

const MAX_ORACLE_STAGES: usize = 4;
const MAX_ORACLE_N: usize = 15;

/// Source line feeding output line `line` at one stage.
fn source(line: usize, lines: usize, crossed: bool) -> usize {
    match (lines, crossed) {
        (_, false) => line,
        (2, true) => 1 - line,
        // Crossed 3-line stage: T takes B, C takes T, B takes C.
        (3, true) => [2, 0, 1][line],
        _ => unreachable!(),
    }
}

/// Arrival time of `line` after `upto` stages, by walking its path
/// backwards and summing the segments it used.
fn path_delay(device: &DeviceInstance, selects: &[[bool; 3]], line: usize, upto: usize) -> f64 {
    let lines = device.netlist().lines();
    let mut total = 0.0;
    let mut current = line;
    for stage in (0..upto).rev() {
        let s = selects[stage][current];
        total += device.delay(stage, s, current);
        current = source(current, lines, s);
    }
    total
}

/// `x` strictly before `y`; exact ties count as not first.
fn before(x: f64, y: f64) -> bool {
    x < y
}

/// Output for each strict arrival order of (T, C, B), listed first to last.
const ORDER_TABLE: [([usize; 3], bool); 6] = [
    ([0, 1, 2], true),
    ([1, 2, 0], true),
    ([2, 0, 1], true),
    ([0, 2, 1], false),
    ([2, 1, 0], false),
    ([1, 0, 2], false),
];

fn priority_output(t: [f64; 3]) -> bool {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
    let strict = t[order[0]] < t[order[1]] && t[order[1]] < t[order[2]];
    if strict {
        ORDER_TABLE.iter().find(|(o, _)| *o == order).unwrap().1
    } else {
        // Ties under a zero window with the data input losing.
        let q = [before(t[0], t[1]), before(t[1], t[2]), before(t[2], t[0])];
        !(q[0] ^ q[1] ^ q[2])
    }
}

/// Noiseless response of a small device, or `Err` past the size guard.
/// Ties resolve as `0` for each pairwise decision.
pub fn exhaustive_propagate(device: &DeviceInstance, challenge: &Challenge) -> Result<bool, String> {
    let netlist = device.netlist();
    let n = netlist.stages();
    if n > MAX_ORACLE_STAGES {
        return Err(format!("{n} stages exceeds the oracle cap of {MAX_ORACLE_STAGES}"));
    }
    let lines = netlist.lines();
    let mut selects: Vec<[bool; 3]> = (0..n).map(|i| [challenge.bit(i); 3]).collect();
    let mut taps = netlist.ff_taps().to_vec();
    taps.sort_by_key(|t| t.tap_stage);
    for tap in taps {
        let t: Vec<f64> = (0..3).map(|l| path_delay(device, &selects, l, tap.tap_stage + 1)).collect();
        selects[tap.target_stage] = [before(t[0], t[1]), before(t[1], t[2]), before(t[2], t[0])];
    }
    let t: Vec<f64> = (0..lines).map(|l| path_delay(device, &selects, l, n)).collect();
    Ok(if lines == 2 {
        before(t[0], t[1])
    } else {
        priority_output([t[0], t[1], t[2]])
    })
}

fn gf2_mul(a: u128, b: u128) -> u128 {
    let mut out = 0;
    for i in 0..128 {
        if (b >> i) & 1 == 1 {
            out ^= a << i;
        }
    }
    out
}

/// Closest codeword to `received` among all multiples of `generator` of
/// degree below `n`, with its distance. Ties keep the smallest multiplier.
pub fn naive_nearest_codeword(received: u128, n: usize, generator: u128) -> Result<(u128, u32), String> {
    if n > MAX_ORACLE_N {
        return Err(format!("n = {n} exceeds the oracle cap of {MAX_ORACLE_N}"));
    }
    let k = n - (127 - generator.leading_zeros() as usize);
    let mut best = (0u128, u32::MAX);
    for m in 0..1u128 << k {
        let cw = gf2_mul(m, generator);
        let d = (cw ^ received).count_ones();
        if d < best.1 {
            best = (cw, d);
        }
    }
    Ok(best)
}

/// Sum of Hamming distances between consecutive rows and the pair count.
pub fn naive_intra(rows: &[Vec<bool>]) -> (u64, u64, Vec<u64>) {
    let n = rows[0].len();
    let mut hist = vec![0u64; n + 1];
    let mut sum = 0;
    for i in 0..rows.len() - 1 {
        let mut d = 0;
        for j in 0..n {
            if rows[i][j] != rows[i + 1][j] {
                d += 1;
            }
        }
        hist[d] += 1;
        sum += d as u64;
    }
    (sum, rows.len() as u64 - 1, hist)
}

/// Sum of Hamming distances over all unordered pairs and the pair count.
pub fn naive_inter(rows: &[Vec<bool>]) -> (u64, u64, Vec<u64>) {
    let n = rows[0].len();
    let mut hist = vec![0u64; n + 1];
    let mut sum = 0;
    let mut pairs = 0;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if i < j {
                let d = (0..n).filter(|&b| rows[i][b] != rows[j][b]).count();
                hist[d] += 1;
                sum += d as u64;
                pairs += 1;
            }
        }
    }
    (sum, pairs, hist)
}
