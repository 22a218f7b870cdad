//! Netlist topologies and the timing evaluation of APUF, PA-PUF and
//! feed-forward PA-PUF chains.
//!
//! A chain is a sequence of multiplexer stages carrying a rising edge on two
//! (APUF) or three (PA-PUF) parallel lines. Each stage consumes one select
//! bit. Select `0` passes every line straight through; select `1` crosses
//! the lines: a swap for two lines, the rotation `T -> C -> B -> T` for three.
//! The output line then adds its own segment delay for that stage and select.
//!
//! Line indices are `0 = T` (top), `1 = C` (center), `2 = B` (bottom). For the
//! APUF only `T` and `C` exist.

use std::fmt;
use std::str::FromStr;

use crate::device::{sample_noise, DeviceInstance, TiePolicy};
use crate::error::{PufError, Result};
use crate::response::Challenge;
use crate::seed::{derive_path, derive_seed, seed_bit};

pub const MAX_LINES: usize = 3;
pub const T: usize = 0;
pub const C: usize = 1;
pub const B: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Design {
    Apuf,
    PaPuf,
    FfPaPuf,
}

impl Design {
    pub fn lines(self) -> usize {
        match self {
            Design::Apuf => 2,
            Design::PaPuf | Design::FfPaPuf => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Design::Apuf => "apuf",
            Design::PaPuf => "pa-puf",
            Design::FfPaPuf => "ff-pa-puf",
        }
    }
}

impl FromStr for Design {
    type Err = PufError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "apuf" => Ok(Design::Apuf),
            "pa-puf" | "papuf" => Ok(Design::PaPuf),
            "ff-pa-puf" | "ffpapuf" => Ok(Design::FfPaPuf),
            other => Err(PufError::Netlist(format!("unknown design {other:?}"))),
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A feed-forward arbiter sampling the lines after `tap_stage` and driving
/// the selects of `target_stage`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FfTap {
    pub tap_stage: usize,
    pub target_stage: usize,
}

impl FfTap {
    pub fn new(tap_stage: usize, target_stage: usize) -> Self {
        FfTap {
            tap_stage,
            target_stage,
        }
    }
}

/// Topology of one PUF: design, number of stages and feed-forward taps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Netlist {
    design: Design,
    stages: usize,
    ff_taps: Vec<FfTap>,
}

impl Netlist {
    pub fn new(design: Design, stages: usize, ff_taps: Vec<FfTap>) -> Result<Self> {
        if stages == 0 || stages > crate::bits::MAX_WIDTH {
            return Err(PufError::Netlist(format!("stage count {stages} outside 1..=128")));
        }
        if design != Design::FfPaPuf && !ff_taps.is_empty() {
            return Err(PufError::Netlist(format!(
                "{design} does not take feed-forward taps"
            )));
        }
        let mut targets = Vec::with_capacity(ff_taps.len());
        for tap in &ff_taps {
            if tap.tap_stage >= tap.target_stage || tap.target_stage >= stages {
                return Err(PufError::Netlist(format!(
                    "tap {}->{} must satisfy tap < target < {stages}",
                    tap.tap_stage, tap.target_stage
                )));
            }
            if targets.contains(&tap.target_stage) {
                return Err(PufError::Netlist(format!(
                    "stage {} is targeted by more than one feed-forward arbiter",
                    tap.target_stage
                )));
            }
            targets.push(tap.target_stage);
        }
        Ok(Netlist {
            design,
            stages,
            ff_taps,
        })
    }

    pub fn apuf(stages: usize) -> Result<Self> {
        Self::new(Design::Apuf, stages, Vec::new())
    }

    pub fn pa_puf(stages: usize) -> Result<Self> {
        Self::new(Design::PaPuf, stages, Vec::new())
    }

    pub fn ff_pa_puf(stages: usize, taps: &[(usize, usize)]) -> Result<Self> {
        let taps = taps.iter().map(|&(a, b)| FfTap::new(a, b)).collect();
        Self::new(Design::FfPaPuf, stages, taps)
    }

    /// The default feed-forward chain: 64 stages tapped at 16->32 and 32->48.
    pub fn default_ff() -> Self {
        Self::ff_pa_puf(64, &[(16, 32), (32, 48)]).expect("static netlist")
    }

    /// `count` feed-forward arbiters spread evenly along a `stages`-long chain.
    ///
    /// Targets sit at `(j + 1) * stages / (count + 1)`; each tap reaches back
    /// half a spacing from its target.
    pub fn with_spread_taps(stages: usize, count: usize) -> Result<Self> {
        if count == 0 {
            return Self::new(Design::FfPaPuf, stages, Vec::new());
        }
        let spacing = stages / (count + 1);
        if spacing < 2 {
            return Err(PufError::Netlist(format!(
                "{count} feed-forward arbiters do not fit in {stages} stages"
            )));
        }
        let reach = spacing.div_ceil(2);
        let taps = (0..count)
            .map(|j| {
                let target = (j + 1) * stages / (count + 1);
                FfTap::new(target - reach, target)
            })
            .collect();
        Self::new(Design::FfPaPuf, stages, taps)
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn lines(&self) -> usize {
        self.design.lines()
    }

    pub fn ff_taps(&self) -> &[FfTap] {
        &self.ff_taps
    }

    /// Number of segment delays a device of this topology carries.
    pub fn table_len(&self) -> usize {
        self.stages * 2 * self.lines()
    }
}

/// Text form: `apuf/64`, `pa-puf/64`, `ff-pa-puf/64/16:32,32:48`.
impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.design, self.stages)?;
        if self.design == Design::FfPaPuf {
            let taps: Vec<String> = self
                .ff_taps
                .iter()
                .map(|t| format!("{}:{}", t.tap_stage, t.target_stage))
                .collect();
            write!(f, "/{}", taps.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for Netlist {
    type Err = PufError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().splitn(3, '/');
        let design: Design = parts.next().unwrap_or_default().parse()?;
        let stages = parts
            .next()
            .ok_or_else(|| PufError::Netlist(format!("missing stage count in {s:?}")))?
            .parse::<usize>()
            .map_err(|e| PufError::Netlist(format!("stage count in {s:?}: {e}")))?;
        let taps = match parts.next() {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|pair| {
                    let (a, b) = pair
                        .split_once(':')
                        .ok_or_else(|| PufError::Netlist(format!("tap {pair:?} is not a:b")))?;
                    let parse = |x: &str| {
                        x.trim()
                            .parse::<usize>()
                            .map_err(|e| PufError::Netlist(format!("tap {pair:?}: {e}")))
                    };
                    Ok(FfTap::new(parse(a)?, parse(b)?))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Netlist::new(design, stages, taps)
    }
}

/// Arrival times of the lines at one point of the chain, in `T, C, B` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalTimes {
    times: [f64; MAX_LINES],
    lines: usize,
}

impl ArrivalTimes {
    pub fn new(times: &[f64]) -> Result<Self> {
        if !(2..=MAX_LINES).contains(&times.len()) {
            return Err(PufError::Shape(format!("{} lines, expected 2 or 3", times.len())));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(PufError::Parameter(format!(
                "arrival times must be finite and non-negative: {times:?}"
            )));
        }
        let mut buf = [0.0; MAX_LINES];
        buf[..times.len()].copy_from_slice(times);
        Ok(ArrivalTimes {
            times: buf,
            lines: times.len(),
        })
    }

    pub fn three(t: f64, c: f64, b: f64) -> Result<Self> {
        Self::new(&[t, c, b])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.times[..self.lines]
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn get(&self, line: usize) -> f64 {
        self.as_slice()[line]
    }
}

fn arbitrate(t_data: f64, t_clock: f64, window: f64, policy: TiePolicy, tie_seed: u64) -> bool {
    let gap = t_data - t_clock;
    if gap.abs() <= window {
        match policy {
            TiePolicy::Random => seed_bit(tie_seed),
            TiePolicy::Deterministic => false,
        }
    } else {
        gap < 0.0
    }
}

/// D-flip-flop arbiter: `1` when the data edge wins the race against the
/// clock edge, `0` when the clock wins. Gaps inside `metastability_window`
/// resolve to a fair bit drawn from `tie_seed`.
pub fn simple_arbiter(t_data: f64, t_clock: f64, metastability_window: f64, tie_seed: u64) -> bool {
    arbitrate(t_data, t_clock, metastability_window, TiePolicy::Random, tie_seed)
}

/// The three pairwise flip-flop decisions `(T vs C, C vs B, B vs T)` that
/// both the priority arbiter and the feed-forward arbiter are built from.
fn pairwise(arrivals: &[f64; MAX_LINES], window: f64, policy: TiePolicy, tie_seed: u64) -> [bool; 3] {
    [
        arbitrate(arrivals[T], arrivals[C], window, policy, derive_seed(tie_seed, 0)),
        arbitrate(arrivals[C], arrivals[B], window, policy, derive_seed(tie_seed, 1)),
        arbitrate(arrivals[B], arrivals[T], window, policy, derive_seed(tie_seed, 2)),
    ]
}

/// Maps the three pairwise flip-flop bits `(qT, qC, qB)` to the response bit.
///
/// The default table is `R = !(qT ^ qC ^ qB)`, which is `1` exactly on the
/// rotations of the ordering `T, C, B` and `0` on their reversals. The two
/// pairwise patterns `(1,1,1)` and `(0,0,0)` never arise from a strict
/// ordering; they only occur when metastable ties are broken inconsistently.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriorityTable {
    outputs: [bool; 8],
}

impl PriorityTable {
    pub const XNOR: PriorityTable = PriorityTable {
        outputs: [true, false, false, true, false, true, true, false],
    };

    /// A custom table indexed by `qT | qC << 1 | qB << 2`.
    pub fn from_outputs(outputs: [bool; 8]) -> Self {
        PriorityTable { outputs }
    }

    pub fn decide(&self, q: [bool; 3]) -> bool {
        self.outputs[q[0] as usize | (q[1] as usize) << 1 | (q[2] as usize) << 2]
    }
}

impl Default for PriorityTable {
    fn default() -> Self {
        PriorityTable::XNOR
    }
}

fn three_lines(arrivals: &ArrivalTimes) -> [f64; MAX_LINES] {
    assert_eq!(arrivals.lines(), 3, "three-input arbiter needs three lines");
    arrivals.times
}

/// Three-input priority arbiter with the default ordering table.
pub fn priority_arbiter(arrivals: &ArrivalTimes, metastability_window: f64, tie_seed: u64) -> bool {
    let q = pairwise(&three_lines(arrivals), metastability_window, TiePolicy::Random, tie_seed);
    PriorityTable::XNOR.decide(q)
}

/// Feed-forward arbiter outputs `(F0, F1, F2)` = pairwise races `T/C`, `C/B`, `B/T`.
pub fn feed_forward_arbiter(
    arrivals: &ArrivalTimes,
    metastability_window: f64,
    tie_seed: u64,
) -> (bool, bool, bool) {
    let [f0, f1, f2] = pairwise(&three_lines(arrivals), metastability_window, TiePolicy::Random, tie_seed);
    (f0, f1, f2)
}

/// Source line feeding output `line` when its multiplexer select is `1`.
#[inline]
fn crossed_source(line: usize, lines: usize) -> usize {
    (line + lines - 1) % lines
}

const TIE_STREAM: u64 = 0x7469_6573;

/// Per-evaluation knobs for [`propagate_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions {
    pub table: PriorityTable,
}

/// Noisy line arrival times at the end of the chain, plus the final bit.
#[derive(Clone, Copy, Debug)]
pub struct Trace {
    pub arrivals: ArrivalTimes,
    pub bit: bool,
}

/// Evaluates one challenge on one device and returns the response bit.
///
/// `eval_seed` drives every stochastic element of this single evaluation:
/// terminal jitter on the final arbiter, jitter on each feed-forward arbiter
/// and metastable tie-breaks.
pub fn propagate(device: &DeviceInstance, challenge: &Challenge, eval_seed: u64) -> Result<bool> {
    Ok(trace(device, challenge, eval_seed, EvalOptions::default())?.bit)
}

pub fn propagate_with(
    device: &DeviceInstance,
    challenge: &Challenge,
    eval_seed: u64,
    options: EvalOptions,
) -> Result<bool> {
    Ok(trace(device, challenge, eval_seed, options)?.bit)
}

/// Like [`propagate`] but also returns the jittered final arrival times.
pub fn trace(
    device: &DeviceInstance,
    challenge: &Challenge,
    eval_seed: u64,
    options: EvalOptions,
) -> Result<Trace> {
    let netlist = device.netlist();
    if challenge.width() != netlist.stages() {
        return Err(PufError::Shape(format!(
            "challenge has {} bits, netlist has {} stages",
            challenge.width(),
            netlist.stages()
        )));
    }
    let lines = netlist.lines();
    let params = device.params();
    let window = params.metastability_window;
    let policy = params.tie_policy;
    let taps = netlist.ff_taps();

    let mut t = [0.0f64; MAX_LINES];
    // Selects latched by each feed-forward arbiter, indexed like `taps`.
    let mut ff_selects: Vec<Option<[bool; MAX_LINES]>> = vec![None; taps.len()];

    for stage in 0..netlist.stages() {
        let mut sel = [challenge.bit(stage); MAX_LINES];
        if let Some(k) = taps.iter().position(|tap| tap.target_stage == stage) {
            sel = ff_selects[k].expect("tap stage precedes its target");
        }
        let mut next = [0.0f64; MAX_LINES];
        for line in 0..lines {
            let s = sel[line];
            let src = if s { crossed_source(line, lines) } else { line };
            next[line] = t[src] + device.delay(stage, s, line);
        }
        t = next;

        for (k, tap) in taps.iter().enumerate() {
            if tap.tap_stage != stage {
                continue;
            }
            let jitter = sample_noise(device, derive_seed(eval_seed, k as u64 + 1));
            let mut seen = t;
            for line in 0..lines {
                seen[line] += jitter[line];
            }
            // F0 drives the T select, F1 the C select, F2 the B select.
            ff_selects[k] = Some(pairwise(
                &seen,
                window,
                policy,
                derive_path(eval_seed, &[TIE_STREAM, k as u64]),
            ));
        }
    }

    let jitter = sample_noise(device, eval_seed);
    for line in 0..lines {
        t[line] = (t[line] + jitter[line]).max(0.0);
    }
    let tie_seed = derive_path(eval_seed, &[TIE_STREAM, taps.len() as u64]);
    let bit = if lines == 2 {
        arbitrate(t[T], t[C], window, policy, tie_seed)
    } else {
        options.table.decide(pairwise(&t, window, policy, tie_seed))
    };
    Ok(Trace {
        arrivals: ArrivalTimes::new(&t[..lines])?,
        bit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORDERS: [[usize; 3]; 6] = [[T, C, B], [T, B, C], [C, T, B], [C, B, T], [B, T, C], [B, C, T]];

    fn arrivals_for(order: [usize; 3]) -> ArrivalTimes {
        let mut t = [0.0; 3];
        for (rank, &line) in order.iter().enumerate() {
            t[line] = 10.0 + rank as f64;
        }
        ArrivalTimes::new(&t).unwrap()
    }

    #[test]
    fn simple_arbiter_follows_the_first_edge() {
        assert!(simple_arbiter(5.0, 9.0, 0.0, 0));
        assert!(!simple_arbiter(9.0, 5.0, 0.0, 0));
    }

    #[test]
    fn simple_arbiter_ties_are_fair() {
        let ones = (0..10_000u64).filter(|&s| simple_arbiter(5.0, 5.0, 0.1, s)).count();
        assert!((4_800..=5_200).contains(&ones), "{ones}");
    }

    #[test]
    fn priority_arbiter_truth_table() {
        let expected = [true, false, false, true, true, false];
        for (order, want) in ORDERS.iter().zip(expected) {
            assert_eq!(priority_arbiter(&arrivals_for(*order), 0.0, 0), want, "{order:?}");
        }
    }

    #[test]
    fn feed_forward_outputs() {
        assert_eq!(feed_forward_arbiter(&arrivals_for([T, C, B]), 0.0, 0), (true, true, false));
        assert_eq!(feed_forward_arbiter(&arrivals_for([B, C, T]), 0.0, 0), (false, false, true));
        assert_eq!(feed_forward_arbiter(&arrivals_for([C, B, T]), 0.0, 0), (false, true, true));
    }

    #[test]
    fn netlist_validation() {
        assert!(Netlist::ff_pa_puf(8, &[(3, 3)]).is_err());
        assert!(Netlist::ff_pa_puf(8, &[(1, 8)]).is_err());
        assert!(Netlist::ff_pa_puf(8, &[(1, 4), (2, 4)]).is_err());
        assert!(Netlist::new(Design::PaPuf, 8, vec![FfTap::new(1, 2)]).is_err());
        assert!(Netlist::pa_puf(0).is_err());
        assert!(Netlist::pa_puf(129).is_err());
        assert_eq!(Netlist::apuf(4).unwrap().lines(), 2);
        assert_eq!(Netlist::default_ff().table_len(), 64 * 2 * 3);
    }

    #[test]
    fn netlist_text_round_trip() {
        for text in ["apuf/64", "pa-puf/16", "ff-pa-puf/64/16:32,32:48", "ff-pa-puf/16/"] {
            let n: Netlist = text.parse().unwrap();
            assert_eq!(n.to_string(), text);
        }
        assert!("ff-pa-puf/16/4".parse::<Netlist>().is_err());
        assert!("xor/16".parse::<Netlist>().is_err());
    }

    #[test]
    fn spread_taps_fit_sixteen_stages() {
        for count in 0..=6 {
            let n = Netlist::with_spread_taps(16, count).unwrap();
            assert_eq!(n.ff_taps().len(), count);
        }
        assert!(Netlist::with_spread_taps(16, 8).is_err());
    }
}
