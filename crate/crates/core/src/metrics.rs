//! PUF quality statistics over response sets.
//!
//! All percentages are in `[0, 100]`. Single-read statistics (uniformity,
//! bit-aliasing, uniqueness) use the first repetition of every
//! `(device, challenge)` cell; reliability and robustness use every
//! repetition.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::circuit::Netlist;
use crate::device::{synthesize_population, DelayParams, DeviceInstance};
use crate::error::{PufError, Result};
use crate::response::{collect_crps, evaluate_response, majority_vote, one_bit_walk, Challenge, CrpSet, Response};
use crate::seed::derive_seed;

/// Counts of Hamming distances `0..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(width: usize) -> Self {
        Histogram {
            counts: vec![0; width + 1],
        }
    }

    pub fn add(&mut self, hd: u32) {
        self.counts[hd as usize] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Most populated bin; the lowest one on ties. `None` when empty.
    pub fn mode(&self) -> Option<usize> {
        if self.total() == 0 {
            return None;
        }
        let max = *self.counts.iter().max()?;
        self.counts.iter().position(|&c| c == max)
    }

    pub fn mean(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| {
            self.counts
                .iter()
                .enumerate()
                .map(|(i, &c)| i as f64 * c as f64)
                .sum::<f64>()
                / total as f64
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{i},{c}");
        }
        out
    }
}

/// A mean Hamming distance in percent plus the raw-distance histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct HdStat {
    pub percent: f64,
    pub histogram: Histogram,
}

fn common_width(responses: &[Response]) -> Result<usize> {
    let width = responses
        .first()
        .map(Response::width)
        .ok_or_else(|| PufError::Parameter("no responses".into()))?;
    if let Some(r) = responses.iter().find(|r| r.width() != width) {
        return Err(PufError::Shape(format!("response widths {width} and {}", r.width())));
    }
    Ok(width)
}

/// Mean distance between consecutive responses, where response `i + 1`
/// answers a challenge one bit away from that of response `i`.
///
/// This is the averaged form: the sum over pairs is divided by the number of
/// pairs so that a perfect design scores 50 %.
pub fn intra_hd(responses: &[Response]) -> Result<HdStat> {
    if responses.len() < 2 {
        return Err(PufError::Parameter("intra-HD needs at least two responses".into()));
    }
    let n = common_width(responses)?;
    let mut histogram = Histogram::new(n);
    let mut sum = 0u64;
    for pair in responses.windows(2) {
        let hd = pair[0].hamming(&pair[1])?;
        histogram.add(hd);
        sum += hd as u64;
    }
    let pairs = (responses.len() - 1) as f64;
    Ok(HdStat {
        percent: 100.0 * sum as f64 / (pairs * n as f64),
        histogram,
    })
}

/// Mean pairwise distance between `k` devices' responses to one challenge:
/// `2 / (k (k - 1)) * sum_{i<j} HD(R_i, R_j) / n`, as a percentage.
pub fn inter_hd(responses: &[Response]) -> Result<HdStat> {
    let k = responses.len();
    if k < 2 {
        return Err(PufError::Population(format!("inter-HD needs at least two devices, got {k}")));
    }
    let n = common_width(responses)?;
    let mut histogram = Histogram::new(n);
    let mut sum = 0u64;
    for i in 0..k {
        for j in i + 1..k {
            let hd = responses[i].hamming(&responses[j])?;
            histogram.add(hd);
            sum += hd as u64;
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(HdStat {
        percent: 100.0 * sum as f64 / (pairs * n as f64),
        histogram,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl Spread {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Spread> {
        let mut n = 0usize;
        let mut acc = Spread {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            avg: 0.0,
        };
        for v in values {
            n += 1;
            acc.min = acc.min.min(v);
            acc.max = acc.max.max(v);
            acc.avg += v;
        }
        (n > 0).then(|| Spread {
            avg: acc.avg / n as f64,
            ..acc
        })
    }
}

fn first_reads(crps: &CrpSet) -> impl Iterator<Item = &crate::response::CrpRecord> {
    let min_rep = crps.records().iter().map(|r| r.repetition).min().unwrap_or(0);
    crps.records().iter().filter(move |r| r.repetition == min_rep)
}

/// Fraction of ones in each first-read response.
pub fn uniformity(crps: &CrpSet) -> Result<Spread> {
    Spread::of(first_reads(crps).map(|r| 100.0 * r.response.count_ones() as f64 / r.response.width() as f64))
        .ok_or_else(|| PufError::Parameter("uniformity of an empty CRP set".into()))
}

/// Uniformity restricted to one device.
pub fn device_uniformity(crps: &CrpSet, device_id: u64) -> Result<Spread> {
    uniformity(&crps.for_device(device_id))
}

/// First-read responses as `device -> challenge -> response`, checking every
/// device answered the same challenges.
fn aligned(crps: &CrpSet, min_devices: usize) -> Result<Vec<BTreeMap<Challenge, Response>>> {
    let mut per_device: BTreeMap<u64, BTreeMap<Challenge, Response>> = BTreeMap::new();
    for r in first_reads(crps) {
        per_device
            .entry(r.device_id)
            .or_default()
            .insert(r.seed_challenge, r.response);
    }
    if per_device.len() < min_devices {
        return Err(PufError::Population(format!(
            "need at least {min_devices} devices, got {}",
            per_device.len()
        )));
    }
    let mut devices = per_device.into_iter();
    let (first_id, first) = devices.next().expect("non-empty");
    let mut out = vec![first];
    for (id, map) in devices {
        if !map.keys().eq(out[0].keys()) {
            return Err(PufError::Alignment(format!(
                "device {id} and device {first_id} answered different challenges"
            )));
        }
        out.push(map);
    }
    Ok(out)
}

/// Per bit position, the share of `(device, challenge)` first reads that
/// output `1`; summarised over positions.
pub fn bit_aliasing(crps: &CrpSet) -> Result<Spread> {
    let devices = aligned(crps, 2)?;
    let width = crps.response_width().expect("aligned set is non-empty");
    let mut ones = vec![0u64; width];
    let mut total = 0u64;
    for map in &devices {
        for r in map.values() {
            total += 1;
            for (i, slot) in ones.iter_mut().enumerate() {
                *slot += r.bit(i) as u64;
            }
        }
    }
    Ok(Spread::of(ones.iter().map(|&c| 100.0 * c as f64 / total as f64)).expect("width >= 1"))
}

/// Inter-device distance per shared challenge, averaged over challenges,
/// with the pooled histogram of pairwise distances.
pub fn uniqueness_detail(crps: &CrpSet) -> Result<HdStat> {
    let devices = aligned(crps, 2)?;
    let width = crps.response_width().expect("aligned set is non-empty");
    let mut histogram = Histogram::new(width);
    let mut total = 0.0;
    let mut count = 0usize;
    for challenge in devices[0].keys() {
        let responses: Vec<Response> = devices.iter().map(|m| m[challenge]).collect();
        let stat = inter_hd(&responses)?;
        histogram.merge(&stat.histogram);
        total += stat.percent;
        count += 1;
    }
    Ok(HdStat {
        percent: total / count as f64,
        histogram,
    })
}

pub fn uniqueness(crps: &CrpSet) -> Result<f64> {
    Ok(uniqueness_detail(crps)?.percent)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Robustness {
    pub stable0: f64,
    pub stable1: f64,
    pub unstable: f64,
}

fn repeated_cells(crps: &CrpSet) -> Result<Vec<Vec<Response>>> {
    let mut cells: BTreeMap<(u64, Challenge), Vec<(u32, Response)>> = BTreeMap::new();
    for r in crps.records() {
        cells
            .entry((r.device_id, r.seed_challenge))
            .or_default()
            .push((r.repetition, r.response));
    }
    if cells.is_empty() {
        return Err(PufError::Parameter("empty CRP set".into()));
    }
    cells
        .into_values()
        .map(|mut reads| {
            if reads.len() < 2 {
                return Err(PufError::Parameter(
                    "every challenge needs at least two repetitions".into(),
                ));
            }
            reads.sort_by_key(|(rep, _)| *rep);
            Ok(reads.into_iter().map(|(_, r)| r).collect())
        })
        .collect()
}

/// Classifies every `(device, challenge, bit position)` cell by whether all
/// its repetitions read 0, all read 1, or disagree.
pub fn robustness(crps: &CrpSet) -> Result<Robustness> {
    let cells = repeated_cells(crps)?;
    let (mut zeros, mut ones, mut total) = (0u64, 0u64, 0u64);
    for reads in &cells {
        let all = reads.iter().fold(u128::MAX, |acc, r| acc & r.raw());
        let any = reads.iter().fold(0u128, |acc, r| acc | r.raw());
        let width = reads[0].width() as u64;
        ones += all.count_ones() as u64;
        zeros += width - any.count_ones() as u64;
        total += width;
    }
    let pct = |x: u64| 100.0 * x as f64 / total as f64;
    Ok(Robustness {
        stable0: pct(zeros),
        stable1: pct(ones),
        unstable: pct(total - zeros - ones),
    })
}

/// Which response counts as the golden reference for reliability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enrollment {
    FirstRead,
    /// Majority of the first `n` reads; an even `n`, or more reads than
    /// available, is reduced to the largest odd count that fits.
    Majority(usize),
}

impl Default for Enrollment {
    fn default() -> Self {
        Enrollment::Majority(11)
    }
}

impl Enrollment {
    pub fn reference(&self, reads: &[Response]) -> Result<Response> {
        let n = match *self {
            Enrollment::FirstRead => 1,
            Enrollment::Majority(n) => {
                let n = n.clamp(1, reads.len());
                if n % 2 == 0 {
                    n - 1
                } else {
                    n
                }
            }
        };
        majority_vote(&reads[..n])
    }
}

/// `100 - mean(HD(read, reference) / n)` over every read of every cell,
/// plus the histogram of those distances.
pub fn reliability_detail(crps: &CrpSet, enrollment: Enrollment) -> Result<HdStat> {
    let cells = repeated_cells(crps)?;
    let width = cells[0][0].width();
    let mut histogram = Histogram::new(width);
    let mut sum = 0u64;
    let mut reads = 0u64;
    for cell in &cells {
        let reference = enrollment.reference(cell)?;
        for r in cell {
            let hd = r.hamming(&reference)?;
            histogram.add(hd);
            sum += hd as u64;
            reads += 1;
        }
    }
    Ok(HdStat {
        percent: 100.0 - 100.0 * sum as f64 / (reads as f64 * width as f64),
        histogram,
    })
}

pub fn reliability(crps: &CrpSet, enrollment: Enrollment) -> Result<f64> {
    Ok(reliability_detail(crps, enrollment)?.percent)
}

/// Every statistic of a CRP set in one place.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub devices: usize,
    pub response_bits: usize,
    pub uniformity: Spread,
    pub bit_aliasing: Option<Spread>,
    pub uniqueness: Option<f64>,
    pub reliability: Option<f64>,
    pub robustness: Option<Robustness>,
    /// Distances of each repeated read from its enrollment reference.
    pub intra_hd_histogram: Histogram,
    /// Pairwise distances between devices on shared challenges.
    pub inter_hd_histogram: Histogram,
}

impl MetricsReport {
    /// Population statistics are `None` for a single device, repetition
    /// statistics are `None` for a single read.
    pub fn compute(crps: &CrpSet, enrollment: Enrollment) -> Result<Self> {
        let width = crps
            .response_width()
            .ok_or_else(|| PufError::Parameter("empty CRP set".into()))?;
        let devices = crps.device_ids().len();
        let (bit_aliasing, uniqueness, inter) = if devices >= 2 {
            let u = uniqueness_detail(crps)?;
            (Some(bit_aliasing(crps)?), Some(u.percent), u.histogram)
        } else {
            (None, None, Histogram::new(width))
        };
        let (reliability, robustness, intra) = if crps.max_repetitions() >= 2 {
            let r = reliability_detail(crps, enrollment)?;
            (Some(r.percent), Some(robustness(crps)?), r.histogram)
        } else {
            (None, None, Histogram::new(width))
        };
        Ok(MetricsReport {
            devices,
            response_bits: width,
            uniformity: uniformity(crps)?,
            bit_aliasing,
            uniqueness,
            reliability,
            robustness,
            intra_hd_histogram: intra,
            inter_hd_histogram: inter,
        })
    }

    /// Flat `key=value` lines sorted by key; absent statistics are omitted.
    pub fn to_kv(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let f = |x: f64| format!("{x:.4}");
        m.insert("devices".into(), self.devices.to_string());
        m.insert("response_bits".into(), self.response_bits.to_string());
        m.insert("uniformity_min".into(), f(self.uniformity.min));
        m.insert("uniformity_max".into(), f(self.uniformity.max));
        m.insert("uniformity_avg".into(), f(self.uniformity.avg));
        if let Some(b) = self.bit_aliasing {
            m.insert("bit_aliasing_min".into(), f(b.min));
            m.insert("bit_aliasing_max".into(), f(b.max));
            m.insert("bit_aliasing_avg".into(), f(b.avg));
        }
        if let Some(u) = self.uniqueness {
            m.insert("uniqueness".into(), f(u));
        }
        if let Some(r) = self.reliability {
            m.insert("reliability".into(), f(r));
        }
        if let Some(r) = self.robustness {
            m.insert("robustness_stable0".into(), f(r.stable0));
            m.insert("robustness_stable1".into(), f(r.stable1));
            m.insert("robustness_unstable".into(), f(r.unstable));
        }
        m
    }
}

/// Intra-device distance along a one-bit walk of seed challenges: each
/// step flips one uniformly chosen bit of the seed and reads a full response.
pub fn neighbor_intra_hd(
    device: &DeviceInstance,
    start: &Challenge,
    steps: usize,
    response_size: usize,
    walk_seed: u64,
) -> Result<HdStat> {
    let walk = one_bit_walk(start, steps, walk_seed)?;
    let responses = walk
        .iter()
        .enumerate()
        .map(|(i, c)| evaluate_response(device, c, response_size, derive_seed(walk_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    intra_hd(&responses)
}

/// Monte-Carlo budget for one reliability estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReliabilityPlan {
    pub challenges: usize,
    pub repetitions: usize,
    pub response_size: usize,
    pub enrollment: Enrollment,
    pub eval_seed: u64,
}

impl Default for ReliabilityPlan {
    fn default() -> Self {
        ReliabilityPlan {
            challenges: 100,
            repetitions: 21,
            response_size: 128,
            enrollment: Enrollment::default(),
            eval_seed: 0x5eed,
        }
    }
}

/// Simulated reliability of `devices` with their noise replaced by `sigma_noise`.
pub fn simulated_reliability(devices: &[DeviceInstance], sigma_noise: f64, plan: &ReliabilityPlan) -> Result<f64> {
    let noisy = devices
        .iter()
        .map(|d| d.with_params(d.params().with_noise(sigma_noise)))
        .collect::<Result<Vec<_>>>()?;
    let crps = collect_crps(&noisy, plan.challenges, plan.repetitions, plan.response_size, plan.eval_seed)?;
    reliability(&crps, plan.enrollment)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub sigma_noise: f64,
    pub reliability: f64,
    pub evaluations: usize,
}

/// Accepted distance from the target reliability, in percentage points.
pub const CALIBRATION_TOLERANCE: f64 = 0.25;

/// Bisects `sigma_noise` in `bounds` until the simulated reliability is
/// within [`CALIBRATION_TOLERANCE`] of `target`.
///
/// The same evaluation seeds are reused at every probe, so the jitter draws
/// only scale with sigma and the estimate is monotone in practice.
pub fn calibrate_noise(
    target: f64,
    devices: &[DeviceInstance],
    bounds: (f64, f64),
    plan: &ReliabilityPlan,
) -> Result<Calibration> {
    if !(target > 50.0 && target <= 100.0) {
        return Err(PufError::Calibration(format!("target {target} outside (50, 100]")));
    }
    let (mut lo, mut hi) = bounds;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(PufError::Calibration(format!("bad search bounds {bounds:?}")));
    }
    if devices.is_empty() {
        return Err(PufError::Parameter("calibration needs a device".into()));
    }
    let mut evaluations = 0;
    let mut probe = |sigma: f64| {
        evaluations += 1;
        simulated_reliability(devices, sigma, plan)
    };
    let at_lo = probe(lo)?;
    if (at_lo - target).abs() <= CALIBRATION_TOLERANCE {
        return Ok(Calibration {
            sigma_noise: lo,
            reliability: at_lo,
            evaluations: 1,
        });
    }
    let at_hi = probe(hi)?;
    if (at_hi - target).abs() <= CALIBRATION_TOLERANCE {
        return Ok(Calibration {
            sigma_noise: hi,
            reliability: at_hi,
            evaluations: 2,
        });
    }
    if !(at_lo > target && target > at_hi) {
        return Err(PufError::Calibration(format!(
            "target {target}% not bracketed: reliability {at_lo:.3}% at sigma {lo}, {at_hi:.3}% at sigma {hi}"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let r = probe(mid)?;
        if (r - target).abs() <= CALIBRATION_TOLERANCE {
            return Ok(Calibration {
                sigma_noise: mid,
                reliability: r,
                evaluations,
            });
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(PufError::Calibration(format!(
        "no sigma in [{}, {}] within {CALIBRATION_TOLERANCE} of {target}%",
        bounds.0, bounds.1
    )))
}

/// Spearman rank correlation; tied values share their average rank.
/// `None` when either series is constant or lengths differ.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Population and measurement budget for one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub params: DelayParams,
    pub population: usize,
    pub challenges: usize,
    pub repetitions: usize,
    pub response_size: usize,
    pub enrollment: Enrollment,
    pub seeds: Vec<u64>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            params: DelayParams::default(),
            population: 10,
            challenges: 50,
            repetitions: 11,
            response_size: 128,
            enrollment: Enrollment::default(),
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// Tap count or response size, depending on the sweep.
    pub x: usize,
    pub uniqueness: f64,
    pub reliability: f64,
    pub per_seed: Vec<(f64, f64)>,
}

fn sweep_point(netlist: &Netlist, response_size: usize, plan: &SweepPlan, x: usize) -> Result<SweepRow> {
    let mut per_seed = Vec::with_capacity(plan.seeds.len());
    for &seed in &plan.seeds {
        let devices = synthesize_population(plan.params, netlist, plan.population, derive_seed(seed, 0))?;
        let crps = collect_crps(&devices, plan.challenges, plan.repetitions, response_size, derive_seed(seed, 1))?;
        per_seed.push((uniqueness(&crps)?, reliability(&crps, plan.enrollment)?));
    }
    let n = per_seed.len().max(1) as f64;
    Ok(SweepRow {
        x,
        uniqueness: per_seed.iter().map(|p| p.0).sum::<f64>() / n,
        reliability: per_seed.iter().map(|p| p.1).sum::<f64>() / n,
        per_seed,
    })
}

/// Uniqueness and reliability as feed-forward arbiters are added to a PA-PUF.
///
/// Tap count `k` uses [`Netlist::with_spread_taps`]; every tap count sees the
/// same device seeds, so `k = 0` reproduces the plain PA-PUF bit for bit.
pub fn sweep_feed_forward(base: &Netlist, tap_counts: &[usize], plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    if base.lines() != 3 || !base.ff_taps().is_empty() {
        return Err(PufError::Netlist(format!("sweep base must be a tap-free PA-PUF, got {base}")));
    }
    tap_counts
        .iter()
        .map(|&k| {
            let netlist = Netlist::with_spread_taps(base.stages(), k)?;
            sweep_point(&netlist, plan.response_size, plan, k)
        })
        .collect()
}

/// Uniqueness and reliability per response width.
pub fn sweep_size(netlist: &Netlist, sizes: &[usize], plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    sizes
        .iter()
        .map(|&size| sweep_point(netlist, size, plan, size))
        .collect()
}

pub fn sweep_csv(label: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{label},uniqueness,reliability\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.4},{:.4}", r.x, r.uniqueness, r.reliability);
    }
    out
}
