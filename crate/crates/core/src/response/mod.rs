//! Challenges, responses and challenge-response datasets.
//!
//! A circuit answers one bit per challenge. A multi-bit response is built by
//! expanding a seed challenge with the LFSR into a sequence of challenges and
//! reading one bit per element, starting with the seed itself.

mod lfsr;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

pub use lfsr::{taps_for, Lfsr, MAXIMAL_TAPS};

use crate::bits::bit_word;
use crate::circuit::{propagate, Netlist};
use crate::device::DeviceInstance;
use crate::error::{PufError, Result};
use crate::seed::{derive_path, derive_seed, rng};
use crate::textfmt;

bit_word!(
    /// Select bits for the multiplexer chain; bit `i` drives stage `i`.
    Challenge,
    "challenge"
);

bit_word!(
    /// Response bits; bit `i` answers the `i`-th expanded challenge.
    Response,
    "response"
);

/// Response widths the evaluation pipeline produces.
pub const RESPONSE_SIZES: [usize; 5] = [8, 16, 32, 64, 128];

impl Challenge {
    /// Uniformly random non-zero challenge.
    pub fn random<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Result<Self> {
        let m = crate::bits::mask(width);
        loop {
            let bits = rng.random::<u128>() & m;
            if bits != 0 {
                return Self::new(width, bits);
            }
        }
    }
}

/// The first `count` LFSR states starting at (and including) `seed`.
pub fn expand_challenge(seed: &Challenge, count: usize) -> Result<Vec<Challenge>> {
    if count == 0 {
        return Err(PufError::Parameter("expansion count must be at least 1".into()));
    }
    let width = seed.width();
    let mut out = Vec::with_capacity(count);
    out.push(*seed);
    if count == 1 {
        // The identity prefix needs no taps, so any width works.
        if seed.raw() == 0 {
            return Err(PufError::DegenerateSeed);
        }
        return Ok(out);
    }
    let mut reg = Lfsr::new(width, seed.raw())?;
    for _ in 1..count {
        out.push(Challenge::new(width, reg.step())?);
    }
    Ok(out)
}

/// A walk of `len` challenges where consecutive entries differ in exactly
/// one uniformly chosen bit. Used for intra-device Hamming-distance studies.
pub fn one_bit_walk(start: &Challenge, len: usize, walk_seed: u64) -> Result<Vec<Challenge>> {
    if start.raw() == 0 {
        return Err(PufError::DegenerateSeed);
    }
    if start.width() == 1 && len > 1 {
        return Err(PufError::Parameter("a 1-bit challenge has no non-zero neighbour".into()));
    }
    let mut r = rng(walk_seed);
    let mut out = Vec::with_capacity(len);
    let mut cur = *start;
    for _ in 0..len {
        out.push(cur);
        cur = loop {
            let next = cur.with_flipped(r.random_range(0..cur.width()));
            if next.raw() != 0 {
                break next;
            }
        };
    }
    Ok(out)
}

/// One multi-bit response: bit `i` is the device's answer to the `i`-th
/// expanded challenge, evaluated with seed `derive_seed(eval_seed, i)`.
pub fn evaluate_response(
    device: &DeviceInstance,
    seed_challenge: &Challenge,
    response_size: usize,
    eval_seed: u64,
) -> Result<Response> {
    if !RESPONSE_SIZES.contains(&response_size) {
        return Err(PufError::Parameter(format!(
            "response size {response_size} not in {RESPONSE_SIZES:?}"
        )));
    }
    let challenges = expand_challenge(seed_challenge, response_size)?;
    let mut bits = 0u128;
    for (i, ch) in challenges.iter().enumerate() {
        if propagate(device, ch, derive_seed(eval_seed, i as u64))? {
            bits |= 1 << i;
        }
    }
    Response::new(response_size, bits)
}

/// Bitwise majority over an odd number of equal-width responses.
pub fn majority_vote(responses: &[Response]) -> Result<Response> {
    let first = responses
        .first()
        .ok_or_else(|| PufError::Parameter("majority vote over zero responses".into()))?;
    if responses.len() % 2 == 0 {
        return Err(PufError::Parameter(format!(
            "majority vote needs an odd count, got {}",
            responses.len()
        )));
    }
    let width = first.width();
    if let Some(r) = responses.iter().find(|r| r.width() != width) {
        return Err(PufError::Shape(format!("response widths {width} and {}", r.width())));
    }
    let half = responses.len() / 2;
    let mut bits = 0u128;
    for i in 0..width {
        let ones = responses.iter().filter(|r| r.bit(i)).count();
        if ones > half {
            bits |= 1 << i;
        }
    }
    Response::new(width, bits)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CrpRecord {
    pub device_id: u64,
    pub seed_challenge: Challenge,
    pub repetition: u32,
    pub response: Response,
}

/// A set of response records keyed by `(device, seed challenge, repetition)`.
///
/// Records are kept in canonical order (device, challenge, repetition).
/// Metadata lives in an ordered key/value header that is written to and read
/// from the `# key=value` lines of the CRP file.
#[derive(Clone, Debug, PartialEq)]
pub struct CrpSet {
    records: Vec<CrpRecord>,
    meta: BTreeMap<String, String>,
}

pub const BIT_ORDER: &str = "bit0=msb-of-first-nibble";

impl CrpSet {
    pub fn new(mut records: Vec<CrpRecord>, meta: BTreeMap<String, String>) -> Result<Self> {
        records.sort_unstable();
        if let Some(first) = records.first() {
            let width = first.response.width();
            if let Some(r) = records.iter().find(|r| r.response.width() != width) {
                return Err(PufError::Shape(format!(
                    "responses of width {width} and {} in one set",
                    r.response.width()
                )));
            }
        }
        for w in records.windows(2) {
            if (w[0].device_id, w[0].seed_challenge, w[0].repetition)
                == (w[1].device_id, w[1].seed_challenge, w[1].repetition)
            {
                return Err(PufError::Parameter(format!(
                    "duplicate record for device {} challenge {} repetition {}",
                    w[0].device_id,
                    w[0].seed_challenge.to_hex(),
                    w[0].repetition
                )));
            }
        }
        Ok(CrpSet { records, meta })
    }

    pub fn records(&self) -> &[CrpRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn response_width(&self) -> Option<usize> {
        self.records.first().map(|r| r.response.width())
    }

    pub fn netlist(&self) -> Option<Result<Netlist>> {
        self.meta.get("netlist").map(|s| s.parse())
    }

    pub fn device_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.records.iter().map(|r| r.device_id).collect();
        ids.dedup();
        ids
    }

    pub fn max_repetitions(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.repetition as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// Records of one device, grouped by seed challenge, repetitions in order.
    pub fn by_challenge(&self, device_id: u64) -> BTreeMap<Challenge, Vec<&CrpRecord>> {
        let mut map: BTreeMap<Challenge, Vec<&CrpRecord>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.device_id == device_id) {
            map.entry(r.seed_challenge).or_default().push(r);
        }
        map
    }

    /// Only the records of `device_id`, metadata kept.
    pub fn for_device(&self, device_id: u64) -> CrpSet {
        CrpSet {
            records: self
                .records
                .iter()
                .filter(|r| r.device_id == device_id)
                .copied()
                .collect(),
            meta: self.meta.clone(),
        }
    }

    /// CSV body with `# key=value` header lines: `netlist` and `lfsr` first,
    /// then the bit-order note, then remaining metadata sorted by key.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for key in ["netlist", "lfsr"] {
            if let Some(v) = self.meta.get(key) {
                let _ = writeln!(out, "# {key}={v}");
            }
        }
        let _ = writeln!(out, "# bit_order={BIT_ORDER}");
        for (k, v) in &self.meta {
            if !matches!(k.as_str(), "netlist" | "lfsr" | "bit_order") {
                let _ = writeln!(out, "# {k}={v}");
            }
        }
        out.push_str("device_id,challenge_hex,repetition,response_hex,response_bits_len\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.device_id,
                r.seed_challenge.to_hex(),
                r.repetition,
                r.response.to_hex(),
                r.response.width()
            );
        }
        out
    }

    /// Parses a CRP file. Header lines are optional; without a `netlist`
    /// header the challenge width is four bits per hex digit.
    pub fn from_csv(text: &str) -> Result<Self> {
        const WHAT: &str = "CRP file";
        let mut meta = textfmt::header(text);
        if let Some(order) = meta.remove("bit_order") {
            if order != BIT_ORDER {
                return Err(PufError::format(WHAT, format!("unsupported bit order {order:?}")));
            }
        }
        let stages = match meta.get("netlist") {
            Some(n) => Some(n.parse::<Netlist>()?.stages()),
            None => None,
        };
        let mut records = Vec::new();
        for (n, line) in textfmt::body(text) {
            if line.starts_with("device_id") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(PufError::format(WHAT, format!("line {n}: expected 5 fields")));
            }
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|e| PufError::format(WHAT, format!("line {n}: {e}")))
            };
            let width = stages.unwrap_or(f[1].len() * 4);
            records.push(CrpRecord {
                device_id: int(f[0])?,
                seed_challenge: Challenge::from_hex(f[1], width)?,
                repetition: int(f[2])? as u32,
                response: Response::from_hex(f[3], int(f[4])? as usize)?,
            });
        }
        CrpSet::new(records, meta)
    }
}

const CHALLENGE_STREAM: u64 = 0x6368_616c;
const EVAL_STREAM: u64 = 0x6576_616c;

/// `num_challenges` distinct non-zero seed challenges drawn from `master_eval_seed`.
pub fn draw_challenges(width: usize, num_challenges: usize, master_eval_seed: u64) -> Result<Vec<Challenge>> {
    let available = crate::bits::mask(width);
    if (num_challenges as u128) > available {
        return Err(PufError::Parameter(format!(
            "{num_challenges} distinct non-zero challenges do not exist at width {width}"
        )));
    }
    let mut r = rng(derive_seed(master_eval_seed, CHALLENGE_STREAM));
    let mut seen = HashSet::with_capacity(num_challenges);
    let mut out = Vec::with_capacity(num_challenges);
    while out.len() < num_challenges {
        let c = Challenge::random(width, &mut r)?;
        if seen.insert(c) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Evaluation seed of record `(device, challenge index, repetition)`.
pub fn record_seed(master_eval_seed: u64, device_id: u64, challenge_index: usize, repetition: u32) -> u64 {
    derive_path(
        master_eval_seed,
        &[EVAL_STREAM, device_id, challenge_index as u64, repetition as u64],
    )
}

/// Evaluates every device on the same random seed challenges, `repetitions`
/// times each.
pub fn collect_crps(
    population: &[DeviceInstance],
    num_challenges: usize,
    repetitions: usize,
    response_size: usize,
    master_eval_seed: u64,
) -> Result<CrpSet> {
    let first = population
        .first()
        .ok_or_else(|| PufError::Parameter("empty population".into()))?;
    if num_challenges == 0 || repetitions == 0 {
        return Err(PufError::Parameter(
            "need at least one challenge and one repetition".into(),
        ));
    }
    let netlist = first.netlist();
    if let Some(d) = population.iter().find(|d| d.netlist().stages() != netlist.stages()) {
        return Err(PufError::Shape(format!(
            "device {} has {} stages, expected {}",
            d.device_id(),
            d.netlist().stages(),
            netlist.stages()
        )));
    }
    let challenges = draw_challenges(netlist.stages(), num_challenges, master_eval_seed)?;
    let jobs: Vec<(usize, usize)> = (0..population.len())
        .flat_map(|d| (0..num_challenges).map(move |c| (d, c)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(d, c)| {
            let device = &population[d];
            (0..repetitions as u32)
                .map(|rep| {
                    let seed = record_seed(master_eval_seed, device.device_id(), c, rep);
                    Ok(CrpRecord {
                        device_id: device.device_id(),
                        seed_challenge: challenges[c],
                        repetition: rep,
                        response: evaluate_response(device, &challenges[c], response_size, seed)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert("netlist".to_string(), netlist.to_string());
    meta.insert("lfsr".to_string(), Lfsr::describe(netlist.stages())?);
    meta.insert("master_eval_seed".to_string(), master_eval_seed.to_string());
    meta.insert("repetitions".to_string(), repetitions.to_string());
    let seeds: Vec<String> = population.iter().map(|d| d.seed().to_string()).collect();
    meta.insert("device_seeds".to_string(), seeds.join(" "));
    CrpSet::new(records, meta)
}
