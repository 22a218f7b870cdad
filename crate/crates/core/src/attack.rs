//! Logistic-regression modeling attacks on CRP data.
//!
//! One training sample is one response bit: bit `i` of a record is labelled
//! with the `i`-th expansion of the record's seed challenge. Splits are by
//! seed challenge, so every read of a challenge lands on the same side.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::circuit::Netlist;
use crate::device::{synthesize_device, DelayParams};
use crate::error::{PufError, Result};
use crate::response::{collect_crps, expand_challenge, Challenge, CrpRecord, CrpSet, Response};
use crate::seed::{derive_seed, rng};
use crate::textfmt;

pub const MIN_TRAINING_CRPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    /// Suffix products of `1 - 2c`, plus a constant term.
    Parity,
    /// `1 - 2c_j` per stage.
    RawBits,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Parity => "parity",
            FeatureKind::RawBits => "raw",
        }
    }
}

impl FromStr for FeatureKind {
    type Err = PufError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parity" => Ok(FeatureKind::Parity),
            "raw" | "raw_bits" => Ok(FeatureKind::RawBits),
            _ => Err(PufError::Parameter(format!("unknown feature map {s:?}"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureMap {
    pub kind: FeatureKind,
    pub stages: usize,
}

impl FeatureMap {
    pub fn new(kind: FeatureKind, stages: usize) -> Self {
        FeatureMap { kind, stages }
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            FeatureKind::Parity => self.stages + 1,
            FeatureKind::RawBits => self.stages,
        }
    }

    pub fn features(&self, challenge: &Challenge) -> Result<Vec<f64>> {
        if challenge.width() != self.stages {
            return Err(PufError::Shape(format!(
                "{}-bit challenge for a {}-stage feature map",
                challenge.width(),
                self.stages
            )));
        }
        Ok(match self.kind {
            FeatureKind::Parity => parity_features(challenge),
            FeatureKind::RawBits => challenge.iter().map(|b| if b { -1.0 } else { 1.0 }).collect(),
        })
    }
}

/// `phi_i = prod_{j >= i} (1 - 2 c_j)` for `i = 0..=stages`; the last entry
/// is the empty product `+1`.
pub fn parity_features(challenge: &Challenge) -> Vec<f64> {
    let n = challenge.width();
    let mut phi = vec![1.0; n + 1];
    for i in (0..n).rev() {
        phi[i] = if challenge.bit(i) { -phi[i + 1] } else { phi[i + 1] };
    }
    phi
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub train_fraction: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.1,
            epochs: 200,
            train_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackModel {
    pub feature_map: FeatureMap,
    /// `dimension` feature weights followed by the bias.
    pub weights: Vec<f64>,
    pub hyper: Hyper,
    pub seed: u64,
    pub train_samples: usize,
}

impl AttackModel {
    fn logit(&self, x: &[f64]) -> f64 {
        let (w, b) = self.weights.split_at(x.len());
        b[0] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict(&self, challenge: &Challenge) -> Result<bool> {
        Ok(self.logit(&self.feature_map.features(challenge)?) > 0.0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# papuf-attack-model v1\n");
        let _ = writeln!(out, "features={}", self.feature_map.kind);
        let _ = writeln!(out, "stages={}", self.feature_map.stages);
        let _ = writeln!(out, "learning_rate={}", self.hyper.learning_rate);
        let _ = writeln!(out, "epochs={}", self.hyper.epochs);
        let _ = writeln!(out, "train_fraction={}", self.hyper.train_fraction);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "train_samples={}", self.train_samples);
        let weights: Vec<String> = self.weights.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "weights={}", weights.join(","));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const WHAT: &str = "model file";
        let kv = textfmt::key_values(text, WHAT)?;
        let feature_map = FeatureMap::new(
            textfmt::field(&kv, "features", WHAT)?.parse()?,
            textfmt::parse_field(&kv, "stages", WHAT)?,
        );
        let weights = textfmt::field(&kv, "weights", WHAT)?
            .split(',')
            .map(|w| {
                w.trim()
                    .parse::<f64>()
                    .map_err(|e| PufError::format(WHAT, format!("weight {w:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if weights.len() != feature_map.dimension() + 1 || weights.iter().any(|w| !w.is_finite()) {
            return Err(PufError::format(
                WHAT,
                format!("expected {} finite weights", feature_map.dimension() + 1),
            ));
        }
        Ok(AttackModel {
            feature_map,
            weights,
            hyper: Hyper {
                learning_rate: textfmt::parse_field(&kv, "learning_rate", WHAT)?,
                epochs: textfmt::parse_field(&kv, "epochs", WHAT)?,
                train_fraction: textfmt::parse_field(&kv, "train_fraction", WHAT)?,
            },
            seed: textfmt::parse_field(&kv, "seed", WHAT)?,
            train_samples: textfmt::parse_field(&kv, "train_samples", WHAT)?,
        })
    }
}

/// Labelled samples of a CRP set, one per response bit.
fn samples(crps: &CrpSet, map: &FeatureMap) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut expansions: BTreeMap<Challenge, Vec<Challenge>> = BTreeMap::new();
    for r in crps.records() {
        let width = r.response.width();
        if !expansions.contains_key(&r.seed_challenge) {
            expansions.insert(r.seed_challenge, expand_challenge(&r.seed_challenge, width)?);
        }
        for (i, c) in expansions[&r.seed_challenge].iter().enumerate() {
            xs.push(map.features(c)?);
            ys.push(r.response.bit(i) as u8 as f64);
        }
    }
    Ok((xs, ys))
}

fn single_device(crps: &CrpSet) -> Result<()> {
    match crps.device_ids().len() {
        0 => Err(PufError::InsufficientData("empty CRP set".into())),
        1 => Ok(()),
        n => Err(PufError::Parameter(format!("attack data must come from one device, got {n}"))),
    }
}

/// Deterministic split by seed challenge into `(train, holdout)`.
pub fn split_crps(crps: &CrpSet, train_fraction: f64, seed: u64) -> Result<(CrpSet, CrpSet)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PufError::Parameter(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut challenges: Vec<Challenge> = crps.records().iter().map(|r| r.seed_challenge).collect();
    challenges.sort_unstable();
    challenges.dedup();
    challenges.shuffle(&mut rng(seed));
    let cut = ((challenges.len() as f64) * train_fraction).round() as usize;
    let train: std::collections::BTreeSet<Challenge> = challenges[..cut].iter().copied().collect();
    let (a, b): (Vec<CrpRecord>, Vec<CrpRecord>) =
        crps.records().iter().partition(|r| train.contains(&r.seed_challenge));
    Ok((CrpSet::new(a, crps.meta().clone())?, CrpSet::new(b, crps.meta().clone())?))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn mean_loss(w: &[f64], xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let d = w.len() - 1;
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = w[d] + x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            // log(1 + e^z) - y z, computed stably.
            z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
        })
        .sum();
    total / xs.len() as f64
}

/// A fitted model with the data it was judged on.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: AttackModel,
    pub holdout: CrpSet,
    /// Mean cross-entropy on the training split, before the first epoch and
    /// after each one.
    pub losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Full-batch gradient descent on the mean cross-entropy, from zero weights.
pub fn train(crps: &CrpSet, kind: FeatureKind, hyper: Hyper, seed: u64) -> Result<Trained> {
    single_device(crps)?;
    let stages = crps
        .records()
        .first()
        .map(|r| r.seed_challenge.width())
        .expect("non-empty");
    let map = FeatureMap::new(kind, stages);
    let total = crps.len() * crps.response_width().unwrap_or(0);
    if total < MIN_TRAINING_CRPS {
        return Err(PufError::InsufficientData(format!(
            "{total} CRPs, need at least {MIN_TRAINING_CRPS}"
        )));
    }
    let (train_set, holdout) = split_crps(crps, hyper.train_fraction, seed)?;
    let (xs, ys) = samples(&train_set, &map)?;
    if xs.is_empty() {
        return Err(PufError::InsufficientData("training split is empty".into()));
    }
    let d = map.dimension();
    let mut w = vec![0.0; d + 1];
    let mut losses = vec![mean_loss(&w, &xs, &ys)];
    let scale = hyper.learning_rate / xs.len() as f64;
    for _ in 0..hyper.epochs {
        let mut grad = vec![0.0; d + 1];
        for (x, &y) in xs.iter().zip(&ys) {
            let z = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let err = sigmoid(z) - y;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += err * xi;
            }
            grad[d] += err;
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= scale * g;
        }
        losses.push(mean_loss(&w, &xs, &ys));
    }
    let model = AttackModel {
        feature_map: map,
        weights: w,
        hyper,
        seed,
        train_samples: xs.len(),
    };
    let train_accuracy = evaluate_attack(&model, &train_set)?;
    Ok(Trained {
        model,
        holdout,
        losses,
        train_accuracy,
    })
}

/// Percentage of response bits the model predicts correctly.
pub fn evaluate_attack(model: &AttackModel, holdout: &CrpSet) -> Result<f64> {
    let (xs, ys) = samples(holdout, &model.feature_map)?;
    if xs.is_empty() {
        return Err(PufError::Parameter("empty holdout set".into()));
    }
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| (model.logit(x) > 0.0) == (y > 0.5))
        .count();
    Ok(100.0 * correct as f64 / xs.len() as f64)
}

/// Same records with every response bit moved to a random other slot, which
/// destroys any link between challenge and label.
pub fn shuffled_labels(crps: &CrpSet, seed: u64) -> Result<CrpSet> {
    let width = crps.response_width().unwrap_or(0);
    let mut labels: Vec<bool> = crps.records().iter().flat_map(|r| r.response.iter().collect::<Vec<_>>()).collect();
    labels.shuffle(&mut rng(seed));
    let records = crps
        .records()
        .iter()
        .zip(labels.chunks(width.max(1)))
        .map(|(r, bits)| {
            Ok(CrpRecord {
                response: Response::from_bits(bits)?,
                ..*r
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CrpSet::new(records, crps.meta().clone())
}

/// Budget for one attacked device.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackBudget {
    /// Training plus holdout samples (response bits).
    pub crps: usize,
    /// Response width per seed challenge.
    pub response_size: usize,
    pub params: DelayParams,
    pub hyper: Hyper,
}

impl Default for AttackBudget {
    fn default() -> Self {
        AttackBudget {
            crps: 10_000,
            response_size: 8,
            params: DelayParams::default(),
            hyper: Hyper::default(),
        }
    }
}

/// Simulates one device and collects single-read CRPs within `budget`.
pub fn attack_dataset(netlist: &Netlist, budget: &AttackBudget, seed: u64) -> Result<CrpSet> {
    let device = synthesize_device(budget.params, netlist.clone(), derive_seed(seed, 0))?;
    let challenges = budget.crps.div_ceil(budget.response_size);
    collect_crps(&[device], challenges, 1, budget.response_size, derive_seed(seed, 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub design: String,
    pub features: FeatureKind,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// 95 % Student-t interval over seeds.
    pub ci_low: f64,
    pub ci_high: f64,
}

fn student_t95(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    TABLE.get(df.wrapping_sub(1)).copied().unwrap_or(1.960)
}

/// Mean with a 95 % confidence interval; a single value has zero width.
pub fn confidence_interval(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = student_t95(n - 1) * (var / n as f64).sqrt();
    (mean, mean - half, mean + half)
}

/// Attack accuracy per design and feature map over `seeds`, under an
/// identical budget. Cells run in parallel; results are order-independent.
pub fn compare_designs(
    designs: &[Netlist],
    features: &[FeatureKind],
    budget: &AttackBudget,
    seeds: &[u64],
) -> Result<Vec<CompareRow>> {
    if let Some(first) = designs.first() {
        if let Some(d) = designs.iter().find(|d| d.stages() != first.stages()) {
            return Err(PufError::Shape(format!("{d} and {first} differ in stage count")));
        }
    }
    if seeds.is_empty() {
        return Err(PufError::Parameter("need at least one seed".into()));
    }
    let cells: Vec<(usize, usize, u64)> = (0..designs.len())
        .flat_map(|d| (0..features.len()).flat_map(move |f| seeds.iter().map(move |&s| (d, f, s))))
        .collect();
    let accuracies = cells
        .par_iter()
        .map(|&(d, f, s)| {
            let data = attack_dataset(&designs[d], budget, s)?;
            let trained = train(&data, features[f], budget.hyper, derive_seed(s, 2))?;
            evaluate_attack(&trained.model, &trained.holdout)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (chunk, cell) in accuracies.chunks(seeds.len()).zip(cells.chunks(seeds.len())) {
        let (d, f, _) = cell[0];
        let (mean, ci_low, ci_high) = confidence_interval(chunk);
        rows.push(CompareRow {
            design: designs[d].to_string(),
            features: features[f],
            accuracies: chunk.to_vec(),
            mean,
            ci_low,
            ci_high,
        });
    }
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("design,features,seeds,mean_accuracy,ci95_low,ci95_high\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4}",
            r.design,
            r.features,
            r.accuracies.len(),
            r.mean,
            r.ci_low,
            r.ci_high
        );
    }
    out
}

/// A model with random weights, for chance-level baselines.
pub fn random_model(map: FeatureMap, seed: u64) -> AttackModel {
    let mut r = rng(seed);
    AttackModel {
        feature_map: map,
        weights: (0..=map.dimension()).map(|_| r.random_range(-1.0..1.0)).collect(),
        hyper: Hyper::default(),
        seed,
        train_samples: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_examples() {
        let z = Challenge::zero(5).unwrap();
        assert!(parity_features(&z).iter().all(|&v| v == 1.0));
        assert_eq!(parity_features(&Challenge::from_bit_str("1").unwrap()), vec![-1.0, 1.0]);
        let c = Challenge::from_bit_str("0110").unwrap();
        assert_eq!(parity_features(&c), vec![1.0, 1.0, -1.0, 1.0, 1.0]);
        let mut r = rng(1);
        for _ in 0..100 {
            let c = Challenge::random(16, &mut r).unwrap();
            let j = r.random_range(0..16);
            let a = parity_features(&c);
            let b = parity_features(&c.with_flipped(j));
            for i in 0..=16 {
                assert_eq!(a[i] == -b[i], i <= j);
            }
        }
    }

    #[test]
    fn feature_dimensions() {
        assert_eq!(FeatureMap::new(FeatureKind::Parity, 64).dimension(), 65);
        assert_eq!(FeatureMap::new(FeatureKind::RawBits, 64).dimension(), 64);
        let c = Challenge::zero(8).unwrap();
        assert!(FeatureMap::new(FeatureKind::RawBits, 16).features(&c).is_err());
    }

    #[test]
    fn t_table_edges() {
        assert_eq!(student_t95(1), 12.706);
        assert_eq!(student_t95(4), 2.776);
        assert_eq!(student_t95(500), 1.960);
        assert_eq!(confidence_interval(&[3.0]), (3.0, 3.0, 3.0));
    }

    #[test]
    fn model_file_round_trip() {
        let m = random_model(FeatureMap::new(FeatureKind::Parity, 8), 4);
        assert_eq!(AttackModel::from_text(&m.to_text()).unwrap(), m);
        let broken = m.to_text().replace("stages=8", "stages=9");
        assert!(AttackModel::from_text(&broken).is_err());
    }
}
