//! Command-line front end behind the `papuf` binary.
//!
//! Every run resolves an [`ExperimentConfig`] from built-in defaults, an
//! optional TOML file (`--config`) and flags, in increasing precedence. The
//! hash of that config is stamped into every file a generating command
//! writes; commands that derive files from existing data (`metrics`,
//! `attack train`) carry the input's hash forward instead.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{self, AttackBudget, AttackModel, FeatureKind, Hyper};
use crate::circuit::{Design, FfTap, Netlist};
use crate::device::{synthesize_device, synthesize_population, DelayParams, DeviceInstance, TiePolicy};
use crate::error::{PufError, Result};
use crate::keyfuzz::{self, BchCode, HelperData, Reproduction};
use crate::metrics::{self, Enrollment, MetricsReport, SweepPlan};
use crate::response::{collect_crps, evaluate_response, majority_vote, Challenge, CrpSet};
use crate::seed::{derive_seed, rng};
use crate::textfmt;

/// Default output directory when neither `--out-dir` nor the config sets one.
pub const OUT_DIR_ENV: &str = "PAPUF_OUT_DIR";

/// Everything needed to replay an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub netlist: String,
    pub mean_delay: f64,
    pub sigma_process: f64,
    pub sigma_noise: f64,
    pub metastability_window: f64,
    pub tie_policy: String,
    pub population: usize,
    pub challenges: usize,
    pub repetitions: usize,
    pub response_size: usize,
    pub seed: u64,
    /// Not part of the hash: moving outputs does not change the experiment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = DelayParams::default();
        ExperimentConfig {
            netlist: Netlist::pa_puf(64).expect("valid").to_string(),
            mean_delay: p.mean_delay,
            sigma_process: p.sigma_process,
            sigma_noise: p.sigma_noise,
            metastability_window: p.metastability_window,
            tie_policy: p.tie_policy.as_str().into(),
            population: 10,
            challenges: 100,
            repetitions: 11,
            response_size: 128,
            seed: 0,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PufError::format("config file", e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| PufError::Parameter(format!("config not representable in TOML: {e}")))
    }

    pub fn netlist(&self) -> Result<Netlist> {
        self.netlist.parse()
    }

    pub fn params(&self) -> Result<DelayParams> {
        let p = DelayParams {
            mean_delay: self.mean_delay,
            sigma_process: self.sigma_process,
            sigma_noise: self.sigma_noise,
            metastability_window: self.metastability_window,
            tie_policy: self.tie_policy.parse()?,
        };
        p.validate()?;
        Ok(p)
    }

    /// First 16 hex digits of the SHA-256 of the TOML form, without `out_dir`.
    pub fn hash(&self) -> Result<String> {
        let canonical = ExperimentConfig {
            out_dir: None,
            ..self.clone()
        }
        .to_toml()?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Parser, Debug)]
#[command(name = "papuf", version, about = "Simulate and evaluate priority-arbiter PUFs")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the experiment config; accepted by every subcommand.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: config, then $PAPUF_OUT_DIR, then papuf-out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Netlist descriptor such as `pa-puf/64` or `ff-pa-puf/64/16:32,32:48`.
    #[arg(long, global = true)]
    pub netlist: Option<String>,
    #[arg(long, global = true)]
    pub design: Option<Design>,
    #[arg(long, global = true)]
    pub stages: Option<usize>,
    /// Feed-forward taps as `tap:target` pairs, e.g. `16:32,32:48`.
    #[arg(long, global = true)]
    pub taps: Option<String>,
    #[arg(long, global = true)]
    pub population: Option<usize>,
    #[arg(long, global = true)]
    pub challenges: Option<usize>,
    #[arg(long, global = true)]
    pub repetitions: Option<usize>,
    #[arg(long, global = true)]
    pub response_size: Option<usize>,
    #[arg(long, global = true)]
    pub mean_delay: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_process: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_noise: Option<f64>,
    #[arg(long, global = true)]
    pub metastability_window: Option<f64>,
    #[arg(long, global = true)]
    pub tie_policy: Option<TiePolicy>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize or inspect device files.
    #[command(subcommand)]
    Device(DeviceCmd),
    /// Collect challenge-response pairs.
    #[command(subcommand)]
    Crp(CrpCmd),
    /// Quality statistics of a CRP file.
    Metrics(MetricsArgs),
    /// Fuzzy-extractor enrollment and key reproduction.
    #[command(subcommand)]
    Keygen(KeygenCmd),
    /// Logistic-regression modeling attacks.
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(SweepCmd),
    /// Merge metric reports from one experiment.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
pub enum DeviceCmd {
    New {
        #[arg(long, default_value_t = 0)]
        id: u64,
        /// Output file [default: <out-dir>/device.txt].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Show {
        file: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum CrpCmd {
    /// Evaluate the given device files, or a fresh population from the config.
    Gen {
        #[arg(long = "device")]
        devices: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Kv,
    Csv,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub crps: PathBuf,
    /// Reads in the enrollment majority, or `first`.
    #[arg(long, default_value = "11")]
    pub enrollment: String,
    #[arg(long, value_enum, default_value_t = Format::Kv)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum KeygenCmd {
    Enroll {
        #[arg(long)]
        device: PathBuf,
        /// Seed challenge in hex [default: drawn from --seed].
        #[arg(long)]
        challenge: Option<String>,
        /// Reads combined by bitwise majority.
        #[arg(long, default_value_t = 11)]
        reads: usize,
        #[arg(long, default_value_t = 7)]
        field_degree: u32,
        #[arg(long, default_value_t = 10)]
        correctable: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Reproduce {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        helper: PathBuf,
        /// Seed challenge in hex [default: the one recorded in the helper file].
        #[arg(long)]
        challenge: Option<String>,
        #[arg(long, default_value_t = 11)]
        reads: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum AttackCmd {
    Train {
        #[arg(long)]
        crps: PathBuf,
        #[arg(long, default_value = "parity")]
        features: FeatureKind,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        crps: PathBuf,
    },
    Compare {
        /// Netlist descriptor to attack; repeat for each design.
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "parity,raw")]
        features: Vec<FeatureKind>,
        /// CRPs (response bits) per attacked device.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum SweepCmd {
    /// Feed-forward tap count 0..=max-taps on a PA-PUF of the configured length.
    Ff {
        #[arg(long, default_value_t = 6)]
        max_taps: usize,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Response widths.
    Size {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Merge files even when their config hashes differ.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum, default_value_t = Format::Kv)]
    pub format: Format,
}

fn parse_taps(text: &str) -> Result<Vec<FfTap>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| PufError::Parameter(format!("tap {pair:?} is not tap:target")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| PufError::Parameter(format!("tap {pair:?}: {e}")))
            };
            Ok(FfTap::new(num(a)?, num(b)?))
        })
        .collect()
}

/// Applies the layers defaults < config file < flags.
pub fn resolve_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::from_toml(&read(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = &o.netlist {
        cfg.netlist = n.parse::<Netlist>()?.to_string();
    }
    if o.design.is_some() || o.stages.is_some() || o.taps.is_some() {
        let cur = cfg.netlist()?;
        let design = o.design.unwrap_or(cur.design());
        let stages = o.stages.unwrap_or(cur.stages());
        let taps = match &o.taps {
            Some(t) => parse_taps(t)?,
            None if design == cur.design() && stages == cur.stages() => cur.ff_taps().to_vec(),
            None => Vec::new(),
        };
        cfg.netlist = Netlist::new(design, stages, taps)?.to_string();
    }
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = o.$field { cfg.$field = v; })*};
    }
    set!(seed, population, challenges, repetitions, response_size, mean_delay, sigma_process, sigma_noise, metastability_window);
    if let Some(t) = o.tie_policy {
        cfg.tie_policy = t.as_str().into();
    }
    if let Some(d) = &o.out_dir {
        cfg.out_dir = Some(d.display().to_string());
    }
    cfg.netlist()?;
    cfg.params()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| PufError::Io(format!("{}: {e}", path.display())))
}

struct Ctx {
    cfg: ExperimentConfig,
    hash: String,
    out_dir: PathBuf,
}

impl Ctx {
    fn new(cfg: ExperimentConfig) -> Result<Self> {
        let out_dir = cfg
            .out_dir
            .clone()
            .or_else(|| std::env::var(OUT_DIR_ENV).ok())
            .unwrap_or_else(|| "papuf-out".into())
            .into();
        Ok(Ctx {
            hash: cfg.hash()?,
            cfg,
            out_dir,
        })
    }

    fn path(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(default_name))
    }

    /// Writes `text` verbatim and echoes the effective config next to it.
    fn write(&self, path: &Path, text: &str) -> Result<()> {
        let io = |e: std::io::Error| PufError::Io(format!("{}: {e}", path.display()));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        std::fs::write(path, text).map_err(io)?;
        std::fs::create_dir_all(&self.out_dir).map_err(io)?;
        let echo = format!("# config_hash={}\n{}", self.hash, self.cfg.to_toml()?);
        std::fs::write(self.out_dir.join("config.toml"), echo).map_err(io)
    }
}

fn stamp(hash: &str, text: &str) -> String {
    format!("# config_hash={hash}\n{text}")
}

/// The hash recorded in a file's leading comment block, if any.
pub fn file_hash(text: &str) -> Option<String> {
    textfmt::header(text).get("config_hash").cloned()
}

fn kv_lines(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn kv_csv(map: &BTreeMap<String, String>) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in map {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

type Kv = BTreeMap<String, String>;

fn kv<I, K, V>(pairs: I) -> Kv
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: ToString,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.to_string())).collect()
}

fn population_seed(seed: u64) -> u64 {
    derive_seed(seed, 0)
}

fn device_new(ctx: &Ctx, id: u64, out: &Option<PathBuf>) -> Result<String> {
    // Same device as member `id` of the population `crp gen` would synthesize.
    let seed = derive_seed(population_seed(ctx.cfg.seed), id);
    let d = synthesize_device(ctx.cfg.params()?, ctx.cfg.netlist()?, seed)?;
    let d = DeviceInstance::from_table(id, d.netlist().clone(), *d.params(), d.seed(), d.delays().to_vec())?;
    let path = ctx.path(out, "device.txt");
    ctx.write(&path, &stamp(&ctx.hash, &d.to_text()))?;
    Ok(kv_lines(&kv([
        ("config_hash", ctx.hash.clone()),
        ("device_file", path.display().to_string()),
        ("netlist", d.netlist().to_string()),
    ])))
}

fn device_show(file: &Path) -> Result<String> {
    let d = DeviceInstance::from_text(&read(file)?)?;
    let delays = d.delays();
    let mean = delays.iter().sum::<f64>() / delays.len() as f64;
    let min = delays.iter().copied().fold(f64::INFINITY, f64::min);
    let max = delays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p = d.params();
    Ok(kv_lines(&kv([
        ("delay_max", format!("{max:.6}")),
        ("delay_mean", format!("{mean:.6}")),
        ("delay_min", format!("{min:.6}")),
        ("design", d.netlist().design().to_string()),
        ("device_id", d.device_id().to_string()),
        ("mean_delay", p.mean_delay.to_string()),
        ("metastability_window", p.metastability_window.to_string()),
        ("netlist", d.netlist().to_string()),
        ("seed", d.seed().to_string()),
        ("sigma_noise", p.sigma_noise.to_string()),
        ("sigma_process", p.sigma_process.to_string()),
        ("stages", d.netlist().stages().to_string()),
        ("taps", d.netlist().ff_taps().len().to_string()),
        ("tie_policy", p.tie_policy.as_str().to_string()),
    ])))
}

fn crp_gen(ctx: &Ctx, devices: &[PathBuf], out: &Option<PathBuf>) -> Result<String> {
    let c = &ctx.cfg;
    let population = if devices.is_empty() {
        synthesize_population(c.params()?, &c.netlist()?, c.population, population_seed(c.seed))?
    } else {
        let mut loaded = devices
            .iter()
            .map(|p| DeviceInstance::from_text(&read(p)?))
            .collect::<Result<Vec<_>>>()?;
        let mut ids = BTreeSet::new();
        if let Some(d) = loaded.iter().find(|d| !ids.insert(d.device_id())) {
            return Err(PufError::Parameter(format!("device id {} loaded twice", d.device_id())));
        }
        loaded.sort_by_key(DeviceInstance::device_id);
        loaded
    };
    let mut crps = collect_crps(
        &population,
        c.challenges,
        c.repetitions,
        c.response_size,
        derive_seed(c.seed, 1),
    )?;
    crps.set_meta("config_hash", ctx.hash.clone());
    let path = ctx.path(out, "crps.csv");
    ctx.write(&path, &crps.to_csv())?;
    Ok(kv_lines(&kv([
        ("config_hash", ctx.hash.clone()),
        ("crp_file", path.display().to_string()),
        ("devices", population.len().to_string()),
        ("records", crps.len().to_string()),
    ])))
}

fn parse_enrollment(text: &str) -> Result<Enrollment> {
    match text {
        "first" => Ok(Enrollment::FirstRead),
        n => n
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(Enrollment::Majority)
            .ok_or_else(|| PufError::Parameter(format!("enrollment {n:?} is neither `first` nor a count"))),
    }
}

fn load_crps(path: &Path) -> Result<(CrpSet, Option<String>)> {
    let text = read(path)?;
    Ok((CrpSet::from_csv(&text)?, file_hash(&text)))
}

fn metrics_cmd(ctx: &Ctx, a: &MetricsArgs) -> Result<String> {
    let (crps, source_hash) = load_crps(&a.crps)?;
    let hash = source_hash.unwrap_or_else(|| ctx.hash.clone());
    let report = MetricsReport::compute(&crps, parse_enrollment(&a.enrollment)?)?;
    let mut entries = report.entries();
    entries.insert("config_hash".into(), hash.clone());
    let mut body = entries.clone();
    body.remove("config_hash");
    ctx.write(&ctx.out_dir.join("metrics.txt"), &stamp(&hash, &kv_lines(&body)))?;
    ctx.write(
        &ctx.out_dir.join("intra_hd.csv"),
        &stamp(&hash, &report.intra_hd_histogram.to_csv()),
    )?;
    ctx.write(
        &ctx.out_dir.join("inter_hd.csv"),
        &stamp(&hash, &report.inter_hd_histogram.to_csv()),
    )?;
    Ok(match a.format {
        Format::Kv => kv_lines(&entries),
        Format::Csv => kv_csv(&entries),
    })
}

fn challenge_for(device: &DeviceInstance, hex: Option<&str>, seed: u64) -> Result<Challenge> {
    let width = device.netlist().stages();
    match hex {
        Some(h) => Challenge::from_hex(h, width),
        None => Challenge::random(width, &mut rng(derive_seed(seed, 2))),
    }
}

fn majority_read(device: &DeviceInstance, challenge: &Challenge, size: usize, reads: usize, seed: u64) -> Result<crate::response::Response> {
    if reads % 2 == 0 {
        return Err(PufError::Parameter(format!("--reads must be odd, got {reads}")));
    }
    let base = derive_seed(seed, 3);
    let all = (0..reads as u64)
        .map(|r| evaluate_response(device, challenge, size, derive_seed(base, r)))
        .collect::<Result<Vec<_>>>()?;
    majority_vote(&all)
}

fn keygen(ctx: &Ctx, cmd: &KeygenCmd) -> Result<String> {
    let seed = ctx.cfg.seed;
    match cmd {
        KeygenCmd::Enroll {
            device,
            challenge,
            reads,
            field_degree,
            correctable,
            out,
        } => {
            let d = DeviceInstance::from_text(&read(device)?)?;
            let code = BchCode::new(*field_degree, *correctable)?;
            let ch = challenge_for(&d, challenge.as_deref(), seed)?;
            let response = majority_read(&d, &ch, ctx.cfg.response_size, *reads, seed)?;
            let (helper, key) = keyfuzz::enroll(&response, &code, derive_seed(seed, 4))?;
            let path = ctx.path(out, "helper.txt");
            let text = format!("# challenge={}\n{}", ch.to_hex(), helper.to_text());
            ctx.write(&path, &stamp(&ctx.hash, &text))?;
            Ok(kv_lines(&kv([
                ("challenge", ch.to_hex()),
                ("code", code.to_string()),
                ("config_hash", ctx.hash.clone()),
                ("helper_file", path.display().to_string()),
                ("key", key.to_hex()),
            ])))
        }
        KeygenCmd::Reproduce {
            device,
            helper,
            challenge,
            reads,
        } => {
            let d = DeviceInstance::from_text(&read(device)?)?;
            let helper_text = read(helper)?;
            let helper = HelperData::from_text(&helper_text)?;
            let recorded = textfmt::header(&helper_text).get("challenge").cloned();
            let hex = challenge
                .clone()
                .or(recorded)
                .ok_or_else(|| PufError::Parameter("no --challenge and none recorded in the helper file".into()))?;
            let ch = challenge_for(&d, Some(&hex), seed)?;
            let response = majority_read(&d, &ch, helper.response_bits, *reads, seed)?;
            Ok(kv_lines(&match keyfuzz::reproduce(&response, &helper)? {
                Reproduction::Key { key, corrected } => kv([
                    ("corrected", corrected.to_string()),
                    ("key", key.to_hex()),
                    ("status", "ok".to_string()),
                ]),
                Reproduction::Failure => kv([("status", "failure")]),
            }))
        }
    }
}

fn attack_cmd(ctx: &Ctx, cmd: &AttackCmd) -> Result<String> {
    match cmd {
        AttackCmd::Train {
            crps,
            features,
            epochs,
            learning_rate,
            out,
        } => {
            let (set, source_hash) = load_crps(crps)?;
            let mut hyper = Hyper::default();
            if let Some(e) = epochs {
                hyper.epochs = *e;
            }
            if let Some(lr) = learning_rate {
                hyper.learning_rate = *lr;
            }
            let trained = attack::train(&set, *features, hyper, ctx.cfg.seed)?;
            let holdout = attack::evaluate_attack(&trained.model, &trained.holdout)?;
            let hash = source_hash.unwrap_or_else(|| ctx.hash.clone());
            let path = ctx.path(out, "model.txt");
            ctx.write(&path, &stamp(&hash, &trained.model.to_text()))?;
            Ok(kv_lines(&kv([
                ("config_hash", hash),
                ("final_loss", format!("{:.6}", trained.losses.last().copied().unwrap_or(f64::NAN))),
                ("holdout_accuracy", format!("{holdout:.4}")),
                ("model_file", path.display().to_string()),
                ("train_accuracy", format!("{:.4}", trained.train_accuracy)),
                ("train_samples", trained.model.train_samples.to_string()),
            ])))
        }
        AttackCmd::Eval { model, crps } => {
            let m = AttackModel::from_text(&read(model)?)?;
            let (set, _) = load_crps(crps)?;
            let acc = attack::evaluate_attack(&m, &set)?;
            Ok(kv_lines(&kv([("accuracy", format!("{acc:.4}"))])))
        }
        AttackCmd::Compare {
            targets,
            features,
            budget,
            seeds,
        } => {
            let designs = targets.iter().map(|t| t.parse()).collect::<Result<Vec<Netlist>>>()?;
            let budget = AttackBudget {
                crps: *budget,
                params: ctx.cfg.params()?,
                ..AttackBudget::default()
            };
            let seeds: Vec<u64> = (0..*seeds as u64).map(|i| derive_seed(ctx.cfg.seed, i)).collect();
            let rows = attack::compare_designs(&designs, features, &budget, &seeds)?;
            let csv = attack::compare_csv(&rows);
            ctx.write(&ctx.out_dir.join("compare.csv"), &stamp(&ctx.hash, &csv))?;
            Ok(csv)
        }
    }
}

fn sweep_cmd(ctx: &Ctx, cmd: &SweepCmd) -> Result<String> {
    let c = &ctx.cfg;
    let seeds_of = |n: usize| (0..n as u64).map(|i| derive_seed(c.seed, i)).collect::<Vec<_>>();
    let plan = |n: usize| -> Result<SweepPlan> {
        Ok(SweepPlan {
            params: c.params()?,
            population: c.population,
            challenges: c.challenges,
            repetitions: c.repetitions,
            response_size: c.response_size,
            enrollment: Enrollment::default(),
            seeds: seeds_of(n),
        })
    };
    let (name, csv) = match cmd {
        SweepCmd::Ff { max_taps, seeds } => {
            let base = Netlist::pa_puf(c.netlist()?.stages())?;
            let counts: Vec<usize> = (0..=*max_taps).collect();
            let rows = metrics::sweep_feed_forward(&base, &counts, &plan(*seeds)?)?;
            let x: Vec<f64> = rows.iter().map(|r| r.x as f64).collect();
            let rho = |f: fn(&metrics::SweepRow) -> f64| {
                metrics::spearman(&x, &rows.iter().map(f).collect::<Vec<_>>())
                    .map_or("undefined".to_string(), |r| format!("{r:.4}"))
            };
            let head = format!(
                "# spearman_reliability={}\n# spearman_uniqueness={}\n",
                rho(|r| r.reliability),
                rho(|r| r.uniqueness)
            );
            ("sweep_ff.csv", head + &metrics::sweep_csv("taps", &rows))
        }
        SweepCmd::Size { sizes, seeds } => {
            let rows = metrics::sweep_size(&c.netlist()?, sizes, &plan(*seeds)?)?;
            ("sweep_size.csv", metrics::sweep_csv("response_bits", &rows))
        }
    };
    ctx.write(&ctx.out_dir.join(name), &stamp(&ctx.hash, &csv))?;
    Ok(csv)
}

fn report(args: &ReportArgs) -> Result<String> {
    let mut merged = Kv::new();
    let mut hashes = BTreeSet::new();
    let mut labels = BTreeSet::new();
    for path in &args.files {
        let text = read(path)?;
        hashes.insert(file_hash(&text).unwrap_or_else(|| "none".into()));
        let stem = path.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
        let mut label = stem.clone();
        let mut i = 1;
        while !labels.insert(label.clone()) {
            i += 1;
            label = format!("{stem}{i}");
        }
        for (k, v) in textfmt::key_values(&text, "report input")? {
            merged.insert(format!("{label}.{k}"), v);
        }
    }
    if hashes.len() > 1 && !args.force {
        return Err(PufError::Parameter(format!(
            "inputs come from different configs ({}); pass --force to merge anyway",
            hashes.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    merged.insert("config_hash".into(), hashes.into_iter().collect::<Vec<_>>().join(" "));
    Ok(match args.format {
        Format::Kv => kv_lines(&merged),
        Format::Csv => kv_csv(&merged),
    })
}

pub fn execute(cli: &Cli) -> Result<String> {
    let ctx = || Ctx::new(resolve_config(&cli.overrides)?);
    match &cli.command {
        Command::Device(DeviceCmd::New { id, out }) => device_new(&ctx()?, *id, out),
        Command::Device(DeviceCmd::Show { file }) => device_show(file),
        Command::Crp(CrpCmd::Gen { devices, out }) => crp_gen(&ctx()?, devices, out),
        Command::Metrics(a) => metrics_cmd(&ctx()?, a),
        Command::Keygen(cmd) => keygen(&ctx()?, cmd),
        Command::Attack(cmd) => attack_cmd(&ctx()?, cmd),
        Command::Sweep(cmd) => sweep_cmd(&ctx()?, cmd),
        Command::Report(a) => report(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status: 0 on success, 2 on usage errors, 1 on any other
/// failure, reported as one `error: kind=... msg=...` line.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error: kind={} msg={msg}", e.kind());
            1
        }
    }
}
