//! Device populations: process-variation delay sampling and per-evaluation
//! measurement noise.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::circuit::{Netlist, MAX_LINES};
use crate::error::{PufError, Result};
use crate::seed::{derive_seed, rng};
use crate::textfmt;

/// Terminal jitter that puts a default 64-stage PA-PUF at roughly 95.4 %
/// reliability with 128-bit responses. Produced by
/// [`crate::metrics::calibrate_noise`] on the default population; the
/// `noise_calibration` example reproduces it.
pub const DEFAULT_SIGMA_NOISE: f64 = 2.08;

/// How an arbiter resolves a race whose gap is inside the metastability window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Fair coin drawn from the evaluation seed.
    #[default]
    Random,
    /// The data input never wins a tie, so ties read `0`.
    Deterministic,
}

impl TiePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TiePolicy::Random => "random",
            TiePolicy::Deterministic => "deterministic",
        }
    }
}

impl FromStr for TiePolicy {
    type Err = PufError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" => Ok(TiePolicy::Random),
            "deterministic" => Ok(TiePolicy::Deterministic),
            other => Err(PufError::Parameter(format!("unknown tie policy {other:?}"))),
        }
    }
}

/// Delay model parameters, in abstract time units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayParams {
    pub mean_delay: f64,
    /// Device-to-device standard deviation of each segment delay.
    pub sigma_process: f64,
    /// Standard deviation of the jitter added to each arbiter input.
    pub sigma_noise: f64,
    pub metastability_window: f64,
    pub tie_policy: TiePolicy,
}

impl Default for DelayParams {
    fn default() -> Self {
        DelayParams {
            mean_delay: 100.0,
            sigma_process: 5.0,
            sigma_noise: DEFAULT_SIGMA_NOISE,
            metastability_window: 0.0,
            tie_policy: TiePolicy::Random,
        }
    }
}

impl DelayParams {
    pub fn noiseless() -> Self {
        DelayParams {
            sigma_noise: 0.0,
            ..Self::default()
        }
    }

    pub fn with_noise(self, sigma_noise: f64) -> Self {
        DelayParams {
            sigma_noise,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_delay.is_finite() && self.mean_delay > 0.0) {
            return Err(PufError::Parameter(format!(
                "mean_delay must be positive, got {}",
                self.mean_delay
            )));
        }
        for (name, v) in [
            ("sigma_process", self.sigma_process),
            ("sigma_noise", self.sigma_noise),
            ("metastability_window", self.metastability_window),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PufError::Parameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One simulated chip: a topology plus its sampled segment delays.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceInstance {
    device_id: u64,
    netlist: Netlist,
    params: DelayParams,
    seed: u64,
    /// Row-major `[stage][select][line]`.
    delays: Vec<f64>,
}

/// Rounds to six decimals so the device file reproduces the table exactly.
fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl DeviceInstance {
    /// Wraps an explicit delay table laid out `[stage][select][line]`.
    pub fn from_table(
        device_id: u64,
        netlist: Netlist,
        params: DelayParams,
        seed: u64,
        delays: Vec<f64>,
    ) -> Result<Self> {
        params.validate()?;
        if delays.len() != netlist.table_len() {
            return Err(PufError::Shape(format!(
                "delay table has {} entries, netlist {netlist} needs {}",
                delays.len(),
                netlist.table_len()
            )));
        }
        if let Some(bad) = delays.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(PufError::Parameter(format!("segment delay {bad} is not positive")));
        }
        Ok(DeviceInstance {
            device_id,
            netlist,
            params,
            seed,
            delays,
        })
    }

    pub fn device_id(&self) -> u64 {
        self.device_id
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn params(&self) -> &DelayParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    #[inline]
    pub fn delay(&self, stage: usize, select: bool, line: usize) -> f64 {
        let lines = self.netlist.lines();
        self.delays[(stage * 2 + select as usize) * lines + line]
    }

    /// Same silicon, different measurement conditions.
    pub fn with_params(&self, params: DelayParams) -> Result<Self> {
        params.validate()?;
        Ok(DeviceInstance {
            params,
            ..self.clone()
        })
    }

    /// Same delays, different topology of equal table size (e.g. PA-PUF vs
    /// FF-PA-PUF with the same stage count).
    pub fn with_netlist(&self, netlist: Netlist) -> Result<Self> {
        Self::from_table(self.device_id, netlist, self.params, self.seed, self.delays.clone())
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        out.push_str("# papuf-device v1\n");
        let _ = writeln!(out, "device_id={}", self.device_id);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "netlist={}", self.netlist);
        let _ = writeln!(out, "mean_delay={}", p.mean_delay);
        let _ = writeln!(out, "sigma_process={}", p.sigma_process);
        let _ = writeln!(out, "sigma_noise={}", p.sigma_noise);
        let _ = writeln!(out, "metastability_window={}", p.metastability_window);
        let _ = writeln!(out, "tie_policy={}", p.tie_policy.as_str());
        let lines = self.netlist.lines();
        let _ = writeln!(out, "# delays: stage,select,line0..line{}", lines - 1);
        for stage in 0..self.netlist.stages() {
            for select in [false, true] {
                let _ = write!(out, "delay={stage},{}", select as u8);
                for line in 0..lines {
                    let _ = write!(out, ",{:.6}", self.delay(stage, select, line));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const WHAT: &str = "device file";
        let mut scalars = std::collections::BTreeMap::new();
        let mut rows = Vec::new();
        for (n, line) in textfmt::body(text) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PufError::format(WHAT, format!("line {n}: expected key=value")))?;
            if k.trim() == "delay" {
                rows.push((n, v.trim()));
            } else {
                scalars.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let netlist: Netlist = textfmt::field(&scalars, "netlist", WHAT)?.parse()?;
        let params = DelayParams {
            mean_delay: textfmt::parse_field(&scalars, "mean_delay", WHAT)?,
            sigma_process: textfmt::parse_field(&scalars, "sigma_process", WHAT)?,
            sigma_noise: textfmt::parse_field(&scalars, "sigma_noise", WHAT)?,
            metastability_window: textfmt::parse_field(&scalars, "metastability_window", WHAT)?,
            tie_policy: match scalars.get("tie_policy") {
                Some(v) => v.parse()?,
                None => TiePolicy::Random,
            },
        };
        let lines = netlist.lines();
        let mut delays = vec![f64::NAN; netlist.table_len()];
        for (n, row) in rows {
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            if fields.len() != 2 + lines {
                return Err(PufError::format(WHAT, format!("line {n}: expected {} fields", 2 + lines)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| PufError::format(WHAT, format!("line {n}: {e}")))
            };
            let stage = fields[0]
                .parse::<usize>()
                .map_err(|e| PufError::format(WHAT, format!("line {n}: {e}")))?;
            let select = match fields[1] {
                "0" => 0,
                "1" => 1,
                other => return Err(PufError::format(WHAT, format!("line {n}: select {other:?}"))),
            };
            if stage >= netlist.stages() {
                return Err(PufError::format(WHAT, format!("line {n}: stage {stage} out of range")));
            }
            for line in 0..lines {
                delays[(stage * 2 + select) * lines + line] = num(fields[2 + line])?;
            }
        }
        if delays.iter().any(|d| d.is_nan()) {
            return Err(PufError::format(WHAT, "delay table is incomplete"));
        }
        Self::from_table(
            textfmt::parse_field(&scalars, "device_id", WHAT)?,
            netlist,
            params,
            textfmt::parse_field(&scalars, "seed", WHAT)?,
            delays,
        )
    }
}

/// Samples one device: every segment delay i.i.d. `Normal(mean, sigma_process)`,
/// redrawn until positive and rounded to six decimals.
pub fn synthesize_device(params: DelayParams, netlist: Netlist, seed: u64) -> Result<DeviceInstance> {
    synthesize_with_id(params, netlist, seed, 0)
}

fn synthesize_with_id(
    params: DelayParams,
    netlist: Netlist,
    seed: u64,
    device_id: u64,
) -> Result<DeviceInstance> {
    params.validate()?;
    let normal = Normal::new(params.mean_delay, params.sigma_process)
        .map_err(|e| PufError::Parameter(e.to_string()))?;
    let mut r = rng(seed);
    let delays = (0..netlist.table_len())
        .map(|_| loop {
            let d = quantize(normal.sample(&mut r));
            if d > 0.0 {
                break d;
            }
        })
        .collect();
    DeviceInstance::from_table(device_id, netlist, params, seed, delays)
}

/// `count` devices; device `i` has id `i` and seed `derive_seed(master_seed, i)`.
pub fn synthesize_population(
    params: DelayParams,
    netlist: &Netlist,
    count: usize,
    master_seed: u64,
) -> Result<Vec<DeviceInstance>> {
    if count == 0 {
        return Err(PufError::Parameter("population size must be at least 1".into()));
    }
    (0..count as u64)
        .map(|i| synthesize_with_id(params, netlist.clone(), derive_seed(master_seed, i), i))
        .collect()
}

/// Arrival-time jitter for one arbiter observation: one `Normal(0, sigma_noise)`
/// draw per line. Entries past the device's line count are zero.
pub fn sample_noise(device: &DeviceInstance, eval_seed: u64) -> [f64; MAX_LINES] {
    let sigma = device.params.sigma_noise;
    let mut out = [0.0; MAX_LINES];
    if sigma == 0.0 {
        return out;
    }
    let mut r = rng(eval_seed);
    for slot in out.iter_mut().take(device.netlist.lines()) {
        let z: f64 = r.sample(StandardNormal);
        *slot = sigma * z;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pa64() -> Netlist {
        Netlist::pa_puf(64).unwrap()
    }

    #[test]
    fn zero_process_variation_gives_nominal_delays() {
        let params = DelayParams {
            sigma_process: 0.0,
            ..DelayParams::default()
        };
        let d = synthesize_device(params, pa64(), 99).unwrap();
        assert!(d.delays().iter().all(|&x| x == 100.0));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize_device(DelayParams::default(), pa64(), 3).unwrap();
        let b = synthesize_device(DelayParams::default(), pa64(), 3).unwrap();
        assert_eq!(a.delays(), b.delays());
        let c = synthesize_device(DelayParams::default(), pa64(), 4).unwrap();
        assert_ne!(a.delays(), c.delays());
    }

    #[test]
    fn sample_mean_within_three_standard_errors() {
        let d = synthesize_device(DelayParams::default(), pa64(), 1).unwrap();
        assert_eq!(d.delays().len(), 384);
        let mean = d.delays().iter().sum::<f64>() / 384.0;
        let bound = 3.0 * 5.0 / (384f64).sqrt();
        assert!((mean - 100.0).abs() <= bound, "mean {mean}");
    }

    #[test]
    fn rejects_bad_params() {
        let bad = DelayParams {
            mean_delay: 0.0,
            ..DelayParams::default()
        };
        assert!(matches!(synthesize_device(bad, pa64(), 0), Err(PufError::Parameter(_))));
        let bad = DelayParams {
            sigma_noise: -1.0,
            ..DelayParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(synthesize_population(DelayParams::default(), &pa64(), 0, 1).is_err());
    }

    #[test]
    fn positivity_survives_huge_variance() {
        let params = DelayParams {
            mean_delay: 1.0,
            sigma_process: 3.0,
            ..DelayParams::default()
        };
        let d = synthesize_device(params, pa64(), 11).unwrap();
        assert!(d.delays().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn population_members_differ() {
        let pop = synthesize_population(DelayParams::default(), &pa64(), 50, 8).unwrap();
        assert_eq!(pop.len(), 50);
        for i in 0..pop.len() {
            assert_eq!(pop[i].device_id(), i as u64);
            for j in i + 1..pop.len() {
                assert_ne!(pop[i].delays(), pop[j].delays());
                assert_ne!(pop[i].seed(), pop[j].seed());
            }
        }
        // Growing the population leaves earlier members untouched.
        let bigger = synthesize_population(DelayParams::default(), &pa64(), 51, 8).unwrap();
        assert_eq!(&bigger[..50], &pop[..]);
    }

    #[test]
    fn noise_is_zero_without_sigma_and_seeded_otherwise() {
        let quiet = synthesize_device(DelayParams::noiseless(), pa64(), 1).unwrap();
        assert_eq!(sample_noise(&quiet, 5), [0.0; 3]);
        let noisy = quiet.with_params(DelayParams::noiseless().with_noise(2.0)).unwrap();
        assert_eq!(sample_noise(&noisy, 5), sample_noise(&noisy, 5));
        assert_ne!(sample_noise(&noisy, 5), sample_noise(&noisy, 6));
    }

    #[test]
    fn noise_standard_deviation() {
        let d = synthesize_device(DelayParams::noiseless().with_noise(2.0), pa64(), 1).unwrap();
        let draws: Vec<f64> = (0..100_000u64 / 3 + 1)
            .flat_map(|s| sample_noise(&d, s))
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 2.0).abs() <= 0.04, "sd {sd}");
    }

    #[test]
    fn device_file_round_trip_is_exact() {
        let d = synthesize_device(DelayParams::default(), Netlist::default_ff(), 42).unwrap();
        let back = DeviceInstance::from_text(&d.to_text()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_text(), d.to_text());
    }

    #[test]
    fn device_file_rejects_truncation() {
        let d = synthesize_device(DelayParams::default(), Netlist::apuf(4).unwrap(), 42).unwrap();
        let text = d.to_text();
        let cut: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(DeviceInstance::from_text(&cut).is_err());
    }
}
