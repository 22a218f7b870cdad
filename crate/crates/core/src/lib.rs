//! Monte-Carlo simulation and evaluation of delay-based PUFs.
//!
//! The crate models three designs built from multiplexer chains:
//!
//! * the classical two-line arbiter PUF (APUF),
//! * the three-line priority-arbiter PUF (PA-PUF), whose response bit is a
//!   function of the arrival order of three racing edges,
//! * the PA-PUF with feed-forward arbiters that drive downstream selects.
//!
//! Around the simulator sit the usual evaluation tools: Hamming-distance
//! statistics (uniformity, bit-aliasing, robustness, uniqueness,
//! reliability), a BCH code-offset fuzzy extractor and a logistic-regression
//! modeling attack.
//!
//! ```
//! use papuf::{circuit::Netlist, device::{synthesize_population, DelayParams}};
//! use papuf::response::collect_crps;
//!
//! let netlist = Netlist::pa_puf(64).unwrap();
//! let devices = synthesize_population(DelayParams::default(), &netlist, 3, 7).unwrap();
//! let crps = collect_crps(&devices, 10, 3, 128, 1).unwrap();
//! assert_eq!(crps.len(), 3 * 10 * 3);
//! ```

pub mod attack;
pub mod bits;
pub mod circuit;
pub mod cli;
pub mod device;
pub mod error;
pub mod keyfuzz;
pub mod metrics;
pub mod response;
pub mod seed;
pub mod textfmt;

pub use error::{PufError, Result};
