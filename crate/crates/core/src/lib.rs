//! Online neuroevolution for binary classification over time-ordered record
//! streams.
//!
//! A NEAT population is evolved window by window over the stream. Before it
//! trains on a window, the previous window's champion is scored on it, which
//! yields test-then-train (prequential) metrics for every window. Fitness can
//! be accuracy, recall plus specificity, loan profit, or profit with a
//! discounted carry-over from the previous window.
//!
//! ```no_run
//! use online_neat::data::{synthesize, normalize_stream, SynthConfig};
//! use online_neat::fitness::{FitnessKind, FitnessSpec};
//! use online_neat::stream::{run_online, StreamConfig};
//!
//! let records = normalize_stream(&synthesize(&SynthConfig::default()).unwrap()).unwrap();
//! let config = StreamConfig::new(500, FitnessSpec::new(FitnessKind::Pan));
//! let run = run_online(&records, &config).unwrap();
//! for report in &run.reports {
//!     println!("{:?}", report.test);
//! }
//! ```

pub mod data;
pub mod error;
pub mod evolution;
pub mod fitness;
pub mod genome;
pub mod par;
pub mod phenotype;
pub mod stream;

pub use error::{NeatError, Result};
