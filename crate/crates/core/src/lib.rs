//! Pre- and post-experimental rejection odds.
//!
//! `design` computes average power and the rejection ratio before data are
//! seen; `evidence` turns observed statistics or p-values into Bayes
//! factors and the p-value bound; `freqcheck` verifies the frequentist
//! identity linking the two; `stopping` simulates optional stopping; and
//! `reanalyze` annotates published p-values with bounds.

pub mod cli;
pub mod design;
pub mod error;
pub mod evidence;
pub mod format;
pub mod freqcheck;
pub mod mathcore;
pub mod reanalyze;
pub mod stopping;

pub use error::{Error, Result};
