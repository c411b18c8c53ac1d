use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::DirichletCounts;
use crate::probmath::{normalize_columns, Matrix};

pub const DEFAULT_WINDOW: usize = 10;

/// When and how a new hidden concept is added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Window surprisal (nats) above which a concept is added.
    pub threshold: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Concentration given to every new Dirichlet cell.
    #[serde(default = "default_prior")]
    pub prior_concentration: f64,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

fn default_prior() -> f64 {
    1.0
}

impl ExpansionConfig {
    /// Window of 10 and a threshold of `0.9 ln m`, just under the surprisal of
    /// guessing uniformly among `m` stimuli.
    pub fn for_stimuli(n_stimuli: usize) -> Self {
        let ln_m = (n_stimuli as f64).ln();
        Self {
            threshold: ln_m - 0.1 * ln_m,
            window: DEFAULT_WINDOW,
            prior_concentration: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub expanded: bool,
    pub window_surprisal: f64,
    pub threshold: f64,
    pub concepts_before: usize,
    pub concepts_after: usize,
}

/// Mean over the window of `−ln max_j A[φ, j]`: how badly the best-matching
/// concept explains each stimulus.
pub fn window_surprisal(a: &Matrix, window: &[usize]) -> Result<f64> {
    if window.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &o in window {
        if o >= a.rows() {
            return Err(Error::domain(format!("stimulus {o} outside the alphabet")));
        }
        let best = a.row(o).iter().copied().fold(0.0, f64::max);
        total += if best > 0.0 { -best.ln() } else { f64::INFINITY };
    }
    Ok(total / window.len() as f64)
}

/// Adds one hidden concept when the window is not explained by any existing
/// concept. The new `a` column is the prior concentration plus the window's
/// stimulus counts; the new `b` rows and columns and `d` entry sit at the
/// prior. Existing `a` columns are untouched.
pub fn expand_concepts(
    counts: &DirichletCounts,
    window: &[usize],
    cfg: &ExpansionConfig,
) -> Result<(DirichletCounts, ExpansionReport)> {
    if cfg.threshold.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::domain("expansion threshold must be positive"));
    }
    if cfg.prior_concentration.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::domain("prior concentration must be positive"));
    }
    let a = normalize_columns(counts.a())?;
    let surprisal = window_surprisal(&a, window)?;
    let before = counts.n_concepts();
    let mut out = counts.clone();
    let expanded = surprisal > cfg.threshold;
    if expanded {
        let mut column = vec![cfg.prior_concentration; counts.n_stimuli()];
        for &o in window {
            column[o] += 1.0;
        }
        out.push_concept(&column, cfg.prior_concentration);
    }
    Ok((
        out,
        ExpansionReport {
            expanded,
            window_surprisal: surprisal,
            threshold: cfg.threshold,
            concepts_before: before,
            concepts_after: before + usize::from(expanded),
        },
    ))
}
