use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shifter::Direction;

/// Normal quantile for a two-sided 95% interval.
pub const WILSON_Z: f64 = 1.96;

/// Wilson score interval for `k` successes out of `n`, at `z = 1.96`.
pub fn wilson_interval(k: usize, n: usize) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::invalid(format!(
            "Wilson interval needs 0 <= k <= n and n >= 1, got k={k}, n={n}"
        )));
    }
    let (k, nf) = (k as f64, n as f64);
    let p = k / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0.0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let hi = if k == nf {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    Ok((lo, hi))
}

/// A proportion `k / n`; undefined (not zero) when `n == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub estimate: Option<f64>,
    pub k: usize,
    pub n: usize,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

impl Score {
    pub fn from_counts(k: usize, n: usize) -> Self {
        assert!(k <= n, "score numerator {k} exceeds denominator {n}");
        match wilson_interval(k, n) {
            Ok((lo, hi)) => Self {
                estimate: Some(k as f64 / n as f64),
                k,
                n,
                ci_lo: Some(lo),
                ci_hi: Some(hi),
            },
            Err(_) => Self {
                estimate: None,
                k,
                n,
                ci_lo: None,
                ci_hi: None,
            },
        }
    }

    pub fn is_defined(&self) -> bool {
        self.estimate.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreKind {
    #[serde(rename = "NEC")]
    Necessity,
    #[serde(rename = "SUF")]
    Sufficiency,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Necessity => "NEC",
            ScoreKind::Sufficiency => "SUF",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub attribute: usize,
    pub direction: Direction,
    pub kind: ScoreKind,
    pub score: Score,
}

/// NEC+/NEC-/SUF+/SUF- for every attribute, optionally within a context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub population_seed: u64,
    pub population_size: usize,
    /// Canonical context string; empty for the whole population.
    pub context: String,
    pub condition_on_factual_attribute: bool,
    pub entries: Vec<ScoreEntry>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ScoreReport {
    pub fn get(&self, attribute: usize, direction: Direction, kind: ScoreKind) -> Option<&Score> {
        self.entries
            .iter()
            .find(|e| e.attribute == attribute && e.direction == direction && e.kind == kind)
            .map(|e| &e.score)
    }

    pub fn attributes(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.attribute + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn has_undefined(&self) -> bool {
        self.entries.iter().any(|e| !e.score.is_defined())
    }

    /// `attribute,direction,kind,estimate,k,n,ci_lo,ci_hi,context`; undefined
    /// estimates and intervals are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,direction,kind,estimate,k,n,ci_lo,ci_hi,context\n");
        for e in &self.entries {
            let s = &e.score;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                e.attribute,
                e.direction,
                e.kind,
                opt(s.estimate),
                s.k,
                s.n,
                opt(s.ci_lo),
                opt(s.ci_hi),
                self.context
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
