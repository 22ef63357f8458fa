use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scores::{ScoreKind, ScoreReport};
use crate::error::{check_dim, Result};
use crate::shifter::Direction;
use crate::stats::spearman;

/// Known coefficient next to the four directional scores of its attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub attribute: usize,
    pub beta: f64,
    pub nec_plus: Option<f64>,
    pub nec_minus: Option<f64>,
    pub suf_plus: Option<f64>,
    pub suf_minus: Option<f64>,
}

/// Rank agreement between known logistic coefficients and estimated scores.
/// A correlation is `None` when a score is undefined or a side is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rows: Vec<BaselineRow>,
    /// rho(beta, SUF+)
    pub beta_suf_plus: Option<f64>,
    /// rho(-beta, NEC+)
    pub neg_beta_nec_plus: Option<f64>,
    /// rho(-beta, SUF-)
    pub neg_beta_suf_minus: Option<f64>,
    /// rho(beta, NEC-)
    pub beta_nec_minus: Option<f64>,
}

fn column(rows: &[BaselineRow], pick: impl Fn(&BaselineRow) -> Option<f64>) -> Option<Vec<f64>> {
    rows.iter().map(pick).collect()
}

impl Alignment {
    pub fn new(beta: &[f64], report: &ScoreReport) -> Result<Self> {
        check_dim("baseline coefficients", report.attributes(), beta.len())?;
        let est = |i, dir, kind| report.get(i, dir, kind).and_then(|s| s.estimate);
        let rows: Vec<BaselineRow> = beta
            .iter()
            .enumerate()
            .map(|(i, &b)| BaselineRow {
                attribute: i,
                beta: b,
                nec_plus: est(i, Direction::Increase, ScoreKind::Necessity),
                nec_minus: est(i, Direction::Decrease, ScoreKind::Necessity),
                suf_plus: est(i, Direction::Increase, ScoreKind::Sufficiency),
                suf_minus: est(i, Direction::Decrease, ScoreKind::Sufficiency),
            })
            .collect();
        let pos: Vec<f64> = beta.to_vec();
        let neg: Vec<f64> = beta.iter().map(|b| -b).collect();
        let rho = |coef: &[f64], pick: fn(&BaselineRow) -> Option<f64>| {
            column(&rows, pick).and_then(|scores| spearman(coef, &scores))
        };
        Ok(Self {
            beta_suf_plus: rho(&pos, |r| r.suf_plus),
            neg_beta_nec_plus: rho(&neg, |r| r.nec_plus),
            neg_beta_suf_minus: rho(&neg, |r| r.suf_minus),
            beta_nec_minus: rho(&pos, |r| r.nec_minus),
            rows,
        })
    }

    pub fn correlations(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("rho(beta,SUF+)", self.beta_suf_plus),
            ("rho(-beta,NEC+)", self.neg_beta_nec_plus),
            ("rho(-beta,SUF-)", self.neg_beta_suf_minus),
            ("rho(beta,NEC-)", self.beta_nec_minus),
        ]
    }
}

/// `attribute,beta,nec_plus,nec_minus,suf_plus,suf_minus`, then the four
/// correlations as `#`-prefixed trailer lines.
pub fn baseline_csv(alignment: &Alignment) -> String {
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("attribute,beta,nec_plus,nec_minus,suf_plus,suf_minus\n");
    for r in &alignment.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.attribute,
            r.beta,
            f(r.nec_plus),
            f(r.nec_minus),
            f(r.suf_plus),
            f(r.suf_minus)
        );
    }
    for (name, v) in alignment.correlations() {
        let _ = writeln!(out, "# {name},{}", f(v));
    }
    out
}
