//! Link prediction ranking metrics.
//!
//! Every evaluation triple `(h, r, t)` is ranked twice: tail corruption scores
//! `(h, r, ?)` and head corruption scores `(t, r⁻¹, ?)` through the reciprocal
//! relation. In the filtered setting, candidates forming another known triple
//! (in any split) are removed before ranking.

use std::collections::BTreeSet;
use std::fmt;

use crate::data::{LiteralMatrix, Split, Triple, TripleStore};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Setting {
    Raw,
    Filtered,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Raw => "raw",
            Setting::Filtered => "filtered",
        })
    }
}

/// Rank of `true_entity` among `scores`.
///
/// Candidates in `filter` (other than the true entity) are skipped. The rank
/// is `1 + #{strictly higher} + ⌊#{exact ties}/2⌋`.
pub fn rank_of(true_entity: usize, scores: &[f64], filter: Option<&BTreeSet<usize>>) -> usize {
    let target = scores[true_entity];
    let mut higher = 0;
    let mut ties = 0;
    for (x, &s) in scores.iter().enumerate() {
        if x == true_entity || filter.is_some_and(|f| f.contains(&x)) {
            continue;
        }
        if s > target {
            higher += 1;
        } else if s == target {
            ties += 1;
        }
    }
    1 + higher + ties / 2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl Metrics {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let n = ranks.len() as f64;
        let frac = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        Metrics {
            mr: ranks.iter().map(|&r| r as f64).sum::<f64>() / n,
            mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
            hits1: frac(1),
            hits3: frac(3),
            hits10: frac(10),
        }
    }

    pub fn hits_at(&self, k: usize) -> Option<f64> {
        match k {
            1 => Some(self.hits1),
            3 => Some(self.hits3),
            10 => Some(self.hits10),
            _ => None,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("mr", self.mr),
            ("mrr", self.mrr),
            ("hits1", self.hits1),
            ("hits3", self.hits3),
            ("hits10", self.hits10),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingReport {
    pub setting: Setting,
    pub n_test: usize,
    /// Head corruption `(?, r, t)`.
    pub head: Metrics,
    /// Tail corruption `(h, r, ?)`.
    pub tail: Metrics,
    /// Both directions pooled.
    pub overall: Metrics,
    pub head_ranks: Vec<usize>,
    pub tail_ranks: Vec<usize>,
}

impl RankingReport {
    pub fn from_ranks(setting: Setting, head_ranks: Vec<usize>, tail_ranks: Vec<usize>) -> Self {
        let all: Vec<usize> = head_ranks.iter().chain(&tail_ranks).copied().collect();
        RankingReport {
            setting,
            n_test: tail_ranks.len(),
            head: Metrics::from_ranks(&head_ranks),
            tail: Metrics::from_ranks(&tail_ranks),
            overall: Metrics::from_ranks(&all),
            head_ranks,
            tail_ranks,
        }
    }

    /// `key=value` lines: `setting`, `n_test`, then `{head,tail,overall}.{mr,mrr,hits1,hits3,hits10}`.
    pub fn to_key_values(&self) -> String {
        let mut out = format!("setting={}\nn_test={}\n", self.setting, self.n_test);
        for (dir, m) in [("head", &self.head), ("tail", &self.tail), ("overall", &self.overall)] {
            for (k, v) in m.fields() {
                out.push_str(&format!("{}.{}={:.17e}\n", dir, k, v));
            }
        }
        out
    }
}

impl fmt::Display for RankingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ranking over {} triples", self.setting, self.n_test)?;
        writeln!(
            f,
            "{:<10}{:>12}{:>10}{:>10}{:>10}{:>10}",
            "", "MR", "MRR", "Hits@1", "Hits@3", "Hits@10"
        )?;
        for (name, m) in [("head", &self.head), ("tail", &self.tail), ("overall", &self.overall)] {
            writeln!(
                f,
                "{:<10}{:>12.2}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
                name, m.mr, m.mrr, m.hits1, m.hits3, m.hits10
            )?;
        }
        Ok(())
    }
}

/// Ranks every triple of `split` in both corruption directions.
pub fn evaluate(model: &Model, store: &TripleStore, literals: &LiteralMatrix, split: Split, setting: Setting) -> Result<RankingReport> {
    evaluate_triples(model, store, literals, store.split(split), setting)
}

pub fn evaluate_triples(
    model: &Model,
    store: &TripleStore,
    literals: &LiteralMatrix,
    triples: &[Triple],
    setting: Setting,
) -> Result<RankingReport> {
    if triples.is_empty() {
        return Err(Error::Config("cannot evaluate an empty split".into()));
    }
    let scorer = model.scorer(literals)?;
    let filter = |e: usize, r: usize| match setting {
        Setting::Filtered => store.known_tails(e, r),
        Setting::Raw => None,
    };
    let ranks = model
        .exec
        .map_range(triples.len(), |i| -> Result<(usize, usize)> {
            let t = triples[i];
            let inv = store.reciprocal(t.relation);
            let tail_scores = scorer.scores(t.head, t.relation)?;
            let head_scores = scorer.scores(t.tail, inv)?;
            Ok((
                rank_of(t.head, &head_scores, filter(t.tail, inv)),
                rank_of(t.tail, &tail_scores, filter(t.head, t.relation)),
            ))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (head, tail) = ranks.into_iter().unzip();
    Ok(RankingReport::from_ranks(setting, head, tail))
}
