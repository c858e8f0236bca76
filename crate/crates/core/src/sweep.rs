//! Parameter sweeps over the fresh-text size and the seed-corpus weight.

use serde::Serialize;

use crate::bootstrap::{bootstrap_run, tag_all, test_scores, train_all, BootstrapConfig, NoHook, TaggerScore};
use crate::combine::{combine_training, error_of_combination, intersect_taggings, seed_weight_for_target};
use crate::corpus::{Corpus, WeightedCorpus};
use crate::error::{Error, Result};
use crate::eval::{format_table, format_tsv, percent};

/// Seed-corpus error rates whose weights make up the default weight grid.
pub const DEFAULT_TARGET_ERRORS: [f64; 7] = [0.001, 0.002, 0.003, 0.004, 0.005, 0.0075, 0.01];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    /// Fresh tokens drawn, or the grid weight / target that produced the row.
    pub fresh_tokens: usize,
    pub target_error: Option<f64>,
    pub seed_weight: f64,
    pub virtual_size: f64,
    pub agreed_tokens: usize,
    pub coverage: f64,
    /// Error of the retraining corpus predicted from the segment errors.
    pub combined_error: f64,
    pub scores: Vec<TaggerScore>,
    pub best_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    /// Error assumed for the agreement segment.
    pub agreed_error: f64,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["fresh", "target", "w0", "virtual", "agreed", "coverage", "error"]
            .map(String::from)
            .to_vec();
        if let Some(r) = self.rows.first() {
            for s in &r.scores {
                h.push(format!("{}_all", s.tagger));
                h.push(format!("{}_amb", s.tagger));
            }
        }
        h.push("best".into());
        h
    }

    fn cells(&self, precise: bool) -> Vec<Vec<String>> {
        let num = |x: f64| if precise { format!("{x}") } else { percent(x) };
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.fresh_tokens.to_string(),
                    r.target_error.map(num).unwrap_or_else(|| "-".into()),
                    if precise { format!("{}", r.seed_weight) } else { format!("{:.4}", r.seed_weight) },
                    format!("{:.1}", r.virtual_size),
                    r.agreed_tokens.to_string(),
                    num(r.coverage),
                    num(r.combined_error),
                ];
                for s in &r.scores {
                    row.push(num(s.overall));
                    row.push(num(s.ambiguous));
                }
                row.push(num(r.best_accuracy));
                row
            })
            .collect()
    }

    /// Human-readable table with percentages.
    pub fn to_table(&self) -> String {
        let h = self.header();
        format_table(&h.iter().map(String::as_str).collect::<Vec<_>>(), &self.cells(false))
    }

    /// Tab-separated rows with ratios at full precision.
    pub fn to_tsv(&self) -> String {
        let h = self.header();
        format_tsv(&h.iter().map(String::as_str).collect::<Vec<_>>(), &self.cells(true))
    }
}

/// One single-iteration bootstrap per fresh size, each drawing from the start
/// of `raw`. Row 0 is the seed-only baseline.
pub fn sweep_sizes(config: &BootstrapConfig, c0: &Corpus, test: &Corpus, raw: &Corpus, sizes: &[usize]) -> Result<Sweep> {
    if sizes.is_empty() {
        return Err(Error::invalid("size grid is empty"));
    }
    let mut rows = Vec::with_capacity(sizes.len() + 1);
    let mut agreed_error = 0.0;
    for &size in sizes {
        let cfg = BootstrapConfig {
            fresh_size: size,
            max_iterations: 1,
            ..config.clone()
        };
        let report = bootstrap_run(&cfg, c0, test, &mut raw.sentences.iter().cloned(), &mut NoHook)?;
        let base = report.baseline();
        if rows.is_empty() {
            rows.push(SweepRow {
                fresh_tokens: 0,
                target_error: None,
                seed_weight: 1.0,
                virtual_size: base.virtual_size,
                agreed_tokens: 0,
                coverage: 0.0,
                combined_error: 0.0,
                scores: base.scores.clone(),
                best_accuracy: base.best_accuracy,
            });
        }
        let r = report
            .iterations
            .get(1)
            .ok_or_else(|| Error::invalid(format!("raw corpus holds fewer than {size} tokens")))?;
        agreed_error = r.agreed_error;
        rows.push(SweepRow {
            fresh_tokens: r.fresh_tokens,
            target_error: config.target_error,
            seed_weight: r.seed_weight,
            virtual_size: r.virtual_size,
            agreed_tokens: r.agreed_tokens,
            coverage: r.fresh_coverage.unwrap_or(0.0),
            combined_error: r.training_error,
            scores: r.scores.clone(),
            best_accuracy: r.best_accuracy,
        });
    }
    Ok(Sweep { agreed_error, rows })
}

/// Seed weights to try: given directly, or derived from target error rates.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightGrid {
    Weights(Vec<f64>),
    TargetErrors(Vec<f64>),
}

/// Tags `fresh` once with seed-trained taggers, then retrains on the seed
/// corpus weighted by each grid point plus the agreement.
pub fn sweep_weights(config: &BootstrapConfig, c0: &Corpus, test: &Corpus, fresh: &Corpus, grid: &WeightGrid) -> Result<Sweep> {
    let points = match grid {
        WeightGrid::Weights(w) | WeightGrid::TargetErrors(w) => w.len(),
    };
    if points == 0 {
        return Err(Error::invalid("weight grid is empty"));
    }
    let taggers = train_all(config, &WeightedCorpus::single(c0.clone()))?;
    let base = test_scores(&taggers, test)?;
    let agreed_error = 1.0 - base.agreement.accuracy.unwrap_or(base.scores[base.best].overall);
    let agreement = intersect_taggings(fresh, &tag_all(&taggers, fresh)?)?;
    let n0 = c0.labeled_count() as f64;
    let n_new = agreement.agreed.labeled_count() as f64;
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let (target, w0) = match grid {
            WeightGrid::Weights(w) => (None, w[k]),
            WeightGrid::TargetErrors(t) => (Some(t[k]), seed_weight_for_target(n0, n_new, agreed_error, t[k])?),
        };
        let data = combine_training(c0, &agreement.agreed, w0, agreed_error)?;
        let retrained = train_all(config, &data)?;
        let t = test_scores(&retrained, test)?;
        rows.push(SweepRow {
            fresh_tokens: agreement.total_tokens,
            target_error: target,
            seed_weight: w0,
            virtual_size: data.virtual_size(),
            agreed_tokens: agreement.agreed_tokens,
            coverage: agreement.coverage,
            combined_error: error_of_combination(n0, 0.0, n_new, agreed_error, w0)?,
            best_accuracy: t.scores[t.best].overall,
            scores: t.scores,
        });
    }
    Ok(Sweep { agreed_error, rows })
}
