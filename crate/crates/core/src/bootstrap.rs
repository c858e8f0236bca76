//! The retraining loop: train every tagger, tag fresh text, keep the
//! unanimous decisions, combine them with the seed corpus and retrain while
//! the best test accuracy keeps improving significantly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::combine::{apply_corrections, combine_training, intersect_taggings, seed_weight_for_target, AgreementResult, Correction};
use crate::corpus::{Corpus, Sentence, WeightedCorpus};
use crate::error::{Error, Result};
use crate::eval::{agreement_report, AgreementReport, correctness, evaluate, format_table, format_tsv, mcnemar_significance, percent, McNemar};
use crate::tagger::{TaggerParams, TaggerSpec, TrainedTagger};
use crate::tagging::Tagging;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub taggers: Vec<TaggerSpec>,
    pub params: TaggerParams,
    /// Tokens of fresh text drawn per iteration.
    pub fresh_size: usize,
    /// Weight of the seed corpus; excludes `target_error`.
    pub c0_weight: Option<f64>,
    /// Desired error of the retraining corpus; the seed weight is derived from it.
    pub target_error: Option<f64>,
    pub max_iterations: usize,
    /// Significance level of the stop test.
    pub stop_threshold: f64,
    pub hand_correct: bool,
    /// Leave out sentences that still contain uncorrected gaps.
    pub drop_gapped: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            taggers: vec![TaggerSpec::Tree, "relax-BT".parse().expect("valid spec")],
            params: TaggerParams::default(),
            fresh_size: 50_000,
            c0_weight: Some(1.0),
            target_error: None,
            max_iterations: 1,
            stop_threshold: 0.05,
            hand_correct: false,
            drop_gapped: false,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taggers.len() < 2 {
            return Err(Error::invalid("bootstrapping needs at least two taggers"));
        }
        match (self.c0_weight, self.target_error) {
            (Some(w), None) if w >= 0.0 && w.is_finite() => {}
            (Some(w), None) => return Err(Error::invalid(format!("c0_weight must be non-negative, got {w}"))),
            (None, Some(e)) if e > 0.0 && e < 1.0 => {}
            (None, Some(e)) => return Err(Error::invalid(format!("target_error must lie in (0, 1), got {e}"))),
            _ => return Err(Error::invalid("set exactly one of c0_weight and target_error")),
        }
        if self.fresh_size == 0 {
            return Err(Error::invalid("fresh_size must be positive"));
        }
        if !(self.stop_threshold > 0.0 && self.stop_threshold < 1.0) {
            return Err(Error::invalid("stop_threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    NotSignificant,
    DataExhausted,
    AwaitingCorrections,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIterations => "max iterations",
            StopReason::NotSignificant => "not significant",
            StopReason::DataExhausted => "data exhausted",
            StopReason::AwaitingCorrections => "awaiting corrections",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaggerScore {
    pub tagger: String,
    pub overall: f64,
    pub ambiguous: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Labeled tokens in the seed and agreement segments.
    pub seed_tokens: usize,
    pub agreed_tokens: usize,
    pub seed_weight: f64,
    pub virtual_size: f64,
    pub fresh_tokens: usize,
    /// Unanimity on the fresh text; absent at iteration 0.
    pub fresh_coverage: Option<f64>,
    /// Accuracy of the unanimous fresh tokens, when the fresh text has gold.
    pub fresh_agreement_accuracy: Option<f64>,
    /// Error assumed for the agreement segment.
    pub agreed_error: f64,
    /// Estimated error of the whole retraining corpus.
    pub training_error: f64,
    pub test_coverage: f64,
    pub test_agreement_accuracy: Option<f64>,
    pub scores: Vec<TaggerScore>,
    pub best: usize,
    pub best_accuracy: f64,
    pub significance: Option<McNemar>,
    pub terminal: bool,
    pub stop_reason: Option<StopReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub iterations: Vec<IterationRecord>,
}

fn opt(x: Option<f64>) -> String {
    x.map(percent).unwrap_or_else(|| "-".into())
}

impl BootstrapReport {
    pub fn terminal(&self) -> &IterationRecord {
        self.iterations.iter().find(|r| r.terminal).expect("one terminal record")
    }

    pub fn baseline(&self) -> &IterationRecord {
        &self.iterations[0]
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "iter", "seed", "agreed", "w0", "virtual", "fresh", "coverage", "agree_acc", "agreed_err", "train_err",
            "test_cov", "test_agree",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if let Some(r) = self.iterations.first() {
            for s in &r.scores {
                h.push(format!("{}_all", s.tagger));
                h.push(format!("{}_amb", s.tagger));
            }
        }
        h.extend(["best", "p_value", "stop"].map(String::from));
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iterations
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.iteration.to_string(),
                    r.seed_tokens.to_string(),
                    r.agreed_tokens.to_string(),
                    format!("{:.4}", r.seed_weight),
                    format!("{:.1}", r.virtual_size),
                    r.fresh_tokens.to_string(),
                    opt(r.fresh_coverage),
                    opt(r.fresh_agreement_accuracy),
                    percent(r.agreed_error),
                    percent(r.training_error),
                    percent(r.test_coverage),
                    opt(r.test_agreement_accuracy),
                ];
                for s in &r.scores {
                    row.push(percent(s.overall));
                    row.push(percent(s.ambiguous));
                }
                row.push(r.scores[r.best].tagger.clone());
                row.push(r.significance.as_ref().map(|m| format!("{:.3e}", m.p_value)).unwrap_or_else(|| "-".into()));
                row.push(r.stop_reason.map(|s| s.to_string()).unwrap_or_default());
                row
            })
            .collect()
    }

    pub fn to_table(&self) -> String {
        let h = self.header();
        let h: Vec<&str> = h.iter().map(String::as_str).collect();
        format_table(&h, &self.rows())
    }

    pub fn to_tsv(&self) -> String {
        let h = self.header();
        let h: Vec<&str> = h.iter().map(String::as_str).collect();
        format_tsv(&h, &self.rows())
    }
}

pub enum CorrectionDecision {
    /// Apply these and go on.
    Apply(Vec<Correction>),
    /// Stop here; the loop can be re-run once corrections exist.
    Suspend,
}

/// Observer and hand-correction hook.
pub trait BootstrapHook {
    fn correct(&mut self, _iteration: usize, _agreement: &AgreementResult) -> Result<CorrectionDecision> {
        Ok(CorrectionDecision::Suspend)
    }

    /// Called after each iteration is scored, with the taggers trained in it
    /// and the agreement that produced their training data.
    fn iteration_done(&mut self, _record: &IterationRecord, _taggers: &[TrainedTagger], _agreement: Option<&AgreementResult>) -> Result<()> {
        Ok(())
    }

    /// Called when `correct` suspends iteration `iteration`; `taggers` are the
    /// ones that tagged the fresh text.
    fn suspended(&mut self, _iteration: usize, _taggers: &[TrainedTagger], _agreement: &AgreementResult) -> Result<()> {
        Ok(())
    }
}

pub struct NoHook;

impl BootstrapHook for NoHook {}

struct Scored {
    record: IterationRecord,
    best_correct: Vec<bool>,
}

pub(crate) fn train_all(config: &BootstrapConfig, data: &WeightedCorpus) -> Result<Vec<TrainedTagger>> {
    config
        .taggers
        .iter()
        .map(|spec| TrainedTagger::train(spec, &config.params, data))
        .collect()
}

pub(crate) fn tag_all(taggers: &[TrainedTagger], corpus: &Corpus) -> Result<Vec<Tagging>> {
    taggers.iter().map(|t| t.tag(corpus)).collect()
}

/// Test accuracies of each tagger, the best one and its per-token correctness.
pub(crate) struct TestScores {
    pub scores: Vec<TaggerScore>,
    pub best: usize,
    pub best_correct: Vec<bool>,
    pub agreement: AgreementReport,
}

pub(crate) fn test_scores(taggers: &[TrainedTagger], test: &Corpus) -> Result<TestScores> {
    let taggings = tag_all(taggers, test)?;
    let mut scores = Vec::with_capacity(taggers.len());
    let mut correct = Vec::with_capacity(taggers.len());
    for (t, tagging) in taggers.iter().zip(&taggings) {
        let acc = evaluate(tagging, test)?;
        scores.push(TaggerScore {
            tagger: t.spec().to_string(),
            overall: acc.overall,
            ambiguous: acc.ambiguous_only,
        });
        correct.push(correctness(tagging, test)?);
    }
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if s.overall > scores[best].overall {
            best = k;
        }
    }
    Ok(TestScores {
        agreement: agreement_report(&taggings, test)?,
        best_correct: correct.swap_remove(best),
        scores,
        best,
    })
}

fn score(taggers: &[TrainedTagger], test: &Corpus, mut record: IterationRecord) -> Result<Scored> {
    let t = test_scores(taggers, test)?;
    record.best = t.best;
    record.best_accuracy = t.scores[t.best].overall;
    record.scores = t.scores;
    record.test_coverage = t.agreement.coverage;
    record.test_agreement_accuracy = t.agreement.accuracy;
    Ok(Scored {
        record,
        best_correct: t.best_correct,
    })
}

fn draw(raw: &mut dyn Iterator<Item = Sentence>, want: usize) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut have = 0;
    while have < want {
        match raw.next() {
            Some(s) => {
                have += s.len();
                out.push(s);
            }
            None => break,
        }
    }
    out
}

fn finish(report: &mut BootstrapReport, reason: StopReason) {
    if let Some(last) = report.iterations.last_mut() {
        last.terminal = true;
        last.stop_reason = Some(reason);
    }
}

fn at_iteration(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Iteration {
        iteration,
        source: Box::new(e),
    }
}

pub fn bootstrap_run(
    config: &BootstrapConfig,
    c0: &Corpus,
    test: &Corpus,
    raw: &mut dyn Iterator<Item = Sentence>,
    hook: &mut dyn BootstrapHook,
) -> Result<BootstrapReport> {
    config.validate()?;
    if c0.labeled_count() == 0 {
        return Err(Error::Empty("seed corpus has no labeled tokens"));
    }
    if test.token_count() == 0 {
        return Err(Error::Empty("test corpus"));
    }
    let n0 = c0.labeled_count();
    let mut taggers = train_all(config, &WeightedCorpus::single(c0.clone())).map_err(at_iteration(0))?;
    let base = IterationRecord {
        iteration: 0,
        seed_tokens: n0,
        agreed_tokens: 0,
        seed_weight: 1.0,
        virtual_size: n0 as f64,
        fresh_tokens: 0,
        fresh_coverage: None,
        fresh_agreement_accuracy: None,
        agreed_error: 0.0,
        training_error: 0.0,
        test_coverage: 0.0,
        test_agreement_accuracy: None,
        scores: Vec::new(),
        best: 0,
        best_accuracy: 0.0,
        significance: None,
        terminal: false,
        stop_reason: None,
    };
    let mut current = score(&taggers, test, base.clone())?;
    hook.iteration_done(&current.record, &taggers, None)?;
    let mut report = BootstrapReport {
        iterations: vec![current.record.clone()],
    };
    for i in 1..=config.max_iterations {
        let previous = current;
        let fresh_sentences = draw(raw, config.fresh_size);
        let fresh_tokens: usize = fresh_sentences.iter().map(Sentence::len).sum();
        if fresh_tokens < config.fresh_size {
            finish(&mut report, StopReason::DataExhausted);
            return Ok(report);
        }
        let fresh = Corpus::new(test.tagset.clone(), fresh_sentences).map_err(at_iteration(i))?;
        let taggings = tag_all(&taggers, &fresh).map_err(at_iteration(i))?;
        let agreement = intersect_taggings(&fresh, &taggings)?;
        let fresh_gold = fresh.labeled_count() == fresh.token_count();
        let fresh_agreement_accuracy = if fresh_gold {
            agreement_report(&taggings, &fresh)?.accuracy
        } else {
            None
        };
        let agreed_error = 1.0
            - previous
                .record
                .test_agreement_accuracy
                .unwrap_or(previous.record.best_accuracy);

        let retrain = if config.hand_correct {
            match hook.correct(i, &agreement)? {
                CorrectionDecision::Apply(fixes) => {
                    let outcome = apply_corrections(&agreement, &fixes, config.drop_gapped)?;
                    for r in &outcome.rejected {
                        log::warn!("correction at {}:{} rejected: {}", r.sentence, r.token, r.reason);
                    }
                    outcome.corpus
                }
                CorrectionDecision::Suspend => {
                    hook.suspended(i, &taggers, &agreement)?;
                    finish(&mut report, StopReason::AwaitingCorrections);
                    return Ok(report);
                }
            }
        } else if config.drop_gapped {
            apply_corrections(&agreement, &[], true)?.corpus
        } else {
            agreement.agreed.clone()
        };
        let n_new = retrain.labeled_count();

        let w0 = match (config.c0_weight, config.target_error) {
            (Some(w), _) => w,
            (None, Some(_)) if n_new == 0 => 1.0,
            (None, Some(target)) => seed_weight_for_target(n0 as f64, n_new as f64, agreed_error, target)?,
            (None, None) => unreachable!("validated"),
        };
        let data = combine_training(c0, &retrain, w0, agreed_error)?;
        taggers = train_all(config, &data).map_err(at_iteration(i))?;

        let record = IterationRecord {
            iteration: i,
            agreed_tokens: n_new,
            seed_weight: data.segments()[0].weight,
            virtual_size: data.virtual_size(),
            fresh_tokens,
            fresh_coverage: Some(agreement.coverage),
            fresh_agreement_accuracy,
            agreed_error,
            training_error: data.estimated_error(),
            ..base.clone()
        };
        current = score(&taggers, test, record)?;
        let sig = mcnemar_significance(&previous.best_correct, &current.best_correct, config.stop_threshold)?;
        let improved = sig.significant && current.record.best_accuracy > previous.record.best_accuracy;
        current.record.significance = Some(sig);
        hook.iteration_done(&current.record, &taggers, Some(&agreement))?;
        report.iterations.push(current.record.clone());
        if !improved {
            finish(&mut report, StopReason::NotSignificant);
            return Ok(report);
        }
    }
    finish(&mut report, StopReason::MaxIterations);
    Ok(report)
}
