//! Lexical probabilities P(tag | word) with Laplace smoothing over the
//! candidate set and a word → ambiguity class → unigram backoff.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::corpus::{join_codes, TagId, TagSet, Token, WeightedCorpus};
use crate::error::{Error, Result};

/// Which table answered an emission query.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Backoff {
    Word,
    Class,
    Unigram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LexicalModel {
    tagset: Arc<TagSet>,
    word_tag: BTreeMap<String, BTreeMap<TagId, f64>>,
    class_tag: BTreeMap<Vec<TagId>, BTreeMap<TagId, f64>>,
    unigram: Vec<f64>,
}

fn total(counts: &BTreeMap<TagId, f64>) -> f64 {
    counts.values().sum()
}

impl LexicalModel {
    pub fn empty(tagset: Arc<TagSet>) -> Self {
        let n = tagset.len();
        LexicalModel {
            tagset,
            word_tag: BTreeMap::new(),
            class_tag: BTreeMap::new(),
            unigram: vec![0.0; n],
        }
    }

    pub fn tagset(&self) -> &Arc<TagSet> {
        &self.tagset
    }

    pub fn word_count(&self, form: &str, tag: TagId) -> f64 {
        self.word_tag
            .get(form)
            .and_then(|m| m.get(&tag))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn class_count(&self, class: &[TagId], tag: TagId) -> f64 {
        self.class_tag
            .get(class)
            .and_then(|m| m.get(&tag))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn unigram_count(&self, tag: TagId) -> f64 {
        self.unigram[tag.index()]
    }

    pub fn unigram_total(&self) -> f64 {
        self.unigram.iter().sum()
    }

    pub fn is_trained(&self) -> bool {
        self.unigram_total() > 0.0
    }

    pub fn add(&mut self, form: &str, class: &[TagId], tag: TagId, weight: f64) {
        *self
            .word_tag
            .entry(form.to_string())
            .or_default()
            .entry(tag)
            .or_insert(0.0) += weight;
        *self
            .class_tag
            .entry(class.to_vec())
            .or_default()
            .entry(tag)
            .or_insert(0.0) += weight;
        self.unigram[tag.index()] += weight;
    }

    /// Table consulted for `form` with the given ambiguity class.
    pub fn backoff_level(&self, form: &str, class: &[TagId]) -> Backoff {
        if self.word_tag.get(form).is_some_and(|m| total(m) > 0.0) {
            Backoff::Word
        } else if self.class_tag.get(class).is_some_and(|m| total(m) > 0.0) {
            Backoff::Class
        } else {
            Backoff::Unigram
        }
    }

    /// Emission distribution aligned with `token.candidates`.
    pub fn emission_prob(&self, token: &Token) -> Result<Vec<f64>> {
        self.emission(&token.form, &token.candidates)
    }

    pub fn emission(&self, form: &str, candidates: &[TagId]) -> Result<Vec<f64>> {
        if !self.is_trained() {
            return Err(Error::Untrained("lexical model has no counts"));
        }
        if candidates.is_empty() {
            return Err(Error::invalid("emission query with no candidates"));
        }
        let level = self.backoff_level(form, candidates);
        let count = |tag: TagId| -> f64 {
            match level {
                Backoff::Word => self.word_count(form, tag),
                Backoff::Class => self.class_count(candidates, tag),
                Backoff::Unigram => self.unigram_count(tag),
            }
        };
        let mut probs: Vec<f64> = candidates.iter().map(|&t| count(t) + 1.0).collect();
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        Ok(probs)
    }

    /// Most probable candidate; ties go to the earlier tag.
    pub fn best_tag(&self, token: &Token) -> Result<TagId> {
        let probs = self.emission_prob(token)?;
        Ok(token.candidates[argmax(&probs)])
    }

    pub fn to_text(&self) -> String {
        let ts = &self.tagset;
        let mut out = String::new();
        for (form, counts) in &self.word_tag {
            for (tag, c) in counts {
                let _ = writeln!(out, "W\t{form}\t{}\t{c}", ts.code(*tag));
            }
        }
        for (class, counts) in &self.class_tag {
            let class = join_codes(ts, class);
            for (tag, c) in counts {
                let _ = writeln!(out, "C\t{class}\t{}\t{c}", ts.code(*tag));
            }
        }
        for tag in ts.ids() {
            let c = self.unigram[tag.index()];
            if c != 0.0 {
                let _ = writeln!(out, "U\t{}\t{c}", ts.code(tag));
            }
        }
        out
    }

    pub fn parse(text: &str, tagset: Arc<TagSet>) -> Result<Self> {
        let mut model = LexicalModel::empty(tagset.clone());
        for (n, line) in text.lines().enumerate() {
            let ln = n + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let count = |s: &str| -> Result<f64> {
                let c: f64 = s
                    .parse()
                    .map_err(|_| Error::parse(ln, format!("bad count {s:?}")))?;
                if c < 0.0 || !c.is_finite() {
                    return Err(Error::parse(ln, "counts must be finite and non-negative"));
                }
                Ok(c)
            };
            match (cols[0], cols.len()) {
                ("W", 4) => {
                    let tag = tagset.lookup(cols[2], ln)?;
                    *model
                        .word_tag
                        .entry(cols[1].to_string())
                        .or_default()
                        .entry(tag)
                        .or_insert(0.0) += count(cols[3])?;
                }
                ("C", 4) => {
                    let mut class = cols[1]
                        .split(' ')
                        .map(|c| tagset.lookup(c, ln))
                        .collect::<Result<Vec<_>>>()?;
                    class.sort_unstable();
                    let tag = tagset.lookup(cols[2], ln)?;
                    *model
                        .class_tag
                        .entry(class)
                        .or_default()
                        .entry(tag)
                        .or_insert(0.0) += count(cols[3])?;
                }
                ("U", 3) => {
                    let tag = tagset.lookup(cols[1], ln)?;
                    model.unigram[tag.index()] += count(cols[2])?;
                }
                _ => return Err(Error::parse(ln, "unrecognized lexicon line")),
            }
        }
        Ok(model)
    }
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Accumulates weighted (form, gold) counts from every labeled token.
pub fn train_lexicon(corpus: &WeightedCorpus) -> Result<LexicalModel> {
    let tagset = corpus
        .tagset()
        .ok_or(Error::Empty("weighted corpus has no segments"))?
        .clone();
    corpus.check_labeled()?;
    let mut model = LexicalModel::empty(tagset);
    for (_, weight, _, sentence) in corpus.sentences() {
        for t in &sentence.tokens {
            if let Some(gold) = t.label() {
                model.add(&t.form, &t.candidates, gold, weight);
            }
        }
    }
    Ok(model)
}
