//! Tagger output aligned token-for-token with a corpus.

use crate::corpus::{Corpus, TagId};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceTagging {
    pub tags: Vec<TagId>,
    /// Log-probability attached to each decision by the producing tagger.
    pub scores: Vec<f64>,
}

impl SentenceTagging {
    pub fn new(tags: Vec<TagId>, scores: Vec<f64>) -> Self {
        debug_assert_eq!(tags.len(), scores.len());
        SentenceTagging { tags, scores }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Tagging {
    pub sentences: Vec<SentenceTagging>,
}

impl Tagging {
    pub fn new(sentences: Vec<SentenceTagging>) -> Self {
        Tagging { sentences }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(SentenceTagging::len).sum()
    }

    pub fn tags(&self) -> impl Iterator<Item = TagId> + '_ {
        self.sentences.iter().flat_map(|s| s.tags.iter().copied())
    }

    /// Checks shape and that every tag is a candidate of its token.
    pub fn check_aligned(&self, corpus: &Corpus) -> Result<()> {
        if self.sentences.len() != corpus.sentences.len() {
            return Err(Error::Alignment(format!(
                "tagging has {} sentences, corpus has {}",
                self.sentences.len(),
                corpus.sentences.len()
            )));
        }
        for (si, (tagged, sent)) in self.sentences.iter().zip(&corpus.sentences).enumerate() {
            if tagged.len() != sent.len() {
                return Err(Error::Alignment(format!(
                    "sentence {si}: tagging has {} tokens, corpus has {}",
                    tagged.len(),
                    sent.len()
                )));
            }
            for (ti, (tag, tok)) in tagged.tags.iter().zip(&sent.tokens).enumerate() {
                if !tok.has_candidate(*tag) {
                    return Err(Error::Alignment(format!(
                        "sentence {si}, token {ti}: tag is not a candidate of {:?}",
                        tok.form
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy of `corpus` with each token's `assigned` tag set from this tagging.
    pub fn apply(&self, corpus: &Corpus) -> Result<Corpus> {
        self.check_aligned(corpus)?;
        let mut out = corpus.clone();
        for (tagged, sent) in self.sentences.iter().zip(out.sentences.iter_mut()) {
            for (tag, tok) in tagged.tags.iter().zip(sent.tokens.iter_mut()) {
                tok.assigned = Some(*tag);
            }
        }
        Ok(out)
    }

    /// Reads back the `assigned` column of a corpus.
    pub fn from_assigned(corpus: &Corpus) -> Result<Tagging> {
        let mut sentences = Vec::with_capacity(corpus.sentences.len());
        for (si, s) in corpus.sentences.iter().enumerate() {
            let mut tags = Vec::with_capacity(s.len());
            for (ti, t) in s.tokens.iter().enumerate() {
                tags.push(t.assigned.ok_or_else(|| {
                    Error::Alignment(format!("sentence {si}, token {ti}: no assigned tag"))
                })?);
            }
            let scores = vec![0.0; tags.len()];
            sentences.push(SentenceTagging { tags, scores });
        }
        Ok(Tagging { sentences })
    }

    /// Uses gold tags as a tagging (an oracle tagger).
    pub fn from_gold(corpus: &Corpus) -> Result<Tagging> {
        let mut sentences = Vec::with_capacity(corpus.sentences.len());
        for (si, s) in corpus.sentences.iter().enumerate() {
            let mut tags = Vec::with_capacity(s.len());
            for (ti, t) in s.tokens.iter().enumerate() {
                tags.push(t.label().ok_or_else(|| {
                    Error::Alignment(format!("sentence {si}, token {ti}: no gold tag"))
                })?);
            }
            let scores = vec![0.0; tags.len()];
            sentences.push(SentenceTagging { tags, scores });
        }
        Ok(Tagging { sentences })
    }
}
