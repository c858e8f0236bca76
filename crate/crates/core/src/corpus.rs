//! Analyzed corpora: tagsets, tokens with ambiguity classes, and the
//! one-token-per-line vertical file format.
//!
//! A vertical file carries one token per line:
//!
//! ```text
//! form<TAB>cand1 cand2 ...[<TAB>gold[<TAB>assigned]]
//! ```
//!
//! A blank line closes a sentence and a `#` in column 0 starts a comment.
//! The gold column may be empty (no gold tag) or `*`, which marks a token
//! whose label was withheld (a disagreement gap inside an agreement corpus).
//! When the candidate column is missing the candidates come from a
//! [`CandidateDictionary`] or, failing that, the whole tagset.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Index of a tag inside its [`TagSet`]. Ordering follows the tagset order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagId(pub u16);

impl TagId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Reserved spellings that never name a user tag.
pub const RESERVED_CODES: [&str; 4] = ["<s>", "</s>", "<b>", "*"];

fn check_code(code: &str) -> std::result::Result<(), String> {
    if code.is_empty() {
        return Err("empty tag code".into());
    }
    if RESERVED_CODES.contains(&code) {
        return Err(format!("tag code {code:?} is reserved"));
    }
    if let Some(c) = code
        .chars()
        .find(|c| c.is_whitespace() || matches!(c, ',' | '"' | '{' | '}' | '|' | '<' | '>'))
    {
        return Err(format!("tag code {code:?} contains forbidden character {c:?}"));
    }
    Ok(())
}

/// Closed inventory of tags plus the reduction to category+subcategory codes.
#[derive(Clone, Debug)]
pub struct TagSet {
    codes: Vec<String>,
    reduction: Vec<String>,
    index: HashMap<String, TagId>,
}

impl PartialEq for TagSet {
    fn eq(&self, other: &Self) -> bool {
        self.codes == other.codes && self.reduction == other.reduction
    }
}

impl TagSet {
    /// Builds a tagset whose reduction keeps the first two characters.
    pub fn new<S: AsRef<str>>(codes: &[S]) -> Result<Self> {
        let pairs: Vec<(String, Option<String>)> = codes
            .iter()
            .map(|c| (c.as_ref().to_string(), None))
            .collect();
        Self::from_pairs(pairs)
    }

    fn from_pairs(pairs: Vec<(String, Option<String>)>) -> Result<Self> {
        if pairs.len() >= u16::MAX as usize - 8 {
            return Err(Error::invalid("tagset too large"));
        }
        let mut codes = Vec::with_capacity(pairs.len());
        let mut reduction = Vec::with_capacity(pairs.len());
        let mut index = HashMap::new();
        for (i, (code, reduced)) in pairs.into_iter().enumerate() {
            check_code(&code).map_err(|m| Error::parse(i + 1, m))?;
            let reduced = reduced.unwrap_or_else(|| code.chars().take(2).collect());
            check_code(&reduced).map_err(|m| Error::parse(i + 1, m))?;
            if index.insert(code.clone(), TagId(i as u16)).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate tag code {code:?}")));
            }
            codes.push(code);
            reduction.push(reduced);
        }
        Ok(TagSet {
            codes,
            reduction,
            index,
        })
    }

    /// Parses a tagset file: one code per line with an optional reduced code
    /// in a second column.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let code = cols.next().unwrap().to_string();
            let reduced = cols.next().map(str::to_string);
            if cols.next().is_some() {
                return Err(Error::parse(n + 1, "tagset lines take at most two columns"));
            }
            pairs.push((code, reduced));
        }
        Self::from_pairs(pairs)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (code, red) in self.codes.iter().zip(&self.reduction) {
            let _ = writeln!(out, "{code}\t{red}");
        }
        out
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn get(&self, code: &str) -> Option<TagId> {
        self.index.get(code).copied()
    }

    pub fn code(&self, id: TagId) -> &str {
        &self.codes[id.index()]
    }

    /// First character of the code.
    pub fn category(&self, id: TagId) -> char {
        self.codes[id.index()].chars().next().unwrap()
    }

    pub fn reduced_code(&self, id: TagId) -> &str {
        &self.reduction[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = TagId> + '_ {
        (0..self.codes.len()).map(|i| TagId(i as u16))
    }

    /// The reduced tagset and the full-to-reduced id map.
    pub fn reduced(&self) -> (TagSet, Vec<TagId>) {
        let mut order: Vec<String> = Vec::new();
        let mut seen: HashMap<&str, TagId> = HashMap::new();
        let mut map = Vec::with_capacity(self.len());
        for red in &self.reduction {
            let id = *seen.entry(red.as_str()).or_insert_with(|| {
                order.push(red.clone());
                TagId((order.len() - 1) as u16)
            });
            map.push(id);
        }
        let pairs = order.into_iter().map(|c| (c.clone(), Some(c))).collect();
        let reduced = Self::from_pairs(pairs).expect("reduced codes were validated");
        (reduced, map)
    }

    pub(crate) fn lookup(&self, code: &str, line: usize) -> Result<TagId> {
        self.get(code)
            .ok_or_else(|| Error::parse(line, format!("unknown tag code {code:?}")))
    }
}

fn check_form(form: &str) -> std::result::Result<(), String> {
    if form.trim().is_empty() {
        return Err("empty word form".into());
    }
    if form.contains(['\t', '\n', '\r']) {
        return Err(format!("word form {form:?} contains a tab or line break"));
    }
    if form.starts_with('#') {
        return Err(format!("word form {form:?} would read back as a comment"));
    }
    Ok(())
}

/// One analyzed word.
#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub form: String,
    /// Ambiguity class, sorted in tagset order, never empty.
    pub candidates: Vec<TagId>,
    pub gold: Option<TagId>,
    pub assigned: Option<TagId>,
    /// Label withheld: the token keeps its place as context but is not
    /// counted as training material.
    pub masked: bool,
}

impl Token {
    pub fn new(form: impl Into<String>, candidates: impl IntoIterator<Item = TagId>) -> Result<Self> {
        let form = form.into();
        check_form(&form).map_err(Error::invalid)?;
        let mut candidates: Vec<TagId> = candidates.into_iter().collect();
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.is_empty() {
            return Err(Error::invalid(format!("token {form:?} has no candidates")));
        }
        Ok(Token {
            form,
            candidates,
            gold: None,
            assigned: None,
            masked: false,
        })
    }

    pub fn with_gold(mut self, gold: TagId) -> Result<Self> {
        if !self.has_candidate(gold) {
            return Err(Error::invalid(format!(
                "gold tag {} is not a candidate of {:?}",
                gold.0, self.form
            )));
        }
        self.gold = Some(gold);
        Ok(self)
    }

    #[inline]
    pub fn has_candidate(&self, tag: TagId) -> bool {
        self.candidates.binary_search(&tag).is_ok()
    }

    #[inline]
    pub fn is_ambiguous(&self) -> bool {
        self.candidates.len() > 1
    }

    /// Gold tag usable as training material.
    #[inline]
    pub fn label(&self) -> Option<TagId> {
        if self.masked {
            None
        } else {
            self.gold
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        Ok(Sentence { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub tagset: Arc<TagSet>,
    pub sentences: Vec<Sentence>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.tagset, &other.tagset) || *self.tagset == *other.tagset)
            && self.sentences == other.sentences
    }
}

impl Corpus {
    pub fn new(tagset: Arc<TagSet>, sentences: Vec<Sentence>) -> Result<Self> {
        let corpus = Corpus { tagset, sentences };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn empty(tagset: Arc<TagSet>) -> Self {
        Corpus {
            tagset,
            sentences: Vec::new(),
        }
    }

    /// Checks every token invariant against the tagset.
    pub fn validate(&self) -> Result<()> {
        let n = self.tagset.len();
        for (si, s) in self.sentences.iter().enumerate() {
            if s.tokens.is_empty() {
                return Err(Error::invalid(format!("sentence {si} is empty")));
            }
            for (ti, t) in s.tokens.iter().enumerate() {
                let at = || format!("sentence {si}, token {ti}");
                check_form(&t.form).map_err(|m| Error::invalid(format!("{}: {m}", at())))?;
                if t.candidates.is_empty() {
                    return Err(Error::invalid(format!("{}: no candidates", at())));
                }
                if t.candidates.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid(format!("{}: candidates not sorted", at())));
                }
                if t.candidates.iter().any(|c| c.index() >= n) {
                    return Err(Error::invalid(format!("{}: candidate outside tagset", at())));
                }
                for tag in [t.gold, t.assigned].into_iter().flatten() {
                    if !t.has_candidate(tag) {
                        return Err(Error::invalid(format!("{}: tag is not a candidate", at())));
                    }
                }
                if t.masked && t.gold.is_some() {
                    return Err(Error::invalid(format!("{}: masked token carries gold", at())));
                }
            }
        }
        Ok(())
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Tokens carrying a usable gold label.
    pub fn labeled_count(&self) -> usize {
        self.tokens().filter(|t| t.label().is_some()).count()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Keeps only the sentences selected by `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            tagset: self.tagset.clone(),
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
        }
    }

    /// Strips gold and assigned tags, leaving raw analyzed text.
    pub fn without_tags(&self) -> Corpus {
        let mut out = self.clone();
        for t in out.sentences.iter_mut().flat_map(|s| s.tokens.iter_mut()) {
            t.gold = None;
            t.assigned = None;
            t.masked = false;
        }
        out
    }
}

/// Form-to-candidates lookup used when an input line has no candidate column.
#[derive(Clone, Debug, Default)]
pub struct CandidateDictionary {
    entries: BTreeMap<String, Vec<TagId>>,
}

impl CandidateDictionary {
    pub fn parse(text: &str, tagset: &TagSet) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (form, cands) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(n + 1, "expected form<TAB>candidates"))?;
            let mut ids = cands
                .split_whitespace()
                .map(|c| tagset.lookup(c, n + 1))
                .collect::<Result<Vec<_>>>()?;
            ids.sort_unstable();
            ids.dedup();
            if ids.is_empty() {
                return Err(Error::parse(n + 1, "empty candidate list"));
            }
            entries.insert(form.to_string(), ids);
        }
        Ok(CandidateDictionary { entries })
    }

    pub fn insert(&mut self, form: impl Into<String>, candidates: Vec<TagId>) {
        self.entries.insert(form.into(), candidates);
    }

    pub fn get(&self, form: &str) -> Option<&[TagId]> {
        self.entries.get(form).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self, tagset: &TagSet) -> String {
        let mut out = String::new();
        for (form, ids) in &self.entries {
            let _ = writeln!(out, "{form}\t{}", join_codes(tagset, ids));
        }
        out
    }
}

pub(crate) fn join_codes(tagset: &TagSet, ids: &[TagId]) -> String {
    let mut s = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(tagset.code(*id));
    }
    s
}

pub fn parse_vertical(text: &str, tagset: &Arc<TagSet>) -> Result<Corpus> {
    parse_vertical_with(text, tagset, None)
}

/// Parses vertical text, resolving missing candidate columns through `dict`.
pub fn parse_vertical_with(
    text: &str,
    tagset: &Arc<TagSet>,
    dict: Option<&CandidateDictionary>,
) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        current.push(parse_token_line(line, line_no, tagset, dict)?);
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    Ok(Corpus {
        tagset: tagset.clone(),
        sentences,
    })
}

fn parse_token_line(
    line: &str,
    line_no: usize,
    tagset: &TagSet,
    dict: Option<&CandidateDictionary>,
) -> Result<Token> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() > 4 {
        return Err(Error::parse(line_no, format!("expected at most 4 columns, found {}", cols.len())));
    }
    let form = cols[0];
    check_form(form).map_err(|m| Error::parse(line_no, m))?;
    let candidates = match cols.get(1).map(|c| c.trim()).filter(|c| !c.is_empty()) {
        Some(c) => c
            .split(' ')
            .filter(|c| !c.is_empty())
            .map(|c| tagset.lookup(c, line_no))
            .collect::<Result<Vec<_>>>()?,
        None => match dict.and_then(|d| d.get(form)) {
            Some(ids) => ids.to_vec(),
            None => tagset.ids().collect(),
        },
    };
    let mut token = Token::new(form, candidates).map_err(|e| Error::parse(line_no, e.to_string()))?;
    match cols.get(2).copied().unwrap_or("") {
        "" => {}
        "*" => token.masked = true,
        code => {
            let gold = tagset.lookup(code, line_no)?;
            if !token.has_candidate(gold) {
                return Err(Error::integrity(
                    line_no,
                    format!("gold tag {code:?} is not among the candidates of {form:?}"),
                ));
            }
            token.gold = Some(gold);
        }
    }
    if let Some(code) = cols.get(3).copied().filter(|c| !c.is_empty()) {
        let assigned = tagset.lookup(code, line_no)?;
        if !token.has_candidate(assigned) {
            return Err(Error::integrity(
                line_no,
                format!("assigned tag {code:?} is not among the candidates of {form:?}"),
            ));
        }
        token.assigned = Some(assigned);
    }
    Ok(token)
}

/// Serializes a corpus; `parse_vertical` reads it back unchanged.
pub fn write_vertical(corpus: &Corpus) -> String {
    let ts = &corpus.tagset;
    let mut out = String::new();
    for s in &corpus.sentences {
        for t in &s.tokens {
            out.push_str(&t.form);
            out.push('\t');
            out.push_str(&join_codes(ts, &t.candidates));
            let gold = if t.masked {
                Some("*")
            } else {
                t.gold.map(|g| ts.code(g))
            };
            match (gold, t.assigned) {
                (None, None) => {}
                (Some(g), None) => {
                    out.push('\t');
                    out.push_str(g);
                }
                (g, Some(a)) => {
                    out.push('\t');
                    out.push_str(g.unwrap_or(""));
                    out.push('\t');
                    out.push_str(ts.code(a));
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub word_count: usize,
    pub ambiguous_count: usize,
    pub ambiguous_fraction: f64,
    /// Zero when the corpus has no ambiguous tokens (see `no_ambiguous_tokens`).
    pub mean_tags_ambiguous: f64,
    pub mean_tags_overall: f64,
    pub no_ambiguous_tokens: bool,
}

pub fn corpus_stats(corpus: &Corpus) -> Result<StatsReport> {
    let mut words = 0usize;
    let mut ambiguous = 0usize;
    let mut cand_total = 0usize;
    let mut cand_ambiguous = 0usize;
    for t in corpus.tokens() {
        words += 1;
        cand_total += t.candidates.len();
        if t.is_ambiguous() {
            ambiguous += 1;
            cand_ambiguous += t.candidates.len();
        }
    }
    if words == 0 {
        return Err(Error::Empty("corpus statistics need at least one token"));
    }
    Ok(StatsReport {
        word_count: words,
        ambiguous_count: ambiguous,
        ambiguous_fraction: ambiguous as f64 / words as f64,
        mean_tags_ambiguous: if ambiguous == 0 {
            0.0
        } else {
            cand_ambiguous as f64 / ambiguous as f64
        },
        mean_tags_overall: cand_total as f64 / words as f64,
        no_ambiguous_tokens: ambiguous == 0,
    })
}

/// Sentence-level random split. `seed_fraction` of the sentences (rounded,
/// at least one on each side) go to the first corpus.
pub fn split_corpus(corpus: &Corpus, seed_fraction: f64, rng_seed: u64) -> Result<(Corpus, Corpus)> {
    if !(seed_fraction > 0.0 && seed_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction must lie in (0, 1), got {seed_fraction}"
        )));
    }
    let n = corpus.sentences.len();
    if n < 2 {
        return Err(Error::invalid("splitting needs at least two sentences"));
    }
    let n_train = ((seed_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((corpus.subset(train), corpus.subset(test)))
}

/// Replaces every tag by its reduced code and merges duplicate candidates.
pub fn reduce_tags(corpus: &Corpus) -> Corpus {
    let (reduced, map) = corpus.tagset.reduced();
    let reduced = Arc::new(reduced);
    let sentences = corpus
        .sentences
        .iter()
        .map(|s| Sentence {
            tokens: s
                .tokens
                .iter()
                .map(|t| {
                    let mut candidates: Vec<TagId> = t.candidates.iter().map(|c| map[c.index()]).collect();
                    candidates.sort_unstable();
                    candidates.dedup();
                    Token {
                        form: t.form.clone(),
                        candidates,
                        gold: t.gold.map(|g| map[g.index()]),
                        assigned: t.assigned.map(|a| map[a.index()]),
                        masked: t.masked,
                    }
                })
                .collect(),
        })
        .collect();
    Corpus {
        tagset: reduced,
        sentences,
    }
}

/// One weighted piece of a retraining corpus.
#[derive(Clone, Debug)]
pub struct Segment {
    pub corpus: Corpus,
    pub weight: f64,
    pub error_estimate: f64,
}

/// Retraining material as a sequence of weighted corpora. Each labeled token
/// contributes its segment weight to every count it takes part in.
#[derive(Clone, Debug)]
pub struct WeightedCorpus {
    segments: Vec<Segment>,
}

impl WeightedCorpus {
    pub fn new() -> Self {
        WeightedCorpus {
            segments: Vec::new(),
        }
    }

    pub fn single(corpus: Corpus) -> Self {
        let mut w = Self::new();
        w.push(corpus, 1.0, 0.0).expect("unit weight is valid");
        w
    }

    pub fn push(&mut self, corpus: Corpus, weight: f64, error_estimate: f64) -> Result<()> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::invalid(format!("segment weight must be positive, got {weight}")));
        }
        if !(0.0..=1.0).contains(&error_estimate) {
            return Err(Error::invalid(format!(
                "segment error estimate must lie in [0, 1], got {error_estimate}"
            )));
        }
        if let Some(first) = self.segments.first() {
            if *first.corpus.tagset != *corpus.tagset {
                return Err(Error::invalid("segments use different tagsets"));
            }
        }
        self.segments.push(Segment {
            corpus,
            weight,
            error_estimate,
        });
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn tagset(&self) -> Option<&Arc<TagSet>> {
        self.segments.first().map(|s| &s.corpus.tagset)
    }

    /// Σ weight × labeled tokens.
    pub fn virtual_size(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.weight * s.corpus.labeled_count() as f64)
            .sum()
    }

    /// Weight-averaged error estimate over labeled tokens.
    pub fn estimated_error(&self) -> f64 {
        let size = self.virtual_size();
        if size == 0.0 {
            return 0.0;
        }
        self.segments
            .iter()
            .map(|s| s.weight * s.corpus.labeled_count() as f64 * s.error_estimate)
            .sum::<f64>()
            / size
    }

    /// Iterates `(segment index, weight, sentence index, sentence)`.
    pub(crate) fn sentences(&self) -> impl Iterator<Item = (usize, f64, usize, &Sentence)> {
        self.segments.iter().enumerate().flat_map(|(seg, s)| {
            s.corpus
                .sentences
                .iter()
                .enumerate()
                .map(move |(si, sent)| (seg, s.weight, si, sent))
        })
    }

    /// Fails on the first token that is neither labeled nor masked.
    pub(crate) fn check_labeled(&self) -> Result<()> {
        for (seg, _, si, sent) in self.sentences() {
            for (ti, t) in sent.tokens.iter().enumerate() {
                if !t.masked && t.gold.is_none() {
                    return Err(Error::Training {
                        segment: seg,
                        sentence: si,
                        token: ti,
                        message: format!("token {:?} has no gold tag", t.form),
                    });
                }
            }
        }
        Ok(())
    }
}

impl Default for WeightedCorpus {
    fn default() -> Self {
        Self::new()
    }
}
