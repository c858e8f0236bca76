//! Bigram and trigram tag-transition models with candidate-constrained
//! Viterbi decoding.
//!
//! Sentences are padded with `order - 1` start symbols and one end symbol.
//! Transition probabilities are Laplace-smoothed over every possible
//! successor (all tags plus the end symbol). A trigram model also keeps the
//! bigram table; seen trigram contexts interpolate the two estimates and
//! unseen ones fall back to the bigram estimate alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TagId, TagSet, WeightedCorpus};
use crate::error::{Error, Result};
use crate::lexicon::LexicalModel;
use crate::tagging::SentenceTagging;

/// A tag or one of the two boundary symbols.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    Bos,
    Tag(TagId),
    Eos,
}

impl Sym {
    fn encode(self, n_tags: usize) -> usize {
        match self {
            Sym::Tag(t) => t.index(),
            Sym::Bos => n_tags,
            Sym::Eos => n_tags + 1,
        }
    }

    fn name(self, tagset: &TagSet) -> &str {
        match self {
            Sym::Bos => "<s>",
            Sym::Eos => "</s>",
            Sym::Tag(t) => tagset.code(t),
        }
    }

    fn parse(s: &str, tagset: &TagSet, line: usize) -> Result<Sym> {
        match s {
            "<s>" => Ok(Sym::Bos),
            "</s>" => Ok(Sym::Eos),
            code => tagset.lookup(code, line).map(Sym::Tag),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgramConfig {
    /// Weight of the trigram estimate when its context was seen.
    pub trigram_weight: f64,
    pub bigram_weight: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            trigram_weight: 0.7,
            bigram_weight: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    order: usize,
    tagset: Arc<TagSet>,
    config: NgramConfig,
    bigrams: BTreeMap<(Sym, Sym), f64>,
    bigram_ctx: BTreeMap<Sym, f64>,
    trigrams: BTreeMap<(Sym, Sym, Sym), f64>,
    trigram_ctx: BTreeMap<(Sym, Sym), f64>,
    // dense log-probability cache for bigrams, indexed by encoded symbols
    bigram_lp: Vec<f64>,
}

impl NgramModel {
    pub fn new(order: usize, tagset: Arc<TagSet>, config: NgramConfig) -> Result<Self> {
        if order != 2 && order != 3 {
            return Err(Error::invalid(format!("n-gram order must be 2 or 3, got {order}")));
        }
        let weights_ok = config.trigram_weight >= 0.0
            && config.bigram_weight >= 0.0
            && (config.trigram_weight + config.bigram_weight - 1.0).abs() <= 1e-9;
        if !weights_ok {
            return Err(Error::invalid("interpolation weights must be non-negative and sum to 1"));
        }
        let mut m = NgramModel {
            order,
            tagset,
            config,
            bigrams: BTreeMap::new(),
            bigram_ctx: BTreeMap::new(),
            trigrams: BTreeMap::new(),
            trigram_ctx: BTreeMap::new(),
            bigram_lp: Vec::new(),
        };
        m.finalize();
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tagset(&self) -> &Arc<TagSet> {
        &self.tagset
    }

    pub fn config(&self) -> &NgramConfig {
        &self.config
    }

    pub fn bigram_count(&self, prev: Sym, next: Sym) -> f64 {
        self.bigrams.get(&(prev, next)).copied().unwrap_or(0.0)
    }

    pub fn bigram_context_count(&self, prev: Sym) -> f64 {
        self.bigram_ctx.get(&prev).copied().unwrap_or(0.0)
    }

    pub fn trigram_count(&self, a: Sym, b: Sym, next: Sym) -> f64 {
        self.trigrams.get(&(a, b, next)).copied().unwrap_or(0.0)
    }

    pub fn trigram_context_count(&self, a: Sym, b: Sym) -> f64 {
        self.trigram_ctx.get(&(a, b)).copied().unwrap_or(0.0)
    }

    pub fn bigrams(&self) -> impl Iterator<Item = ((Sym, Sym), f64)> + '_ {
        self.bigrams.iter().map(|(k, v)| (*k, *v))
    }

    pub fn trigrams(&self) -> impl Iterator<Item = ((Sym, Sym, Sym), f64)> + '_ {
        self.trigrams.iter().map(|(k, v)| (*k, *v))
    }

    /// Adds one weighted observation of a bigram.
    pub fn add_bigram(&mut self, prev: Sym, next: Sym, weight: f64) {
        *self.bigrams.entry((prev, next)).or_insert(0.0) += weight;
    }

    pub fn add_trigram(&mut self, a: Sym, b: Sym, next: Sym, weight: f64) {
        *self.trigrams.entry((a, b, next)).or_insert(0.0) += weight;
    }

    /// Recomputes context totals (in key order) and the probability cache.
    /// Must be called after the last `add_*`.
    pub fn finalize(&mut self) {
        self.bigram_ctx.clear();
        for (&(prev, _), &c) in &self.bigrams {
            *self.bigram_ctx.entry(prev).or_insert(0.0) += c;
        }
        self.trigram_ctx.clear();
        for (&(a, b, _), &c) in &self.trigrams {
            *self.trigram_ctx.entry((a, b)).or_insert(0.0) += c;
        }
        let n = self.tagset.len();
        let s = n + 2;
        let outcomes = (n + 1) as f64;
        let mut lp = vec![f64::NEG_INFINITY; s * s];
        let ctx_syms = (0..n).map(|i| Sym::Tag(TagId(i as u16))).chain([Sym::Bos]);
        for prev in ctx_syms {
            let ctx = self.bigram_context_count(prev);
            let next_syms = (0..n).map(|i| Sym::Tag(TagId(i as u16))).chain([Sym::Eos]);
            for next in next_syms {
                let p = (self.bigram_count(prev, next) + 1.0) / (ctx + outcomes);
                lp[prev.encode(n) * s + next.encode(n)] = p.ln();
            }
        }
        self.bigram_lp = lp;
    }

    /// Number of possible successors of any context.
    fn outcomes(&self) -> f64 {
        (self.tagset.len() + 1) as f64
    }

    pub fn bigram_prob(&self, prev: Sym, next: Sym) -> f64 {
        (self.bigram_count(prev, next) + 1.0) / (self.bigram_context_count(prev) + self.outcomes())
    }

    /// P(next | a b); for bigram models `a` is ignored.
    pub fn transition_prob(&self, a: Sym, b: Sym, next: Sym) -> f64 {
        let p2 = self.bigram_prob(b, next);
        if self.order == 2 {
            return p2;
        }
        let ctx = self.trigram_context_count(a, b);
        if ctx > 0.0 {
            let p3 = (self.trigram_count(a, b, next) + 1.0) / (ctx + self.outcomes());
            self.config.trigram_weight * p3 + self.config.bigram_weight * p2
        } else {
            p2
        }
    }

    /// ln P(next | a b), served from the dense cache for bigram models.
    #[inline]
    pub fn transition_logprob(&self, a: Sym, b: Sym, next: Sym) -> f64 {
        if self.order == 2 {
            let n = self.tagset.len();
            self.bigram_lp[b.encode(n) * (n + 2) + next.encode(n)]
        } else {
            self.transition_prob(a, b, next).ln()
        }
    }

    pub fn to_text(&self) -> String {
        let ts = &self.tagset;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# order {} interpolation {} {}",
            self.order, self.config.trigram_weight, self.config.bigram_weight
        );
        for (&(p, n), c) in &self.bigrams {
            let _ = writeln!(out, "N2\t{}\t{}\t{c}", p.name(ts), n.name(ts));
        }
        for (&(a, b, n), c) in &self.trigrams {
            let _ = writeln!(out, "N3\t{} {}\t{}\t{c}", a.name(ts), b.name(ts), n.name(ts));
        }
        out
    }

    pub fn parse(text: &str, tagset: Arc<TagSet>) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .map(|(_, l)| l)
            .ok_or_else(|| Error::parse(1, "missing n-gram header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (order, config) = match fields.as_slice() {
            ["#", "order", o, "interpolation", w3, w2] => {
                let bad = || Error::parse(1, "malformed n-gram header");
                let order: usize = o.parse().map_err(|_| bad())?;
                let trigram_weight: f64 = w3.parse().map_err(|_| bad())?;
                let bigram_weight: f64 = w2.parse().map_err(|_| bad())?;
                (
                    order,
                    NgramConfig {
                        trigram_weight,
                        bigram_weight,
                    },
                )
            }
            _ => return Err(Error::parse(1, "malformed n-gram header")),
        };
        let mut model = NgramModel::new(order, tagset.clone(), config)?;
        for (n, line) in lines {
            let ln = n + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(ln, "expected 4 columns"));
            }
            let count: f64 = cols[3]
                .parse()
                .map_err(|_| Error::parse(ln, format!("bad count {:?}", cols[3])))?;
            let next = Sym::parse(cols[2], &tagset, ln)?;
            let ctx: Vec<Sym> = cols[1]
                .split(' ')
                .map(|s| Sym::parse(s, &tagset, ln))
                .collect::<Result<_>>()?;
            match (cols[0], ctx.as_slice()) {
                ("N2", [p]) => model.add_bigram(*p, next, count),
                ("N3", [a, b]) if order == 3 => model.add_trigram(*a, *b, next, count),
                _ => return Err(Error::parse(ln, "unrecognized n-gram line")),
            }
        }
        model.finalize();
        Ok(model)
    }
}

/// Symbols of a sentence for n-gram extraction; `None` marks withheld labels.
fn padded(sentence: &Sentence, pad: usize) -> Vec<Option<Sym>> {
    let mut seq = vec![Some(Sym::Bos); pad];
    seq.extend(sentence.tokens.iter().map(|t| t.label().map(Sym::Tag)));
    seq.push(Some(Sym::Eos));
    seq
}

/// Counts weighted transitions. Any n-gram touching a masked token is skipped.
pub fn train_ngrams(corpus: &WeightedCorpus, order: usize, config: NgramConfig) -> Result<NgramModel> {
    let tagset = corpus
        .tagset()
        .ok_or(Error::Empty("weighted corpus has no segments"))?
        .clone();
    corpus.check_labeled()?;
    let mut model = NgramModel::new(order, tagset, config)?;
    for (_, weight, _, sentence) in corpus.sentences() {
        let seq = padded(sentence, 1);
        for w in seq.windows(2) {
            if let [Some(a), Some(b)] = w {
                model.add_bigram(*a, *b, weight);
            }
        }
        if order == 3 {
            let seq = padded(sentence, 2);
            for w in seq.windows(3) {
                if let [Some(a), Some(b), Some(c)] = w {
                    model.add_trigram(*a, *b, *c, weight);
                }
            }
        }
    }
    model.finalize();
    Ok(model)
}

struct State {
    // last two symbols
    key: (Sym, Sym),
    score: f64,
    local: f64,
    back: usize,
    // lexicographic rank of this state's best prefix among the states of
    // its position
    rank: usize,
}

/// Highest-scoring candidate sequence under Σ ln P(tag | context) + ln P(tag | word),
/// including the transition into the end symbol. Among equal scores the
/// sequence that is smallest in tagset order at the earliest differing
/// position wins.
pub fn viterbi_decode(
    sentence: &Sentence,
    lexicon: &LexicalModel,
    model: &NgramModel,
) -> Result<SentenceTagging> {
    if sentence.tokens.is_empty() {
        return Err(Error::Empty("cannot decode an empty sentence"));
    }
    let order3 = model.order == 3;
    let mut columns: Vec<Vec<State>> = Vec::with_capacity(sentence.len());
    let mut prev = vec![State {
        key: (Sym::Bos, Sym::Bos),
        score: 0.0,
        local: 0.0,
        back: 0,
        rank: 0,
    }];
    for token in &sentence.tokens {
        let emit: Vec<f64> = lexicon
            .emission_prob(token)?
            .into_iter()
            .map(f64::ln)
            .collect();
        let mut next: Vec<State> = Vec::new();
        for (&tag, &le) in token.candidates.iter().zip(&emit) {
            let t = Sym::Tag(tag);
            for (pi, p) in prev.iter().enumerate() {
                let key = if order3 { (p.key.1, t) } else { (Sym::Bos, t) };
                let lt = model.transition_logprob(p.key.0, p.key.1, t);
                let score = p.score + lt + le;
                match next.iter_mut().find(|s| s.key == key) {
                    Some(s) => {
                        if score > s.score || (score == s.score && p.rank < prev[s.back].rank) {
                            s.score = score;
                            s.local = lt + le;
                            s.back = pi;
                        }
                    }
                    None => next.push(State {
                        key,
                        score,
                        local: lt + le,
                        back: pi,
                        rank: 0,
                    }),
                }
            }
        }
        let mut order: Vec<usize> = (0..next.len()).collect();
        order.sort_by_key(|&i| (prev[next[i].back].rank, next[i].key.1));
        for (r, i) in order.into_iter().enumerate() {
            next[i].rank = r;
        }
        columns.push(std::mem::replace(&mut prev, next));
    }
    columns.push(prev);

    let last = columns.last().unwrap();
    let mut best = 0;
    let mut best_total = f64::NEG_INFINITY;
    for (i, s) in last.iter().enumerate() {
        let total = s.score + model.transition_logprob(s.key.0, s.key.1, Sym::Eos);
        if total > best_total || (total == best_total && s.rank < last[best].rank) {
            best = i;
            best_total = total;
        }
    }

    let mut tags = vec![TagId(0); sentence.len()];
    let mut scores = vec![0.0; sentence.len()];
    let mut idx = best;
    for pos in (0..sentence.len()).rev() {
        let s = &columns[pos + 1][idx];
        match s.key.1 {
            Sym::Tag(t) => tags[pos] = t,
            _ => unreachable!("decoded states always end in a tag"),
        }
        scores[pos] = s.local;
        idx = s.back;
    }
    Ok(SentenceTagging::new(tags, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_vertical, Corpus};

    fn ts() -> Arc<TagSet> {
        Arc::new(TagSet::new(&["DA", "NC", "VM"]).unwrap())
    }
    const DA: TagId = TagId(0);
    const NC: TagId = TagId(1);

    fn corpus(text: &str) -> Corpus {
        parse_vertical(text, &ts()).unwrap()
    }

    #[test]
    fn bigram_counts_with_boundaries() {
        let w = WeightedCorpus::single(corpus("la\tDA\tDA\ncasa\tNC VM\tNC\n"));
        let m = train_ngrams(&w, 2, NgramConfig::default()).unwrap();
        assert_eq!(m.bigram_count(Sym::Bos, Sym::Tag(DA)), 1.0);
        assert_eq!(m.bigram_count(Sym::Tag(DA), Sym::Tag(NC)), 1.0);
        assert_eq!(m.bigram_count(Sym::Tag(NC), Sym::Eos), 1.0);
        assert_eq!(m.bigrams().count(), 3);

        let mut w3 = WeightedCorpus::new();
        w3.push(corpus("la\tDA\tDA\ncasa\tNC VM\tNC\n"), 3.0, 0.0).unwrap();
        let m = train_ngrams(&w3, 2, NgramConfig::default()).unwrap();
        assert!(m.bigrams().all(|(_, c)| c == 3.0));
    }

    #[test]
    fn trigram_padding() {
        let w = WeightedCorpus::single(corpus("la\tDA\tDA\ncasa\tNC VM\tNC\n"));
        let m = train_ngrams(&w, 3, NgramConfig::default()).unwrap();
        assert_eq!(m.trigram_count(Sym::Bos, Sym::Bos, Sym::Tag(DA)), 1.0);
        assert_eq!(m.trigram_count(Sym::Bos, Sym::Tag(DA), Sym::Tag(NC)), 1.0);
        assert_eq!(m.trigram_count(Sym::Tag(DA), Sym::Tag(NC), Sym::Eos), 1.0);
        assert_eq!(m.trigrams().count(), 3);
    }

    #[test]
    fn masked_tokens_break_ngrams() {
        let w = WeightedCorpus::single(corpus("la\tDA\tDA\ncasa\tNC VM\t*\nla\tDA\tDA\n"));
        let m = train_ngrams(&w, 2, NgramConfig::default()).unwrap();
        // only <s> DA and DA </s> survive
        assert_eq!(m.bigrams().count(), 2);
        assert_eq!(m.bigram_context_count(Sym::Tag(DA)), 1.0);
    }

    #[test]
    fn unseen_trigram_context_uses_bigram() {
        let w = WeightedCorpus::single(corpus("la\tDA\tDA\ncasa\tNC VM\tNC\n"));
        let m = train_ngrams(&w, 3, NgramConfig::default()).unwrap();
        let a = m.transition_prob(Sym::Tag(NC), Sym::Tag(DA), Sym::Tag(NC));
        assert_eq!(a, m.bigram_prob(Sym::Tag(DA), Sym::Tag(NC)));
        let seen = m.transition_prob(Sym::Bos, Sym::Tag(DA), Sym::Tag(NC));
        let p3 = 2.0 / 5.0;
        let p2 = m.bigram_prob(Sym::Tag(DA), Sym::Tag(NC));
        assert!((seen - (0.7 * p3 + 0.3 * p2)).abs() < 1e-12);
    }

    #[test]
    fn transition_rows_are_distributions() {
        let text = "la\tDA\tDA\ncasa\tNC VM\tNC\n\ncome\tNC VM\tVM\n";
        let w = WeightedCorpus::single(corpus(text));
        for order in [2, 3] {
            let m = train_ngrams(&w, order, NgramConfig::default()).unwrap();
            let succ: Vec<Sym> = ts().ids().map(Sym::Tag).chain([Sym::Eos]).collect();
            for a in [Sym::Bos, Sym::Tag(DA), Sym::Tag(NC)] {
                for b in [Sym::Bos, Sym::Tag(DA), Sym::Tag(NC)] {
                    let z: f64 = succ.iter().map(|&n| m.transition_prob(a, b, n)).sum();
                    assert!((z - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let text = "la\tDA\tDA\ncasa\tNC VM\tNC\n\ncome\tNC VM\tVM\n";
        let mut w = WeightedCorpus::single(corpus(text));
        w.push(corpus(text), 0.25, 0.0).unwrap();
        for order in [2, 3] {
            let m = train_ngrams(&w, order, NgramConfig::default()).unwrap();
            assert_eq!(NgramModel::parse(&m.to_text(), ts()).unwrap(), m);
        }
    }

    #[test]
    fn bad_order_rejected() {
        assert!(NgramModel::new(4, ts(), NgramConfig::default()).is_err());
    }

    #[test]
    fn empty_sentence_rejected() {
        let w = WeightedCorpus::single(corpus("la\tDA\tDA\n"));
        let lex = crate::lexicon::train_lexicon(&w).unwrap();
        let m = train_ngrams(&w, 2, NgramConfig::default()).unwrap();
        let s = Sentence { tokens: vec![] };
        assert!(viterbi_decode(&s, &lex, &m).is_err());
    }
}
