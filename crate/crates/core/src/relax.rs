//! Relaxation labeling over weighted context constraints.
//!
//! Constraints are compiled from bigram statistics (kind `B`), trigram
//! statistics (`T`) and decision-tree paths (`C`), or loaded from a file.
//! A constraint supports (positive weight) or penalizes (negative weight)
//! its target tag whenever the context described by its pattern is present;
//! presence is graded by the current probabilities of the context tags.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TagId, TagSet};
use crate::error::{Error, Result};
use crate::lexicon::{argmax, LexicalModel};
use crate::ngram::{NgramModel, Sym};
use crate::tagging::SentenceTagging;
use crate::tree::{FeatureValue, Node, TreeEnsemble};

/// Origin of a constraint.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    B,
    T,
    C,
    /// Loaded from a constraint file without a kind column.
    Manual,
}

impl Kind {
    fn letter(self) -> char {
        match self {
            Kind::B => 'B',
            Kind::T => 'T',
            Kind::C => 'C',
            Kind::Manual => 'M',
        }
    }
}

/// A non-empty set of compiled constraint kinds, spelled like `BT` or `BTC`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KindSet(BTreeSet<Kind>);

impl KindSet {
    pub fn new(kinds: impl IntoIterator<Item = Kind>) -> Result<Self> {
        let set: BTreeSet<Kind> = kinds.into_iter().filter(|k| *k != Kind::Manual).collect();
        if set.is_empty() {
            return Err(Error::invalid("at least one constraint kind is required"));
        }
        Ok(KindSet(set))
    }

    pub fn contains(&self, k: Kind) -> bool {
        self.0.contains(&k)
    }

    pub fn iter(&self) -> impl Iterator<Item = Kind> + '_ {
        self.0.iter().copied()
    }
}

impl FromStr for KindSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kinds = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'B' => Ok(Kind::B),
                'T' => Ok(Kind::T),
                'C' => Ok(Kind::C),
                other => Err(Error::invalid(format!("unknown constraint kind {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        KindSet::new(kinds)
    }
}

impl fmt::Display for KindSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in &self.0 {
            write!(f, "{}", k.letter())?;
        }
        Ok(())
    }
}

impl Serialize for KindSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for KindSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternValue {
    Tag(TagId),
    /// Position lies outside the sentence.
    Boundary,
    /// Token at the position has exactly this ambiguity class.
    Class(Vec<TagId>),
    Form(String),
}

impl PatternValue {
    fn rank(&self) -> u8 {
        match self {
            PatternValue::Tag(_) => 0,
            PatternValue::Boundary => 1,
            PatternValue::Class(_) => 2,
            PatternValue::Form(_) => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub target: TagId,
    /// `(offset, value)`; offsets are distinct and tag/boundary tests use
    /// non-zero offsets. Offset 0 may only test the target's own class or form.
    pub pattern: Vec<(i32, PatternValue)>,
    pub weight: f64,
    pub kind: Kind,
}

impl Constraint {
    pub fn new(target: TagId, mut pattern: Vec<(i32, PatternValue)>, weight: f64, kind: Kind) -> Result<Self> {
        if !weight.is_finite() {
            return Err(Error::invalid("constraint weight must be finite"));
        }
        pattern.sort_by(|a, b| (a.1.rank(), a.0).cmp(&(b.1.rank(), b.0)));
        let mut offsets: Vec<i32> = pattern.iter().map(|p| p.0).collect();
        offsets.sort_unstable();
        if offsets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("constraint pattern repeats an offset"));
        }
        if pattern
            .iter()
            .any(|(off, v)| *off == 0 && matches!(v, PatternValue::Tag(_) | PatternValue::Boundary))
        {
            return Err(Error::invalid("tag and boundary tests need a non-zero offset"));
        }
        Ok(Constraint {
            target,
            pattern,
            weight,
            kind,
        })
    }

    /// Degree to which the pattern holds at `pos` under probabilities `probs`.
    fn presence(&self, sentence: &Sentence, probs: &[Vec<f64>], pos: usize) -> f64 {
        let mut acc = 1.0;
        for (off, value) in &self.pattern {
            let j = pos as i64 + *off as i64;
            let inside = j >= 0 && (j as usize) < sentence.len();
            let f = match value {
                PatternValue::Boundary => {
                    if inside {
                        0.0
                    } else {
                        1.0
                    }
                }
                _ if !inside => 0.0,
                PatternValue::Tag(tag) => {
                    let tok = &sentence.tokens[j as usize];
                    match tok.candidates.binary_search(tag) {
                        Ok(k) => probs[j as usize][k],
                        Err(_) => 0.0,
                    }
                }
                PatternValue::Class(class) => (sentence.tokens[j as usize].candidates == *class) as u8 as f64,
                PatternValue::Form(form) => (sentence.tokens[j as usize].form == *form) as u8 as f64,
            };
            acc *= f;
            if acc == 0.0 {
                return 0.0;
            }
        }
        acc
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RelaxConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Compiled weights are clipped to `[-clip, clip]`.
    pub clip: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            epsilon: 1e-3,
            max_iters: 10,
            clip: 10.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintBase {
    tagset: Arc<TagSet>,
    constraints: Vec<Constraint>,
    kinds: BTreeSet<Kind>,
    // constraints whose first test is a tag: (target, offset, tag)
    by_tag: HashMap<(TagId, i32, TagId), Vec<usize>>,
    // first test is a boundary: (target, offset)
    by_boundary: HashMap<(TagId, i32), Vec<usize>>,
    // anchor offsets per target, for tag- and boundary-anchored constraints
    offsets: Vec<Vec<i32>>,
    // no tag or boundary test: scanned for every occurrence of the target
    unanchored: Vec<Vec<usize>>,
}

impl PartialEq for ConstraintBase {
    fn eq(&self, other: &Self) -> bool {
        *self.tagset == *other.tagset && self.constraints == other.constraints && self.kinds == other.kinds
    }
}

impl ConstraintBase {
    pub fn new(tagset: Arc<TagSet>, constraints: Vec<Constraint>) -> Self {
        let n = tagset.len();
        let mut base = ConstraintBase {
            tagset,
            kinds: constraints.iter().map(|c| c.kind).collect(),
            constraints,
            by_tag: HashMap::new(),
            by_boundary: HashMap::new(),
            offsets: vec![Vec::new(); n],
            unanchored: vec![Vec::new(); n],
        };
        for (i, c) in base.constraints.iter().enumerate() {
            let t = c.target;
            match c.pattern.first() {
                Some((off, PatternValue::Tag(v))) => {
                    base.by_tag.entry((t, *off, *v)).or_default().push(i);
                    base.offsets[t.index()].push(*off);
                }
                Some((off, PatternValue::Boundary)) => {
                    base.by_boundary.entry((t, *off)).or_default().push(i);
                    base.offsets[t.index()].push(*off);
                }
                _ => base.unanchored[t.index()].push(i),
            }
        }
        for o in &mut base.offsets {
            o.sort_unstable();
            o.dedup();
        }
        base
    }

    pub fn tagset(&self) -> &Arc<TagSet> {
        &self.tagset
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn kinds(&self) -> &BTreeSet<Kind> {
        &self.kinds
    }

    pub fn count_of(&self, kind: Kind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }

    /// Σ weight × presence over the constraints that target `tag` at `pos`.
    pub fn support(&self, sentence: &Sentence, probs: &[Vec<f64>], pos: usize, tag: TagId) -> f64 {
        let mut s = 0.0;
        let mut add = |ids: &[usize]| {
            for &k in ids {
                let c = &self.constraints[k];
                s += c.weight * c.presence(sentence, probs, pos);
            }
        };
        for &off in &self.offsets[tag.index()] {
            let j = pos as i64 + off as i64;
            if j < 0 || j >= sentence.len() as i64 {
                if let Some(ids) = self.by_boundary.get(&(tag, off)) {
                    add(ids);
                }
            } else {
                let j = j as usize;
                for (k, &v) in sentence.tokens[j].candidates.iter().enumerate() {
                    if probs[j][k] > 0.0 {
                        if let Some(ids) = self.by_tag.get(&(tag, off, v)) {
                            add(ids);
                        }
                    }
                }
            }
        }
        add(&self.unanchored[tag.index()]);
        s
    }

    pub fn to_text(&self) -> String {
        let ts = &self.tagset;
        let mut out = String::new();
        for c in &self.constraints {
            let pattern: Vec<String> = c
                .pattern
                .iter()
                .map(|(off, v)| format!("{off}:{}", value_text(v, ts)))
                .collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                c.weight,
                ts.code(c.target),
                pattern.join(","),
                c.kind.letter()
            );
        }
        out
    }

    /// Reads `weight<TAB>target<TAB>pos:value[,pos:value...][<TAB>kind]`.
    pub fn parse(text: &str, tagset: Arc<TagSet>) -> Result<Self> {
        let mut constraints = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let ln = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 || cols.len() > 4 {
                return Err(Error::parse(ln, "expected weight, target, pattern and optional kind"));
            }
            let weight: f64 = cols[0]
                .parse()
                .map_err(|_| Error::parse(ln, format!("bad weight {:?}", cols[0])))?;
            let target = tagset.lookup(cols[1], ln)?;
            let mut pattern = Vec::new();
            for item in split_pattern(cols[2]) {
                let (off, value) = item
                    .split_once(':')
                    .ok_or_else(|| Error::parse(ln, format!("pattern item {item:?} lacks ':'")))?;
                let off: i32 = off
                    .parse()
                    .map_err(|_| Error::parse(ln, format!("bad offset {off:?}")))?;
                pattern.push((off, parse_value_text(value, &tagset, ln)?));
            }
            let kind = match cols.get(3).copied() {
                None | Some("M") => Kind::Manual,
                Some("B") => Kind::B,
                Some("T") => Kind::T,
                Some("C") => Kind::C,
                Some(k) => return Err(Error::parse(ln, format!("unknown kind {k:?}"))),
            };
            constraints.push(Constraint::new(target, pattern, weight, kind).map_err(|e| Error::parse(ln, e.to_string()))?);
        }
        Ok(ConstraintBase::new(tagset, constraints))
    }
}

fn value_text(v: &PatternValue, ts: &TagSet) -> String {
    match v {
        PatternValue::Tag(t) => ts.code(*t).to_string(),
        PatternValue::Boundary => "<b>".into(),
        PatternValue::Class(c) => {
            let codes: Vec<&str> = c.iter().map(|t| ts.code(*t)).collect();
            format!("{{{}}}", codes.join("|"))
        }
        PatternValue::Form(f) => {
            let mut s = String::from("\"");
            for ch in f.chars() {
                if ch == '"' || ch == '\\' {
                    s.push('\\');
                }
                s.push(ch);
            }
            s.push('"');
            s
        }
    }
}

fn parse_value_text(s: &str, ts: &TagSet, ln: usize) -> Result<PatternValue> {
    if s == "<b>" {
        Ok(PatternValue::Boundary)
    } else if let Some(inner) = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
        let mut class = inner
            .split('|')
            .map(|c| ts.lookup(c, ln))
            .collect::<Result<Vec<_>>>()?;
        class.sort_unstable();
        Ok(PatternValue::Class(class))
    } else if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        let mut form = String::new();
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                form.extend(chars.next());
            } else {
                form.push(c);
            }
        }
        Ok(PatternValue::Form(form))
    } else {
        ts.lookup(s, ln).map(PatternValue::Tag)
    }
}

/// Splits on commas outside double quotes.
fn split_pattern(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let (mut start, mut quoted, mut i) = (0, false, 0);
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if quoted => i += 1,
            b'"' => quoted = !quoted,
            b',' if !quoted => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if start < s.len() {
        out.push(&s[start..]);
    }
    out
}

/// Trained models that constraints can be compiled from.
#[derive(Clone, Copy, Default)]
pub struct ConstraintSources<'a> {
    pub bigrams: Option<&'a NgramModel>,
    pub trigrams: Option<&'a NgramModel>,
    pub trees: Option<&'a TreeEnsemble>,
}

fn sym_value(s: Sym) -> PatternValue {
    match s {
        Sym::Tag(t) => PatternValue::Tag(t),
        Sym::Bos | Sym::Eos => PatternValue::Boundary,
    }
}

fn clip(w: f64, limit: f64) -> f64 {
    w.clamp(-limit, limit)
}

fn compile_bigrams(model: &NgramModel, clip_at: f64, out: &mut Vec<Constraint>) -> Result<()> {
    let mut total = 0.0;
    let mut first: BTreeMap<Sym, f64> = BTreeMap::new();
    let mut second: BTreeMap<Sym, f64> = BTreeMap::new();
    for ((a, b), c) in model.bigrams() {
        total += c;
        *first.entry(a).or_insert(0.0) += c;
        *second.entry(b).or_insert(0.0) += c;
    }
    for ((a, b), c) in model.bigrams() {
        if c <= 0.0 {
            continue;
        }
        let w = clip((c * total / (first[&a] * second[&b])).ln(), clip_at);
        if let Sym::Tag(tb) = b {
            out.push(Constraint::new(tb, vec![(-1, sym_value(a))], w, Kind::B)?);
        }
        if let Sym::Tag(ta) = a {
            out.push(Constraint::new(ta, vec![(1, sym_value(b))], w, Kind::B)?);
        }
    }
    Ok(())
}

fn compile_trigrams(model: &NgramModel, clip_at: f64, out: &mut Vec<Constraint>) -> Result<()> {
    let mut total = 0.0;
    let mut single: [BTreeMap<Sym, f64>; 3] = Default::default();
    let mut pair: [BTreeMap<(Sym, Sym), f64>; 3] = Default::default();
    for ((a, b, n), c) in model.trigrams() {
        total += c;
        let syms = [a, b, n];
        for k in 0..3 {
            *single[k].entry(syms[k]).or_insert(0.0) += c;
            let rest = rest_of(syms, k);
            *pair[k].entry(rest).or_insert(0.0) += c;
        }
    }
    for ((a, b, n), c) in model.trigrams() {
        if c <= 0.0 {
            continue;
        }
        let syms = [a, b, n];
        for k in 0..3 {
            let Sym::Tag(target) = syms[k] else { continue };
            let rest = rest_of(syms, k);
            let w = clip((c * total / (single[k][&syms[k]] * pair[k][&rest])).ln(), clip_at);
            let offsets: Vec<i32> = (0..3).filter(|&m| m != k).map(|m| m as i32 - k as i32).collect();
            let pattern = vec![(offsets[0], sym_value(rest.0)), (offsets[1], sym_value(rest.1))];
            // two boundary tests on the same side only ever see padding
            out.push(Constraint::new(target, pattern, w, Kind::T)?);
        }
    }
    Ok(())
}

fn rest_of(syms: [Sym; 3], k: usize) -> (Sym, Sym) {
    match k {
        0 => (syms[1], syms[2]),
        1 => (syms[0], syms[2]),
        _ => (syms[0], syms[1]),
    }
}

/// Upper bound on value combinations expanded from one tree path.
const MAX_PATH_EXPANSION: usize = 64;

fn compile_trees(ensemble: &TreeEnsemble, clip_at: f64, out: &mut Vec<Constraint>) -> Result<()> {
    for tree in ensemble.trees.values() {
        let root_counts: Vec<f64> = {
            let leaves = tree.root.leaves();
            let mut acc = vec![0.0; tree.class.len()];
            for l in leaves {
                for (a, c) in acc.iter_mut().zip(l) {
                    *a += c;
                }
            }
            acc
        };
        let prior = tree.smoothed(&root_counts);
        let mut path: Vec<(usize, &[FeatureValue])> = Vec::new();
        walk(&tree.root, &mut path, &mut |path, counts| {
            if path.is_empty() {
                return Ok(());
            }
            // later tests on a feature refine earlier ones
            let mut tests: BTreeMap<usize, &[FeatureValue]> = BTreeMap::new();
            for (f, vals) in path {
                tests.insert(*f, vals);
            }
            let combos: usize = tests.values().map(|v| v.len()).product();
            if combos > MAX_PATH_EXPANSION {
                return Ok(());
            }
            let leaf = tree.smoothed(counts);
            let tests: Vec<(usize, &[FeatureValue])> = tests.into_iter().collect();
            let mut choice = vec![0usize; tests.len()];
            loop {
                let mut pattern = vec![(0, PatternValue::Class(tree.class.clone()))];
                for (k, (f, vals)) in tests.iter().enumerate() {
                    let value = &vals[choice[k]];
                    let off = if *f == ensemble.form_feature() { 0 } else { ensemble.window[*f] };
                    let pv = match value {
                        FeatureValue::Boundary => PatternValue::Boundary,
                        FeatureValue::Tag(t) => PatternValue::Tag(*t),
                        FeatureValue::Form(s) => PatternValue::Form(s.clone()),
                    };
                    match (off, &pv) {
                        // the form test replaces the class test at offset 0
                        (0, PatternValue::Form(_)) => pattern[0] = (0, pv),
                        _ => pattern.push((off, pv)),
                    }
                }
                for (ti, &tag) in tree.class.iter().enumerate() {
                    let w = clip((leaf[ti] / prior[ti]).ln(), clip_at);
                    out.push(Constraint::new(tag, pattern.clone(), w, Kind::C)?);
                }
                let mut k = 0;
                loop {
                    if k == choice.len() {
                        return Ok(());
                    }
                    choice[k] += 1;
                    if choice[k] < tests[k].1.len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
            }
        })?;
    }
    Ok(())
}

fn walk<'a>(
    node: &'a Node,
    path: &mut Vec<(usize, &'a [FeatureValue])>,
    visit: &mut dyn FnMut(&[(usize, &'a [FeatureValue])], &[f64]) -> Result<()>,
) -> Result<()> {
    match node {
        Node::Leaf { counts } => visit(path, counts),
        Node::Split { feature, branches, .. } => {
            for b in branches {
                if b.other {
                    continue;
                }
                path.push((*feature, &b.values));
                walk(&b.node, path, visit)?;
                path.pop();
            }
            Ok(())
        }
    }
}

pub fn compile_constraints(sources: ConstraintSources<'_>, kinds: &KindSet, config: &RelaxConfig) -> Result<ConstraintBase> {
    let tagset = sources
        .bigrams
        .map(|m| m.tagset().clone())
        .or_else(|| sources.trigrams.map(|m| m.tagset().clone()))
        .or_else(|| sources.trees.map(|t| t.tagset.clone()))
        .ok_or_else(|| Error::invalid("no source models given"))?;
    let mut constraints = Vec::new();
    for kind in kinds.iter() {
        match kind {
            Kind::B => {
                let m = sources.bigrams.ok_or_else(|| Error::invalid("kind B requires a bigram model"))?;
                compile_bigrams(m, config.clip, &mut constraints)?;
            }
            Kind::T => {
                let m = sources
                    .trigrams
                    .filter(|m| m.order() == 3)
                    .ok_or_else(|| Error::invalid("kind T requires a trigram model"))?;
                compile_trigrams(m, config.clip, &mut constraints)?;
            }
            Kind::C => {
                let t = sources.trees.ok_or_else(|| Error::invalid("kind C requires a tree ensemble"))?;
                compile_trees(t, config.clip, &mut constraints)?;
            }
            Kind::Manual => {}
        }
    }
    Ok(ConstraintBase::new(tagset, constraints))
}

/// Result of a relaxation run, kept for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxTrace {
    pub iterations: usize,
    pub converged: bool,
    pub distributions: Vec<Vec<f64>>,
}

/// One synchronous update of every ambiguous token; returns the largest
/// absolute probability change.
pub fn relax_step(sentence: &Sentence, base: &ConstraintBase, probs: &mut [Vec<f64>]) -> f64 {
    let mut updated: Vec<Option<Vec<f64>>> = vec![None; probs.len()];
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if tok.candidates.len() < 2 {
            continue;
        }
        let mut next: Vec<f64> = tok
            .candidates
            .iter()
            .zip(&probs[i])
            .map(|(&tag, &p)| {
                let s = base.support(sentence, probs, i, tag);
                p * (1.0 + s / (1.0 + s.abs()))
            })
            .collect();
        let z: f64 = next.iter().sum();
        if z > 0.0 {
            for x in &mut next {
                *x /= z;
            }
            updated[i] = Some(next);
        }
    }
    let mut delta: f64 = 0.0;
    for (p, u) in probs.iter_mut().zip(updated) {
        if let Some(u) = u {
            for (a, b) in p.iter().zip(&u) {
                delta = delta.max((a - b).abs());
            }
            *p = u;
        }
    }
    delta
}

pub fn relax_disambiguate(
    sentence: &Sentence,
    base: &ConstraintBase,
    lexicon: &LexicalModel,
    config: &RelaxConfig,
) -> Result<SentenceTagging> {
    Ok(relax_disambiguate_traced(sentence, base, lexicon, config)?.0)
}

pub fn relax_disambiguate_traced(
    sentence: &Sentence,
    base: &ConstraintBase,
    lexicon: &LexicalModel,
    config: &RelaxConfig,
) -> Result<(SentenceTagging, RelaxTrace)> {
    let mut probs: Vec<Vec<f64>> = sentence
        .tokens
        .iter()
        .map(|t| lexicon.emission_prob(t))
        .collect::<Result<_>>()?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        iterations += 1;
        if relax_step(sentence, base, &mut probs) < config.epsilon {
            converged = true;
            break;
        }
    }
    let mut tags = Vec::with_capacity(sentence.len());
    let mut scores = Vec::with_capacity(sentence.len());
    for (tok, p) in sentence.tokens.iter().zip(&probs) {
        let b = argmax(p);
        tags.push(tok.candidates[b]);
        scores.push(p[b].ln());
    }
    Ok((
        SentenceTagging::new(tags, scores),
        RelaxTrace {
            iterations,
            converged,
            distributions: probs,
        },
    ))
}
