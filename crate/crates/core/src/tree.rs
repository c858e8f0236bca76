//! Statistical decision-tree tagger.
//!
//! One tree is grown per ambiguity class from weighted context examples.
//! Each example looks at the tags around the target (positions `-3..=2`
//! without the target itself by default) and at the target's word form.
//! Splits are multiway over feature values and are chosen by gain ratio.
//! Disambiguation starts from the lexical distribution and repeatedly
//! multiplies in the leaf distribution of each ambiguous token's current
//! context, discarding candidates that fall below a fraction of the best.
//!
//! Thresholds on example weight are applied after rescaling each class's
//! weights to average 1, so a common factor on all weights never changes
//! the learned structure.
//!
//! # Serialized form
//!
//! ```text
//! ensemble := (ensemble (window <int>...) tree...)
//! tree     := (tree (class <tag>...) (scale <num>) node)
//! node     := (leaf <num>...)                      ; raw weighted counts per class tag
//!           | (split <feature> (default <idx>) branch...)
//! branch   := (branch (values value...) node)
//!           | (branch other (values value...) node)
//! value    := (tag <tag>) | (bnd) | (form <string>)
//! tag      := <string>
//! ```
//!
//! `feature` indexes the window positions; the index one past the last
//! position is the word form. `default` is the branch followed by values
//! never seen in training.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TagId, TagSet, WeightedCorpus};
use crate::error::{Error, Result};
use crate::lexicon::{argmax, LexicalModel};
use crate::sexp::{self, Sexp};
use crate::tagging::SentenceTagging;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// Relative positions of the context items.
    pub window: Vec<i32>,
    pub min_examples: usize,
    pub max_depth: usize,
    pub min_node_weight: f64,
    /// Values lighter than this inside a node are pooled into one branch.
    pub pool_weight: f64,
    pub filter_ratio: f64,
    pub max_sweeps: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            window: vec![-3, -2, -1, 1, 2],
            min_examples: 20,
            max_depth: 6,
            min_node_weight: 5.0,
            pool_weight: 5.0,
            filter_ratio: 0.1,
            max_sweeps: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureValue {
    Boundary,
    Tag(TagId),
    Form(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextExample {
    pub features: Vec<FeatureValue>,
    pub label: TagId,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub values: Vec<FeatureValue>,
    /// Pooled branch of rare values.
    pub other: bool,
    pub node: Node,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        counts: Vec<f64>,
    },
    Split {
        feature: usize,
        default: usize,
        branches: Vec<Branch>,
    },
}

impl Node {
    fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { branches, .. } => 1 + branches.iter().map(|b| b.node.depth()).max().unwrap_or(0),
        }
    }

    pub fn leaves(&self) -> Vec<&[f64]> {
        match self {
            Node::Leaf { counts } => vec![counts.as_slice()],
            Node::Split { branches, .. } => branches.iter().flat_map(|b| b.node.leaves()).collect(),
        }
    }

    /// Same shape and tests, ignoring leaf counts.
    pub fn same_structure(&self, other: &Node) -> bool {
        match (self, other) {
            (Node::Leaf { .. }, Node::Leaf { .. }) => true,
            (
                Node::Split {
                    feature: f1,
                    default: d1,
                    branches: b1,
                },
                Node::Split {
                    feature: f2,
                    default: d2,
                    branches: b2,
                },
            ) => {
                f1 == f2
                    && d1 == d2
                    && b1.len() == b2.len()
                    && b1.iter().zip(b2).all(|(x, y)| {
                        x.values == y.values && x.other == y.other && x.node.same_structure(&y.node)
                    })
            }
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub class: Vec<TagId>,
    /// Factor turning raw weights into the rescaled units used for thresholds.
    pub scale: f64,
    pub root: Node,
}

impl DecisionTree {
    pub fn leaf_for(&self, features: &[FeatureValue]) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    default,
                    branches,
                } => {
                    let v = &features[*feature];
                    let next = branches
                        .iter()
                        .position(|b| b.values.binary_search(v).is_ok())
                        .unwrap_or(*default);
                    node = &branches[next].node;
                }
            }
        }
    }

    /// Laplace-smoothed (in rescaled units) distribution over the class.
    pub fn smoothed(&self, counts: &[f64]) -> Vec<f64> {
        let k = counts.len() as f64;
        let total: f64 = counts.iter().sum::<f64>() * self.scale;
        counts.iter().map(|c| (c * self.scale + 1.0) / (total + k)).collect()
    }

    pub fn classify(&self, features: &[FeatureValue]) -> TagId {
        let leaf = self.leaf_for(features);
        self.class[argmax(leaf)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeEnsemble {
    pub tagset: Arc<TagSet>,
    pub window: Vec<i32>,
    pub trees: BTreeMap<Vec<TagId>, DecisionTree>,
}

impl TreeEnsemble {
    pub fn get(&self, class: &[TagId]) -> Option<&DecisionTree> {
        self.trees.get(class)
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn form_feature(&self) -> usize {
        self.window.len()
    }
}

/// Extracts one example per labeled ambiguous token whose window holds no
/// masked token. Context values are gold tags or the boundary marker.
pub fn extract_examples(corpus: &WeightedCorpus, window: &[i32]) -> BTreeMap<Vec<TagId>, Vec<ContextExample>> {
    let mut by_class: BTreeMap<Vec<TagId>, Vec<ContextExample>> = BTreeMap::new();
    for (_, weight, _, sentence) in corpus.sentences() {
        let toks = &sentence.tokens;
        'tokens: for (i, t) in toks.iter().enumerate() {
            let Some(label) = t.label() else { continue };
            if !t.is_ambiguous() {
                continue;
            }
            let mut features = Vec::with_capacity(window.len() + 1);
            for &off in window {
                let j = i as i64 + off as i64;
                if j < 0 || j >= toks.len() as i64 {
                    features.push(FeatureValue::Boundary);
                } else {
                    match toks[j as usize].label() {
                        Some(tag) => features.push(FeatureValue::Tag(tag)),
                        None => continue 'tokens,
                    }
                }
            }
            features.push(FeatureValue::Form(t.form.clone()));
            by_class.entry(t.candidates.clone()).or_default().push(ContextExample {
                features,
                label,
                weight,
            });
        }
    }
    by_class
}

fn entropy(label_weights: &[f64]) -> f64 {
    let total: f64 = label_weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -label_weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            p * p.log2()
        })
        .sum::<f64>()
}

struct Grower<'a> {
    class: &'a [TagId],
    examples: &'a [ContextExample],
    // rescaled weights
    weights: Vec<f64>,
    config: &'a TreeConfig,
    n_features: usize,
}

struct Candidate {
    gain_ratio: f64,
    gain: f64,
    feature: usize,
    groups: Vec<(Vec<FeatureValue>, bool, Vec<usize>)>,
}

impl Grower<'_> {
    fn label_index(&self, tag: TagId) -> usize {
        self.class.binary_search(&tag).expect("label belongs to the class")
    }

    fn label_weights(&self, idx: &[usize]) -> Vec<f64> {
        let mut w = vec![0.0; self.class.len()];
        for &i in idx {
            w[self.label_index(self.examples[i].label)] += self.weights[i];
        }
        w
    }

    fn leaf(&self, idx: &[usize]) -> Node {
        let mut counts = vec![0.0; self.class.len()];
        for &i in idx {
            counts[self.label_index(self.examples[i].label)] += self.examples[i].weight;
        }
        Node::Leaf { counts }
    }

    fn grow(&self, idx: &[usize], depth: usize) -> Node {
        let node_weight: f64 = idx.iter().map(|&i| self.weights[i]).sum();
        let labels = self.label_weights(idx);
        let pure = labels.iter().filter(|&&w| w > 0.0).count() <= 1;
        if pure || depth >= self.config.max_depth || node_weight < self.config.min_node_weight {
            return self.leaf(idx);
        }
        let parent_entropy = entropy(&labels);
        let mut best: Option<Candidate> = None;
        for feature in 0..self.n_features {
            let Some(c) = self.evaluate(feature, idx, node_weight, parent_entropy) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| c.gain_ratio > b.gain_ratio) {
                best = Some(c);
            }
        }
        let Some(best) = best.filter(|b| b.gain > 1e-12) else {
            return self.leaf(idx);
        };
        let mut branches = Vec::with_capacity(best.groups.len());
        let mut default = 0;
        let mut default_weight = f64::NEG_INFINITY;
        for (k, (values, other, members)) in best.groups.into_iter().enumerate() {
            let w: f64 = members.iter().map(|&i| self.weights[i]).sum();
            if w > default_weight {
                default = k;
                default_weight = w;
            }
            branches.push(Branch {
                values,
                other,
                node: self.grow(&members, depth + 1),
            });
        }
        Node::Split {
            feature: best.feature,
            default,
            branches,
        }
    }

    fn evaluate(&self, feature: usize, idx: &[usize], node_weight: f64, parent_entropy: f64) -> Option<Candidate> {
        let mut by_value: BTreeMap<&FeatureValue, (f64, Vec<usize>)> = BTreeMap::new();
        for &i in idx {
            let e = by_value.entry(&self.examples[i].features[feature]).or_default();
            e.0 += self.weights[i];
            e.1.push(i);
        }
        let mut groups: Vec<(Vec<FeatureValue>, bool, Vec<usize>)> = Vec::new();
        let mut pooled_values = Vec::new();
        let mut pooled_members = Vec::new();
        let mut pooled_weight = 0.0;
        for (value, (w, members)) in by_value {
            if w < self.config.pool_weight {
                pooled_values.push(value.clone());
                pooled_members.extend(members);
                pooled_weight += w;
            } else {
                groups.push((vec![value.clone()], false, members));
            }
        }
        if !pooled_values.is_empty() {
            if pooled_weight >= self.config.min_node_weight || groups.is_empty() {
                groups.push((pooled_values, true, pooled_members));
            } else {
                // too light to stand alone: fold into the heaviest branch
                let heaviest = groups
                    .iter()
                    .enumerate()
                    .map(|(k, g)| (k, g.2.iter().map(|&i| self.weights[i]).sum::<f64>()))
                    .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
                    .0;
                let g = &mut groups[heaviest];
                g.0.extend(pooled_values);
                g.0.sort();
                g.2.extend(pooled_members);
                g.2.sort_unstable();
            }
        }
        if groups.len() < 2 {
            return None;
        }
        let mut remainder = 0.0;
        let mut split_info = 0.0;
        for (_, _, members) in &groups {
            let w: f64 = members.iter().map(|&i| self.weights[i]).sum();
            let p = w / node_weight;
            remainder += p * entropy(&self.label_weights(members));
            if p > 0.0 {
                split_info -= p * p.log2();
            }
        }
        let gain = parent_entropy - remainder;
        if split_info <= 0.0 {
            return None;
        }
        Some(Candidate {
            gain_ratio: gain / split_info,
            gain,
            feature,
            groups,
        })
    }
}

/// Grows a tree for one ambiguity class.
pub fn grow_tree(class: &[TagId], examples: &[ContextExample], n_features: usize, config: &TreeConfig) -> DecisionTree {
    let raw_total: f64 = examples.iter().map(|e| e.weight).sum();
    let scale = examples.len() as f64 / raw_total;
    let weights = examples.iter().map(|e| e.weight * scale).collect();
    let grower = Grower {
        class,
        examples,
        weights,
        config,
        n_features,
    };
    let idx: Vec<usize> = (0..examples.len()).collect();
    DecisionTree {
        class: class.to_vec(),
        scale,
        root: grower.grow(&idx, 0),
    }
}

pub fn learn_trees(corpus: &WeightedCorpus, config: &TreeConfig) -> Result<TreeEnsemble> {
    let tagset = corpus
        .tagset()
        .ok_or(Error::Empty("weighted corpus has no segments"))?
        .clone();
    corpus.check_labeled()?;
    if config.window.is_empty() || config.window.contains(&0) {
        return Err(Error::invalid("tree window must be non-empty and exclude offset 0"));
    }
    let examples = extract_examples(corpus, &config.window);
    if examples.is_empty() {
        log::warn!("no ambiguous labeled tokens; tree ensemble is empty");
    }
    let n_features = config.window.len() + 1;
    let trees = examples
        .into_iter()
        .filter(|(_, ex)| ex.len() >= config.min_examples && !ex.is_empty())
        .map(|(class, ex)| {
            let tree = grow_tree(&class, &ex, n_features, config);
            (class, tree)
        })
        .collect();
    Ok(TreeEnsemble {
        tagset,
        window: config.window.clone(),
        trees,
    })
}

/// Per-token state left after disambiguation.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeTrace {
    pub sweeps: usize,
    /// Final distributions aligned with candidates; discarded tags hold 0.
    pub distributions: Vec<Vec<f64>>,
}

fn normalize(p: &mut [f64]) {
    let z: f64 = p.iter().sum();
    if z > 0.0 {
        for x in p.iter_mut() {
            *x /= z;
        }
    }
}

pub fn tree_disambiguate(
    sentence: &Sentence,
    ensemble: &TreeEnsemble,
    lexicon: &LexicalModel,
    config: &TreeConfig,
) -> Result<SentenceTagging> {
    let (tagging, _) = tree_disambiguate_traced(sentence, ensemble, lexicon, config)?;
    Ok(tagging)
}

pub fn tree_disambiguate_traced(
    sentence: &Sentence,
    ensemble: &TreeEnsemble,
    lexicon: &LexicalModel,
    config: &TreeConfig,
) -> Result<(SentenceTagging, TreeTrace)> {
    let toks = &sentence.tokens;
    let mut dist: Vec<Vec<f64>> = toks.iter().map(|t| lexicon.emission_prob(t)).collect::<Result<_>>()?;
    let trees: Vec<Option<&DecisionTree>> = toks.iter().map(|t| ensemble.get(&t.candidates)).collect();
    let mut best: Vec<usize> = dist.iter().map(|d| argmax(d)).collect();
    let mut sweeps = 0;
    let mut features = Vec::with_capacity(ensemble.window.len() + 1);
    for _ in 0..config.max_sweeps.max(1) {
        sweeps += 1;
        let mut changed = false;
        for i in 0..toks.len() {
            let alive = dist[i].iter().filter(|&&p| p > 0.0).count();
            let Some(tree) = trees[i] else { continue };
            if alive < 2 {
                continue;
            }
            features.clear();
            for &off in &ensemble.window {
                let j = i as i64 + off as i64;
                if j < 0 || j >= toks.len() as i64 {
                    features.push(FeatureValue::Boundary);
                } else {
                    let j = j as usize;
                    features.push(FeatureValue::Tag(toks[j].candidates[best[j]]));
                }
            }
            features.push(FeatureValue::Form(toks[i].form.clone()));
            let leaf = tree.smoothed(tree.leaf_for(&features));
            let d = &mut dist[i];
            for (p, l) in d.iter_mut().zip(&leaf) {
                *p *= l;
            }
            normalize(d);
            let max = d.iter().cloned().fold(0.0, f64::max);
            for p in d.iter_mut() {
                if *p > 0.0 && *p < config.filter_ratio * max {
                    *p = 0.0;
                    changed = true;
                }
            }
            normalize(d);
            let b = argmax(d);
            if b != best[i] {
                best[i] = b;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let tags = best.iter().zip(toks).map(|(&b, t)| t.candidates[b]).collect();
    let scores = best.iter().zip(&dist).map(|(&b, d)| d[b].ln()).collect();
    Ok((
        SentenceTagging::new(tags, scores),
        TreeTrace {
            sweeps,
            distributions: dist,
        },
    ))
}

fn value_sexp(v: &FeatureValue, ts: &TagSet) -> Sexp {
    match v {
        FeatureValue::Boundary => Sexp::list(vec![Sexp::atom("bnd")]),
        FeatureValue::Tag(t) => Sexp::list(vec![Sexp::atom("tag"), Sexp::Str(ts.code(*t).into())]),
        FeatureValue::Form(f) => Sexp::list(vec![Sexp::atom("form"), Sexp::Str(f.clone())]),
    }
}

fn node_sexp(node: &Node, ts: &TagSet) -> Sexp {
    match node {
        Node::Leaf { counts } => {
            let mut items = vec![Sexp::atom("leaf")];
            items.extend(counts.iter().map(Sexp::atom));
            Sexp::list(items)
        }
        Node::Split {
            feature,
            default,
            branches,
        } => {
            let mut items = vec![
                Sexp::atom("split"),
                Sexp::atom(feature),
                Sexp::list(vec![Sexp::atom("default"), Sexp::atom(default)]),
            ];
            for b in branches {
                let mut br = vec![Sexp::atom("branch")];
                if b.other {
                    br.push(Sexp::atom("other"));
                }
                let mut vals = vec![Sexp::atom("values")];
                vals.extend(b.values.iter().map(|v| value_sexp(v, ts)));
                br.push(Sexp::list(vals));
                br.push(node_sexp(&b.node, ts));
                items.push(Sexp::list(br));
            }
            Sexp::list(items)
        }
    }
}

fn parse_tag(e: &Sexp, ts: &TagSet) -> Result<TagId> {
    ts.lookup(e.as_str()?, 0)
}

fn parse_value(e: &Sexp, ts: &TagSet) -> Result<FeatureValue> {
    let items = e.as_list()?;
    match items.first().map(Sexp::as_atom).transpose()? {
        Some("bnd") if items.len() == 1 => Ok(FeatureValue::Boundary),
        Some("tag") if items.len() == 2 => parse_tag(&items[1], ts).map(FeatureValue::Tag),
        Some("form") if items.len() == 2 => Ok(FeatureValue::Form(items[1].as_str()?.to_string())),
        _ => Err(Error::parse(0, "bad feature value")),
    }
}

fn parse_node(e: &Sexp, ts: &TagSet, class_len: usize, n_features: usize) -> Result<Node> {
    if let Ok(counts) = e.tagged("leaf") {
        let counts = counts.iter().map(Sexp::parse_num).collect::<Result<Vec<f64>>>()?;
        if counts.len() != class_len {
            return Err(Error::parse(0, "leaf size differs from class size"));
        }
        return Ok(Node::Leaf { counts });
    }
    let items = e.tagged("split")?;
    if items.len() < 3 {
        return Err(Error::parse(0, "split needs a feature, a default and branches"));
    }
    let feature: usize = items[0].parse_num()?;
    if feature >= n_features {
        return Err(Error::parse(0, "split feature out of range"));
    }
    let default: usize = items[1].tagged("default")?.first().ok_or_else(|| Error::parse(0, "empty default"))?.parse_num()?;
    let mut branches = Vec::new();
    for b in &items[2..] {
        let parts = b.tagged("branch")?;
        let (other, rest) = match parts.first() {
            Some(Sexp::Atom(a)) if a == "other" => (true, &parts[1..]),
            _ => (false, parts),
        };
        if rest.len() != 2 {
            return Err(Error::parse(0, "branch needs values and a node"));
        }
        let mut values = rest[0].tagged("values")?.iter().map(|v| parse_value(v, ts)).collect::<Result<Vec<_>>>()?;
        values.sort();
        branches.push(Branch {
            values,
            other,
            node: parse_node(&rest[1], ts, class_len, n_features)?,
        });
    }
    if default >= branches.len() {
        return Err(Error::parse(0, "default branch out of range"));
    }
    Ok(Node::Split {
        feature,
        default,
        branches,
    })
}

impl TreeEnsemble {
    pub fn to_text(&self) -> String {
        let ts = &self.tagset;
        let mut items = vec![Sexp::atom("ensemble")];
        let mut window = vec![Sexp::atom("window")];
        window.extend(self.window.iter().map(Sexp::atom));
        items.push(Sexp::list(window));
        for tree in self.trees.values() {
            let mut class = vec![Sexp::atom("class")];
            class.extend(tree.class.iter().map(|t| Sexp::Str(ts.code(*t).into())));
            items.push(Sexp::list(vec![
                Sexp::atom("tree"),
                Sexp::list(class),
                Sexp::list(vec![Sexp::atom("scale"), Sexp::atom(tree.scale)]),
                node_sexp(&tree.root, ts),
            ]));
        }
        let mut out = String::new();
        Sexp::list(items).write(&mut out, 0);
        out.push('\n');
        out
    }

    pub fn parse(text: &str, tagset: Arc<TagSet>) -> Result<Self> {
        let e = sexp::parse(text)?;
        let items = e.tagged("ensemble")?;
        let window = items
            .first()
            .ok_or_else(|| Error::parse(0, "missing window"))?
            .tagged("window")?
            .iter()
            .map(Sexp::parse_num)
            .collect::<Result<Vec<i32>>>()?;
        let n_features = window.len() + 1;
        let mut trees = BTreeMap::new();
        for t in &items[1..] {
            let parts = t.tagged("tree")?;
            if parts.len() != 3 {
                return Err(Error::parse(0, "tree needs class, scale and root"));
            }
            let mut class = parts[0].tagged("class")?.iter().map(|c| parse_tag(c, &tagset)).collect::<Result<Vec<_>>>()?;
            class.sort_unstable();
            let scale: f64 = parts[1].tagged("scale")?.first().ok_or_else(|| Error::parse(0, "empty scale"))?.parse_num()?;
            let root = parse_node(&parts[2], &tagset, class.len(), n_features)?;
            trees.insert(class.clone(), DecisionTree { class, scale, root });
        }
        Ok(TreeEnsemble { tagset, window, trees })
    }
}

impl DecisionTree {
    pub fn is_single_leaf(&self) -> bool {
        self.root.is_leaf()
    }
}
