//! Synthetic gold corpora drawn from a random hidden Markov model whose
//! lexicon shares words between tags.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::corpus::{CandidateDictionary, Corpus, Sentence, TagId, TagSet, Token};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub tags: usize,
    pub tokens: usize,
    /// Share of each tag's emission mass spent on ambiguous words.
    pub ambiguous_mass: f64,
    pub unambiguous_words_per_tag: usize,
    pub ambiguous_words: usize,
    /// Distinct ambiguity classes the ambiguous words are drawn from.
    pub ambiguity_classes: usize,
    pub min_sentence: usize,
    pub max_sentence: usize,
    /// Gamma shape for transition rows; small values give peaked rows.
    pub transition_shape: f64,
    /// Gamma shape for a word's preference among its tags.
    pub preference_shape: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            tags: 15,
            tokens: 100_000,
            ambiguous_mass: 0.4,
            unambiguous_words_per_tag: 200,
            ambiguous_words: 400,
            ambiguity_classes: 40,
            min_sentence: 5,
            max_sentence: 30,
            transition_shape: 0.2,
            preference_shape: 0.7,
            seed: 1,
        }
    }
}

pub struct SynthOutput {
    pub tagset: Arc<TagSet>,
    pub corpus: Corpus,
    pub dictionary: CandidateDictionary,
}

struct Word {
    form: String,
    class: Vec<TagId>,
}

fn gamma_row(rng: &mut ChaCha8Rng, n: usize, shape: f64) -> Result<Vec<f64>> {
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::invalid(format!("gamma shape: {e}")))?;
    let mut row: Vec<f64> = (0..n).map(|_| g.sample(rng).max(1e-12)).collect();
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= z);
    Ok(row)
}

fn weighted(w: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(w).map_err(|e| Error::invalid(format!("weights: {e}")))
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    let c = config;
    if c.tags < 2 || c.tags > 99 {
        return Err(Error::invalid("tag count must lie in 2..=99"));
    }
    if !(0.0..1.0).contains(&c.ambiguous_mass) || c.unambiguous_words_per_tag == 0 {
        return Err(Error::invalid("ambiguous mass must lie in [0, 1) with unambiguous words present"));
    }
    if c.min_sentence == 0 || c.min_sentence > c.max_sentence || c.tokens == 0 {
        return Err(Error::invalid("sentence lengths and token count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let codes: Vec<String> = (0..c.tags).map(|k| format!("T{k:02}")).collect();
    let tagset = Arc::new(TagSet::new(&codes)?);

    let mut words: Vec<Word> = Vec::new();
    // emission[t] = (word index, weight) pairs
    let mut emission: Vec<Vec<(usize, f64)>> = vec![Vec::new(); c.tags];
    for t in 0..c.tags {
        for r in 0..c.unambiguous_words_per_tag {
            emission[t].push((words.len(), (1.0 - c.ambiguous_mass) / (r as f64 + 1.0)));
            words.push(Word {
                form: format!("u{t:02}_{r}"),
                class: vec![TagId(t as u16)],
            });
        }
    }
    let mut ambiguous: Vec<Vec<(usize, f64)>> = vec![Vec::new(); c.tags];
    let size_dist = weighted(&[0.6, 0.3, 0.1])?;
    let all: Vec<usize> = (0..c.tags).collect();
    let mut pool: Vec<Vec<usize>> = Vec::new();
    for _ in 0..c.ambiguity_classes.max(1) {
        let size = (2 + size_dist.sample(&mut rng)).min(c.tags);
        let mut class: Vec<usize> = all.choose_multiple(&mut rng, size).copied().collect();
        class.sort_unstable();
        pool.push(class);
    }
    let popularity = weighted(&(0..pool.len()).map(|k| 1.0 / (k as f64 + 1.0)).collect::<Vec<_>>())?;
    for a in 0..c.ambiguous_words {
        let class = pool[popularity.sample(&mut rng)].clone();
        let size = class.len();
        let pref = gamma_row(&mut rng, size, c.preference_shape)?;
        let zipf = 1.0 / (a as f64 + 1.0);
        for (t, p) in class.iter().zip(&pref) {
            ambiguous[*t].push((words.len(), zipf * p));
        }
        words.push(Word {
            form: format!("a{a}"),
            class: class.into_iter().map(|t| TagId(t as u16)).collect(),
        });
    }
    for t in 0..c.tags {
        let z: f64 = ambiguous[t].iter().map(|x| x.1).sum();
        let unamb: f64 = emission[t].iter().map(|x| x.1).sum();
        // unambiguous share first rescaled to 1 - mass, then ambiguous share to mass
        for e in emission[t].iter_mut() {
            e.1 *= (1.0 - c.ambiguous_mass) / unamb;
        }
        if z > 0.0 {
            emission[t].extend(ambiguous[t].iter().map(|&(w, x)| (w, x * c.ambiguous_mass / z)));
        }
    }
    let emit: Vec<WeightedIndex<f64>> = emission
        .iter()
        .map(|e| weighted(&e.iter().map(|x| x.1).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let start = weighted(&gamma_row(&mut rng, c.tags, c.transition_shape.max(0.5))?)?;
    let trans: Vec<WeightedIndex<f64>> = (0..c.tags)
        .map(|_| gamma_row(&mut rng, c.tags, c.transition_shape).and_then(|r| weighted(&r)))
        .collect::<Result<_>>()?;

    let mut sentences = Vec::new();
    let mut produced = 0;
    while produced < c.tokens {
        let len = rng.random_range(c.min_sentence..=c.max_sentence).min(c.tokens - produced);
        let mut tokens = Vec::with_capacity(len);
        let mut tag = start.sample(&mut rng);
        for k in 0..len {
            if k > 0 {
                tag = trans[tag].sample(&mut rng);
            }
            let w = &words[emission[tag][emit[tag].sample(&mut rng)].0];
            tokens.push(Token::new(w.form.clone(), w.class.iter().copied())?.with_gold(TagId(tag as u16))?);
        }
        produced += len;
        sentences.push(Sentence::new(tokens)?);
    }
    let mut dictionary = CandidateDictionary::default();
    for w in &words {
        dictionary.insert(w.form.clone(), w.class.clone());
    }
    Ok(SynthOutput {
        corpus: Corpus::new(tagset.clone(), sentences)?,
        tagset,
        dictionary,
    })
}

/// Cuts consecutive sentence runs holding at least `sizes[k]` tokens each.
pub fn partition_tokens(corpus: &Corpus, sizes: &[usize]) -> Result<Vec<Corpus>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut next = 0;
    for &want in sizes {
        let start = next;
        let mut have = 0;
        while have < want {
            let s = corpus
                .sentences
                .get(next)
                .ok_or_else(|| Error::invalid(format!("corpus too small for a {want}-token part")))?;
            have += s.len();
            next += 1;
        }
        out.push(corpus.subset(&(start..next).collect::<Vec<_>>()));
    }
    Ok(out)
}
