//! Viterbi decoding against exhaustive enumeration.

use std::sync::Arc;

use cotag::lexicon::LexicalModel;
use cotag::ngram::{viterbi_decode, NgramConfig, NgramModel, Sym};
use cotag::{Sentence, TagId, TagSet, Token};
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn tagset(n: usize) -> Arc<TagSet> {
    let codes: Vec<String> = (0..n).map(|k| format!("T{k}")).collect();
    Arc::new(TagSet::new(&codes).unwrap())
}

/// Transition probability from raw counts, written out independently of the model code.
fn oracle_transition(m: &NgramModel, a: Sym, b: Sym, next: Sym) -> f64 {
    let n = m.tagset().len();
    let outcomes = (n + 1) as f64;
    let succ = |prev: Sym| (0..n).map(|i| Sym::Tag(TagId(i as u16))).chain([Sym::Eos]).map(move |s| (prev, s));
    let ctx2: f64 = succ(b).map(|(p, s)| m.bigram_count(p, s)).sum();
    let p2 = (m.bigram_count(b, next) + 1.0) / (ctx2 + outcomes);
    if m.order() == 2 {
        return p2;
    }
    let ctx3: f64 = succ(b).map(|(_, s)| m.trigram_count(a, b, s)).sum();
    if ctx3 > 0.0 {
        let p3 = (m.trigram_count(a, b, next) + 1.0) / (ctx3 + outcomes);
        m.config().trigram_weight * p3 + m.config().bigram_weight * p2
    } else {
        p2
    }
}

/// Best path by enumeration in lexicographic order; a later path replaces the
/// incumbent only when strictly better.
fn brute_force(sentence: &Sentence, lex: &LexicalModel, m: &NgramModel) -> Vec<TagId> {
    let emit: Vec<Vec<f64>> = sentence.tokens.iter().map(|t| lex.emission_prob(t).unwrap()).collect();
    let len = sentence.len();
    let mut idx = vec![0usize; len];
    let mut best: Option<(f64, Vec<TagId>)> = None;
    loop {
        let tags: Vec<TagId> = (0..len).map(|k| sentence.tokens[k].candidates[idx[k]]).collect();
        let (mut a, mut b) = (Sym::Bos, Sym::Bos);
        let mut score = 0.0;
        for k in 0..len {
            let t = Sym::Tag(tags[k]);
            score = score + oracle_transition(m, a, b, t).ln() + emit[k][idx[k]].ln();
            a = b;
            b = t;
        }
        score += oracle_transition(m, a, b, Sym::Eos).ln();
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, tags));
        }
        // odometer, last position fastest
        let mut k = len;
        loop {
            if k == 0 {
                return best.unwrap().1;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sentence.tokens[k].candidates.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

struct Case {
    sentence: Sentence,
    lexicon: LexicalModel,
    model: NgramModel,
}

/// Small integer counts make exact score ties common.
fn random_case(rng: &mut ChaCha8Rng, order: usize) -> Case {
    let n = rng.random_range(2..=5);
    let ts = tagset(n);
    let syms: Vec<Sym> = (0..n).map(|i| Sym::Tag(TagId(i as u16))).collect();
    let mut model = NgramModel::new(order, ts.clone(), NgramConfig::default()).unwrap();
    let ctx: Vec<Sym> = syms.iter().copied().chain([Sym::Bos]).collect();
    let nxt: Vec<Sym> = syms.iter().copied().chain([Sym::Eos]).collect();
    let density = rng.random_range(0.1..0.9);
    for &p in &ctx {
        for &q in &nxt {
            if rng.random_bool(density) {
                model.add_bigram(p, q, rng.random_range(1..4) as f64);
            }
            if order == 3 {
                for &a in &ctx {
                    if rng.random_bool(density / 3.0) {
                        model.add_trigram(a, p, q, rng.random_range(1..3) as f64);
                    }
                }
            }
        }
    }
    model.finalize();

    let mut lexicon = LexicalModel::empty(ts.clone());
    let len = rng.random_range(1..=6);
    let forms = ["a", "b", "c", "d"];
    let mut tokens = Vec::with_capacity(len);
    for _ in 0..len {
        let k = rng.random_range(1..=n.min(4));
        let cands: Vec<TagId> = (0..n as u16).map(TagId).collect::<Vec<_>>().choose_multiple(rng, k).copied().collect();
        tokens.push(Token::new(*forms.choose(rng).unwrap(), cands).unwrap());
    }
    for _ in 0..rng.random_range(1..12) {
        let form = *forms.choose(rng).unwrap();
        let tag = TagId(rng.random_range(0..n as u16));
        lexicon.add(form, &[tag], tag, rng.random_range(1..3) as f64);
    }
    Case {
        sentence: Sentence::new(tokens).unwrap(),
        lexicon,
        model,
    }
}

#[test]
fn matches_enumeration_bigram_and_trigram() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ties = 0;
    for k in 0..400 {
        let order = if k % 2 == 0 { 2 } else { 3 };
        let case = random_case(&mut rng, order);
        let got = viterbi_decode(&case.sentence, &case.lexicon, &case.model).unwrap().tags;
        let want = brute_force(&case.sentence, &case.lexicon, &case.model);
        assert_eq!(got, want, "case {k}, order {order}");
        // cases with a tied emission somewhere
        let uniform = case.sentence.tokens.iter().any(|t| {
            let e = case.lexicon.emission_prob(t).unwrap();
            e.len() > 1 && e.windows(2).any(|w| w[0] == w[1])
        });
        ties += uniform as usize;
    }
    assert!(ties > 50, "too few tie cases to exercise the tie rule: {ties}");
}

#[test]
fn full_ties_pick_smallest_sequence() {
    // a model with no counts at all scores every path the same
    let ts = tagset(3);
    let model = NgramModel::new(2, ts.clone(), NgramConfig::default()).unwrap();
    let mut lex = LexicalModel::empty(ts.clone());
    lex.add("zz", &[TagId(0)], TagId(0), 1.0);
    let toks = vec![
        Token::new("x", [TagId(2), TagId(1)]).unwrap(),
        Token::new("y", [TagId(1), TagId(2), TagId(0)]).unwrap(),
    ];
    // both forms fall back to the unigram table: T1 and T2 tie on "x", T0 wins on "y"
    let s = Sentence::new(toks).unwrap();
    let got = viterbi_decode(&s, &lex, &model).unwrap().tags;
    assert_eq!(got, brute_force(&s, &lex, &model));
    assert_eq!(got, vec![TagId(1), TagId(0)]);
}

#[test]
fn single_candidates_force_the_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let case = random_case(&mut rng, 3);
    let forced: Vec<Token> = case
        .sentence
        .tokens
        .iter()
        .map(|t| Token::new(t.form.clone(), [t.candidates[t.candidates.len() - 1]]).unwrap())
        .collect();
    let want: Vec<TagId> = forced.iter().map(|t| t.candidates[0]).collect();
    let s = Sentence::new(forced).unwrap();
    assert_eq!(viterbi_decode(&s, &case.lexicon, &case.model).unwrap().tags, want);
}

#[test]
fn hand_built_two_token_example() {
    // tags DA = T0, NC = T1; every transition into the end symbol has the same
    // probability, so path scores are P(t1|<s>) P(t1|w1) P(t2|t1) P(t2|w2)
    let ts = Arc::new(TagSet::new(&["DA", "NC"]).unwrap());
    let (da, nc) = (TagId(0), TagId(1));
    let mut model = NgramModel::new(2, ts.clone(), NgramConfig::default()).unwrap();
    // P(DA|<s>) = 18/20 over the outcomes DA, NC and </s>
    model.add_bigram(Sym::Bos, Sym::Tag(da), 17.0);
    // P(NC|DA) = 8/10
    model.add_bigram(Sym::Tag(da), Sym::Tag(nc), 7.0);
    // P(· | NC) uniform
    model.finalize();
    let mut lex = LexicalModel::empty(ts.clone());
    // P(DA|"la") = 7/10
    lex.add("la", &[da, nc], da, 6.0);
    lex.add("la", &[da, nc], nc, 2.0);
    // P(NC|"casa") = 1
    let s = Sentence::new(vec![
        Token::new("la", [da, nc]).unwrap(),
        Token::new("casa", [nc]).unwrap(),
    ])
    .unwrap();
    let p_da_bos = model.bigram_prob(Sym::Bos, Sym::Tag(da));
    let p_nc_da = model.bigram_prob(Sym::Tag(da), Sym::Tag(nc));
    let p_da_la = lex.emission_prob(&s.tokens[0]).unwrap()[0];
    assert!((p_da_bos - 0.9).abs() < 1e-12);
    assert!((p_nc_da - 0.8).abs() < 1e-12);
    assert!((p_da_la - 0.7).abs() < 1e-12);
    let paths = [(da, 0.9 * 0.7 * 0.8), (nc, 0.1 * 0.3 * model.bigram_prob(Sym::Tag(nc), Sym::Tag(nc)))];
    assert!(paths[0].1 > paths[1].1);
    assert_eq!(viterbi_decode(&s, &lex, &model).unwrap().tags, vec![da, nc]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoded_tags_are_candidates(seed in any::<u64>(), order in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_case(&mut rng, order);
        let got = viterbi_decode(&case.sentence, &case.lexicon, &case.model).unwrap();
        prop_assert_eq!(got.tags.len(), case.sentence.len());
        for (t, tok) in got.tags.iter().zip(&case.sentence.tokens) {
            prop_assert!(tok.has_candidate(*t));
        }
        prop_assert_eq!(got.tags, brute_force(&case.sentence, &case.lexicon, &case.model));
    }
}
