//! Structural invariants over randomly generated inputs.

use std::sync::Arc;

use cotag::combine::{error_of_combination, intersect_taggings, union_tagging, weight_for_target_error};
use cotag::corpus::{parse_vertical, reduce_tags, write_vertical};
use cotag::eval::evaluate;
use cotag::lexicon::train_lexicon;
use cotag::relax::{relax_step, Constraint, ConstraintBase, Kind, PatternValue};
use cotag::tagging::{SentenceTagging, Tagging};
use cotag::{Corpus, Sentence, TagId, TagSet, Token, WeightedCorpus};
use proptest::prelude::*;

const CODES: [&str; 8] = ["NCMS000", "NCFS000", "VMIP3S0", "VMIS3S0", "DA0MS0", "DA0FS0", "AQ0MS0", "SPS00"];

fn tagset() -> Arc<TagSet> {
    Arc::new(TagSet::new(&CODES).unwrap())
}

#[derive(Clone, Debug)]
struct RawToken {
    form: String,
    cands: Vec<u16>,
    gold: Option<usize>,
    assigned: Option<usize>,
    masked: bool,
}

fn raw_token() -> impl Strategy<Value = RawToken> {
    (
        "[a-zñ'\"*][a-zñ 0-9.]{0,5}[a-z]?",
        proptest::collection::btree_set(0u16..CODES.len() as u16, 1..4),
        proptest::option::of(0usize..4),
        proptest::option::of(0usize..4),
        any::<bool>(),
    )
        .prop_map(|(form, cands, gold, assigned, masked)| RawToken {
            form,
            cands: cands.into_iter().collect(),
            gold,
            assigned,
            masked,
        })
}

fn build(raw: &[Vec<RawToken>]) -> Corpus {
    let sentences = raw
        .iter()
        .map(|s| {
            let tokens = s
                .iter()
                .map(|r| {
                    let mut t = Token::new(r.form.clone(), r.cands.iter().map(|&c| TagId(c))).unwrap();
                    let pick = |k: usize| t.candidates[k % t.candidates.len()];
                    let gold = r.gold.map(pick);
                    let assigned = r.assigned.map(pick);
                    t.gold = gold.filter(|_| !r.masked);
                    t.assigned = assigned;
                    t.masked = r.masked;
                    t
                })
                .collect();
            Sentence::new(tokens).unwrap()
        })
        .collect();
    Corpus::new(tagset(), sentences).unwrap()
}

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    proptest::collection::vec(proptest::collection::vec(raw_token(), 1..8), 0..6).prop_map(|r| build(&r))
}

/// Gold corpus with every token labeled.
fn gold_strategy() -> impl Strategy<Value = Corpus> {
    corpus_strategy().prop_map(|mut c| {
        for s in &mut c.sentences {
            for t in &mut s.tokens {
                t.masked = false;
                t.gold = Some(t.gold.unwrap_or(t.candidates[0]));
                t.assigned = None;
            }
        }
        c
    })
}

fn tagging_strategy(c: &Corpus) -> impl Strategy<Value = Tagging> {
    let shape: Vec<Vec<usize>> = c.sentences.iter().map(|s| s.tokens.iter().map(|t| t.candidates.len()).collect()).collect();
    let picks = shape
        .iter()
        .map(|s| s.iter().map(|&n| 0..n).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    let c = c.clone();
    picks.prop_map(move |p| {
        Tagging::new(
            p.iter()
                .zip(&c.sentences)
                .map(|(ks, s)| {
                    let tags: Vec<TagId> = ks.iter().zip(&s.tokens).map(|(&k, t)| t.candidates[k]).collect();
                    SentenceTagging::new(tags.clone(), vec![0.0; tags.len()])
                })
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn vertical_round_trip(c in corpus_strategy()) {
        let text = write_vertical(&c);
        let back = parse_vertical(&text, &tagset()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(write_vertical(&back), text);
    }

    #[test]
    fn reduction_is_idempotent_and_keeps_invariants(c in corpus_strategy()) {
        let once = reduce_tags(&c);
        once.validate().unwrap();
        let twice = reduce_tags(&once);
        prop_assert_eq!(write_vertical(&once), write_vertical(&twice));
        prop_assert_eq!(once.token_count(), c.token_count());
        for (a, b) in c.tokens().zip(once.tokens()) {
            prop_assert!(b.candidates.len() <= a.candidates.len());
            prop_assert_eq!(b.masked, a.masked);
        }
    }

    #[test]
    fn emissions_are_distributions(c in gold_strategy(), probes in proptest::collection::vec(raw_token(), 1..10)) {
        prop_assume!(c.token_count() > 0);
        let lex = train_lexicon(&WeightedCorpus::single(c.clone())).unwrap();
        let probe = build(&[probes]);
        for t in c.tokens().chain(probe.tokens()) {
            let p = lex.emission_prob(t).unwrap();
            prop_assert_eq!(p.len(), t.candidates.len());
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {}", sum);
            prop_assert!(p.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn counts_scale_linearly_with_weight(c in gold_strategy(), w in 0.1f64..20.0) {
        prop_assume!(c.token_count() > 0);
        let one = train_lexicon(&WeightedCorpus::single(c.clone())).unwrap();
        let mut wc = WeightedCorpus::new();
        wc.push(c.clone(), w, 0.0).unwrap();
        let many = train_lexicon(&wc).unwrap();
        for t in c.tokens() {
            for &tag in &t.candidates {
                let (a, b) = (one.word_count(&t.form, tag), many.word_count(&t.form, tag));
                prop_assert!((b - w * a).abs() <= 1e-9 * (1.0 + b.abs()));
                let (a, b) = (one.class_count(&t.candidates, tag), many.class_count(&t.candidates, tag));
                prop_assert!((b - w * a).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn combination_error_is_monotone_and_invertible(
        n0 in 1.0f64..1e6,
        n_new in 1.0f64..1e6,
        e0 in 0.0f64..0.05,
        gap in 1e-4f64..0.2,
        w_a in 0.0f64..50.0,
        w_b in 0.0f64..50.0,
    ) {
        let e_new = (e0 + gap).min(1.0);
        let (lo, hi) = if w_a <= w_b { (w_a, w_b) } else { (w_b, w_a) };
        let err_lo = error_of_combination(n0, e0, n_new, e_new, lo).unwrap();
        let err_hi = error_of_combination(n0, e0, n_new, e_new, hi).unwrap();
        prop_assert!(err_hi <= err_lo + 1e-15);
        prop_assert!(err_lo <= e_new + 1e-15 && err_hi >= e0 - 1e-15);
        if hi > 0.0 && err_hi > e0 {
            let back = weight_for_target_error(n0, e0, n_new, e_new, err_hi).unwrap();
            prop_assert!((back - hi).abs() <= 1e-6 * hi.max(1.0), "{} vs {}", back, hi);
        }
    }

    #[test]
    fn relaxation_keeps_distributions_valid(
        c in corpus_strategy(),
        raw_constraints in proptest::collection::vec((0u16..8, -3i32..=3, 0u16..8, -12.0f64..12.0), 0..30),
        steps in 1usize..6,
    ) {
        prop_assume!(c.token_count() > 0);
        let mut built = Vec::new();
        for (target, off, tag, w) in raw_constraints {
            let value = if off == 0 {
                PatternValue::Form("a".into())
            } else if tag == 7 {
                PatternValue::Boundary
            } else {
                PatternValue::Tag(TagId(tag))
            };
            built.push(Constraint::new(TagId(target), vec![(off, value)], w.clamp(-10.0, 10.0), Kind::Manual).unwrap());
        }
        let base = ConstraintBase::new(tagset(), built);
        for s in &c.sentences {
            let mut probs: Vec<Vec<f64>> = s.tokens.iter().map(|t| vec![1.0 / t.candidates.len() as f64; t.candidates.len()]).collect();
            for _ in 0..steps {
                relax_step(s, &base, &mut probs);
                for p in &probs {
                    let sum: f64 = p.iter().sum();
                    prop_assert!((sum - 1.0).abs() <= 1e-9);
                    prop_assert!(p.iter().all(|&x| x >= 0.0));
                }
            }
        }
    }

    #[test]
    fn union_and_agreement_bounds((gold, taggings) in gold_strategy()
        .prop_filter("non-empty", |c| c.token_count() > 0)
        .prop_flat_map(|c| {
            let t = proptest::collection::vec(tagging_strategy(&c), 2..4);
            (Just(c), t)
        }))
    {
        let u = union_tagging(&gold, &taggings).unwrap();
        let best = taggings.iter().map(|t| evaluate(t, &gold).unwrap().overall).fold(0.0, f64::max);
        prop_assert!(u.metrics.recall.unwrap() >= best);
        prop_assert!(u.metrics.tags_per_word >= 1.0 && u.metrics.tags_per_word <= taggings.len() as f64);
        let all = intersect_taggings(&gold, &taggings).unwrap();
        let pair = intersect_taggings(&gold, &taggings[..2]).unwrap();
        prop_assert!(all.coverage <= pair.coverage);
        prop_assert_eq!(all.agreed_tokens + all.disagreements.len(), gold.token_count());
        prop_assert!((u.metrics.fully_disambiguated - all.coverage).abs() < 1e-12);
    }
}
