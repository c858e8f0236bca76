//! Tagger agreement, weighted corpus combination, the union tagger and
//! hand corrections of disagreements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{Corpus, TagId, TagSet, WeightedCorpus};
use crate::error::{Error, Result};
use crate::tagging::Tagging;

/// A token where the taggers did not all agree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub sentence: usize,
    pub token: usize,
    /// One proposal per tagger, in tagger order.
    pub proposals: Vec<TagId>,
}

#[derive(Clone, Debug)]
pub struct AgreementResult {
    /// Every input sentence; agreed tokens carry the common tag as gold,
    /// disagreement tokens are masked.
    pub agreed: Corpus,
    pub disagreements: Vec<Disagreement>,
    pub coverage: f64,
    pub agreed_tokens: usize,
    pub total_tokens: usize,
}

pub fn intersect_taggings(corpus: &Corpus, taggings: &[Tagging]) -> Result<AgreementResult> {
    if taggings.len() < 2 {
        return Err(Error::invalid("intersection needs at least two taggings"));
    }
    for t in taggings {
        t.check_aligned(corpus)?;
    }
    let mut agreed = corpus.clone();
    let mut disagreements = Vec::new();
    let mut agreed_tokens = 0;
    for (si, sent) in agreed.sentences.iter_mut().enumerate() {
        for (ti, tok) in sent.tokens.iter_mut().enumerate() {
            let proposals: Vec<TagId> = taggings.iter().map(|t| t.sentences[si].tags[ti]).collect();
            tok.assigned = None;
            if proposals.iter().all(|p| *p == proposals[0]) {
                tok.gold = Some(proposals[0]);
                tok.masked = false;
                agreed_tokens += 1;
            } else {
                tok.gold = None;
                tok.masked = true;
                disagreements.push(Disagreement {
                    sentence: si,
                    token: ti,
                    proposals,
                });
            }
        }
    }
    let total_tokens = corpus.token_count();
    Ok(AgreementResult {
        agreed,
        disagreements,
        coverage: if total_tokens == 0 {
            0.0
        } else {
            agreed_tokens as f64 / total_tokens as f64
        },
        agreed_tokens,
        total_tokens,
    })
}

fn check_rate(name: &str, e: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {e}")));
    }
    Ok(())
}

/// Error rate of a corpus made of `n0` tokens at rate `e0` counted `w0`
/// times plus `n_new` tokens at rate `e_new`.
pub fn error_of_combination(n0: f64, e0: f64, n_new: f64, e_new: f64, w0: f64) -> Result<f64> {
    check_rate("e0", e0)?;
    check_rate("e_new", e_new)?;
    if n0 < 0.0 || n_new < 0.0 || !(w0 >= 0.0 && w0.is_finite()) {
        return Err(Error::invalid("sizes and weight must be non-negative"));
    }
    let size = w0 * n0 + n_new;
    if size <= 0.0 {
        return Err(Error::invalid("combined corpus is empty"));
    }
    Ok((w0 * n0 * e0 + n_new * e_new) / size)
}

/// The `w0` at which the combination reaches `target`.
pub fn weight_for_target_error(n0: f64, e0: f64, n_new: f64, e_new: f64, target: f64) -> Result<f64> {
    check_rate("e0", e0)?;
    check_rate("e_new", e_new)?;
    if n0 <= 0.0 || n_new <= 0.0 {
        return Err(Error::invalid("sizes must be positive"));
    }
    if !(target > e0 && target <= e_new) {
        return Err(Error::Unreachable(format!(
            "target error {target} is unreachable: weighting can only move the error within ({e0}, {e_new}]"
        )));
    }
    Ok(n_new * (e_new - target) / (n0 * (target - e0)))
}

/// Like [`weight_for_target_error`] with `e0 = 0`, but a target at or above
/// `e_new` gives weight 0, the closest achievable error.
pub fn seed_weight_for_target(n0: f64, n_new: f64, e_new: f64, target: f64) -> Result<f64> {
    if target >= e_new {
        Ok(0.0)
    } else {
        weight_for_target_error(n0, 0.0, n_new, e_new, target)
    }
}

/// Smallest weight given to the seed segment, so that it is never dropped.
pub const MIN_SEED_WEIGHT: f64 = 1e-6;

pub fn combine_training(c0: &Corpus, agreed: &Corpus, w0: f64, agreed_error: f64) -> Result<WeightedCorpus> {
    if !(w0 >= 0.0 && w0.is_finite()) {
        return Err(Error::invalid(format!("seed weight must be non-negative, got {w0}")));
    }
    let mut wc = WeightedCorpus::new();
    wc.push(c0.clone(), w0.max(MIN_SEED_WEIGHT), 0.0)?;
    if agreed.labeled_count() == 0 {
        log::warn!("agreement corpus is empty; retraining on the seed corpus alone");
    } else {
        wc.push(agreed.clone(), 1.0, agreed_error)?;
    }
    Ok(wc)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnionMetrics {
    /// Share of tokens whose gold tag is in the union; absent without gold.
    pub recall: Option<f64>,
    pub tags_per_word: f64,
    pub fully_disambiguated: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnionTagging {
    /// Sorted, deduplicated proposals per sentence and token.
    pub sets: Vec<Vec<Vec<TagId>>>,
    pub metrics: UnionMetrics,
}

pub fn union_tagging(corpus: &Corpus, taggings: &[Tagging]) -> Result<UnionTagging> {
    if taggings.is_empty() {
        return Err(Error::invalid("union needs at least one tagging"));
    }
    for t in taggings {
        t.check_aligned(corpus)?;
    }
    let (mut tags, mut single, mut total, mut hits) = (0usize, 0usize, 0usize, 0usize);
    let mut all_gold = true;
    let mut sets = Vec::with_capacity(corpus.sentences.len());
    for (si, sent) in corpus.sentences.iter().enumerate() {
        let mut row = Vec::with_capacity(sent.len());
        for (ti, tok) in sent.tokens.iter().enumerate() {
            let mut set: Vec<TagId> = taggings.iter().map(|t| t.sentences[si].tags[ti]).collect();
            set.sort_unstable();
            set.dedup();
            total += 1;
            tags += set.len();
            single += (set.len() == 1) as usize;
            match tok.label() {
                Some(g) => hits += set.contains(&g) as usize,
                None => all_gold = false,
            }
            row.push(set);
        }
        sets.push(row);
    }
    let div = |a: usize| if total == 0 { 0.0 } else { a as f64 / total as f64 };
    Ok(UnionTagging {
        sets,
        metrics: UnionMetrics {
            recall: (all_gold && total > 0).then(|| div(hits)),
            tags_per_word: div(tags),
            fully_disambiguated: div(single),
        },
    })
}

/// A hand-chosen tag for a disagreement position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correction {
    pub sentence: usize,
    pub token: usize,
    pub tag: TagId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub sentence: usize,
    pub token: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct CorrectionOutcome {
    pub corpus: Corpus,
    pub applied: usize,
    pub rejected: Vec<Rejection>,
    pub unresolved: usize,
}

/// Fills disagreement gaps with hand-chosen tags. Unresolved positions stay
/// masked; with `drop_gapped` the sentences still containing them are left out.
pub fn apply_corrections(agreement: &AgreementResult, corrections: &[Correction], drop_gapped: bool) -> Result<CorrectionOutcome> {
    let listed: BTreeMap<(usize, usize), usize> = agreement
        .disagreements
        .iter()
        .enumerate()
        .map(|(k, d)| ((d.sentence, d.token), k))
        .collect();
    let mut corpus = agreement.agreed.clone();
    let mut done = vec![false; agreement.disagreements.len()];
    let mut rejected = Vec::new();
    let mut applied = 0;
    for c in corrections {
        let reject = |reason: &str| Rejection {
            sentence: c.sentence,
            token: c.token,
            reason: reason.to_string(),
        };
        let Some(&k) = listed.get(&(c.sentence, c.token)) else {
            rejected.push(reject("position is not a listed disagreement"));
            continue;
        };
        if done[k] {
            rejected.push(reject("position already corrected"));
            continue;
        }
        let tok = &mut corpus.sentences[c.sentence].tokens[c.token];
        if !tok.has_candidate(c.tag) {
            rejected.push(reject(&format!(
                "tag {} is not a candidate of {:?}",
                corpus.tagset.code(c.tag),
                tok.form
            )));
            continue;
        }
        tok.gold = Some(c.tag);
        tok.masked = false;
        done[k] = true;
        applied += 1;
    }
    let unresolved = done.iter().filter(|d| !**d).count();
    if drop_gapped {
        corpus.sentences.retain(|s| s.tokens.iter().all(|t| !t.masked));
    }
    Ok(CorrectionOutcome {
        corpus,
        applied,
        rejected,
        unresolved,
    })
}

/// `sentence<TAB>token<TAB>form<TAB>candidates<TAB>proposal...` per line.
pub fn write_disagreements(agreement: &AgreementResult) -> String {
    let ts = &agreement.agreed.tagset;
    let mut out = String::new();
    for d in &agreement.disagreements {
        let tok = &agreement.agreed.sentences[d.sentence].tokens[d.token];
        let cands: Vec<&str> = tok.candidates.iter().map(|c| ts.code(*c)).collect();
        let _ = write!(out, "{}\t{}\t{}\t{}", d.sentence, d.token, tok.form, cands.join(" "));
        for p in &d.proposals {
            let _ = write!(out, "\t{}", ts.code(*p));
        }
        out.push('\n');
    }
    out
}

/// Reads a disagreements file and checks it against the agreed corpus.
pub fn parse_disagreements(text: &str, agreed: &Corpus) -> Result<Vec<Disagreement>> {
    let ts: &TagSet = &agreed.tagset;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let ln = n + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 6 {
            return Err(Error::parse(ln, "expected sentence, token, form, candidates and two or more proposals"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(ln, format!("bad index {s:?}")));
        let (si, ti) = (num(cols[0])?, num(cols[1])?);
        let tok = agreed
            .sentences
            .get(si)
            .and_then(|s| s.tokens.get(ti))
            .ok_or_else(|| Error::integrity(ln, format!("position {si}:{ti} is outside the corpus")))?;
        if tok.form != cols[2] {
            return Err(Error::integrity(ln, format!("form {:?} does not match corpus form {:?}", cols[2], tok.form)));
        }
        if !tok.masked {
            return Err(Error::integrity(ln, format!("position {si}:{ti} is not masked in the agreed corpus")));
        }
        let proposals = cols[4..].iter().map(|c| ts.lookup(c, ln)).collect::<Result<Vec<_>>>()?;
        out.push(Disagreement {
            sentence: si,
            token: ti,
            proposals,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_vertical;
    use std::sync::Arc;

    fn ts() -> Arc<TagSet> {
        Arc::new(TagSet::new(&["DA", "NC", "VM"]).unwrap())
    }

    fn forty() -> Corpus {
        let mut text = String::new();
        for i in 0..40 {
            text.push_str("casa\tNC VM\tNC\n");
            if i % 10 == 9 {
                text.push('\n');
            }
        }
        parse_vertical(&text, &ts()).unwrap()
    }

    #[test]
    fn one_disagreement_in_forty() {
        let c = forty();
        let a = Tagging::from_gold(&c).unwrap();
        let mut b = a.clone();
        b.sentences[2].tags[3] = TagId(2);
        let r = intersect_taggings(&c, &[a.clone(), b]).unwrap();
        assert_eq!(r.coverage, 0.975);
        assert_eq!(r.disagreements.len(), 1);
        assert_eq!(r.disagreements[0].proposals, vec![TagId(1), TagId(2)]);
        assert!(r.agreed.sentences[2].tokens[3].masked);
        assert_eq!(r.agreed.labeled_count(), 39);
        let same = intersect_taggings(&c, &[a.clone(), a]).unwrap();
        assert_eq!(same.coverage, 1.0);
        assert!(same.disagreements.is_empty());
    }

    #[test]
    fn combination_arithmetic() {
        let e1 = error_of_combination(70000.0, 0.0, 195000.0, 0.016, 1.0).unwrap();
        assert!((e1 - 3120.0 / 265000.0).abs() < 1e-15);
        let e2 = error_of_combination(70000.0, 0.0, 195000.0, 0.016, 2.0).unwrap();
        assert!((e2 - 3120.0 / 335000.0).abs() < 1e-15);
        assert_eq!(error_of_combination(70000.0, 0.0, 195000.0, 0.016, 0.0).unwrap(), 0.016);
        assert!(error_of_combination(0.0, 0.0, 0.0, 0.1, 1.0).is_err());
        let w = weight_for_target_error(70000.0, 0.0, 195000.0, 0.016, e2).unwrap();
        assert!((w - 2.0).abs() < 1e-9);
        assert_eq!(weight_for_target_error(70000.0, 0.0, 195000.0, 0.016, 0.016).unwrap(), 0.0);
        assert!(matches!(
            weight_for_target_error(70000.0, 0.01, 195000.0, 0.016, 0.01),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn combine_virtual_sizes() {
        let mut c0 = String::new();
        for _ in 0..70 {
            c0.push_str("la\tDA\tDA\n");
        }
        let mut agreed = String::new();
        for _ in 0..195 {
            agreed.push_str("la\tDA\tDA\n");
        }
        let c0 = parse_vertical(&c0, &ts()).unwrap();
        let agreed = parse_vertical(&agreed, &ts()).unwrap();
        assert_eq!(combine_training(&c0, &agreed, 1.0, 0.01).unwrap().virtual_size(), 265.0);
        assert_eq!(combine_training(&c0, &agreed, 2.0, 0.01).unwrap().virtual_size(), 335.0);
        let alone = combine_training(&c0, &Corpus::empty(ts()), 1.0, 0.0).unwrap();
        assert_eq!(alone.segments().len(), 1);
    }

    #[test]
    fn union_nine_in_thousand() {
        let mut text = String::new();
        for i in 0..1000 {
            text.push_str("casa\tNC VM\tNC\n");
            if i % 20 == 19 {
                text.push('\n');
            }
        }
        let c = parse_vertical(&text, &ts()).unwrap();
        let a = Tagging::from_gold(&c).unwrap();
        let mut b = a.clone();
        for k in 0..9 {
            b.sentences[k * 5].tags[k] = TagId(2);
        }
        let u = union_tagging(&c, &[a, b]).unwrap();
        assert_eq!(u.metrics.tags_per_word, 1.009);
        assert_eq!(u.metrics.fully_disambiguated, 0.991);
        assert_eq!(u.metrics.recall, Some(1.0));
    }

    #[test]
    fn corrections() {
        let c = forty();
        let a = Tagging::from_gold(&c).unwrap();
        let mut b = a.clone();
        b.sentences[0].tags[1] = TagId(2);
        b.sentences[3].tags[0] = TagId(2);
        let r = intersect_taggings(&c, &[a, b]).unwrap();

        let none = apply_corrections(&r, &[], false).unwrap();
        assert_eq!(none.corpus, r.agreed);
        assert_eq!(none.unresolved, 2);
        let gap_free = apply_corrections(&r, &[], true).unwrap();
        assert_eq!(gap_free.corpus.sentences.len(), 2);

        let all = [
            Correction { sentence: 0, token: 1, tag: TagId(1) },
            Correction { sentence: 3, token: 0, tag: TagId(2) },
        ];
        let out = apply_corrections(&r, &all, true).unwrap();
        assert_eq!(out.corpus.labeled_count(), c.token_count());
        assert_eq!(out.applied, 2);

        let bad = [
            Correction { sentence: 0, token: 1, tag: TagId(0) },
            Correction { sentence: 1, token: 1, tag: TagId(1) },
        ];
        let out = apply_corrections(&r, &bad, false).unwrap();
        assert_eq!(out.rejected.len(), 2);
        assert!(out.corpus.sentences[0].tokens[1].masked);
    }

    #[test]
    fn disagreements_file_round_trip() {
        let c = forty();
        let a = Tagging::from_gold(&c).unwrap();
        let mut b = a.clone();
        b.sentences[1].tags[4] = TagId(2);
        let r = intersect_taggings(&c, &[a, b]).unwrap();
        let text = write_disagreements(&r);
        assert_eq!(text, "1\t4\tcasa\tNC VM\tNC\tVM\n");
        assert_eq!(parse_disagreements(&text, &r.agreed).unwrap(), r.disagreements);
        assert!(parse_disagreements("1\t3\tcasa\tNC VM\tNC\tVM\n", &r.agreed).is_err());
    }
}
