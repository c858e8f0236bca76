//! Accuracy, agreement and significance measures.

use std::fmt::Write as _;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::lexicon::LexicalModel;
use crate::tagging::{SentenceTagging, Tagging};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub overall: f64,
    pub ambiguous_only: f64,
    pub correct: usize,
    pub total: usize,
    pub ambiguous_correct: usize,
    pub ambiguous_total: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Per-token correctness of `tagging` against the gold tags of `gold`.
pub fn correctness(tagging: &Tagging, gold: &Corpus) -> Result<Vec<bool>> {
    tagging.check_aligned(gold)?;
    let mut out = Vec::with_capacity(gold.token_count());
    for (si, (tagged, sent)) in tagging.sentences.iter().zip(&gold.sentences).enumerate() {
        for (ti, (tag, tok)) in tagged.tags.iter().zip(&sent.tokens).enumerate() {
            let g = tok
                .label()
                .ok_or_else(|| Error::Alignment(format!("sentence {si}, token {ti}: no gold tag")))?;
            out.push(*tag == g);
        }
    }
    Ok(out)
}

pub fn evaluate(tagging: &Tagging, gold: &Corpus) -> Result<AccuracyReport> {
    let ok = correctness(tagging, gold)?;
    let mut r = AccuracyReport {
        overall: 0.0,
        ambiguous_only: 0.0,
        correct: 0,
        total: ok.len(),
        ambiguous_correct: 0,
        ambiguous_total: 0,
    };
    for (tok, ok) in gold.tokens().zip(&ok) {
        r.correct += *ok as usize;
        if tok.is_ambiguous() {
            r.ambiguous_total += 1;
            r.ambiguous_correct += *ok as usize;
        }
    }
    r.overall = ratio(r.correct, r.total);
    r.ambiguous_only = ratio(r.ambiguous_correct, r.ambiguous_total);
    Ok(r)
}

/// Most-frequent-tag baseline: context-free emission argmax.
pub fn mft_tag(lexicon: &LexicalModel, sentence: &Sentence) -> Result<SentenceTagging> {
    let mut tags = Vec::with_capacity(sentence.len());
    let mut scores = Vec::with_capacity(sentence.len());
    for tok in &sentence.tokens {
        let p = lexicon.emission_prob(tok)?;
        let b = crate::lexicon::argmax(&p);
        tags.push(tok.candidates[b]);
        scores.push(p[b].ln());
    }
    Ok(SentenceTagging::new(tags, scores))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementReport {
    pub coverage: f64,
    /// Absent when no token was agreed on.
    pub accuracy: Option<f64>,
    pub agreed: usize,
    pub agreed_correct: usize,
    pub total: usize,
}

pub fn agreement_report(taggings: &[Tagging], gold: &Corpus) -> Result<AgreementReport> {
    if taggings.len() < 2 {
        return Err(Error::invalid("agreement needs at least two taggings"));
    }
    for t in taggings {
        t.check_aligned(gold)?;
    }
    let mut r = AgreementReport {
        coverage: 0.0,
        accuracy: None,
        agreed: 0,
        agreed_correct: 0,
        total: 0,
    };
    for (si, sent) in gold.sentences.iter().enumerate() {
        for (ti, tok) in sent.tokens.iter().enumerate() {
            r.total += 1;
            let first = taggings[0].sentences[si].tags[ti];
            if taggings[1..].iter().all(|t| t.sentences[si].tags[ti] == first) {
                r.agreed += 1;
                let g = tok
                    .label()
                    .ok_or_else(|| Error::Alignment(format!("sentence {si}, token {ti}: no gold tag")))?;
                r.agreed_correct += (g == first) as usize;
            }
        }
    }
    r.coverage = ratio(r.agreed, r.total);
    if r.agreed > 0 {
        r.accuracy = Some(ratio(r.agreed_correct, r.agreed));
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McNemar {
    /// Tokens only the first tagger gets wrong.
    pub b: usize,
    /// Tokens only the second tagger gets wrong.
    pub c: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Continuity-corrected McNemar test on paired correctness vectors.
pub fn mcnemar_significance(correct_a: &[bool], correct_b: &[bool], alpha: f64) -> Result<McNemar> {
    if correct_a.len() != correct_b.len() {
        return Err(Error::Alignment(format!(
            "correctness vectors differ in length: {} vs {}",
            correct_a.len(),
            correct_b.len()
        )));
    }
    let mut b = 0;
    let mut c = 0;
    for (&x, &y) in correct_a.iter().zip(correct_b) {
        match (x, y) {
            (false, true) => b += 1,
            (true, false) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_from_counts(b, c, alpha))
}

pub fn mcnemar_from_counts(b: usize, c: usize, alpha: f64) -> McNemar {
    if b + c == 0 {
        return McNemar {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            significant: false,
        };
    }
    let d = (b.abs_diff(c) as f64 - 1.0).max(0.0);
    let statistic = d * d / (b + c) as f64;
    // upper tail of chi-square with one degree of freedom
    let p_value = erfc((statistic / 2.0).sqrt());
    McNemar {
        b,
        c,
        statistic,
        p_value,
        significant: p_value < alpha,
    }
}

/// Renders rows as a space-aligned table; the first column is left-aligned,
/// the rest right-aligned.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (k, cell) in r.iter().enumerate().take(cols) {
            width[k] = width[k].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let mut parts = Vec::with_capacity(cols);
        for (k, cell) in cells.enumerate() {
            if k == 0 {
                parts.push(format!("{cell:<w$}", w = width[k]));
            } else {
                parts.push(format!("{cell:>w$}", w = width[k]));
            }
        }
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &mut header.iter().copied());
    let rule: usize = width.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
    let _ = writeln!(out, "{}", "-".repeat(rule));
    for r in rows {
        line(&mut out, &mut r.iter().map(String::as_str));
    }
    out
}

/// Tab-separated rendering of the same rows.
pub fn format_tsv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join("\t"));
        out.push('\n');
    }
    out
}

pub fn percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_vertical, TagId, TagSet};
    use std::sync::Arc;

    fn ts() -> Arc<TagSet> {
        Arc::new(TagSet::new(&["DA", "NC", "VM"]).unwrap())
    }

    #[test]
    fn forty_ambiguous_four_errors() {
        let mut text = String::new();
        for i in 0..100 {
            if i < 40 {
                text.push_str("casa\tNC VM\tNC\n");
            } else {
                text.push_str("la\tDA\tDA\n");
            }
        }
        let c = parse_vertical(&text, &ts()).unwrap();
        let mut t = Tagging::from_gold(&c).unwrap();
        for k in 0..4 {
            t.sentences[0].tags[k] = TagId(2);
        }
        let r = evaluate(&t, &c).unwrap();
        assert_eq!(r.overall, 0.96);
        assert_eq!(r.ambiguous_only, 0.9);
    }

    #[test]
    fn mcnemar_examples() {
        let m = mcnemar_from_counts(15, 0, 0.05);
        assert!((m.statistic - 196.0 / 15.0).abs() < 1e-12);
        assert!(m.significant);
        assert!((m.p_value - 0.000301).abs() < 5e-6);
        let m = mcnemar_from_counts(5, 4, 0.05);
        assert_eq!(m.statistic, 0.0);
        assert_eq!(m.p_value, 1.0);
        let v = vec![true, false, true];
        let m = mcnemar_significance(&v, &v, 0.05).unwrap();
        assert_eq!(m.p_value, 1.0);
        assert!(!m.significant);
        assert!(mcnemar_significance(&v, &v[..2], 0.05).is_err());
    }

    #[test]
    fn agreement_absent_when_nothing_agreed() {
        let c = parse_vertical("casa\tNC VM\tNC\n", &ts()).unwrap();
        let a = Tagging::from_gold(&c).unwrap();
        let mut b = a.clone();
        b.sentences[0].tags[0] = TagId(2);
        let r = agreement_report(&[a, b], &c).unwrap();
        assert_eq!(r.coverage, 0.0);
        assert_eq!(r.accuracy, None);
    }

    #[test]
    fn table_alignment() {
        let t = format_table(&["tagger", "acc"], &[vec!["mft".into(), "91.00".into()], vec!["viterbi-2".into(), "9.5".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "tagger       acc");
        assert_eq!(lines[2], "mft        91.00");
        assert_eq!(lines[3], "viterbi-2    9.5");
    }
}
