//! The `cotag` binary end to end on small synthetic corpora.

mod common;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use common::{code, cotag, ok, s, synth};
use cotag::combine::error_of_combination;
use cotag::corpus::parse_vertical;
use cotag::TagSet;
use cotag_cli::checkpoint::{AnnotationLog, AnnotationRecord, Checkpoint};

const SPLIT: &str = "seed=2000,test=3000,raw=12000";

fn tagset(dir: &Path) -> Arc<TagSet> {
    Arc::new(TagSet::parse(&fs::read_to_string(dir.join("tagset.txt")).unwrap()).unwrap())
}

/// Copies a gold vertical file with the gold tag repeated as the assigned one.
fn perfect(gold: &Path, out: &Path) {
    let text: String = fs::read_to_string(gold)
        .unwrap()
        .lines()
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() == 3 {
                format!("{l}\t{}\n", cols[2])
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    fs::write(out, text).unwrap();
}

fn tsv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let d = synth(dir.path(), 1, SPLIT);
    let ts = d.join("tagset.txt");
    let model = dir.path().join("m");
    assert_eq!(
        code(&["--tagset", s(&ts), "train", "--train", s(&d.join("seed.vert")), "--tagger", "neural", "--out", s(&model)]),
        1
    );
    assert_eq!(code(&["train", "--train", s(&d.join("seed.vert")), "--tagger", "mft", "--out", s(&model)]), 1);

    let out = cotag(&["--tagset", s(&ts), "train", "--train", s(&dir.path().join("missing.vert")), "--tagger", "mft", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("missing.vert"));
    assert!(!model.exists());

    let broken = dir.path().join("broken.vert");
    fs::write(&broken, "casa\tNC\tXX\n").unwrap();
    let out = cotag(&["--tagset", s(&ts), "train", "--train", s(&broken), "--tagger", "mft", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("broken.vert"));

    let both = [
        "--tagset", s(&ts), "bootstrap", "--seed", "a", "--test", "b", "--raw", "c", "--out", "d", "--c0-weight", "2", "--target-error", "0.01",
    ];
    assert_eq!(code(&both), 1);
}

#[test]
fn train_tag_eval_intersect_correct() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth(dir.path(), 2, SPLIT);
    let ts = d.join("tagset.txt");
    let p = |name: &str| dir.path().join(name);
    for (tagger, name) in [("mft", "mft"), ("viterbi-2", "hmm")] {
        ok(&["--tagset", s(&ts), "train", "--train", s(&d.join("seed.vert")), "--train", &format!("{}@2", s(&d.join("raw.vert"))), "--tagger", tagger, "--out", s(&p(name))]);
        assert!(p(name).join("tagset.txt").exists());
        ok(&["tag", "--model", s(&p(name)), "--input", s(&d.join("test.vert")), "--out", s(&p(&format!("{name}.vert")))]);
    }
    let tagged = fs::read_to_string(p("hmm.vert")).unwrap();
    assert!(tagged.lines().filter(|l| !l.is_empty() && !l.starts_with('#')).all(|l| l.split('\t').count() == 4));

    perfect(&d.join("test.vert"), &p("perfect.vert"));
    let table = ok(&["--tagset", s(&ts), "eval", "--gold", s(&d.join("test.vert")), "--tagged", s(&p("perfect.vert")), "--out", s(&p("ev1"))]);
    let row = table.lines().find(|l| l.starts_with("perfect")).unwrap();
    assert_eq!(row.matches("100.00").count(), 2, "{row}");
    assert!(p("ev1/report.json").exists() && p("ev1/report.txt").exists());

    let table = ok(&[
        "--tagset", s(&ts), "eval", "--gold", s(&d.join("test.vert")), "--tagged", s(&p("mft.vert")), "--tagged", s(&p("hmm.vert")), "--out", s(&p("ev2")),
    ]);
    assert!(table.contains("agreement") && table.contains("union") && table.contains("mft / hmm"));
    let rows = tsv_rows(&p("ev2/report.tsv"));
    assert_eq!(rows[0], ["section", "subject", "metric", "value"]);
    let get = |section: &str, subject: &str, metric: &str| -> f64 {
        rows.iter().find(|r| r[0] == section && r[1] == subject && r[2] == metric).unwrap()[3].parse().unwrap()
    };
    let best = get("accuracy", "mft", "overall").max(get("accuracy", "hmm", "overall"));
    assert!(get("union", "all", "recall") >= best);
    let tpw = get("union", "all", "tags_per_word");
    assert!((1.0..=2.0).contains(&tpw));
    assert_eq!(get("union", "all", "fully_disambiguated"), get("agreement", "all", "coverage"));
    let pv = get("mcnemar", "mft/hmm", "p_value");
    assert!((0.0..=1.0).contains(&pv));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("ev2/report.json")).unwrap()).unwrap();
    assert_eq!(json["taggers"].as_array().unwrap().len(), 2);

    let msg = ok(&["--tagset", s(&ts), "intersect", "--tagged", s(&p("mft.vert")), "--tagged", s(&p("hmm.vert")), "--out", s(&p("cp"))]);
    assert!(msg.contains("to correct"));
    let cp = Checkpoint::load(&p("cp")).unwrap();
    let gaps = cp.agreement.disagreements.len();
    assert!(gaps > 0);
    assert_eq!(code(&["--tagset", s(&ts), "intersect", "--tagged", s(&p("mft.vert")), "--out", s(&p("cp1"))]), 1);
    assert!(!p("cp1").exists());

    // annotate half the gaps from gold, one of them with an impossible tag
    let gold = parse_vertical(&fs::read_to_string(d.join("test.vert")).unwrap(), &tagset(&d)).unwrap();
    let mut log = AnnotationLog::open(&cp.annotations_path()).unwrap();
    let half = gaps / 2;
    for (k, g) in cp.agreement.disagreements.iter().take(half).enumerate() {
        let tok = &gold.sentences[g.sentence].tokens[g.token];
        let tag = if k == 0 {
            // a known tag that is not a candidate here
            let bad = (0..cp.tagset.len()).map(|i| cotag::TagId(i as u16)).find(|t| !tok.candidates.contains(t)).unwrap();
            cp.tagset.code(bad).to_string()
        } else {
            cp.tagset.code(tok.gold.unwrap()).to_string()
        };
        log.append(&AnnotationRecord {
            position: k,
            sentence: g.sentence,
            token: g.token,
            tag,
            annotator: "t".into(),
            timestamp_ms: k as u64,
        })
        .unwrap();
    }
    drop(log);
    let msg = ok(&["corrections-apply", "--checkpoint", s(&p("cp")), "--out", s(&p("fixed.vert"))]);
    assert_eq!(msg.trim(), format!("{} corrections applied, 1 rejected, {} gaps left", half - 1, gaps - half + 1));
    let fixed = parse_vertical(&fs::read_to_string(p("fixed.vert")).unwrap(), &tagset(&d)).unwrap();
    assert_eq!(fixed.token_count(), gold.token_count());
    assert_eq!(fixed.tokens().filter(|t| t.masked).count(), gaps - half + 1);
    ok(&["corrections-apply", "--checkpoint", s(&p("cp")), "--out", s(&p("dropped.vert")), "--drop-gapped"]);
    let dropped = parse_vertical(&fs::read_to_string(p("dropped.vert")).unwrap(), &tagset(&d)).unwrap();
    assert!(dropped.tokens().all(|t| !t.masked));
    assert!(dropped.token_count() < gold.token_count());
}

#[test]
fn bootstrap_baseline_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth(dir.path(), 3, SPLIT);
    let cfg = dir.path().join("cotag.toml");
    fs::write(
        &cfg,
        format!("tagset = \"{}\"\n[bootstrap]\ntaggers = [\"mft\", \"viterbi-2\"]\nfresh_size = 4000\n", s(&d.join("tagset.txt"))),
    )
    .unwrap();
    let out = dir.path().join("b0");
    let run = std::process::Command::new(env!("CARGO_BIN_EXE_cotag"))
        .env("COTAG_CONFIG", &cfg)
        .args(["bootstrap", "--seed", s(&d.join("seed.vert")), "--test", s(&d.join("test.vert")), "--raw", s(&d.join("raw.vert"))])
        .args(["--out", s(&out), "--max-iterations", "0"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let rows = tsv_rows(&out.join("report.tsv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(&"mft_all".to_string()) && rows[0].contains(&"viterbi-2_amb".to_string()));
    assert!(out.join("iter_0/models/0-mft/tagset.txt").exists());
    assert!(out.join("iter_0/models/1-viterbi-2").is_dir());
    assert!(out.join("iter_0/record.json").exists());
    assert!(!out.join("iter_1").exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[bootstrap]\ntaggers = [\"tree\", \"mft\"]\n[tree]\nwindow = [-1, 0]\n").unwrap();
    let failed = dir.path().join("failed");
    let c = code(&[
        "--config", s(&bad), "--tagset", s(&d.join("tagset.txt")), "bootstrap", "--seed", s(&d.join("seed.vert")), "--test",
        s(&d.join("test.vert")), "--raw", s(&d.join("raw.vert")), "--out", s(&failed),
    ]);
    assert_eq!(c, 1);
    assert!(!failed.exists());
}

#[test]
fn weight_and_size_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth(dir.path(), 4, "seed=2000,test=3000,fresh=5000");
    let ts = d.join("tagset.txt");
    let out = dir.path().join("sw");
    let weights = "0.5,1,2,3,5,8,13";
    ok(&[
        "--tagset", s(&ts), "sweep-weight", "--seed", s(&d.join("seed.vert")), "--test", s(&d.join("test.vert")), "--fresh", s(&d.join("fresh.vert")),
        "--out", s(&out), "--weights", weights, "--tagger", "mft", "--tagger", "viterbi-2",
    ]);
    let rows = tsv_rows(&out.join("report.tsv"));
    assert_eq!(rows.len(), 8);
    let col = |name: &str| rows[0].iter().position(|h| h == name).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let agreed_error = json["agreed_error"].as_f64().unwrap();
    let seed_tokens = fs::read_to_string(d.join("seed.vert")).unwrap().lines().filter(|l| !l.is_empty() && !l.starts_with('#')).count();
    let mut prev = f64::INFINITY;
    for (r, w) in rows[1..].iter().zip(weights.split(',')) {
        let w: f64 = w.parse().unwrap();
        assert_eq!(r[col("w0")].parse::<f64>().unwrap(), w);
        for h in ["mft_all", "mft_amb", "viterbi-2_all", "viterbi-2_amb", "best"] {
            let a: f64 = r[col(h)].parse().unwrap();
            assert!((0.0..=1.0).contains(&a));
        }
        let agreed: f64 = r[col("agreed")].parse().unwrap();
        let err: f64 = r[col("error")].parse().unwrap();
        let want = error_of_combination(seed_tokens as f64, 0.0, agreed, agreed_error, w).unwrap();
        assert!((err - want).abs() < 1e-12);
        // independently: agreed tokens carry the error, seed tokens count w times
        assert!((err - agreed * agreed_error / (w * seed_tokens as f64 + agreed)).abs() < 1e-12);
        assert!(err <= prev);
        prev = err;
    }

    let out = dir.path().join("ss");
    ok(&[
        "--tagset", s(&ts), "sweep-size", "--seed", s(&d.join("seed.vert")), "--test", s(&d.join("test.vert")), "--raw", s(&d.join("fresh.vert")),
        "--out", s(&out), "--sizes", "1000,3000", "--tagger", "mft", "--tagger", "viterbi-2",
    ]);
    let rows = tsv_rows(&out.join("report.tsv"));
    assert_eq!(rows.len(), 4);
    let fresh: Vec<usize> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(fresh[0], 0);
    assert!(fresh[1] >= 1000 && fresh[2] >= 3000 && fresh[2] > fresh[1]);
}

#[test]
fn hand_correction_suspends_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth(dir.path(), 5, SPLIT);
    let ts = d.join("tagset.txt");
    let out = dir.path().join("hc");
    let (seed, test, raw) = (d.join("seed.vert"), d.join("test.vert"), d.join("raw.vert"));
    let args = [
        "--tagset", s(&ts), "bootstrap", "--seed", s(&seed), "--test", s(&test), "--raw", s(&raw),
        "--out", s(&out), "--max-iterations", "1", "--fresh-size", "4000", "--hand-correct", "--tagger", "mft", "--tagger", "viterbi-2",
    ];
    let msg = ok(&args);
    assert!(msg.contains("awaiting corrections"));
    let it = out.join("iter_1");
    let cp = Checkpoint::load(&it).unwrap();
    assert!(!cp.agreement.disagreements.is_empty());
    assert!(!it.join("corrected.vert").exists());
    let rows = tsv_rows(&out.join("report.tsv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].last().unwrap(), "awaiting corrections");

    let raw = parse_vertical(&fs::read_to_string(&raw).unwrap(), &tagset(&d)).unwrap();
    let mut log = AnnotationLog::open(&cp.annotations_path()).unwrap();
    for (k, g) in cp.agreement.disagreements.iter().enumerate() {
        let tok = &raw.sentences[g.sentence].tokens[g.token];
        assert_eq!(tok.form, cp.agreement.agreed.sentences[g.sentence].tokens[g.token].form);
        log.append(&AnnotationRecord {
            position: k,
            sentence: g.sentence,
            token: g.token,
            tag: cp.tagset.code(tok.gold.unwrap()).to_string(),
            annotator: "t".into(),
            timestamp_ms: 0,
        })
        .unwrap();
    }
    drop(log);
    ok(&args);
    let corrected = parse_vertical(&fs::read_to_string(it.join("corrected.vert")).unwrap(), &tagset(&d)).unwrap();
    assert_eq!(corrected.token_count(), cp.agreement.total_tokens);
    assert!(corrected.tokens().all(|t| !t.masked && t.gold.is_some()));
    let rows = tsv_rows(&out.join("report.tsv"));
    assert_eq!(rows.len(), 3);
    let agreed = rows[0].iter().position(|h| h == "agreed").unwrap();
    let fresh = rows[0].iter().position(|h| h == "fresh").unwrap();
    assert_eq!(rows[2][agreed], rows[2][fresh]);
}
