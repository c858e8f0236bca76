//! Subcommand definitions and their implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use cotag::bootstrap::{bootstrap_run, BootstrapHook, BootstrapReport, CorrectionDecision, IterationRecord};
use cotag::combine::{apply_corrections, intersect_taggings, union_tagging, AgreementResult, UnionMetrics};
use cotag::corpus::{parse_vertical_with, write_vertical, CandidateDictionary};
use cotag::eval::{agreement_report, correctness, evaluate, format_table, format_tsv, mcnemar_significance, percent, AccuracyReport, AgreementReport, McNemar};
use cotag::sweep::{sweep_sizes, sweep_weights, Sweep, WeightGrid};
use cotag::synth::{generate, partition_tokens};
use cotag::tagger::{TaggerSpec, TrainedTagger};
use cotag::tagging::Tagging;
use cotag::{Corpus, TagSet, WeightedCorpus};
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::checkpoint::{write_checkpoint, Checkpoint, ANNOTATIONS, TAGSET};
use crate::config::{Config, CONFIG_ENV};
use crate::error::{CliError, CliResult};
use crate::service;

#[derive(Debug, Parser)]
#[command(name = "cotag", version, about = "Train POS taggers, bootstrap corpora from their agreement and hand-correct the rest")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Tagset file, one code per line; overrides the configuration.
    #[arg(long, global = true)]
    pub tagset: Option<PathBuf>,
    /// Candidate dictionary (`form<TAB>T1|T2`) for input lacking a candidate column.
    #[arg(long, global = true)]
    pub dictionary: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one tagger and save its model directory.
    Train(TrainArgs),
    /// Tag a corpus with a saved model.
    Tag(TagArgs),
    /// Score tagged files against gold; two or more also get agreement, union and McNemar figures.
    Eval(EvalArgs),
    /// Intersect tagged copies of one corpus into a correction checkpoint.
    Intersect(IntersectArgs),
    /// Run the agreement retraining loop.
    Bootstrap(BootstrapArgs),
    /// Accuracy after one iteration for each fresh-corpus size.
    SweepSize(SweepSizeArgs),
    /// Accuracy after one iteration for each seed weight.
    SweepWeight(SweepWeightArgs),
    /// Serve the annotation API for a checkpoint.
    AnnotateServe(ServeArgs),
    /// Fill a checkpoint's gaps with its logged annotations.
    CorrectionsApply(CorrectionsArgs),
    /// Write a synthetic gold corpus, its tagset and dictionary.
    SynthGen(SynthArgs),
}

/// A training file with an optional weight suffix, `FILE@WEIGHT`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainInput {
    pub path: PathBuf,
    pub weight: f64,
}

impl FromStr for TrainInput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((path, w)) = s.rsplit_once('@') {
            if let Ok(weight) = w.parse::<f64>() {
                if !(weight > 0.0 && weight.is_finite()) {
                    return Err(format!("weight must be positive, got {w}"));
                }
                return Ok(TrainInput {
                    path: path.into(),
                    weight,
                });
            }
        }
        Ok(TrainInput {
            path: s.into(),
            weight: 1.0,
        })
    }
}

fn parse_spec(s: &str) -> Result<TaggerSpec, String> {
    s.parse().map_err(|e: cotag::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Gold corpus, repeatable; `FILE@2` counts every token twice.
    #[arg(long, required = true)]
    pub train: Vec<TrainInput>,
    /// mft, viterbi-2, viterbi-3, tree or relax-<kinds> (B, T, C).
    #[arg(long, value_parser = parse_spec)]
    pub tagger: TaggerSpec,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Vertical output with the assigned tag in the fourth column.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Output of `tag` on the gold text, repeatable.
    #[arg(long, required = true)]
    pub tagged: Vec<PathBuf>,
    /// Directory for report.txt, report.tsv and report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct IntersectArgs {
    /// Output of `tag` on the same text, at least two.
    #[arg(long, required = true, num_args = 1..)]
    pub tagged: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LoopOverrides {
    /// Replaces `bootstrap.taggers`, repeatable.
    #[arg(long = "tagger", value_parser = parse_spec)]
    pub taggers: Vec<TaggerSpec>,
    #[arg(long)]
    pub c0_weight: Option<f64>,
    #[arg(long, conflicts_with = "c0_weight")]
    pub target_error: Option<f64>,
}

impl LoopOverrides {
    fn apply(&self, cfg: &mut Config) {
        if !self.taggers.is_empty() {
            cfg.bootstrap.taggers = self.taggers.clone();
        }
        if let Some(w) = self.c0_weight {
            cfg.bootstrap.c0_weight = Some(w);
            cfg.bootstrap.target_error = None;
        }
        if let Some(e) = self.target_error {
            cfg.bootstrap.target_error = Some(e);
            cfg.bootstrap.c0_weight = None;
        }
    }
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Hand-tagged seed corpus.
    #[arg(long)]
    pub seed: PathBuf,
    /// Gold test corpus.
    #[arg(long)]
    pub test: PathBuf,
    /// Untagged text the fresh corpora are drawn from, in order.
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub fresh_size: Option<usize>,
    /// Stop after tagging fresh text until `iter_K/annotations.jsonl` exists.
    #[arg(long)]
    pub hand_correct: bool,
    #[command(flatten)]
    pub overrides: LoopOverrides,
}

#[derive(Debug, Args)]
pub struct SweepSizeArgs {
    #[arg(long)]
    pub seed: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated fresh sizes; defaults to `sweep.sizes`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[command(flatten)]
    pub overrides: LoopOverrides,
}

#[derive(Debug, Args)]
pub struct SweepWeightArgs {
    #[arg(long)]
    pub seed: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// The fresh text, tagged once.
    #[arg(long)]
    pub fresh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated seed weights.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    /// Comma-separated target errors of the retraining corpus; defaults to `sweep.target_errors`.
    #[arg(long, value_delimiter = ',', conflicts_with = "weights")]
    pub target_errors: Vec<f64>,
    /// Replaces `bootstrap.taggers`, repeatable.
    #[arg(long = "tagger", value_parser = parse_spec)]
    pub taggers: Vec<TaggerSpec>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to `service.bind`.
    #[arg(long)]
    pub bind: Option<String>,
    /// Directory of the built annotation UI, served for unknown paths.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    /// Context tokens on each side; defaults to `service.context`.
    #[arg(long)]
    pub context: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CorrectionsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corrected vertical corpus.
    #[arg(long)]
    pub out: PathBuf,
    /// Leave out sentences that still have unannotated gaps.
    #[arg(long)]
    pub drop_gapped: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tokens: Option<usize>,
    /// Consecutive parts to cut, each written as NAME.vert, e.g. `seed=5000,test=10000,raw=50000`.
    #[arg(long, value_delimiter = ',', value_parser = parse_part)]
    pub split: Vec<(String, usize)>,
}

fn parse_part(s: &str) -> Result<(String, usize), String> {
    let (name, size) = s.split_once('=').ok_or_else(|| format!("expected NAME=TOKENS, got {s:?}"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(format!("bad part name {name:?}"));
    }
    let size = size.trim().parse().map_err(|_| format!("bad token count in {s:?}"))?;
    Ok((name.to_string(), size))
}

struct Env {
    cfg: Config,
    tagset_path: Option<PathBuf>,
    dictionary_path: Option<PathBuf>,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

fn in_file(path: &Path) -> impl Fn(cotag::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn load_tagset(path: &Path) -> CliResult<Arc<TagSet>> {
    Ok(Arc::new(TagSet::parse(&read(path)?).map_err(in_file(path))?))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

impl Env {
    fn tagset(&self) -> CliResult<Arc<TagSet>> {
        let path = self
            .tagset_path
            .as_ref()
            .ok_or_else(|| CliError::usage("no tagset: pass --tagset or set `tagset` in the configuration"))?;
        load_tagset(path)
    }

    fn dictionary(&self, tagset: &TagSet) -> CliResult<Option<CandidateDictionary>> {
        match &self.dictionary_path {
            None => Ok(None),
            Some(p) => Ok(Some(CandidateDictionary::parse(&read(p)?, tagset).map_err(in_file(p))?)),
        }
    }

    fn corpus(&self, path: &Path, tagset: &Arc<TagSet>, dict: Option<&CandidateDictionary>) -> CliResult<Corpus> {
        parse_vertical_with(&read(path)?, tagset, dict).map_err(in_file(path))
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let env = Env {
        tagset_path: cli.tagset.clone().or_else(|| cfg.tagset.clone()),
        dictionary_path: cli.dictionary.clone().or_else(|| cfg.dictionary.clone()),
        cfg,
    };
    match cli.command {
        Command::Train(a) => train(env, a),
        Command::Tag(a) => tag(env, a),
        Command::Eval(a) => eval(env, a),
        Command::Intersect(a) => intersect(env, a),
        Command::Bootstrap(a) => bootstrap(env, a),
        Command::SweepSize(a) => sweep_size(env, a),
        Command::SweepWeight(a) => sweep_weight(env, a),
        Command::AnnotateServe(a) => annotate_serve(env, a),
        Command::CorrectionsApply(a) => corrections_apply(a),
        Command::SynthGen(a) => synth_gen(env, a),
    }
}

fn save_model(artifacts: &mut Artifacts, dir: &Path, tagger: &TrainedTagger) -> CliResult<()> {
    artifacts.fill_dir(dir, |d| tagger.save(d))?;
    artifacts.write(&dir.join(TAGSET), tagger.tagset().to_text())
}

fn train(env: Env, a: TrainArgs) -> CliResult<()> {
    let tagset = env.tagset()?;
    let dict = env.dictionary(&tagset)?;
    let mut data = WeightedCorpus::new();
    for input in &a.train {
        let corpus = env.corpus(&input.path, &tagset, dict.as_ref())?;
        data.push(corpus, input.weight, 0.0)?;
    }
    let tagger = TrainedTagger::train(&a.tagger, &env.cfg.params(), &data)?;
    let mut artifacts = Artifacts::new();
    save_model(&mut artifacts, &a.out, &tagger)?;
    artifacts.commit();
    log::info!("trained {} on {:.0} virtual tokens", a.tagger, data.virtual_size());
    Ok(())
}

fn tag(env: Env, a: TagArgs) -> CliResult<()> {
    let tagset = load_tagset(&a.model.join(TAGSET))?;
    let tagger = TrainedTagger::load(&a.model, tagset.clone()).map_err(in_file(&a.model))?;
    let dict = env.dictionary(&tagset)?;
    let corpus = env.corpus(&a.input, &tagset, dict.as_ref())?;
    let tagged = tagger.tag(&corpus)?.apply(&corpus)?;
    let mut artifacts = Artifacts::new();
    artifacts.write(&a.out, write_vertical(&tagged))?;
    artifacts.commit();
    Ok(())
}

#[derive(Serialize)]
struct NamedAccuracy {
    name: String,
    accuracy: AccuracyReport,
}

#[derive(Serialize)]
struct PairTest {
    first: String,
    second: String,
    test: McNemar,
}

#[derive(Serialize)]
struct EvalReport {
    taggers: Vec<NamedAccuracy>,
    agreement: Option<AgreementReport>,
    union: Option<UnionMetrics>,
    mcnemar: Vec<PairTest>,
}

impl EvalReport {
    fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .taggers
            .iter()
            .map(|t| {
                vec![
                    t.name.clone(),
                    percent(t.accuracy.overall),
                    percent(t.accuracy.ambiguous_only),
                    t.accuracy.total.to_string(),
                    t.accuracy.ambiguous_total.to_string(),
                ]
            })
            .collect();
        let mut out = format_table(&["tagger", "overall", "ambiguous", "tokens", "ambiguous_tokens"], &rows);
        if let (Some(ag), Some(un)) = (&self.agreement, &self.union) {
            out.push('\n');
            let acc = ag.accuracy.map(percent).unwrap_or_else(|| "-".into());
            let recall = un.recall.map(percent).unwrap_or_else(|| "-".into());
            out.push_str(&format_table(
                &["combination", "coverage", "accuracy", "recall", "tags_per_word", "disambiguated"],
                &[
                    vec!["agreement".into(), percent(ag.coverage), acc, "-".into(), "-".into(), "-".into()],
                    vec![
                        "union".into(),
                        "-".into(),
                        "-".into(),
                        recall,
                        format!("{:.4}", un.tags_per_word),
                        percent(un.fully_disambiguated),
                    ],
                ],
            ));
        }
        if !self.mcnemar.is_empty() {
            out.push('\n');
            let rows: Vec<Vec<String>> = self
                .mcnemar
                .iter()
                .map(|p| {
                    vec![
                        format!("{} / {}", p.first, p.second),
                        p.test.b.to_string(),
                        p.test.c.to_string(),
                        format!("{:.4}", p.test.statistic),
                        format!("{:.3e}", p.test.p_value),
                        if p.test.significant { "yes" } else { "no" }.into(),
                    ]
                })
                .collect();
            out.push_str(&format_table(&["pair", "b", "c", "statistic", "p_value", "significant"], &rows));
        }
        out
    }

    /// Long format: one `section subject metric value` line per figure.
    fn to_tsv(&self) -> String {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut put = |section: &str, subject: &str, metric: &str, value: String| {
            rows.push(vec![section.into(), subject.into(), metric.into(), value]);
        };
        for t in &self.taggers {
            put("accuracy", &t.name, "overall", t.accuracy.overall.to_string());
            put("accuracy", &t.name, "ambiguous", t.accuracy.ambiguous_only.to_string());
            put("accuracy", &t.name, "tokens", t.accuracy.total.to_string());
            put("accuracy", &t.name, "ambiguous_tokens", t.accuracy.ambiguous_total.to_string());
        }
        if let Some(ag) = &self.agreement {
            put("agreement", "all", "coverage", ag.coverage.to_string());
            if let Some(acc) = ag.accuracy {
                put("agreement", "all", "accuracy", acc.to_string());
            }
        }
        if let Some(un) = &self.union {
            if let Some(r) = un.recall {
                put("union", "all", "recall", r.to_string());
            }
            put("union", "all", "tags_per_word", un.tags_per_word.to_string());
            put("union", "all", "fully_disambiguated", un.fully_disambiguated.to_string());
        }
        for p in &self.mcnemar {
            let pair = format!("{}/{}", p.first, p.second);
            put("mcnemar", &pair, "b", p.test.b.to_string());
            put("mcnemar", &pair, "c", p.test.c.to_string());
            put("mcnemar", &pair, "statistic", p.test.statistic.to_string());
            put("mcnemar", &pair, "p_value", p.test.p_value.to_string());
        }
        format_tsv(&["section", "subject", "metric", "value"], &rows)
    }
}

fn display_names(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let unique = stems.iter().all(|s| !s.is_empty() && stems.iter().filter(|t| *t == s).count() == 1);
    if unique {
        stems
    } else {
        paths.iter().map(|p| p.display().to_string()).collect()
    }
}

/// Reads tagged files and checks they carry the same text as `reference`.
fn read_taggings(env: &Env, paths: &[PathBuf], tagset: &Arc<TagSet>, reference: Option<&Corpus>) -> CliResult<(Corpus, Vec<Tagging>)> {
    let dict = env.dictionary(tagset)?;
    let mut base: Option<Corpus> = reference.cloned();
    let mut taggings = Vec::with_capacity(paths.len());
    for p in paths {
        let corpus = env.corpus(p, tagset, dict.as_ref())?;
        let tagging = Tagging::from_assigned(&corpus).map_err(in_file(p))?;
        match &base {
            Some(b) => {
                tagging.check_aligned(b).map_err(in_file(p))?;
                let same_forms = b.tokens().zip(corpus.tokens()).all(|(x, y)| x.form == y.form);
                if !same_forms {
                    return Err(CliError::Data(format!("{}: token forms differ from the reference text", p.display())));
                }
            }
            None => base = Some(corpus),
        }
        taggings.push(tagging);
    }
    let base = base.ok_or_else(|| CliError::usage("no tagged files given"))?;
    Ok((base, taggings))
}

fn eval(env: Env, a: EvalArgs) -> CliResult<()> {
    let tagset = env.tagset()?;
    let dict = env.dictionary(&tagset)?;
    let gold = env.corpus(&a.gold, &tagset, dict.as_ref())?;
    let (_, taggings) = read_taggings(&env, &a.tagged, &tagset, Some(&gold))?;
    let names = display_names(&a.tagged);
    let mut taggers = Vec::with_capacity(taggings.len());
    let mut correct = Vec::with_capacity(taggings.len());
    for (name, t) in names.iter().zip(&taggings) {
        taggers.push(NamedAccuracy {
            name: name.clone(),
            accuracy: evaluate(t, &gold)?,
        });
        correct.push(correctness(t, &gold)?);
    }
    let mut report = EvalReport {
        taggers,
        agreement: None,
        union: None,
        mcnemar: Vec::new(),
    };
    if taggings.len() >= 2 {
        report.agreement = Some(agreement_report(&taggings, &gold)?);
        report.union = Some(union_tagging(&gold, &taggings)?.metrics);
        for i in 0..taggings.len() {
            for j in i + 1..taggings.len() {
                report.mcnemar.push(PairTest {
                    first: names[i].clone(),
                    second: names[j].clone(),
                    test: mcnemar_significance(&correct[i], &correct[j], a.alpha)?,
                });
            }
        }
    }
    let table = report.to_table();
    let mut artifacts = Artifacts::new();
    artifacts.write(&a.out.join("report.txt"), &table)?;
    artifacts.write(&a.out.join("report.tsv"), report.to_tsv())?;
    artifacts.write(&a.out.join("report.json"), to_json(&report)?)?;
    artifacts.commit();
    print!("{table}");
    Ok(())
}

fn intersect(env: Env, a: IntersectArgs) -> CliResult<()> {
    if a.tagged.len() < 2 {
        return Err(CliError::usage("intersect needs at least two tagged files"));
    }
    let tagset = env.tagset()?;
    let (corpus, taggings) = read_taggings(&env, &a.tagged, &tagset, None)?;
    let agreement = intersect_taggings(&corpus, &taggings)?;
    let mut artifacts = Artifacts::new();
    artifacts.dir(&a.out)?;
    write_checkpoint(&mut artifacts, &a.out, &agreement)?;
    artifacts.commit();
    println!(
        "{} of {} tokens agreed ({}%), {} to correct",
        agreement.agreed_tokens,
        agreement.total_tokens,
        percent(agreement.coverage),
        agreement.disagreements.len()
    );
    Ok(())
}

/// Writes per-iteration artifacts under the output directory and answers
/// hand-correction requests from logged annotations.
struct DirHook<'a> {
    out: PathBuf,
    artifacts: &'a mut Artifacts,
    failure: Option<CliError>,
}

impl DirHook<'_> {
    fn iter_dir(&self, i: usize) -> PathBuf {
        self.out.join(format!("iter_{i}"))
    }

    fn guard<T>(&mut self, r: CliResult<T>) -> cotag::Result<T> {
        r.map_err(|e| {
            let msg = e.to_string();
            self.failure = Some(e);
            cotag::Error::Io(std::io::Error::other(msg))
        })
    }

    fn write_models(&mut self, dir: &Path, taggers: &[TrainedTagger]) -> CliResult<()> {
        for (k, t) in taggers.iter().enumerate() {
            save_model(self.artifacts, &dir.join("models").join(format!("{k}-{}", t.spec())), t)?;
        }
        Ok(())
    }

    fn corrections(&mut self, i: usize, agreement: &AgreementResult) -> CliResult<CorrectionDecision> {
        let dir = self.iter_dir(i);
        if !dir.join(ANNOTATIONS).exists() {
            return Ok(CorrectionDecision::Suspend);
        }
        let checkpoint = Checkpoint::load(&dir)?;
        if checkpoint.agreement.disagreements != agreement.disagreements {
            return Err(CliError::Data(format!(
                "{}: checkpoint does not match this run's disagreements",
                dir.display()
            )));
        }
        let fixes = checkpoint.corrections()?;
        let outcome = apply_corrections(agreement, &fixes, false)?;
        self.artifacts.write(&dir.join("corrected.vert"), write_vertical(&outcome.corpus))?;
        log::info!("iteration {i}: {} corrections applied, {} gaps left", outcome.applied, outcome.unresolved);
        Ok(CorrectionDecision::Apply(fixes))
    }
}

impl BootstrapHook for DirHook<'_> {
    fn correct(&mut self, iteration: usize, agreement: &AgreementResult) -> cotag::Result<CorrectionDecision> {
        let r = self.corrections(iteration, agreement);
        self.guard(r)
    }

    fn iteration_done(&mut self, record: &IterationRecord, taggers: &[TrainedTagger], agreement: Option<&AgreementResult>) -> cotag::Result<()> {
        let dir = self.iter_dir(record.iteration);
        let mut r = self.write_models(&dir, taggers);
        if r.is_ok() {
            r = to_json(record).and_then(|j| self.artifacts.write(&dir.join("record.json"), j));
        }
        if let (Ok(()), Some(ag)) = (&r, agreement) {
            r = write_checkpoint(self.artifacts, &dir, ag);
        }
        self.guard(r)
    }

    fn suspended(&mut self, iteration: usize, _taggers: &[TrainedTagger], agreement: &AgreementResult) -> cotag::Result<()> {
        let dir = self.iter_dir(iteration);
        let r = write_checkpoint(self.artifacts, &dir, agreement);
        if r.is_ok() {
            println!("awaiting corrections: annotate {} and re-run", dir.display());
        }
        self.guard(r)
    }
}

fn write_reports<T: Serialize>(artifacts: &mut Artifacts, out: &Path, table: &str, tsv: &str, json: &T) -> CliResult<()> {
    artifacts.write(&out.join("report.txt"), table)?;
    artifacts.write(&out.join("report.tsv"), tsv)?;
    artifacts.write(&out.join("report.json"), to_json(json)?)
}

fn bootstrap(mut env: Env, a: BootstrapArgs) -> CliResult<()> {
    a.overrides.apply(&mut env.cfg);
    let b = &mut env.cfg.bootstrap;
    if let Some(n) = a.max_iterations {
        b.max_iterations = n;
    }
    if let Some(n) = a.fresh_size {
        b.fresh_size = n;
    }
    b.hand_correct |= a.hand_correct;
    let config = env.cfg.bootstrap_config()?;
    let tagset = env.tagset()?;
    let dict = env.dictionary(&tagset)?;
    let c0 = env.corpus(&a.seed, &tagset, dict.as_ref())?;
    let test = env.corpus(&a.test, &tagset, dict.as_ref())?;
    let raw = env.corpus(&a.raw, &tagset, dict.as_ref())?;

    let mut artifacts = Artifacts::new();
    artifacts.dir(&a.out)?;
    let mut hook = DirHook {
        out: a.out.clone(),
        artifacts: &mut artifacts,
        failure: None,
    };
    let result = bootstrap_run(&config, &c0, &test, &mut raw.sentences.into_iter(), &mut hook);
    let report: BootstrapReport = match (result, hook.failure.take()) {
        (_, Some(e)) => return Err(e),
        (r, None) => r?,
    };
    let table = report.to_table();
    write_reports(&mut artifacts, &a.out, &table, &report.to_tsv(), &report)?;
    artifacts.commit();
    print!("{table}");
    Ok(())
}

fn sweep_inputs(env: &Env, seed: &Path, test: &Path, other: &Path) -> CliResult<(Corpus, Corpus, Corpus)> {
    let tagset = env.tagset()?;
    let dict = env.dictionary(&tagset)?;
    Ok((
        env.corpus(seed, &tagset, dict.as_ref())?,
        env.corpus(test, &tagset, dict.as_ref())?,
        env.corpus(other, &tagset, dict.as_ref())?,
    ))
}

fn finish_sweep(out: &Path, sweep: &Sweep) -> CliResult<()> {
    let table = sweep.to_table();
    let mut artifacts = Artifacts::new();
    write_reports(&mut artifacts, out, &table, &sweep.to_tsv(), sweep)?;
    artifacts.commit();
    print!("{table}");
    Ok(())
}

fn sweep_size(mut env: Env, a: SweepSizeArgs) -> CliResult<()> {
    a.overrides.apply(&mut env.cfg);
    let config = env.cfg.bootstrap_config()?;
    let sizes = if a.sizes.is_empty() { env.cfg.sweep.sizes.clone() } else { a.sizes };
    let (c0, test, raw) = sweep_inputs(&env, &a.seed, &a.test, &a.raw)?;
    let sweep = sweep_sizes(&config, &c0, &test, &raw, &sizes)?;
    finish_sweep(&a.out, &sweep)
}

fn sweep_weight(mut env: Env, a: SweepWeightArgs) -> CliResult<()> {
    if !a.taggers.is_empty() {
        env.cfg.bootstrap.taggers = a.taggers.clone();
    }
    let config = env.cfg.bootstrap_config()?;
    let grid = if !a.weights.is_empty() {
        WeightGrid::Weights(a.weights)
    } else if !a.target_errors.is_empty() {
        WeightGrid::TargetErrors(a.target_errors)
    } else if let Some(w) = &env.cfg.sweep.weights {
        WeightGrid::Weights(w.clone())
    } else {
        WeightGrid::TargetErrors(env.cfg.sweep.target_errors.clone())
    };
    let (c0, test, fresh) = sweep_inputs(&env, &a.seed, &a.test, &a.fresh)?;
    let sweep = sweep_weights(&config, &c0, &test, &fresh, &grid)?;
    finish_sweep(&a.out, &sweep)
}

fn annotate_serve(env: Env, a: ServeArgs) -> CliResult<()> {
    let svc = &env.cfg.service;
    let bind = a.bind.unwrap_or_else(|| svc.bind.clone());
    let context = a.context.unwrap_or(svc.context);
    let static_dir = a.static_dir.or_else(|| svc.static_dir.clone());
    let session = service::Session::open(&a.checkpoint, context)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(|e| CliError::usage(format!("cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?;
        println!("listening on http://{addr}");
        use std::io::Write as _;
        let _ = std::io::stdout().flush();
        service::serve(listener, service::router(session, static_dir))
            .await
            .map_err(|e| CliError::Internal(format!("server: {e}")))
    })
}

fn corrections_apply(a: CorrectionsArgs) -> CliResult<()> {
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let fixes = checkpoint.corrections()?;
    let outcome = apply_corrections(&checkpoint.agreement, &fixes, a.drop_gapped)?;
    for r in &outcome.rejected {
        log::warn!("annotation at {}:{} rejected: {}", r.sentence, r.token, r.reason);
    }
    let mut artifacts = Artifacts::new();
    artifacts.write(&a.out, write_vertical(&outcome.corpus))?;
    artifacts.commit();
    println!(
        "{} corrections applied, {} rejected, {} gaps left",
        outcome.applied,
        outcome.rejected.len(),
        outcome.unresolved
    );
    Ok(())
}

fn synth_gen(env: Env, a: SynthArgs) -> CliResult<()> {
    let mut cfg = env.cfg.synth.clone();
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.tokens {
        cfg.tokens = n;
    }
    let out = generate(&cfg)?;
    let sizes: Vec<usize> = a.split.iter().map(|p| p.1).collect();
    let parts = partition_tokens(&out.corpus, &sizes)?;
    let mut artifacts = Artifacts::new();
    artifacts.dir(&a.out)?;
    artifacts.write(&a.out.join(TAGSET), out.tagset.to_text())?;
    artifacts.write(&a.out.join("dictionary.tsv"), out.dictionary.to_text(&out.tagset))?;
    artifacts.write(&a.out.join("corpus.vert"), write_vertical(&out.corpus))?;
    for ((name, _), part) in a.split.iter().zip(&parts) {
        artifacts.write(&a.out.join(format!("{name}.vert")), write_vertical(part))?;
    }
    artifacts.commit();
    Ok(())
}
