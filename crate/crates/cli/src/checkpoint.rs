//! A correction checkpoint: a directory holding the agreement corpus with
//! masked gaps, the disagreement list, the tagset and the annotation log.

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cotag::combine::{parse_disagreements, write_disagreements, AgreementResult, Correction};
use cotag::corpus::{parse_vertical, write_vertical};
use cotag::TagSet;
use serde::{Deserialize, Serialize};

use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};

pub const AGREED: &str = "agreed.vert";
pub const DISAGREEMENTS: &str = "disagreements.tsv";
pub const TAGSET: &str = "tagset.txt";
pub const ANNOTATIONS: &str = "annotations.jsonl";

/// One line of the annotation log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub position: usize,
    pub sentence: usize,
    pub token: usize,
    pub tag: String,
    pub annotator: String,
    pub timestamp_ms: u64,
}

pub struct Checkpoint {
    pub dir: PathBuf,
    pub tagset: Arc<TagSet>,
    pub agreement: AgreementResult,
}

pub fn write_checkpoint(artifacts: &mut Artifacts, dir: &Path, agreement: &AgreementResult) -> CliResult<()> {
    artifacts.write(&dir.join(TAGSET), agreement.agreed.tagset.to_text())?;
    artifacts.write(&dir.join(AGREED), write_vertical(&agreement.agreed))?;
    artifacts.write(&dir.join(DISAGREEMENTS), write_disagreements(agreement))?;
    Ok(())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

fn in_file(path: &Path) -> impl Fn(cotag::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

impl Checkpoint {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let tagset_path = dir.join(TAGSET);
        let tagset = Arc::new(TagSet::parse(&read(&tagset_path)?).map_err(in_file(&tagset_path))?);
        let agreed_path = dir.join(AGREED);
        let agreed = parse_vertical(&read(&agreed_path)?, &tagset).map_err(in_file(&agreed_path))?;
        let dis_path = dir.join(DISAGREEMENTS);
        let disagreements = parse_disagreements(&read(&dis_path)?, &agreed).map_err(in_file(&dis_path))?;
        let total_tokens = agreed.token_count();
        let agreed_tokens = agreed.labeled_count();
        let masked = agreed.tokens().filter(|t| t.masked).count();
        if masked != disagreements.len() {
            return Err(CliError::Data(format!(
                "{}: {} disagreements listed but {masked} gaps in the agreed corpus",
                dis_path.display(),
                disagreements.len()
            )));
        }
        Ok(Checkpoint {
            dir: dir.to_path_buf(),
            tagset,
            agreement: AgreementResult {
                coverage: if total_tokens == 0 { 0.0 } else { agreed_tokens as f64 / total_tokens as f64 },
                agreed,
                disagreements,
                agreed_tokens,
                total_tokens,
            },
        })
    }

    pub fn annotations_path(&self) -> PathBuf {
        self.dir.join(ANNOTATIONS)
    }

    /// Annotation log contents; a torn final line from an interrupted write
    /// is ignored.
    pub fn annotations(&self) -> CliResult<Vec<AnnotationRecord>> {
        read_annotations(&self.annotations_path())
    }

    pub fn corrections(&self) -> CliResult<Vec<Correction>> {
        let mut out = Vec::new();
        for a in self.annotations()? {
            let tag = self
                .tagset
                .get(&a.tag)
                .ok_or_else(|| CliError::Data(format!("{}: unknown tag {:?}", self.annotations_path().display(), a.tag)))?;
            out.push(Correction {
                sentence: a.sentence,
                token: a.token,
                tag,
            });
        }
        Ok(out)
    }
}

pub fn read_annotations(path: &Path) -> CliResult<Vec<AnnotationRecord>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CliError::file(path, e)),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (k, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(rec) => out.push(rec),
            Err(_) if k + 1 == lines.len() && !complete => {
                log::warn!("{}: ignoring incomplete final line", path.display());
            }
            Err(e) => return Err(CliError::Data(format!("{}: line {}: {e}", path.display(), k + 1))),
        }
    }
    Ok(out)
}

/// Append-only annotation log; each record is on disk before `append` returns.
pub struct AnnotationLog {
    file: File,
    path: PathBuf,
}

impl AnnotationLog {
    pub fn open(path: &Path) -> CliResult<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::file(path, e))?;
        // drop a torn final line so the next record starts cleanly
        let text = fs::read(path).map_err(|e| CliError::file(path, e))?;
        if !text.is_empty() && text.last() != Some(&b'\n') {
            let keep = text.iter().rposition(|b| *b == b'\n').map_or(0, |k| k + 1);
            file.set_len(keep as u64).map_err(|e| CliError::file(path, e))?;
        }
        Ok(AnnotationLog {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, rec: &AnnotationRecord) -> CliResult<()> {
        let mut line = serde_json::to_string(rec).map_err(|e| CliError::Internal(e.to_string()))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| CliError::file(&self.path, e))
    }
}
