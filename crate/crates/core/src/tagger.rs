//! Uniform interface over the tagger flavors: training, tagging and model
//! directories on disk.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence, TagSet, WeightedCorpus};
use crate::error::{Error, Result};
use crate::eval::mft_tag;
use crate::lexicon::{train_lexicon, LexicalModel};
use crate::ngram::{train_ngrams, viterbi_decode, NgramConfig, NgramModel};
use crate::relax::{compile_constraints, relax_disambiguate, ConstraintBase, ConstraintSources, KindSet, RelaxConfig};
use crate::tagging::{SentenceTagging, Tagging};
use crate::tree::{learn_trees, tree_disambiguate, TreeConfig, TreeEnsemble};

/// Which tagger to build. Spelled `mft`, `viterbi-2`, `viterbi-3`, `tree`
/// or `relax-<kinds>` such as `relax-BT`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TaggerSpec {
    Mft,
    Viterbi { order: usize },
    Tree,
    Relax { kinds: KindSet },
}

impl FromStr for TaggerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mft" => Ok(TaggerSpec::Mft),
            "viterbi-2" | "bigram" => Ok(TaggerSpec::Viterbi { order: 2 }),
            "viterbi-3" | "trigram" => Ok(TaggerSpec::Viterbi { order: 3 }),
            "tree" => Ok(TaggerSpec::Tree),
            _ => match lower.strip_prefix("relax-") {
                Some(kinds) => Ok(TaggerSpec::Relax { kinds: kinds.parse()? }),
                None => Err(Error::invalid(format!("unknown tagger {s:?}"))),
            },
        }
    }
}

impl fmt::Display for TaggerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaggerSpec::Mft => write!(f, "mft"),
            TaggerSpec::Viterbi { order } => write!(f, "viterbi-{order}"),
            TaggerSpec::Tree => write!(f, "tree"),
            TaggerSpec::Relax { kinds } => write!(f, "relax-{kinds}"),
        }
    }
}

impl Serialize for TaggerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TaggerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hyperparameters shared by all flavors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerParams {
    pub ngram: NgramConfig,
    pub tree: TreeConfig,
    pub relax: RelaxConfig,
}

#[derive(Clone, Debug)]
enum Model {
    Mft,
    Viterbi(NgramModel),
    Tree(TreeEnsemble),
    Relax(ConstraintBase),
}

#[derive(Clone, Debug)]
pub struct TrainedTagger {
    spec: TaggerSpec,
    params: TaggerParams,
    lexicon: LexicalModel,
    model: Model,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    spec: TaggerSpec,
    params: TaggerParams,
}

const MANIFEST: &str = "tagger.json";
const LEXICON: &str = "lexicon.tsv";
const NGRAMS: &str = "ngrams.tsv";
const TREES: &str = "trees.sexp";
const CONSTRAINTS: &str = "constraints.tsv";

impl TrainedTagger {
    pub fn train(spec: &TaggerSpec, params: &TaggerParams, corpus: &WeightedCorpus) -> Result<Self> {
        let lexicon = train_lexicon(corpus)?;
        let model = match spec {
            TaggerSpec::Mft => Model::Mft,
            TaggerSpec::Viterbi { order } => Model::Viterbi(train_ngrams(corpus, *order, params.ngram.clone())?),
            TaggerSpec::Tree => Model::Tree(learn_trees(corpus, &params.tree)?),
            TaggerSpec::Relax { kinds } => {
                use crate::relax::Kind;
                let bigrams = kinds
                    .contains(Kind::B)
                    .then(|| train_ngrams(corpus, 2, params.ngram.clone()))
                    .transpose()?;
                let trigrams = kinds
                    .contains(Kind::T)
                    .then(|| train_ngrams(corpus, 3, params.ngram.clone()))
                    .transpose()?;
                let trees = kinds
                    .contains(Kind::C)
                    .then(|| learn_trees(corpus, &params.tree))
                    .transpose()?;
                let sources = ConstraintSources {
                    bigrams: bigrams.as_ref(),
                    trigrams: trigrams.as_ref(),
                    trees: trees.as_ref(),
                };
                Model::Relax(compile_constraints(sources, kinds, &params.relax)?)
            }
        };
        Ok(TrainedTagger {
            spec: spec.clone(),
            params: params.clone(),
            lexicon,
            model,
        })
    }

    pub fn spec(&self) -> &TaggerSpec {
        &self.spec
    }

    pub fn lexicon(&self) -> &LexicalModel {
        &self.lexicon
    }

    pub fn tagset(&self) -> &Arc<TagSet> {
        self.lexicon.tagset()
    }

    pub fn tag_sentence(&self, sentence: &Sentence) -> Result<SentenceTagging> {
        match &self.model {
            Model::Mft => mft_tag(&self.lexicon, sentence),
            Model::Viterbi(m) => viterbi_decode(sentence, &self.lexicon, m),
            Model::Tree(t) => tree_disambiguate(sentence, t, &self.lexicon, &self.params.tree),
            Model::Relax(b) => relax_disambiguate(sentence, b, &self.lexicon, &self.params.relax),
        }
    }

    /// Tags every sentence, in parallel; output order follows the corpus.
    pub fn tag(&self, corpus: &Corpus) -> Result<Tagging> {
        if *corpus.tagset != **self.tagset() {
            return Err(Error::invalid("corpus tagset differs from the model tagset"));
        }
        let sentences = corpus
            .sentences
            .par_iter()
            .map(|s| self.tag_sentence(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tagging::new(sentences))
    }

    /// Writes the model files into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            spec: self.spec.clone(),
            params: self.params.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
        fs::write(dir.join(MANIFEST), json + "\n")?;
        fs::write(dir.join(LEXICON), self.lexicon.to_text())?;
        match &self.model {
            Model::Mft => {}
            Model::Viterbi(m) => fs::write(dir.join(NGRAMS), m.to_text())?,
            Model::Tree(t) => fs::write(dir.join(TREES), t.to_text())?,
            Model::Relax(b) => fs::write(dir.join(CONSTRAINTS), b.to_text())?,
        }
        Ok(())
    }

    pub fn load(dir: &Path, tagset: Arc<TagSet>) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)
            .map_err(|e| Error::parse(e.line(), e.to_string()))?;
        let lexicon = LexicalModel::parse(&fs::read_to_string(dir.join(LEXICON))?, tagset.clone())?;
        let read = |name: &str| fs::read_to_string(dir.join(name));
        let model = match &manifest.spec {
            TaggerSpec::Mft => Model::Mft,
            TaggerSpec::Viterbi { order } => {
                let m = NgramModel::parse(&read(NGRAMS)?, tagset)?;
                if m.order() != *order {
                    return Err(Error::invalid(format!("model order {} does not match {}", m.order(), manifest.spec)));
                }
                Model::Viterbi(m)
            }
            TaggerSpec::Tree => Model::Tree(TreeEnsemble::parse(&read(TREES)?, tagset)?),
            TaggerSpec::Relax { .. } => Model::Relax(ConstraintBase::parse(&read(CONSTRAINTS)?, tagset)?),
        };
        Ok(TrainedTagger {
            spec: manifest.spec,
            params: manifest.params,
            lexicon,
            model,
        })
    }
}
