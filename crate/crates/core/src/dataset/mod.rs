// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sentence-pair datasets: the template corpus, the `can_ability` analysis
//! slice, and external pair files.

mod external;
mod generate;
mod templates;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{TokenId, Vocabulary};

pub use external::{align_external, align_pair, load_external_pairs, AlignedPair, RawPairRecord};
pub use generate::{
    build_can_ability_slice, generate_corpus, DatasetManifest, CAN_ABILITY_FORMS, DEFAULT_DEV_SIZE,
    DEFAULT_PER_FORM, DEFAULT_TEST_SIZE, DEFAULT_TOTAL,
};
pub use templates::{Fillers, Instance, TargetSlot, Template, TemplateName};

/// The seven negation cues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegationForm {
    Not,
    Never,
    No,
    DoesNot,
    Doesnt,
    Cant,
    Cannot,
}

impl NegationForm {
    pub const ALL: [NegationForm; 7] = [
        Self::Not,
        Self::Never,
        Self::No,
        Self::DoesNot,
        Self::Doesnt,
        Self::Cant,
        Self::Cannot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Not => "not",
            Self::Never => "never",
            Self::No => "no",
            Self::DoesNot => "does_not",
            Self::Doesnt => "doesnt",
            Self::Cant => "cant",
            Self::Cannot => "cannot",
        }
    }

    /// Surface text of the cue.
    pub fn cue(self) -> &'static str {
        match self {
            Self::Not => "not",
            Self::Never => "never",
            Self::No => "no",
            Self::DoesNot => "does not",
            Self::Doesnt => "doesn't",
            Self::Cant => "can't",
            Self::Cannot => "cannot",
        }
    }
}

impl fmt::Display for NegationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NegationForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown negation form {s:?}")))
    }
}

/// Which partition a pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Dev,
    Test,
    #[default]
    None,
}

/// Where a pair came from: one of the templates, or an external file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSource {
    Template(TemplateName),
    External(ExternalTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalTag {
    External,
}

impl PairSource {
    pub fn template(self) -> Option<TemplateName> {
        match self {
            Self::Template(t) => Some(t),
            Self::External(_) => None,
        }
    }
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Template(t) => t.fmt(f),
            Self::External(_) => f.write_str("external"),
        }
    }
}

/// An affirmative/negated prefix pair sharing a target continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub template: PairSource,
    /// Absent for external pairs.
    pub form: Option<NegationForm>,
    pub affirmative_prefix: String,
    pub negated_prefix: String,
    pub target: String,
    pub split: Split,
}

/// Token ids for a pair, ready for scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTokens {
    pub id: String,
    pub template: PairSource,
    pub form: Option<NegationForm>,
    pub affirmative: Vec<TokenId>,
    pub negated: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

impl SentencePair {
    /// Encodes prefixes and target separately.
    ///
    /// Every target starts with a space, so encoding it on its own yields the
    /// same ids as the tail of `encode(prefix + target)`.
    pub fn tokenize(&self, vocab: &Vocabulary) -> Result<PairTokens> {
        let t = PairTokens {
            id: self.id.clone(),
            template: self.template,
            form: self.form,
            affirmative: vocab.encode_ids(&self.affirmative_prefix),
            negated: vocab.encode_ids(&self.negated_prefix),
            target: vocab.encode_ids(&self.target),
        };
        if t.target.is_empty() || t.affirmative.is_empty() || t.negated.is_empty() {
            return Err(Error::Argument(format!(
                "pair {} has an empty prefix or target",
                self.id
            )));
        }
        Ok(t)
    }
}

const CSV_WHAT: &str = "pair CSV";

/// Writes pairs with the header
/// `id,template,form,affirmative_prefix,negated_prefix,target,split`.
pub fn write_pairs(path: impl AsRef<Path>, pairs: &[SentencePair]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs_to(file, pairs)
}

pub fn write_pairs_to<W: std::io::Write>(writer: W, pairs: &[SentencePair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "id",
        "template",
        "form",
        "affirmative_prefix",
        "negated_prefix",
        "target",
        "split",
    ])?;
    for p in pairs {
        w.serialize((
            &p.id,
            p.template,
            p.form,
            &p.affirmative_prefix,
            &p.negated_prefix,
            &p.target,
            p.split,
        ))?;
    }
    w.flush().map_err(|e| Error::io("<pair csv>", e))?;
    Ok(())
}

/// Reads a file written by [`write_pairs`].
pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs_from(file)
}

pub fn read_pairs_from<R: std::io::Read>(reader: R) -> Result<Vec<SentencePair>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<SentencePair>().enumerate() {
        // header is line 1
        let pair = rec.map_err(|e| Error::parse(CSV_WHAT, i + 2, e.to_string()))?;
        out.push(pair);
    }
    Ok(out)
}
