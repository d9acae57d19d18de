// SPDX-License-Identifier: MIT OR Apache-2.0

//! External sentence-pair files and token-space alignment.
//!
//! Input is a headered CSV with two sentence columns (default `sentence1`,
//! `sentence2`) and an optional label column (default `label`). Labels are
//! carried through but never used for scoring.

use std::path::Path;

use tracing::warn;

use super::{ExternalTag, PairSource, PairTokens, SentencePair, Split};
use crate::error::{Error, Result};
use crate::tokenizer::Vocabulary;

/// One row of an external pair file. `row` is the 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPairRecord {
    pub row: usize,
    pub affirmative: String,
    pub negated: String,
    pub label: Option<String>,
}

/// A pair aligned into prefix/target form, with its token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub pair: SentencePair,
    pub tokens: PairTokens,
}

/// Reads every record of an external pair file.
pub fn load_external_pairs(
    path: impl AsRef<Path>,
    affirmative_column: &str,
    negated_column: &str,
    label_column: Option<&str>,
) -> Result<Vec<RawPairRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let what = path.display().to_string();
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(&what, 1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse(&what, 1, format!("missing column {name:?}")))
    };
    let a = column(affirmative_column)?;
    let n = column(negated_column)?;
    let l = match label_column {
        Some(name) => headers.iter().position(|h| h.trim() == name),
        None => None,
    };

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::parse(&what, row, e.to_string()))?;
        let field = |idx: usize| {
            rec.get(idx)
                .map(str::to_string)
                .ok_or_else(|| Error::parse(&what, row, format!("missing field {}", idx + 1)))
        };
        let affirmative = field(a)?;
        let negated = field(n)?;
        if affirmative.trim().is_empty() || negated.trim().is_empty() {
            return Err(Error::parse(&what, row, "empty sentence"));
        }
        out.push(RawPairRecord {
            row,
            affirmative,
            negated,
            label: l.and_then(|idx| rec.get(idx)).map(str::to_string),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{what} has no records")));
    }
    Ok(out)
}

/// Splits two sentences into prefixes and a shared target: the target is the
/// longest common token suffix, the prefixes are what precedes it.
pub fn align_pair(vocab: &Vocabulary, affirmative: &str, negated: &str) -> Result<AlignedPair> {
    if affirmative.is_empty() || negated.is_empty() {
        return Err(Error::Alignment("empty sentence".into()));
    }
    let a = vocab.encode_ids(affirmative);
    let n = vocab.encode_ids(negated);
    let common = a
        .iter()
        .rev()
        .zip(n.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    if common == 0 {
        return Err(Error::Alignment("no common final token".into()));
    }
    if common == a.len() || common == n.len() {
        return Err(Error::Alignment("a prefix would be empty".into()));
    }
    let (a_prefix, target) = a.split_at(a.len() - common);
    let n_prefix = &n[..n.len() - common];
    let pair = SentencePair {
        id: String::new(),
        template: PairSource::External(ExternalTag::External),
        form: None,
        affirmative_prefix: vocab.decode(a_prefix)?,
        negated_prefix: vocab.decode(n_prefix)?,
        target: vocab.decode(target)?,
        split: Split::None,
    };
    let tokens = PairTokens {
        id: String::new(),
        template: pair.template,
        form: None,
        affirmative: a_prefix.to_vec(),
        negated: n_prefix.to_vec(),
        target: target.to_vec(),
    };
    Ok(AlignedPair { pair, tokens })
}

/// Aligns every record; failures are logged and returned alongside, never
/// dropped silently. Ids are `external-{row:04}`.
pub fn align_external(
    vocab: &Vocabulary,
    records: &[RawPairRecord],
) -> (Vec<AlignedPair>, Vec<(usize, Error)>) {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for r in records {
        match align_pair(vocab, &r.affirmative, &r.negated) {
            Ok(mut p) => {
                let id = format!("external-{:04}", r.row);
                p.pair.id = id.clone();
                p.tokens.id = id;
                kept.push(p);
            }
            Err(e) => {
                warn!(row = r.row, reason = %e, "skipping external pair");
                skipped.push((r.row, e));
            }
        }
    }
    (kept, skipped)
}
