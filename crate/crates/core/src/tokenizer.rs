// SPDX-License-Identifier: MIT OR Apache-2.0

//! Byte-level BPE tokenizer compatible with GPT-2's published vocabulary.
//!
//! Text is split into chunks with GPT-2's pre-tokenization pattern
//! (contractions, letter runs, digit runs, punctuation runs, whitespace),
//! each chunk's UTF-8 bytes are mapped to printable surrogate characters, and
//! adjacent symbols are merged greedily by lowest merge rank until no ranked
//! pair remains. Every byte has a surrogate, so there is no unknown-token path.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use fancy_regex::Regex;

use crate::error::{Error, Result};

/// Number of entries in GPT-2's vocabulary.
pub const GPT2_VOCAB_SIZE: usize = 50_257;

/// GPT-2's pre-tokenization pattern.
const PRETOKENIZE_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

const BUNDLED_VOCAB: &str = include_str!("../assets/gpt2/vocab.json");
const BUNDLED_MERGES: &str = include_str!("../assets/gpt2/merges.txt");

/// A token id.
pub type TokenId = u32;

/// Encoded text together with the string it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    pub source_text: String,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Immutable GPT-2 vocabulary: token map, ranked merges and the byte/surrogate
/// bijection.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    merge_ranks: HashMap<(String, String), usize>,
    byte_encoder: [char; 256],
    byte_decoder: HashMap<char, u8>,
    pattern: Regex,
}

/// GPT-2's reversible byte → printable-character table.
///
/// Printable Latin-1 bytes map to themselves; the remaining 68 bytes are
/// shifted to code points 256.. in byte order.
pub fn byte_to_unicode() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut next = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(256 + next).expect("surrogate code point is valid");
            next += 1;
            c
        };
    }
    table
}

impl Vocabulary {
    /// Loads a `vocab.json` token map and a `merges.txt` merge list.
    pub fn load(vocab_file: impl AsRef<Path>, merges_file: impl AsRef<Path>) -> Result<Self> {
        let vocab_path = vocab_file.as_ref();
        let merges_path = merges_file.as_ref();
        let vocab_json =
            std::fs::read_to_string(vocab_path).map_err(|e| Error::io(vocab_path, e))?;
        let merges_txt =
            std::fs::read_to_string(merges_path).map_err(|e| Error::io(merges_path, e))?;
        Self::from_strs(&vocab_json, &merges_txt)
    }

    /// The GPT-2 vocabulary compiled into the crate.
    pub fn bundled() -> Self {
        Self::from_strs(BUNDLED_VOCAB, BUNDLED_MERGES).expect("bundled GPT-2 vocabulary is valid")
    }

    /// Builds a vocabulary from in-memory `vocab.json` and `merges.txt` text.
    pub fn from_strs(vocab_json: &str, merges_txt: &str) -> Result<Self> {
        let raw: HashMap<String, i64> = serde_json::from_str(vocab_json)
            .map_err(|e| Error::parse("vocab.json", e.line(), e.to_string()))?;
        if raw.len() != GPT2_VOCAB_SIZE {
            return Err(Error::Integrity(format!(
                "vocabulary has {} entries, expected {GPT2_VOCAB_SIZE}",
                raw.len()
            )));
        }
        let mut id_to_token: Vec<Option<String>> = vec![None; GPT2_VOCAB_SIZE];
        for (token, &id) in &raw {
            let slot = usize::try_from(id)
                .ok()
                .filter(|&i| i < GPT2_VOCAB_SIZE)
                .ok_or_else(|| {
                    Error::Integrity(format!("token {token:?} has out-of-range id {id}"))
                })?;
            if let Some(existing) = &id_to_token[slot] {
                return Err(Error::Integrity(format!(
                    "id {id} assigned to both {existing:?} and {token:?}"
                )));
            }
            id_to_token[slot] = Some(token.clone());
        }
        // injective + right cardinality => every slot is filled
        let id_to_token: Vec<String> = id_to_token.into_iter().map(Option::unwrap).collect();
        let token_to_id: HashMap<String, TokenId> = raw
            .into_iter()
            .map(|(t, id)| (t, id as TokenId))
            .collect();

        let byte_encoder = byte_to_unicode();
        let byte_decoder: HashMap<char, u8> = byte_encoder
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();

        let merge_ranks = parse_merges(merges_txt, &byte_decoder, &token_to_id)?;

        Ok(Self {
            token_to_id,
            id_to_token,
            merge_ranks,
            byte_encoder,
            byte_decoder,
            pattern: Regex::new(PRETOKENIZE_PATTERN).expect("pre-tokenization pattern compiles"),
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn merge_count(&self) -> usize {
        self.merge_ranks.len()
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    /// Surrogate-encoded string for `id` (e.g. `"Ġthe"`).
    pub fn token_str(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Encodes `text` into GPT-2 token ids.
    pub fn encode(&self, text: &str) -> TokenSequence {
        TokenSequence {
            ids: self.encode_ids(text),
            source_text: text.to_owned(),
        }
    }

    /// Encodes `text`, returning only the ids.
    pub fn encode_ids(&self, text: &str) -> Vec<TokenId> {
        let mut ids = Vec::new();
        for chunk in self.pattern.find_iter(text) {
            // the pattern has no catastrophic constructs; a match error is a bug
            let chunk = chunk.expect("pre-tokenization regex failed");
            let symbols: String = chunk
                .as_str()
                .bytes()
                .map(|b| self.byte_encoder[b as usize])
                .collect();
            for piece in self.bpe(&symbols) {
                let id = self
                    .token_to_id
                    .get(&piece)
                    .copied()
                    .expect("every BPE output piece is in the vocabulary");
                ids.push(id);
            }
        }
        ids
    }

    /// Decodes ids back into text. Byte sequences that are not valid UTF-8
    /// (possible only for id lists `encode` never produces) are replaced
    /// lossily.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let bytes = self.decode_bytes(ids)?;
        Ok(match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        })
    }

    /// Decodes ids into raw bytes.
    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        for &id in ids {
            let token = self.token_str(id).ok_or_else(|| {
                Error::Range(format!(
                    "token id {id} outside 0..{}",
                    self.id_to_token.len() - 1
                ))
            })?;
            for c in token.chars() {
                bytes.push(self.byte_decoder[&c]);
            }
        }
        Ok(bytes)
    }

    /// Applies ranked merges to one pre-tokenized chunk.
    fn bpe(&self, chunk: &str) -> Vec<String> {
        let mut word: Vec<String> = chunk.chars().map(String::from).collect();
        while word.len() > 1 {
            let best = word
                .windows(2)
                .filter_map(|w| self.rank(&w[0], &w[1]))
                .min();
            let Some(best) = best else { break };
            let mut merged = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len() && self.rank(&word[i], &word[i + 1]) == Some(best) {
                    merged.push(format!("{}{}", word[i], word[i + 1]));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut word[i]));
                    i += 1;
                }
            }
            word = merged;
        }
        word
    }

    fn rank(&self, left: &str, right: &str) -> Option<usize> {
        // (String, String) keys force an allocation per lookup; chunks are short
        self.merge_ranks
            .get(&(left.to_owned(), right.to_owned()))
            .copied()
    }
}

fn parse_merges(
    merges_txt: &str,
    byte_decoder: &HashMap<char, u8>,
    token_to_id: &HashMap<String, TokenId>,
) -> Result<HashMap<(String, String), usize>> {
    let mut ranks = HashMap::new();
    let mut known: HashSet<String> = byte_decoder.keys().map(|c| c.to_string()).collect();
    for (idx, line) in merges_txt.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() || (idx == 0 && line.starts_with("#version")) {
            continue;
        }
        let mut parts = line.split(' ');
        let (Some(left), Some(right), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(
                "merges.txt",
                line_no,
                format!("expected two space-separated symbols, got {line:?}"),
            ));
        };
        if left.is_empty() || right.is_empty() {
            return Err(Error::parse("merges.txt", line_no, "empty merge symbol"));
        }
        for sym in [left, right] {
            if !known.contains(sym) {
                return Err(Error::Integrity(format!(
                    "merge on line {line_no} references {sym:?}, which is neither a byte \
                     symbol nor the result of an earlier merge"
                )));
            }
        }
        let merged = format!("{left}{right}");
        if !token_to_id.contains_key(&merged) {
            return Err(Error::Integrity(format!(
                "merge on line {line_no} produces {merged:?}, which is not in the vocabulary"
            )));
        }
        let rank = ranks.len();
        ranks.entry((left.to_owned(), right.to_owned())).or_insert(rank);
        known.insert(merged);
    }
    if ranks.is_empty() {
        return Err(Error::Integrity("merge list is empty".into()));
    }
    Ok(ranks)
}
