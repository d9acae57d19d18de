// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use negascope::dataset::PairTokens;
use negascope::tokenizer::Vocabulary;

const NEG_CUES: [&str; 7] = ["not", "never", "no", "does", "doesn't", "cannot", "can't"];
const AFF_AUX: [&str; 4] = ["a", "an", "can", "does"];

fn starts_word(vocab: &Vocabulary, id: u32) -> bool {
    vocab.token_str(id).map_or(true, |s| s.starts_with('Ġ'))
}

/// Words of `a` and `b` inside their differing token span, widened to whole
/// words.
pub fn diff_words(vocab: &Vocabulary, a: &[u32], b: &[u32]) -> (Vec<String>, Vec<String>) {
    let mut pre = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let max_suf = a.len().min(b.len()) - pre;
    let mut suf = a.iter().rev().zip(b.iter().rev()).take(max_suf).take_while(|(x, y)| x == y).count();
    // widen to word boundaries on both sides
    let boundary = |ids: &[u32], i: usize| ids.get(i).map_or(true, |&t| starts_word(vocab, t));
    while pre > 0 && !(boundary(a, pre) && boundary(b, pre)) {
        pre -= 1;
    }
    while suf > 0 {
        let (ea, eb) = (a.len() - suf, b.len() - suf);
        if starts_word(vocab, a[ea]) && starts_word(vocab, b[eb]) {
            break;
        }
        suf -= 1;
    }
    let words = |ids: &[u32]| -> Vec<String> {
        vocab
            .decode(ids)
            .unwrap()
            .split_whitespace()
            .map(|w| w.trim_end_matches([',', '.']).to_lowercase())
            .collect()
    };
    (words(&a[pre..a.len() - suf]), words(&b[pre..b.len() - suf]))
}

/// Checks that a pair's prefixes differ only by negation cues and the
/// inflection they force (`likes`/`like`, `has`/`have`).
pub fn cue_only_diff(vocab: &Vocabulary, pair: &PairTokens) -> Result<(), String> {
    let (mut aff, mut neg) = diff_words(vocab, &pair.affirmative, &pair.negated);
    let before = neg.len();
    neg.retain(|w| !NEG_CUES.contains(&w.as_str()));
    if neg.len() == before {
        return Err(format!("{}: no negation cue in the diff", pair.id));
    }
    aff.retain(|w| !AFF_AUX.contains(&w.as_str()));
    if aff.len() != neg.len() {
        return Err(format!("{}: unmatched words {aff:?} vs {neg:?}", pair.id));
    }
    for (x, y) in aff.iter().zip(&neg) {
        let ok = x == y
            || *x == format!("{y}s")
            || *x == format!("{y}es")
            || (x == "has" && y == "have");
        if !ok {
            return Err(format!("{}: {x:?} vs {y:?} is not a cue-forced change", pair.id));
        }
    }
    Ok(())
}

/// Pretrained inputs under `$NEGASCOPE_HOME`, if present.
pub fn pretrained_checkpoint() -> Option<std::path::PathBuf> {
    let p = std::path::PathBuf::from(std::env::var_os("NEGASCOPE_HOME")?).join("gpt2/model.safetensors");
    p.exists().then_some(p)
}

pub fn external_pairs() -> Option<std::path::PathBuf> {
    let p = std::path::PathBuf::from(std::env::var_os("NEGASCOPE_HOME")?).join("xnot360.csv");
    p.exists().then_some(p)
}

pub fn require_pretrained() -> bool {
    std::env::var("NEGASCOPE_REQUIRE_PRETRAINED").is_ok_and(|v| v == "1")
}
