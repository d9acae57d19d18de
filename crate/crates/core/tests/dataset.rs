// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use proptest::prelude::*;

use negascope::dataset::{generate_corpus, NegationForm, PairTokens, Template};
use negascope::tokenizer::Vocabulary;

fn pair(vocab: &Vocabulary, a: &str, n: &str, t: &str) -> PairTokens {
    PairTokens {
        id: "x".into(),
        template: negascope::dataset::PairSource::Template(negascope::dataset::TemplateName::Likes),
        form: Some(NegationForm::Not),
        affirmative: vocab.encode_ids(a),
        negated: vocab.encode_ids(n),
        target: vocab.encode_ids(t),
    }
}

#[test]
fn oracle_accepts_cue_edits_and_rejects_content_edits() {
    let v = Vocabulary::bundled();
    for (a, n) in [
        ("Alice can", "Alice can't"),
        ("Alice can", "Alice cannot"),
        ("Alice can", "Alice can never"),
        ("Alice does", "Alice doesn't"),
        ("Bob likes", "Bob does not like"),
        ("Bob watches", "Bob doesn't watch"),
        ("Carol has a", "Carol has no"),
        ("Carol has a", "Carol does not have a"),
        ("There is an apple in the", "There is no apple in the"),
        ("The sky is", "The sky is never"),
    ] {
        common::cue_only_diff(&v, &pair(&v, a, n, " x")).unwrap_or_else(|e| panic!("{a} / {n}: {e}"));
    }
    for (a, n) in [
        ("Alice can", "Bob can't"),
        ("Bob likes", "Bob hates"),
        ("The sky is", "The sky is blue"),
        ("Alice can", "Alice can"),
    ] {
        assert!(common::cue_only_diff(&v, &pair(&v, a, n, " x")).is_err(), "{a} / {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_pairs_differ_only_in_cues(seed in any::<u64>(), total in 8usize..400) {
        let v = Vocabulary::bundled();
        let corpus = generate_corpus(&Template::all(), total, seed).unwrap();
        prop_assert_eq!(corpus.len(), total);
        for p in &corpus {
            let t = p.tokenize(&v).unwrap();
            prop_assert!(common::cue_only_diff(&v, &t).is_ok(), "{:?}", common::cue_only_diff(&v, &t));
            prop_assert_eq!(v.decode(&t.target).unwrap(), p.target.clone());
        }
    }
}
