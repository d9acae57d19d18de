// SPDX-License-Identifier: MIT OR Apache-2.0

//! Stratified corpus generation and the `can_ability` dev/test slice.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::templates::{Template, TemplateName};
use super::{NegationForm, PairSource, SentencePair, Split};
use crate::error::{Error, Result};

pub const DEFAULT_TOTAL: usize = 12_000;
pub const DEFAULT_PER_FORM: usize = 268;
pub const DEFAULT_DEV_SIZE: usize = 938;
pub const DEFAULT_TEST_SIZE: usize = 402;

/// The five forms of the analysis slice.
pub const CAN_ABILITY_FORMS: [NegationForm; 5] = [
    NegationForm::Never,
    NegationForm::DoesNot,
    NegationForm::Doesnt,
    NegationForm::Cannot,
    NegationForm::Cant,
];

// offsets keep the slice's shuffle streams apart from the corpus streams
const SLICE_STREAM_BASE: u64 = 1 << 32;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `total` into `parts` shares differing by at most one; earlier
/// shares get the remainder.
fn even_shares(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

/// Draws `total` distinct pairs, split as evenly as possible across
/// templates and then across each template's forms.
///
/// Output order is template order, then form order, then draw order. Ids
/// have the form `{template}-{form}-{nnnn}`.
pub fn generate_corpus(templates: &[Template], total: usize, seed: u64) -> Result<Vec<SentencePair>> {
    if total == 0 {
        return Ok(Vec::new());
    }
    if templates.is_empty() {
        return Err(Error::Argument("no templates given".into()));
    }
    let mut out = Vec::with_capacity(total);
    let mut stream = 0u64;
    for (template, quota) in templates.iter().zip(even_shares(total, templates.len())) {
        let fillers = template.fillers();
        for (&form, n) in template.forms.iter().zip(even_shares(quota, template.forms.len())) {
            let mut rng = stream_rng(seed, stream);
            stream += 1;
            if fillers.len() < n {
                return Err(Error::Capacity(format!(
                    "stratum {}/{form} needs {n} pairs but only {} filler combinations exist",
                    template.name,
                    fillers.len()
                )));
            }
            let mut order: Vec<usize> = (0..fillers.len()).collect();
            order.shuffle(&mut rng);
            for (i, &idx) in order[..n].iter().enumerate() {
                let inst = template
                    .instantiate(&fillers[idx], form)
                    .expect("form belongs to template");
                out.push(SentencePair {
                    id: format!("{}-{form}-{i:04}", template.name),
                    template: PairSource::Template(template.name),
                    form: Some(form),
                    affirmative_prefix: inst.affirmative_prefix,
                    negated_prefix: inst.negated_prefix,
                    target: inst.target,
                    split: Split::None,
                });
            }
        }
    }
    Ok(out)
}

/// Equalizes the five `can_ability` forms to `per_form` pairs each and splits
/// every form into dev and test shares, then concatenates.
///
/// Dev shares are spread across forms as evenly as possible (earlier forms
/// in [`CAN_ABILITY_FORMS`] take the remainder), so per-form balance holds
/// within one item in each split.
pub fn build_can_ability_slice(
    corpus: &[SentencePair],
    per_form: usize,
    dev_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<(Vec<SentencePair>, Vec<SentencePair>)> {
    let n_forms = CAN_ABILITY_FORMS.len();
    if dev_size + test_size != per_form * n_forms {
        return Err(Error::Argument(format!(
            "dev ({dev_size}) + test ({test_size}) must equal {n_forms} x per_form ({})",
            per_form * n_forms
        )));
    }
    let dev_shares = even_shares(dev_size, n_forms);
    if dev_shares.iter().any(|&d| d > per_form) {
        return Err(Error::Argument(format!(
            "dev size {dev_size} exceeds {n_forms} x {per_form}"
        )));
    }
    let mut dev = Vec::with_capacity(dev_size);
    let mut test = Vec::with_capacity(test_size);
    for (i, (&form, dev_n)) in CAN_ABILITY_FORMS.iter().zip(dev_shares).enumerate() {
        let mut pool: Vec<&SentencePair> = corpus
            .iter()
            .filter(|p| {
                p.template == PairSource::Template(TemplateName::CanAbility) && p.form == Some(form)
            })
            .collect();
        if pool.len() < per_form {
            return Err(Error::Capacity(format!(
                "can_ability/{form} has {} pairs, {per_form} required",
                pool.len()
            )));
        }
        let mut rng = stream_rng(seed, SLICE_STREAM_BASE + i as u64);
        pool.shuffle(&mut rng);
        for (j, p) in pool[..per_form].iter().enumerate() {
            let mut p = (*p).clone();
            if j < dev_n {
                p.split = Split::Dev;
                dev.push(p);
            } else {
                p.split = Split::Test;
                test.push(p);
            }
        }
    }
    Ok((dev, test))
}

/// Provenance of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub total: usize,
    /// Keyed `template/form`.
    pub counts: BTreeMap<String, usize>,
    pub per_form: usize,
    pub dev_size: usize,
    pub test_size: usize,
    /// File name to hex SHA-256.
    pub file_hashes: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn new(seed: u64, corpus: &[SentencePair], dev: &[SentencePair], test: &[SentencePair]) -> Self {
        let mut counts = BTreeMap::new();
        for p in corpus {
            let form = p.form.map(|f| f.as_str()).unwrap_or("none");
            *counts.entry(format!("{}/{form}", p.template)).or_insert(0) += 1;
        }
        Self {
            seed,
            total: corpus.len(),
            counts,
            per_form: (dev.len() + test.len()) / CAN_ABILITY_FORMS.len(),
            dev_size: dev.len(),
            test_size: test.len(),
            file_hashes: BTreeMap::new(),
        }
    }

    /// Counts sum to the declared total and the split sizes to the slice.
    pub fn is_consistent(&self) -> bool {
        self.counts.values().sum::<usize>() == self.total
            && self.dev_size + self.test_size == self.per_form * CAN_ABILITY_FORMS.len()
    }
}
