// SPDX-License-Identifier: MIT OR Apache-2.0

//! Result tables. Every file has a fixed header; reals are written with six
//! significant digits and a missing CI is an empty field. Scores are in nats.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{CurvePoint, ExternalResult, FormRow, JaccardMatrix, LayerRow, TemplateRow};
use crate::interventions::HeadId;
use crate::metrics::{HeadRanking, RankedHead};

pub const BASELINE_HEADER: [&str; 6] = ["template", "n", "mean", "median", "failure_rate", "ci"];
pub const LAYERS_HEADER: [&str; 4] = ["layer", "n", "mean_delta", "ci"];
pub const HEADS_HEADER: [&str; 5] = ["layer", "head", "rank", "mean_delta", "ci"];
pub const CURVES_HEADER: [&str; 6] = ["k", "condition", "seed", "n", "mean_nes", "ci"];
pub const CROSSFORM_HEADER: [&str; 4] = ["form", "n", "delta_mean", "ci"];
pub const JACCARD_HEADER: [&str; 3] = ["form_a", "form_b", "value"];
pub const EXTERNAL_HEADER: [&str; 4] = ["condition", "n", "mean_nes", "ci"];

/// Formats `x` with six significant digits, `%g` style: fixed notation for
/// exponents in `-5..6`, scientific otherwise, trailing zeros removed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Integrity(format!("writing table: {e}")))
}

pub fn baseline_csv(rows: &[TemplateRow]) -> Result<Vec<u8>> {
    table(
        &BASELINE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.template.to_string(),
                r.stats.n.to_string(),
                sig6(r.stats.mean),
                sig6(r.stats.median),
                sig6(r.stats.failure_rate),
                opt(r.stats.ci_half_width),
            ]
        }),
    )
}

pub fn layers_csv(rows: &[LayerRow]) -> Result<Vec<u8>> {
    table(
        &LAYERS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.stats.n.to_string(),
                sig6(r.stats.mean),
                opt(r.stats.ci_half_width),
            ]
        }),
    )
}

/// `rank` is 1-based.
pub fn heads_csv(ranking: &HeadRanking) -> Result<Vec<u8>> {
    table(
        &HEADS_HEADER,
        ranking.entries.iter().enumerate().map(|(i, e)| {
            vec![
                e.head.layer.to_string(),
                e.head.head.to_string(),
                (i + 1).to_string(),
                sig6(e.mean_delta_nes),
                opt(e.ci_half_width),
            ]
        }),
    )
}

/// Reads a ranking written by [`heads_csv`]. Rows are taken in rank order.
pub fn read_heads_csv(path: &Path) -> Result<HeadRanking> {
    let what = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(&what, 0, format!("{other:?}")),
    })?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(&what, line, e.to_string()))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            field(j)
                .parse()
                .map_err(|_| Error::parse(&what, line, format!("bad number {:?}", field(j))))
        };
        let int = |j: usize| -> Result<usize> {
            field(j)
                .parse()
                .map_err(|_| Error::parse(&what, line, format!("bad integer {:?}", field(j))))
        };
        let ci = if field(4).is_empty() { None } else { Some(num(4)?) };
        rows.push((
            int(2)?,
            RankedHead {
                head: HeadId::new(int(0)?, int(1)?),
                mean_delta_nes: num(3)?,
                ci_half_width: ci,
            },
        ));
    }
    rows.sort_by_key(|(rank, _)| *rank);
    Ok(HeadRanking {
        entries: rows.into_iter().map(|(_, e)| e).collect(),
    })
}

pub fn curves_csv(points: &[CurvePoint]) -> Result<Vec<u8>> {
    table(
        &CURVES_HEADER,
        points.iter().map(|p| {
            vec![
                p.k.to_string(),
                p.condition.as_str().to_string(),
                p.seed.map(|s| s.to_string()).unwrap_or_default(),
                p.stats.n.to_string(),
                sig6(p.stats.mean),
                opt(p.stats.ci_half_width),
            ]
        }),
    )
}

pub fn crossform_csv(rows: &[FormRow]) -> Result<Vec<u8>> {
    table(
        &CROSSFORM_HEADER,
        rows.iter().map(|r| {
            vec![
                r.form.to_string(),
                r.stats.n.to_string(),
                sig6(r.stats.mean),
                opt(r.stats.ci_half_width),
            ]
        }),
    )
}

pub fn jaccard_csv(m: &JaccardMatrix) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (i, a) in m.forms.iter().enumerate() {
        for (j, b) in m.forms.iter().enumerate() {
            rows.push(vec![a.to_string(), b.to_string(), sig6(m.values[i][j])]);
        }
    }
    table(&JACCARD_HEADER, rows)
}

pub fn external_csv(r: &ExternalResult) -> Result<Vec<u8>> {
    table(
        &EXTERNAL_HEADER,
        [("baseline", &r.baseline), ("ablated", &r.ablated), ("rescued", &r.rescued)]
            .into_iter()
            .map(|(name, s)| {
                vec![
                    name.to_string(),
                    s.n.to_string(),
                    sig6(s.mean),
                    opt(s.ci_half_width),
                ]
            }),
    )
}

/// Human-readable summary of per-form top sets, one line per form.
pub fn top_sets_text(m: &JaccardMatrix) -> String {
    let mut out = Vec::new();
    for (form, heads) in m.forms.iter().zip(&m.top_sets) {
        let names: Vec<String> = heads.iter().map(HeadId::to_string).collect();
        writeln!(out, "{form}: {}", names.join(" ")).expect("write to Vec");
    }
    String::from_utf8(out).expect("utf-8")
}
