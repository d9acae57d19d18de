// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over the tokenizer, the GPT-2 forward pass and NES scoring.
//!
//! Every function returns an [`NsStatus`]. On failure the message is kept in
//! a thread-local slot readable with [`ns_last_error_message`]. Handles are
//! opaque; free them with the matching `*_free` function. Buffers follow one
//! protocol: the required length is always written to `*len`, and
//! `NS_STATUS_BUFFER_TOO_SMALL` is returned when `capacity` is short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use negascope::dataset::{PairSource, PairTokens, TemplateName};
use negascope::interventions::{build_ablation, HeadId, HeadSet, HeadSetLabel};
use negascope::metrics::nes;
use negascope::model::synth::{synthetic_weights, tiny_config};
use negascope::model::{ModelConfig, ModelWeights};
use negascope::tokenizer::Vocabulary;
use negascope::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    Parse = 4,
    Integrity = 5,
    Shape = 6,
    Range = 7,
    Argument = 8,
    Conflict = 9,
    Io = 10,
    Panic = 11,
    Other = 12,
}

/// Tokenizer handle.
pub struct NsVocab(Vocabulary);

/// Model handle (read-only after creation, shareable across threads).
pub struct NsModel(ModelWeights);

/// Architecture of a loaded model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NsModelDims {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub d_mlp: usize,
    pub n_ctx: usize,
    pub vocab_size: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> NsStatus {
    match e {
        Error::Parse { .. } => NsStatus::Parse,
        Error::Integrity(_) => NsStatus::Integrity,
        Error::Shape { .. } => NsStatus::Shape,
        Error::Range(_) => NsStatus::Range,
        Error::Argument(_) | Error::Alignment(_) | Error::EmptyInput(_) => NsStatus::Argument,
        Error::Conflict(_) => NsStatus::Conflict,
        Error::Io { .. } => NsStatus::Io,
        _ => NsStatus::Other,
    }
}

struct Fail(NsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(NsStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(NsStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copies `src` into `dst`, writing the needed length to `len`.
unsafe fn fill<T: Copy>(src: &[T], dst: *mut T, capacity: usize, len: *mut usize) -> Result<(), Fail> {
    *out_arg(len, "len")? = src.len();
    if capacity < src.len() {
        return Err(Fail(
            NsStatus::BufferTooSmall,
            format!("buffer holds {capacity}, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

/// Copies `s` plus a NUL into `dst`; `*len` gets the length without the NUL.
unsafe fn fill_str(s: &str, dst: *mut c_char, capacity: usize, len: *mut usize) -> Result<(), Fail> {
    *out_arg(len, "len")? = s.len();
    if capacity <= s.len() {
        return Err(Fail(
            NsStatus::BufferTooSmall,
            format!("buffer holds {capacity} bytes, {} needed", s.len() + 1),
        ));
    }
    if dst.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), dst.cast::<u8>(), s.len());
    *dst.add(s.len()) = 0;
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------------- vocab

/// The GPT-2 vocabulary compiled into the library.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn ns_vocab_bundled(out: *mut *mut NsVocab) -> NsStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(NsVocab(Vocabulary::bundled())));
        Ok(())
    })
}

/// Loads `vocab.json` and `merges.txt`.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ns_vocab_load(
    vocab_path: *const c_char,
    merges_path: *const c_char,
    out: *mut *mut NsVocab,
) -> NsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let v = Vocabulary::load(str_arg(vocab_path, "vocab_path")?, str_arg(merges_path, "merges_path")?)?;
        *out = Box::into_raw(Box::new(NsVocab(v)));
        Ok(())
    })
}

/// # Safety
/// `vocab` must come from `ns_vocab_*` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_vocab_free(vocab: *mut NsVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Encodes UTF-8 `text` into token ids.
///
/// # Safety
/// `vocab` must be a live handle, `text` NUL-terminated, `ids` writable for
/// `capacity` elements and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_vocab_encode(
    vocab: *const NsVocab,
    text: *const c_char,
    ids: *mut u32,
    capacity: usize,
    len: *mut usize,
) -> NsStatus {
    guard(|| {
        let v = ref_arg(vocab, "vocab")?;
        let encoded = v.0.encode_ids(str_arg(text, "text")?);
        fill(&encoded, ids, capacity, len)
    })
}

/// Decodes ids into UTF-8 text followed by a NUL. `*len` excludes the NUL;
/// `capacity` must cover it.
///
/// # Safety
/// `ids` must hold `n_ids` elements; `buf` must be writable for `capacity`
/// bytes and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_vocab_decode(
    vocab: *const NsVocab,
    ids: *const u32,
    n_ids: usize,
    buf: *mut c_char,
    capacity: usize,
    len: *mut usize,
) -> NsStatus {
    guard(|| {
        let v = ref_arg(vocab, "vocab")?;
        let text = v.0.decode(slice_arg(ids, n_ids, "ids")?)?;
        fill_str(&text, buf, capacity, len)
    })
}

// ------------------------------------------------------------------- model

/// Loads a safetensors checkpoint. `config_path` may be null, in which case
/// a `config.json` beside the checkpoint is used if present, else GPT-2 Small.
///
/// # Safety
/// Strings must be NUL-terminated (or null where allowed); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_model_load(
    checkpoint_path: *const c_char,
    config_path: *const c_char,
    out: *mut *mut NsModel,
) -> NsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ckpt = str_arg(checkpoint_path, "checkpoint_path")?;
        let cfg = if config_path.is_null() { None } else { Some(str_arg(config_path, "config_path")?) };
        let m = negascope::pipeline::load_model(Path::new(ckpt), cfg.map(Path::new))?;
        *out = Box::into_raw(Box::new(NsModel(m)));
        Ok(())
    })
}

/// A seeded random model: GPT-2 Small shaped, or a three-layer four-head
/// model when `tiny` is nonzero.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ns_model_synthetic(tiny: i32, seed: u64, out: *mut *mut NsModel) -> NsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = if tiny != 0 { tiny_config() } else { ModelConfig::gpt2_small() };
        *out = Box::into_raw(Box::new(NsModel(synthetic_weights(cfg, seed)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `ns_model_*` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_model_free(model: *mut NsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_model_dims(model: *const NsModel, out: *mut NsModelDims) -> NsStatus {
    guard(|| {
        let c = ref_arg(model, "model")?.0.config;
        *out_arg(out, "out")? = NsModelDims {
            n_layers: c.n_layers,
            n_heads: c.n_heads,
            d_model: c.d_model,
            d_head: c.d_head,
            d_mlp: c.d_mlp,
            n_ctx: c.n_ctx,
            vocab_size: c.vocab_size,
        };
        Ok(())
    })
}

/// Hex SHA-256 of the checkpoint, NUL-terminated (65 bytes with the NUL).
///
/// # Safety
/// `buf` writable for `capacity` bytes; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_model_hash(
    model: *const NsModel,
    buf: *mut c_char,
    capacity: usize,
    len: *mut usize,
) -> NsStatus {
    guard(|| {
        fill_str(&ref_arg(model, "model")?.0.content_hash, buf, capacity, len)
    })
}

/// Sum of `log P(target_i | prefix, target_<i)` in nats, teacher forced.
///
/// # Safety
/// `prefix`/`target` must hold the given number of ids; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_model_span_logprob(
    model: *const NsModel,
    prefix: *const u32,
    n_prefix: usize,
    target: *const u32,
    n_target: usize,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.0;
        let v = m.span_logprob(slice_arg(prefix, n_prefix, "prefix")?, slice_arg(target, n_target, "target")?, &[])?;
        *out_arg(out, "out")? = v;
        Ok(())
    })
}

unsafe fn pair(
    vocab: *const NsVocab,
    affirmative: *const c_char,
    negated: *const c_char,
    target: *const c_char,
) -> Result<PairTokens, Fail> {
    let v = &ref_arg(vocab, "vocab")?.0;
    Ok(PairTokens {
        id: "ffi".into(),
        template: PairSource::Template(TemplateName::CanAbility),
        form: None,
        affirmative: v.encode_ids(str_arg(affirmative, "affirmative")?),
        negated: v.encode_ids(str_arg(negated, "negated")?),
        target: v.encode_ids(str_arg(target, "target")?),
    })
}

/// NES = log P(target | affirmative) − log P(target | negated), in nats.
///
/// `layers`/`heads` list `n_heads` heads whose slices are zeroed at the last
/// negated-prefix position; pass `n_heads = 0` for the baseline score.
///
/// # Safety
/// Strings NUL-terminated; `layers` and `heads` hold `n_heads` elements;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_model_nes(
    model: *const NsModel,
    vocab: *const NsVocab,
    affirmative: *const c_char,
    negated: *const c_char,
    target: *const c_char,
    layers: *const u32,
    heads: *const u32,
    n_heads: usize,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.0;
        let p = pair(vocab, affirmative, negated, target)?;
        let ids: Vec<HeadId> = slice_arg(layers, n_heads, "layers")?
            .iter()
            .zip(slice_arg(heads, n_heads, "heads")?)
            .map(|(&l, &h)| HeadId::new(l as usize, h as usize))
            .collect();
        let set = HeadSet::new(ids, HeadSetLabel::TopK)?;
        let edits = if set.is_empty() { Vec::new() } else { build_ablation(&set, p.negated.len())? };
        *out_arg(out, "out")? = nes(m, &p, &[], &edits)?;
        Ok(())
    })
}
