// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ffi::{CStr, CString};
use std::ptr;

use negascope_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ns_last_error_message()) }.to_string_lossy().into_owned()
}

struct Handles {
    vocab: *mut NsVocab,
    model: *mut NsModel,
}

impl Handles {
    fn new() -> Self {
        let mut vocab = ptr::null_mut();
        let mut model = ptr::null_mut();
        unsafe {
            assert_eq!(ns_vocab_bundled(&mut vocab), NsStatus::Ok);
            assert_eq!(ns_model_synthetic(1, 5, &mut model), NsStatus::Ok);
        }
        Self { vocab, model }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            ns_vocab_free(self.vocab);
            ns_model_free(self.model);
        }
    }
}

fn encode(h: &Handles, text: &str) -> Vec<u32> {
    let c = CString::new(text).unwrap();
    let mut len = 0;
    unsafe {
        assert_eq!(ns_vocab_encode(h.vocab, c.as_ptr(), ptr::null_mut(), 0, &mut len), if text.is_empty() { NsStatus::Ok } else { NsStatus::BufferTooSmall });
        let mut ids = vec![0u32; len];
        assert_eq!(ns_vocab_encode(h.vocab, c.as_ptr(), ids.as_mut_ptr(), ids.len(), &mut len), NsStatus::Ok);
        ids
    }
}

#[test]
fn encode_decode_round_trip() {
    let h = Handles::new();
    let ids = encode(&h, "Alice can't jump");
    assert_eq!(ids, [44484, 460, 470, 4391]);
    let mut buf = vec![0 as std::ffi::c_char; 64];
    let mut len = 0;
    unsafe {
        assert_eq!(ns_vocab_decode(h.vocab, ids.as_ptr(), ids.len(), buf.as_mut_ptr(), buf.len(), &mut len), NsStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "Alice can't jump");
        assert_eq!(len, 16);
        assert_eq!(ns_vocab_decode(h.vocab, ids.as_ptr(), ids.len(), buf.as_mut_ptr(), 16, &mut len), NsStatus::BufferTooSmall);
        assert_eq!(len, 16);
    }
    assert!(encode(&h, "").is_empty());
}

#[test]
fn out_of_range_id_is_a_range_error() {
    let h = Handles::new();
    let mut buf = [0 as std::ffi::c_char; 8];
    let mut len = 0;
    let st = unsafe { ns_vocab_decode(h.vocab, [60000u32].as_ptr(), 1, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, NsStatus::Range);
    assert!(last_error().contains("60000"), "{}", last_error());
}

#[test]
fn null_arguments_are_reported() {
    let h = Handles::new();
    let mut len = 0;
    unsafe {
        assert_eq!(ns_vocab_encode(h.vocab, ptr::null(), ptr::null_mut(), 0, &mut len), NsStatus::NullArgument);
        assert!(last_error().contains("text"));
        assert_eq!(ns_vocab_bundled(ptr::null_mut()), NsStatus::NullArgument);
        ns_vocab_free(ptr::null_mut());
        ns_model_free(ptr::null_mut());
    }
}

#[test]
fn dims_and_hash() {
    let h = Handles::new();
    let mut dims = NsModelDims { n_layers: 0, n_heads: 0, d_model: 0, d_head: 0, d_mlp: 0, n_ctx: 0, vocab_size: 0 };
    let mut hash = [0 as std::ffi::c_char; 65];
    let mut len = 0;
    unsafe {
        assert_eq!(ns_model_dims(h.model, &mut dims), NsStatus::Ok);
        assert_eq!(ns_model_hash(h.model, hash.as_mut_ptr(), hash.len(), &mut len), NsStatus::Ok);
    }
    assert_eq!((dims.n_layers, dims.n_heads, dims.d_model, dims.vocab_size), (3, 4, 32, 50257));
    assert_eq!(len, 64);
    let expected = negascope::model::synth::synthetic_weights(negascope::model::synth::tiny_config(), 5)
        .unwrap()
        .content_hash;
    assert_eq!(unsafe { CStr::from_ptr(hash.as_ptr()) }.to_str().unwrap(), expected);
}

#[test]
fn nes_matches_the_library_and_span_difference() {
    let h = Handles::new();
    let (a, n, t) = (CString::new("Alice can").unwrap(), CString::new("Alice cannot").unwrap(), CString::new(" jump").unwrap());
    let mut score = f64::NAN;
    unsafe {
        assert_eq!(
            ns_model_nes(h.model, h.vocab, a.as_ptr(), n.as_ptr(), t.as_ptr(), ptr::null(), ptr::null(), 0, &mut score),
            NsStatus::Ok
        );
    }
    let (pa, pn, pt) = (encode(&h, "Alice can"), encode(&h, "Alice cannot"), encode(&h, " jump"));
    let (mut la, mut ln) = (0.0, 0.0);
    unsafe {
        assert_eq!(ns_model_span_logprob(h.model, pa.as_ptr(), pa.len(), pt.as_ptr(), pt.len(), &mut la), NsStatus::Ok);
        assert_eq!(ns_model_span_logprob(h.model, pn.as_ptr(), pn.len(), pt.as_ptr(), pt.len(), &mut ln), NsStatus::Ok);
    }
    assert_eq!(score, la - ln);
    assert!(la < 0.0 && ln < 0.0);

    // ablating heads changes the negated pass only
    let (layers, heads) = ([0u32, 1, 2], [0u32, 1, 3]);
    let mut ablated = f64::NAN;
    unsafe {
        assert_eq!(
            ns_model_nes(h.model, h.vocab, a.as_ptr(), n.as_ptr(), t.as_ptr(), layers.as_ptr(), heads.as_ptr(), 3, &mut ablated),
            NsStatus::Ok
        );
    }
    assert!(ablated.is_finite());
    assert_ne!(ablated, score);
}

#[test]
fn bad_head_and_empty_target_fail_cleanly() {
    let h = Handles::new();
    let (a, n) = (CString::new("Alice can").unwrap(), CString::new("Alice cannot").unwrap());
    let (t, empty) = (CString::new(" jump").unwrap(), CString::new("").unwrap());
    let mut out = 0.0;
    unsafe {
        let st = ns_model_nes(h.model, h.vocab, a.as_ptr(), n.as_ptr(), t.as_ptr(), [9u32].as_ptr(), [0u32].as_ptr(), 1, &mut out);
        assert_eq!(st, NsStatus::Range, "{}", last_error());
        let st = ns_model_nes(h.model, h.vocab, a.as_ptr(), n.as_ptr(), empty.as_ptr(), ptr::null(), ptr::null(), 0, &mut out);
        assert_eq!(st, NsStatus::Argument);
        let dup = ns_model_nes(h.model, h.vocab, a.as_ptr(), n.as_ptr(), t.as_ptr(), [0u32, 0].as_ptr(), [1u32, 1].as_ptr(), 2, &mut out);
        assert_eq!(dup, NsStatus::Argument);
    }
}

#[test]
fn load_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("none.safetensors").to_str().unwrap()).unwrap();
    let junk_path = dir.path().join("junk.safetensors");
    std::fs::write(&junk_path, b"not a checkpoint").unwrap();
    let junk = CString::new(junk_path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(ns_model_load(missing.as_ptr(), ptr::null(), &mut m), NsStatus::Io);
        assert!(last_error().contains("none.safetensors"));
        assert_eq!(ns_model_load(junk.as_ptr(), ptr::null(), &mut m), NsStatus::Parse);
    }
    assert!(m.is_null());
}

#[test]
fn saved_model_loads_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let w = negascope::model::synth::synthetic_weights(negascope::model::synth::tiny_config(), 2).unwrap();
    w.save(dir.path().join("model.safetensors")).unwrap();
    std::fs::write(dir.path().join("config.json"), w.config.to_hf_json().to_string()).unwrap();
    let p = CString::new(dir.path().join("model.safetensors").to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    let mut dims = NsModelDims { n_layers: 0, n_heads: 0, d_model: 0, d_head: 0, d_mlp: 0, n_ctx: 0, vocab_size: 0 };
    unsafe {
        assert_eq!(ns_model_load(p.as_ptr(), ptr::null(), &mut m), NsStatus::Ok, "{}", last_error());
        assert_eq!(ns_model_dims(m, &mut dims), NsStatus::Ok);
        ns_model_free(m);
    }
    assert_eq!(dims.n_layers, 3);
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ns_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
