/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef NEGASCOPE_H
#define NEGASCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_ARGUMENT = 1,
  NS_STATUS_INVALID_UTF8 = 2,
  NS_STATUS_BUFFER_TOO_SMALL = 3,
  NS_STATUS_PARSE = 4,
  NS_STATUS_INTEGRITY = 5,
  NS_STATUS_SHAPE = 6,
  NS_STATUS_RANGE = 7,
  NS_STATUS_ARGUMENT = 8,
  NS_STATUS_CONFLICT = 9,
  NS_STATUS_IO = 10,
  NS_STATUS_PANIC = 11,
  NS_STATUS_OTHER = 12,
} NsStatus;

// Model handle (read-only after creation, shareable across threads).
typedef struct NsModel NsModel;

// Tokenizer handle.
typedef struct NsVocab NsVocab;

// Architecture of a loaded model.
typedef struct NsModelDims {
  size_t n_layers;
  size_t n_heads;
  size_t d_model;
  size_t d_head;
  size_t d_mlp;
  size_t n_ctx;
  size_t vocab_size;
} NsModelDims;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *ns_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ns_version(void);

// The GPT-2 vocabulary compiled into the library.
//
// # Safety
// `out` must be a valid pointer to write a handle into.
enum NsStatus ns_vocab_bundled(struct NsVocab **out);

// Loads `vocab.json` and `merges.txt`.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum NsStatus ns_vocab_load(const char *vocab_path, const char *merges_path, struct NsVocab **out);

// # Safety
// `vocab` must come from `ns_vocab_*` and not be freed twice. Null is ignored.
void ns_vocab_free(struct NsVocab *vocab);

// Encodes UTF-8 `text` into token ids.
//
// # Safety
// `vocab` must be a live handle, `text` NUL-terminated, `ids` writable for
// `capacity` elements and `len` writable.
enum NsStatus ns_vocab_encode(const struct NsVocab *vocab,
                              const char *text,
                              uint32_t *ids,
                              size_t capacity,
                              size_t *len);

// Decodes ids into UTF-8 text followed by a NUL. `*len` excludes the NUL;
// `capacity` must cover it.
//
// # Safety
// `ids` must hold `n_ids` elements; `buf` must be writable for `capacity`
// bytes and `len` writable.
enum NsStatus ns_vocab_decode(const struct NsVocab *vocab,
                              const uint32_t *ids,
                              size_t n_ids,
                              char *buf,
                              size_t capacity,
                              size_t *len);

// Loads a safetensors checkpoint. `config_path` may be null, in which case
// a `config.json` beside the checkpoint is used if present, else GPT-2 Small.
//
// # Safety
// Strings must be NUL-terminated (or null where allowed); `out` writable.
enum NsStatus ns_model_load(const char *checkpoint_path,
                            const char *config_path,
                            struct NsModel **out);

// A seeded random model: GPT-2 Small shaped, or a three-layer four-head
// model when `tiny` is nonzero.
//
// # Safety
// `out` must be writable.
enum NsStatus ns_model_synthetic(int32_t tiny, uint64_t seed, struct NsModel **out);

// # Safety
// `model` must come from `ns_model_*` and not be freed twice. Null is ignored.
void ns_model_free(struct NsModel *model);

// # Safety
// `model` must be live and `out` writable.
enum NsStatus ns_model_dims(const struct NsModel *model, struct NsModelDims *out);

// Hex SHA-256 of the checkpoint, NUL-terminated (65 bytes with the NUL).
//
// # Safety
// `buf` writable for `capacity` bytes; `len` writable.
enum NsStatus ns_model_hash(const struct NsModel *model, char *buf, size_t capacity, size_t *len);

// Sum of `log P(target_i | prefix, target_<i)` in nats, teacher forced.
//
// # Safety
// `prefix`/`target` must hold the given number of ids; `out` writable.
enum NsStatus ns_model_span_logprob(const struct NsModel *model,
                                    const uint32_t *prefix,
                                    size_t n_prefix,
                                    const uint32_t *target,
                                    size_t n_target,
                                    double *out);

// NES = log P(target | affirmative) − log P(target | negated), in nats.
//
// `layers`/`heads` list `n_heads` heads whose slices are zeroed at the last
// negated-prefix position; pass `n_heads = 0` for the baseline score.
//
// # Safety
// Strings NUL-terminated; `layers` and `heads` hold `n_heads` elements;
// `out` writable.
enum NsStatus ns_model_nes(const struct NsModel *model,
                           const struct NsVocab *vocab,
                           const char *affirmative,
                           const char *negated,
                           const char *target,
                           const uint32_t *layers,
                           const uint32_t *heads,
                           size_t n_heads,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEGASCOPE_H */
