#ifndef SORTNETC_H
#define SORTNETC_H

/* Generated from the Rust sources by cbindgen; edit there, not here. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a fallible call.
typedef enum SncStatus {
  SNC_STATUS_OK = 0,
  // A required pointer argument was null.
  SNC_STATUS_NULL_ARGUMENT = 1,
  // Inputs were rejected before any work started.
  SNC_STATUS_INVALID_ARGUMENT = 2,
  // A string argument was not valid UTF-8.
  SNC_STATUS_INVALID_UTF8 = 3,
  // A buffer length did not match what the handle expects.
  SNC_STATUS_LENGTH_MISMATCH = 4,
  // The operation itself failed; see `snc_last_error`.
  SNC_STATUS_FAILURE = 5,
} SncStatus;

// Which construction `snc_sortnet_new` uses.
typedef enum SncNetKind {
  // Hand-minimal networks, 2 to 4 wires.
  SNC_NET_KIND_OPTIMAL = 0,
  // Odd-even mergesort, any width.
  SNC_NET_KIND_MERGE = 1,
  // Two alternating layers; x applications sort x wires.
  SNC_NET_KIND_BRICK = 2,
} SncNetKind;

// Opaque dense-model handle.
typedef struct SncModel SncModel;

// Opaque sorting-network handle.
typedef struct SncSortNet SncSortNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; never freed by the caller.
const char *snc_version(void);

// Message for the most recent failure on this thread. Valid until the
// next failing call on the same thread; never freed by the caller.
const char *snc_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `text` must come from this library and not be freed twice.
void snc_string_free(char *text);

// Builds a sorting network and stores the new handle in `out`.
//
// # Safety
// `out` must point to writable memory for one pointer.
enum SncStatus snc_sortnet_new(enum SncNetKind kind, size_t wires, struct SncSortNet **out);

// Parses a network from its JSON form.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum SncStatus snc_sortnet_from_json(const char *json, struct SncSortNet **out);

// Serializes the network; the caller frees the result. Null on error.
//
// # Safety
// `net` must be a live handle from this library.
char *snc_sortnet_to_json(const struct SncSortNet *net);

// Releases a network handle.
//
// # Safety
// `net` must come from this library and not be freed twice.
void snc_sortnet_free(struct SncSortNet *net);

// Wire count, or 0 for a null handle.
//
// # Safety
// `net` must be a live handle or null.
size_t snc_sortnet_wires(const struct SncSortNet *net);

// Layer count, or 0 for a null handle.
//
// # Safety
// `net` must be a live handle or null.
size_t snc_sortnet_depth(const struct SncSortNet *net);

// Comparator count, or 0 for a null handle.
//
// # Safety
// `net` must be a live handle or null.
size_t snc_sortnet_comparators(const struct SncSortNet *net);

// Runs the network over `values` in place, `applications` times.
//
// # Safety
// `values` must point to `len` writable doubles.
enum SncStatus snc_sortnet_apply(const struct SncSortNet *net,
                                 double *values,
                                 size_t len,
                                 size_t applications);

// Checks the sorting property after `applications` passes and writes
// the verdict to `pass`. Widths above `cap` fall back to randomized
// checking driven by `seed`.
//
// # Safety
// `pass` must be writable.
enum SncStatus snc_sortnet_verify(const struct SncSortNet *net,
                                  size_t applications,
                                  size_t cap,
                                  uint64_t seed,
                                  bool *pass);

// Compiles a network into a dense ReLU model handle.
//
// # Safety
// `out` must be writable.
enum SncStatus snc_compile(const struct SncSortNet *net, bool prune, struct SncModel **out);

// Parses a model from its JSON form.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum SncStatus snc_model_from_json(const char *json, struct SncModel **out);

// Serializes the model; the caller frees the result. Null on error.
//
// # Safety
// `model` must be a live handle from this library.
char *snc_model_to_json(const struct SncModel *model);

// Releases a model handle.
//
// # Safety
// `model` must come from this library and not be freed twice.
void snc_model_free(struct SncModel *model);

// Runs the model on `input` and writes the result to `output`. Both
// lengths must match the model exactly.
//
// # Safety
// `input` must hold `input_len` doubles; `output` must have room for
// `output_len`.
enum SncStatus snc_model_forward(const struct SncModel *model,
                                 const double *input,
                                 size_t input_len,
                                 double *output,
                                 size_t output_len);

// Parameter count, with or without biases. 0 for a null handle.
//
// # Safety
// `model` must be a live handle or null.
uint64_t snc_model_parameters(const struct SncModel *model, bool weights_only);

// Closed-form weight counts for sorting every patch code of an image.
// `depth` below 0 selects the information-theoretic default.
//
// # Safety
// `feedforward` and `iterative` must be writable.
enum SncStatus snc_estimate(size_t image_side,
                            size_t patch_side,
                            bool attention,
                            int64_t depth,
                            uint64_t *feedforward,
                            uint64_t *iterative);

// Encodes a row-major 0/1 pixel grid as one real number. `mantissa` is
// the bit budget to emulate; 0 keeps every bit.
//
// # Safety
// `bits` must hold `side * side` bytes; `value` must be writable.
enum SncStatus snc_patch_encode(const uint8_t *bits, size_t side, uint32_t mantissa, double *value);

// Whether every patch of this size keeps a distinct code under the
// given bit budget (0 keeps every bit).
//
// # Safety
// `injective` must be writable.
enum SncStatus snc_codes_injective(size_t side, uint32_t mantissa, bool *injective);

// Distance of the level-`levels` compression factor above 1 for a
// patch alphabet of the given side.
//
// # Safety
// `estimate` must be writable.
enum SncStatus snc_locality_estimate(size_t patch_side, size_t levels, double *estimate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SORTNETC_H */
