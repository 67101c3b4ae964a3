/* sentifuse — multimodal sentiment classification toolkit, C interface.
 *
 * Every fallible call returns an sf_status; SF_OK means success and any
 * other value is an error whose human-readable message is available from
 * sf_last_error() on the same thread. Output parameters are written only
 * on success. Opaque handles are created and released by the matching
 * *_free function; strings returned through char** out-parameters are
 * heap-allocated and must be released with sf_string_free.
 */
#ifndef SENTIFUSE_H
#define SENTIFUSE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sf_status {
  SF_OK = 0,
  SF_ERR_DIMENSION = 1,    /* shape/extent mismatch */
  SF_ERR_CONTRACT = 2,     /* precondition violated by the caller */
  SF_ERR_PARSE = 3,        /* malformed file content */
  SF_ERR_LOOKUP = 4,       /* referenced id/token missing */
  SF_ERR_CONFIG = 5,       /* invalid configuration */
  SF_ERR_DEGENERATE = 6,   /* degenerate numeric input */
  SF_ERR_IO = 7,           /* file system failure */
  SF_ERR_SPEC = 8,         /* inconsistent model description */
  SF_ERR_OUT_OF_RANGE = 9, /* index outside its valid range */
  SF_ERR_INTERNAL = 10
} sf_status;

/* Message of the most recent failure on this thread ("" when none). The
 * pointer stays valid until the next failing call on the same thread. */
const char* sf_last_error(void);

/* Library version string, e.g. "1.0.0". */
const char* sf_version(void);

/* Releases a string returned through a char** out-parameter. NULL is ok. */
void sf_string_free(char* s);

/* ---------------------------------------------------------------- */
/* Datasets                                                          */
/* ---------------------------------------------------------------- */

typedef struct sf_dataset sf_dataset;

/* Loads a JSONL dataset. features_path may be NULL; when given it names a
 * binary feature file (with its id index alongside) used to resolve
 * records that reference features by id. */
sf_status sf_dataset_load(const char* jsonl_path, const char* features_path,
                          sf_dataset** out);
sf_status sf_dataset_save(const sf_dataset* d, const char* jsonl_path);
void sf_dataset_free(sf_dataset* d);
size_t sf_dataset_count(const sf_dataset* d);

/* In-place pipeline steps. */
sf_status sf_dataset_filter_min_words(sf_dataset* d, size_t min_words);
sf_status sf_dataset_drop_neutral(sf_dataset* d);
sf_status sf_dataset_balance(sf_dataset* d, uint64_t seed);

/* Seeded shuffle-and-split into three new datasets; fractions must sum
 * to 1. The input dataset is left untouched. */
sf_status sf_dataset_split(const sf_dataset* d, double train_frac,
                           double val_frac, double test_frac, uint64_t seed,
                           sf_dataset** train_out, sf_dataset** val_out,
                           sf_dataset** test_out);

/* ---------------------------------------------------------------- */
/* Text pipeline                                                     */
/* ---------------------------------------------------------------- */

typedef struct sf_vocabulary sf_vocabulary;

/* Builds a vocabulary over a dataset's tokenized text (most frequent
 * first; max_tokens 0 means unlimited). */
sf_status sf_vocabulary_build(const sf_dataset* d, size_t max_tokens,
                              sf_vocabulary** out);
sf_status sf_vocabulary_save(const sf_vocabulary* v, const char* path);
sf_status sf_vocabulary_load(const char* path, sf_vocabulary** out);
void sf_vocabulary_free(sf_vocabulary* v);
/* Total index count including the padding and unknown entries. */
size_t sf_vocabulary_size(const sf_vocabulary* v);

/* Tokenizes and encodes every record's text into its fixed-length id
 * sequence, in place. */
sf_status sf_dataset_encode(sf_dataset* d, const sf_vocabulary* v);

/* ---------------------------------------------------------------- */
/* Word embeddings                                                   */
/* ---------------------------------------------------------------- */

typedef struct sf_embeddings sf_embeddings;

/* Loads a GloVe-style "token v1 v2 ..." table with the given dimension. */
sf_status sf_embeddings_load(const char* path, size_t dim,
                             sf_embeddings** out);
void sf_embeddings_free(sf_embeddings* e);
size_t sf_embeddings_count(const sf_embeddings* e);

/* ---------------------------------------------------------------- */
/* Models                                                            */
/* ---------------------------------------------------------------- */

typedef struct sf_model sf_model;

/* JSON spec of a named architecture preset, for the caller to patch
 * (e.g. vocab_size, input_dim) before sf_model_build. */
sf_status sf_preset_spec(const char* name, char** spec_json_out);

/* Builds a freshly initialized model from a JSON spec, deterministic in
 * the seed. */
sf_status sf_model_build(const char* spec_json, uint64_t seed,
                         sf_model** out);
sf_status sf_model_save(const sf_model* m, const char* path);
sf_status sf_model_load(const char* path, sf_model** out);
void sf_model_free(sf_model* m);
sf_status sf_model_spec_json(const sf_model* m, char** spec_json_out);

/* Same architecture warm-started with a fresh linear projection head. */
sf_status sf_model_to_embedding_head(const sf_model* m, size_t proj_dim,
                                     uint64_t seed, sf_model** out);

/* Computes the trained text model's penultimate vector for every record
 * (from its encoded ids) and attaches it as the record's text features,
 * ready for fusion training. */
sf_status sf_dataset_attach_text_features(sf_dataset* d,
                                          const sf_model* text_model);

/* ---------------------------------------------------------------- */
/* Training, evaluation, projection, gradient checking               */
/* ---------------------------------------------------------------- */

/* Trains the model in place on `train` (final-epoch parameters stay in
 * the model). config_json uses the TrainConfig keys (epochs, batch_size,
 * loss, optimizer, lr, momentum, rho, epsilon, seed, eval_every_epoch);
 * "{}" takes every default. val may be NULL. label_table is required for
 * embedding-projection heads and ignored otherwise. On success,
 * *history_json_out (optional) receives
 *   {"best_epoch": N, "history": [{"epoch":1,"train_loss":...}, ...]}
 * and *best_out (optional) receives the best-epoch snapshot as a new
 * model handle. */
sf_status sf_train(sf_model* m, const sf_dataset* train,
                   const sf_dataset* val, const char* config_json,
                   const sf_embeddings* label_table, char** history_json_out,
                   sf_model** best_out);

/* Confusion-matrix metrics of the model over labeled data:
 *   {"accuracy": x, "per_class": {label: x}, "confusion": [[n]]} */
sf_status sf_evaluate(const sf_model* m, const sf_dataset* data,
                      const sf_embeddings* label_table,
                      char** metrics_json_out);

/* 2-D principal-component view of the model's representation of every
 * record (projection output for embedding heads, the vector below the
 * softmax otherwise) as CSV with header "x,y,folder,label". */
sf_status sf_project(const sf_model* m, const sf_dataset* data,
                     char** csv_out);

/* Runs the finite-difference gradient verification suite over the given
 * number of random seeds (0 picks the standard count). *passed_out is 1
 * when every case is within tolerance; *report_json_out (optional) gets
 * the per-case report. The call itself only fails on internal errors, not
 * on a failing check. */
sf_status sf_gradcheck(uint32_t seeds, char** report_json_out,
                       int* passed_out);

/* Test hook: corrupts the tanh backward rule (nonzero enables) so a
 * deliberate failure path of sf_gradcheck can be exercised. */
void sf_testing_corrupt_tanh(int enable);

#ifdef __cplusplus
}
#endif

#endif /* SENTIFUSE_H */
