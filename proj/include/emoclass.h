/* C interface to the emotion-classification toolkit.
 *
 * Every function that can fail returns an emo_status: EMO_OK on success,
 * otherwise an error class, with a human-readable message available from
 * emo_last_error() (thread-local, valid until the next failing call on the
 * same thread). Strings returned through char** out-parameters are
 * malloc-allocated JSON or text; release them with emo_string_free().
 *
 * Configuration and option payloads are JSON documents; the schemas are
 * documented next to each function.
 */
#ifndef EMOCLASS_H
#define EMOCLASS_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emo_status {
  EMO_OK = 0,          /* success */
  EMO_ERR_USAGE = 1,   /* invalid arguments, options, or configuration */
  EMO_ERR_DATA = 2,    /* missing/corrupt files or malformed data */
  EMO_ERR_NUMERIC = 3  /* non-finite loss or other numeric failure */
} emo_status;

/* Library version, e.g. "1.0.0". Static storage; do not free. */
const char* emo_version(void);

/* Message for the most recent failure on this thread ("" when none). */
const char* emo_last_error(void);

/* Releases a string returned through any char** out-parameter. NULL is ok. */
void emo_string_free(char* s);

/* Pipeline configuration JSON (shared by the commands below):
 *   {"corpus": path, "format": "csv"|"jsonl", "embeddings": path,
 *    "stopwords": path, "abbreviations": path, "emoticons": path,
 *    "output_dir": path,
 *    "preprocess": {"lowercase": b, "strip_html": b, "strip_urls": b,
 *                   "strip_punctuation": b, "preserve_emoticons": b,
 *                   "normalizer": "none"|"stem"|"lemma"|"lemma_then_stem"},
 *    "features": {"type": "bow"|"embedding", "max_len": n, "min_freq": n,
 *                 "dim": n},
 *    "split": {"test_frac": f, "val_frac": f, "stratified": b, "seed": n}}
 * All keys optional except "corpus"; unknown keys are rejected.
 */

/* Tokenizes the corpus and writes tokens.jsonl + vocabulary.json under
 * output_dir. *out_summary_json receives counts and file paths. */
emo_status emo_preprocess(const char* config_json, char** out_summary_json);

/* Hyper-parameter search. options_json:
 *   {"model": name, "grid": path, "folds": n,
 *    "train": {"batch_size": n, "learning_rate": f, "epochs": n,
 *              "optimizer": "adam"|"sgd", "seed": n},
 *    "arch": {"hidden_units": n, "fc_units": n, "conv_filters": n,
 *             "dropout": f}}
 * Classical models run k-fold cross-validated grid search; "deep" (or an
 * architecture name) sweeps batch_size x learning_rate. Writes
 * cv_<model>.csv and best_params_<model>.json under output_dir. */
emo_status emo_tune(const char* config_json, const char* options_json,
                    char** out_summary_json);

/* Trains one model and saves a self-contained artifact. options_json:
 *   {"model": name ("logreg", ..., "cnn", ..., "bigru", "ensemble"),
 *    "train": {... as above ...}, "params": {classical hyper-parameters},
 *    "arch": {... as above ...}, "repeats": n, "svg": b, "artifact": path}
 * The summary reports split sizes and test accuracy. */
emo_status emo_train(const char* config_json, const char* options_json,
                     char** out_summary_json);

/* Scores a saved model on one split ("train", "validation", "test", "all").
 * Writes report.json, confusion.csv, and ROC CSVs (charts when svg != 0)
 * under output_dir; never modifies the artifact. */
emo_status emo_evaluate(const char* config_json, const char* artifact_path,
                        const char* split, int svg, char** out_summary_json);

/* Like emo_evaluate (with charts), but *out_text receives the fixed-width
 * per-label precision/recall/f1/support table. */
emo_status emo_report(const char* config_json, const char* artifact_path,
                      const char* split, char** out_text);

/* Accuracy table over several saved models on the same split. */
emo_status emo_compare(const char* config_json, const char* const* artifact_paths,
                       size_t artifact_count, const char* split, char** out_table);

/* A loaded model handle for repeated prediction. */
typedef struct emo_model emo_model;

emo_status emo_model_open(const char* path, emo_model** out_model);
void emo_model_close(emo_model* model);

/* {"kind": ..., "model": ..., "vocabulary_size": n, "features": {...},
 *  "created_at": ..., "corpus_fingerprint": ...} */
emo_status emo_model_info(const emo_model* model, char** out_json);

/* One JSON line: {"label": ..., "probabilities": {"anger": p, "fear": p,
 * "joy": p, "sadness": p}}; the probabilities sum to 1. */
emo_status emo_model_predict(const emo_model* model, const char* text,
                             char** out_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EMOCLASS_H */
