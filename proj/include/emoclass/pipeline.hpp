#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emoclass/artifact.hpp"
#include "emoclass/corpus.hpp"
#include "emoclass/metrics.hpp"
#include "emoclass/optimize.hpp"
#include "json.hpp"

namespace emoclass {

// End-to-end run settings. JSON shape:
//   {"corpus": path, "format": "csv"|"jsonl", "embeddings": path,
//    "stopwords": path, "abbreviations": path, "emoticons": path,
//    "output_dir": path,
//    "preprocess": {"lowercase": b, "strip_html": b, "strip_urls": b,
//                   "strip_punctuation": b, "preserve_emoticons": b,
//                   "normalizer": name},
//    "features": {"type": "bow"|"embedding", "max_len": n, "min_freq": n, "dim": n},
//    "split": {"test_frac": f, "val_frac": f, "stratified": b, "seed": n}}
// Every key is optional except "corpus"; unknown keys are rejected.
struct PipelineConfig {
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::csv;
  std::string embeddings_path;     // word2vec text or a saved model; empty = random init
  std::string stopwords_path;      // optional resource files
  std::string abbreviations_path;
  std::string emoticons_path;
  std::string output_dir = "out";

  bool lowercase = true;
  bool strip_html = true;
  bool strip_urls = true;
  bool strip_punctuation = true;
  bool preserve_emoticons = true;
  Normalizer normalizer = Normalizer::lemma_then_stem;

  FeatureSettings features;

  double test_frac = 0.20;
  double val_frac = 0.10;
  bool stratified = true;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);

  // Checks fractions, feature settings, and that every referenced file exists.
  void validate() const;

  // Preprocess settings with the resource files loaded in (built-in emoticon
  // lexicon when no file is given).
  PreprocessConfig resolve_preprocess() const;
};

PipelineConfig load_pipeline_config(const std::string& path);

// Architecture knobs that may override the per-kind defaults.
struct ArchOverrides {
  std::optional<std::size_t> hidden_units;
  std::optional<std::size_t> fc_units;
  std::optional<std::size_t> conv_filters;
  std::optional<double> dropout;

  void apply(NeuralArchitecture& arch) const;
  static ArchOverrides from_json(const nlohmann::json& j);
};

struct TuneOptions {
  std::string model_name = "logreg";  // classical algorithm, architecture, or "deep"
  std::string grid_path;
  std::size_t folds = 10;
  TrainConfig train;  // epochs/optimizer for the deep recipe
  ArchOverrides arch;

  // {"model": s, "grid": s, "folds": n, "train": {...}, "arch": {...}}
  static TuneOptions from_json(const nlohmann::json& j);
};

struct TrainOptions {
  std::string model_name = "bigru";  // classical algorithm, architecture, or "ensemble"
  TrainConfig train;
  nlohmann::json params = nlohmann::json::object();  // classical hyper-parameters
  ArchOverrides arch;
  std::size_t repeats = 1;  // extra runs report accuracy mean/std; first run is saved
  bool svg = false;
  std::string artifact_path;  // empty = <output_dir>/model_<name>.bin

  // {"model": s, "train": {...}, "params": {...}, "arch": {...}, "repeats": n,
  //  "svg": b, "artifact": s}
  static TrainOptions from_json(const nlohmann::json& j);
};

// Converts raw per-label scores into rows that sum to one: decision values
// (svm) go through a softmax; weight-like rows (everything else) are
// renormalized, with all-zero rows falling back to uniform.
DenseMatrix scores_to_probabilities(Algorithm algorithm, const DenseMatrix& scores);

// Tokenize + vocabulary inventory over the whole corpus. Writes tokens.jsonl
// and vocabulary.json under output_dir; returns a summary with class counts.
nlohmann::json run_preprocess(const PipelineConfig& config);

// Hyper-parameter search. Classical models: k-fold cross-validated grid
// search on the pooled train+validation documents. Deep models ("deep" tunes
// an lstm): trains one model per (batch_size, learning_rate) cell and scores
// the best validation accuracy reached. Writes cv_<model>.csv and
// best_params_<model>.json under output_dir.
nlohmann::json run_tune(const PipelineConfig& config, const TuneOptions& options);

// Trains one model and saves it with everything needed for inference. The
// vocabulary comes from the training split only. Classical models fit on the
// pooled train+validation rows; neural models train on the training split
// with per-epoch validation monitoring (learning_curves.csv; ensemble members
// under bilstm/ and bigru/ subdirectories). The summary reports test accuracy
// (mean/std across repeats).
nlohmann::json run_train(const PipelineConfig& config, const TrainOptions& options);

struct EvaluationResult {
  ClassificationReport report;
  ConfusionMatrix confusion;
  RocSet roc;
  nlohmann::json summary;
};

// Scores a saved model on one split ("train", "validation", "test", "all") of
// the configured corpus, using the model's own preprocessing, vocabulary, and
// feature settings. write_files emits report.json, confusion.csv, and the
// one-vs-rest ROC CSVs (plus charts when svg is set) under output_dir. The
// model file is never modified.
EvaluationResult evaluate_artifact(const PipelineConfig& config, const std::string& artifact_path,
                                   const std::string& split_name, bool svg, bool write_files);

nlohmann::json run_evaluate(const PipelineConfig& config, const std::string& artifact_path,
                            const std::string& split_name, bool svg);

// Evaluate plus the fixed-width per-label table, rendered for humans.
std::string run_report(const PipelineConfig& config, const std::string& artifact_path,
                       const std::string& split_name);

// One JSON line: {"label": ..., "probabilities": {label: p, ...}}.
nlohmann::json predict_with_bundle(const ModelBundle& bundle, const std::string& text);
nlohmann::json run_predict(const std::string& artifact_path, const std::string& text);

// Descriptive facts about a saved model (kind, display name, vocabulary size,
// feature settings, training metadata).
nlohmann::json bundle_info(const ModelBundle& bundle);

// Accuracy table over several saved models on the same split, one row per
// model, sorted as given.
std::string run_compare(const PipelineConfig& config,
                        const std::vector<std::string>& artifact_paths,
                        const std::string& split_name);

}  // namespace emoclass
