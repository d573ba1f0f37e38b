#include "emoclass/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <utility>

#include "emoclass/features.hpp"
#include "emoclass/textprep.hpp"
#include "emoclass/util.hpp"

namespace emoclass {

namespace {

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw DataError(std::string(what) + " file not found: " + path);
  }
}

void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw UsageError("unknown " + std::string(where) + " key: " + it.key());
    }
  }
}

}  // namespace

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  j["corpus"] = corpus_path;
  j["format"] = corpus_format == CorpusFormat::csv ? "csv" : "jsonl";
  j["embeddings"] = embeddings_path;
  j["stopwords"] = stopwords_path;
  j["abbreviations"] = abbreviations_path;
  j["emoticons"] = emoticons_path;
  j["output_dir"] = output_dir;
  j["preprocess"] = {{"lowercase", lowercase},
                     {"strip_html", strip_html},
                     {"strip_urls", strip_urls},
                     {"strip_punctuation", strip_punctuation},
                     {"preserve_emoticons", preserve_emoticons},
                     {"normalizer", normalizer_name(normalizer)}};
  j["features"] = features.to_json();
  j["split"] = {{"test_frac", test_frac},
                {"val_frac", val_frac},
                {"stratified", stratified},
                {"seed", seed}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("pipeline config must be a JSON object");
  reject_unknown_keys(j,
                      {"corpus", "format", "embeddings", "stopwords", "abbreviations",
                       "emoticons", "output_dir", "preprocess", "features", "split"},
                      "config");
  PipelineConfig c;
  if (j.contains("corpus")) c.corpus_path = j.at("corpus").get<std::string>();
  if (j.contains("format")) c.corpus_format = parse_corpus_format(j.at("format").get<std::string>());
  if (j.contains("embeddings")) c.embeddings_path = j.at("embeddings").get<std::string>();
  if (j.contains("stopwords")) c.stopwords_path = j.at("stopwords").get<std::string>();
  if (j.contains("abbreviations")) c.abbreviations_path = j.at("abbreviations").get<std::string>();
  if (j.contains("emoticons")) c.emoticons_path = j.at("emoticons").get<std::string>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("preprocess")) {
    const nlohmann::json& p = j.at("preprocess");
    reject_unknown_keys(p,
                        {"lowercase", "strip_html", "strip_urls", "strip_punctuation",
                         "preserve_emoticons", "normalizer"},
                        "preprocess");
    if (p.contains("lowercase")) c.lowercase = p.at("lowercase").get<bool>();
    if (p.contains("strip_html")) c.strip_html = p.at("strip_html").get<bool>();
    if (p.contains("strip_urls")) c.strip_urls = p.at("strip_urls").get<bool>();
    if (p.contains("strip_punctuation")) c.strip_punctuation = p.at("strip_punctuation").get<bool>();
    if (p.contains("preserve_emoticons"))
      c.preserve_emoticons = p.at("preserve_emoticons").get<bool>();
    if (p.contains("normalizer")) c.normalizer = parse_normalizer(p.at("normalizer").get<std::string>());
  }
  if (j.contains("features")) c.features = FeatureSettings::from_json(j.at("features"));
  if (j.contains("split")) {
    const nlohmann::json& s = j.at("split");
    reject_unknown_keys(s, {"test_frac", "val_frac", "stratified", "seed"}, "split");
    if (s.contains("test_frac")) c.test_frac = s.at("test_frac").get<double>();
    if (s.contains("val_frac")) c.val_frac = s.at("val_frac").get<double>();
    if (s.contains("stratified")) c.stratified = s.at("stratified").get<bool>();
    if (s.contains("seed")) c.seed = s.at("seed").get<std::uint64_t>();
  }
  return c;
}

void PipelineConfig::validate() const {
  if (corpus_path.empty()) throw UsageError("config needs a corpus path");
  require_file(corpus_path, "corpus");
  if (!embeddings_path.empty()) require_file(embeddings_path, "embeddings");
  if (!stopwords_path.empty()) require_file(stopwords_path, "stopwords");
  if (!abbreviations_path.empty()) require_file(abbreviations_path, "abbreviations");
  if (!emoticons_path.empty()) require_file(emoticons_path, "emoticons");
  if (output_dir.empty()) throw UsageError("output_dir must not be empty");
  if (!(test_frac >= 0.0 && test_frac < 1.0)) throw UsageError("test_frac must be in [0, 1)");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) throw UsageError("val_frac must be in [0, 1)");
  features.validate();
}

PreprocessConfig PipelineConfig::resolve_preprocess() const {
  PreprocessConfig p;
  p.lowercase = lowercase;
  p.strip_html = strip_html;
  p.strip_urls = strip_urls;
  p.strip_punctuation = strip_punctuation;
  p.preserve_emoticons = preserve_emoticons;
  p.normalizer = normalizer;
  if (!stopwords_path.empty()) p.stopwords = load_stopwords(stopwords_path);
  if (!abbreviations_path.empty()) p.abbreviations = load_abbreviations(abbreviations_path);
  p.emoticons = emoticons_path.empty() ? PreprocessConfig::default_emoticons()
                                       : load_emoticons(emoticons_path);
  return p;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse config " + path + ": " + e.what());
  }
  return PipelineConfig::from_json(j);
}

void ArchOverrides::apply(NeuralArchitecture& arch) const {
  if (hidden_units) arch.hidden_units = *hidden_units;
  if (fc_units) arch.fc_units = *fc_units;
  if (conv_filters) arch.conv_filters = *conv_filters;
  if (dropout) arch.dropout = *dropout;
}

ArchOverrides ArchOverrides::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("arch overrides must be a JSON object");
  reject_unknown_keys(j, {"hidden_units", "fc_units", "conv_filters", "dropout"}, "arch");
  ArchOverrides a;
  if (j.contains("hidden_units")) a.hidden_units = j.at("hidden_units").get<std::size_t>();
  if (j.contains("fc_units")) a.fc_units = j.at("fc_units").get<std::size_t>();
  if (j.contains("conv_filters")) a.conv_filters = j.at("conv_filters").get<std::size_t>();
  if (j.contains("dropout")) a.dropout = j.at("dropout").get<double>();
  return a;
}

TuneOptions TuneOptions::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("tune options must be a JSON object");
  reject_unknown_keys(j, {"model", "grid", "folds", "train", "arch"}, "tune options");
  TuneOptions o;
  if (j.contains("model")) o.model_name = j.at("model").get<std::string>();
  if (j.contains("grid")) o.grid_path = j.at("grid").get<std::string>();
  if (j.contains("folds")) o.folds = j.at("folds").get<std::size_t>();
  if (j.contains("train")) o.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("arch")) o.arch = ArchOverrides::from_json(j.at("arch"));
  return o;
}

TrainOptions TrainOptions::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("train options must be a JSON object");
  reject_unknown_keys(j, {"model", "train", "params", "arch", "repeats", "svg", "artifact"},
                      "train options");
  TrainOptions o;
  if (j.contains("model")) o.model_name = j.at("model").get<std::string>();
  if (j.contains("train")) o.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw UsageError("params must be a JSON object");
    o.params = j.at("params");
  }
  if (j.contains("arch")) o.arch = ArchOverrides::from_json(j.at("arch"));
  if (j.contains("repeats")) o.repeats = j.at("repeats").get<std::size_t>();
  if (j.contains("svg")) o.svg = j.at("svg").get<bool>();
  if (j.contains("artifact")) o.artifact_path = j.at("artifact").get<std::string>();
  return o;
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> tokenize_docs(const std::vector<LabeledDocument>& docs,
                                                    const PreprocessConfig& pre) {
  std::vector<std::vector<std::string>> out(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) {
    out[i] = preprocess_text(docs[i].text, docs[i].id, pre).tokens;
  });
  return out;
}

std::vector<int> labels_of(const std::vector<LabeledDocument>& docs) {
  std::vector<int> y;
  y.reserve(docs.size());
  for (const LabeledDocument& d : docs) y.push_back(static_cast<int>(d.label));
  return y;
}

std::vector<LabeledDocument> pick_split(const DataSplit& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "validation") return s.validation;
  if (name == "test") return s.test;
  if (name == "all") {
    std::vector<LabeledDocument> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    return all;
  }
  throw UsageError("unknown split: " + name + " (use train, validation, test, or all)");
}

// Embedding rows for `vocab`, from the configured source: a word2vec text
// file, a saved model (reusing its fine-tuned rows by token), or random
// initialization. Rows for tokens the source lacks are Uniform(-0.25, 0.25).
EmbeddingTable resolve_embedding(const PipelineConfig& config, const Vocabulary& vocab,
                                 std::uint64_t seed, nlohmann::json* info) {
  const std::size_t dim = config.features.dim;
  if (config.embeddings_path.empty()) {
    if (info) *info = {{"source", "random"}};
    return EmbeddingTable::random(vocab, dim, mix_seed(seed, 0xE3BEDull));
  }
  if (is_artifact_file(config.embeddings_path)) {
    ModelBundle donor = load_bundle(config.embeddings_path);
    EmbeddingTable donor_table;
    if (!donor.members.empty()) {
      const Tensor emb = donor.members[0].param("embedding");
      donor_table = EmbeddingTable(emb.shape()[0], emb.shape()[1]);
      donor_table.values() = emb.values();
    } else if (donor.embedding_table.has_value()) {
      donor_table = *donor.embedding_table;
    } else {
      throw UsageError("model has no embedding rows to reuse: " + config.embeddings_path);
    }
    if (donor_table.dim() != dim) {
      throw UsageError("embedding dim mismatch: model holds " +
                       std::to_string(donor_table.dim()) + "-wide rows, config wants " +
                       std::to_string(dim));
    }
    EmbeddingTable table(vocab.size(), dim);
    Rng rng(mix_seed(seed, 0xE3BEDull));
    std::int64_t found = 0;
    std::int64_t missing = 0;
    for (std::size_t r = 1; r < table.rows(); ++r) {
      const std::int32_t id = static_cast<std::int32_t>(r);
      std::int32_t donor_id = id == Vocabulary::kUnkId
                                  ? Vocabulary::kUnkId
                                  : donor.vocabulary.id(vocab.token(id));
      if (id == Vocabulary::kUnkId || donor_id != Vocabulary::kUnkId) {
        const double* src = donor_table.row(static_cast<std::size_t>(donor_id));
        std::copy(src, src + dim, table.row(r));
        if (id != Vocabulary::kUnkId) ++found;
      } else {
        for (std::size_t d = 0; d < dim; ++d) table.row(r)[d] = rng.uniform(-0.25, 0.25);
        ++missing;
      }
    }
    if (info) *info = {{"source", "model"}, {"found", found}, {"missing", missing}};
    return table;
  }
  EmbeddingCoverage coverage;
  EmbeddingTable table = EmbeddingTable::from_word2vec(vocab, config.embeddings_path,
                                                       mix_seed(seed, 0xE3BEDull), &coverage);
  if (table.dim() != dim) {
    throw UsageError("embedding file is " + std::to_string(table.dim()) +
                     "-dimensional, config wants " + std::to_string(dim));
  }
  if (info) {
    *info = {{"source", "word2vec"}, {"found", coverage.found}, {"missing", coverage.missing}};
  }
  return table;
}

DenseMatrix classical_features(const std::vector<std::vector<std::string>>& tokens,
                               const Vocabulary& vocab, const FeatureSettings& features,
                               const EmbeddingTable* table) {
  if (features.type == "bow") return bow_matrix(tokens, vocab);
  if (table == nullptr) throw UsageError("embedding features need an embedding table");
  return embedded_matrix(tokens, vocab, *table, features.max_len);
}

EncodedSet encode_set(const std::vector<std::vector<std::string>>& tokens,
                      const std::vector<int>& labels, const Vocabulary& vocab,
                      std::size_t max_len) {
  EncodedSet set;
  set.sequences.reserve(tokens.size());
  for (const auto& t : tokens) set.sequences.push_back(encode_sequence(t, vocab, max_len));
  set.labels = labels;
  return set;
}

enum class ModelFamily { classical, neural, ensemble };

ModelFamily classify_model_name(const std::string& name, Algorithm* algorithm, ArchKind* kind) {
  if (name == "ensemble") return ModelFamily::ensemble;
  try {
    *algorithm = parse_algorithm(name);
    return ModelFamily::classical;
  } catch (const UsageError&) {
  }
  try {
    *kind = parse_arch_kind(name);
    return ModelFamily::neural;
  } catch (const UsageError&) {
  }
  throw UsageError("unknown model: " + name);
}

std::string model_display_name(const ModelBundle& bundle) {
  switch (bundle.kind) {
    case BundleKind::classical:
      return algorithm_name(bundle.spec.algorithm) + " (" + bundle.features.type + ")";
    case BundleKind::neural:
      return arch_kind_name(bundle.members.at(0).arch.kind);
    case BundleKind::ensemble:
      return "bilstm+bigru";
  }
  throw UsageError("unreachable bundle kind");
}

struct BundlePredictions {
  DenseMatrix probabilities;
  std::vector<int> labels;
};

BundlePredictions bundle_predict(const ModelBundle& bundle,
                                 const std::vector<std::vector<std::string>>& tokens) {
  BundlePredictions out;
  if (bundle.kind == BundleKind::classical) {
    const EmbeddingTable* table =
        bundle.embedding_table.has_value() ? &*bundle.embedding_table : nullptr;
    DenseMatrix x = classical_features(tokens, bundle.vocabulary, bundle.features, table);
    out.probabilities =
        scores_to_probabilities(bundle.spec.algorithm, bundle.classical->predict_scores(x));
    out.labels = scores_to_labels(out.probabilities);
    return out;
  }

  out.probabilities = DenseMatrix(tokens.size(), static_cast<std::size_t>(kNumLabels));
  out.labels.resize(tokens.size());
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < tokens.size(); start += chunk) {
    const std::size_t stop = std::min(tokens.size(), start + chunk);
    std::vector<std::vector<std::int32_t>> batch;
    batch.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(encode_sequence(tokens[i], bundle.vocabulary, bundle.features.max_len));
    }
    DenseMatrix probs;
    std::vector<int> labels;
    if (bundle.kind == BundleKind::neural) {
      SequenceResult r = run_sequence(bundle.members.at(0), batch);
      probs = std::move(r.probabilities);
      labels = scores_to_labels(probs);
    } else {
      EnsembleResult r = ensemble_predict(bundle.members.at(0), bundle.members.at(1), batch);
      probs = std::move(r.probabilities);
      labels = std::move(r.labels);
    }
    for (std::size_t i = start; i < stop; ++i) {
      out.labels[i] = labels[i - start];
      for (int j = 0; j < kNumLabels; ++j) {
        out.probabilities.at(i, static_cast<std::size_t>(j)) =
            probs.at(i - start, static_cast<std::size_t>(j));
      }
    }
  }
  return out;
}

double accuracy_of(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.empty()) throw UsageError("cannot score an empty split");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == y_pred[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory: " + dir);
}

nlohmann::json class_counts_json(const std::vector<LabeledDocument>& docs) {
  auto counts = class_distribution(docs);
  nlohmann::json j;
  for (int c = 0; c < kNumLabels; ++c) {
    j[label_name(c)] = counts[static_cast<std::size_t>(c)];
  }
  return j;
}

}  // namespace

DenseMatrix scores_to_probabilities(Algorithm algorithm, const DenseMatrix& scores) {
  DenseMatrix out(scores.rows, scores.cols);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    if (algorithm == Algorithm::svm) {
      double best = scores.at(i, 0);
      for (std::size_t j = 1; j < scores.cols; ++j) best = std::max(best, scores.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < scores.cols; ++j) {
        double e = std::exp(scores.at(i, j) - best);
        out.at(i, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j < scores.cols; ++j) out.at(i, j) /= sum;
    } else {
      double sum = 0.0;
      for (std::size_t j = 0; j < scores.cols; ++j) sum += scores.at(i, j);
      if (sum <= 0.0) {
        for (std::size_t j = 0; j < scores.cols; ++j) {
          out.at(i, j) = 1.0 / static_cast<double>(scores.cols);
        }
      } else {
        for (std::size_t j = 0; j < scores.cols; ++j) out.at(i, j) = scores.at(i, j) / sum;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

nlohmann::json run_preprocess(const PipelineConfig& config) {
  config.validate();
  PreprocessConfig pre = config.resolve_preprocess();
  std::vector<LabeledDocument> docs = load_corpus(config.corpus_path, config.corpus_format);
  std::vector<std::vector<std::string>> tokens = tokenize_docs(docs, pre);
  Vocabulary vocab = Vocabulary::build(tokens, config.features.min_freq);

  ensure_output_dir(config.output_dir);
  std::filesystem::path base(config.output_dir);

  std::ostringstream lines;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    nlohmann::json line = {{"id", docs[i].id},
                           {"label", label_name(docs[i].label)},
                           {"tokens", tokens[i]}};
    lines << line.dump() << '\n';
  }
  const std::string tokens_file = (base / "tokens.jsonl").string();
  const std::string vocab_file = (base / "vocabulary.json").string();
  write_text_file(tokens_file, lines.str());
  write_text_file(vocab_file, vocab.to_json());

  return nlohmann::json{{"documents", docs.size()},
                        {"class_counts", class_counts_json(docs)},
                        {"vocabulary_size", vocab.size()},
                        {"tokens_file", tokens_file},
                        {"vocabulary_file", vocab_file}};
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

namespace {

// Deep recipe: one training run per (batch_size, learning_rate) cell, scored
// by the best validation accuracy reached over the epochs.
nlohmann::json tune_deep(const PipelineConfig& config, const TuneOptions& options, ArchKind kind,
                         const EncodedSet& train_set, const EncodedSet& val_set,
                         const EmbeddingTable& table) {
  nlohmann::ordered_json grid_json;
  try {
    grid_json = nlohmann::ordered_json::parse(read_text_file(options.grid_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse grid " + options.grid_path + ": " + e.what());
  }
  GridSpec grid = GridSpec::from_json(grid_json);
  std::vector<std::int64_t> batches;
  std::vector<double> rates;
  for (const auto& [name, values] : grid.axes) {
    for (const ParamValue& v : values) {
      if (name == "batch_size") {
        if (!std::holds_alternative<std::int64_t>(v)) {
          throw UsageError("batch_size grid values must be integers");
        }
        batches.push_back(std::get<std::int64_t>(v));
      } else if (name == "learning_rate") {
        if (std::holds_alternative<double>(v)) {
          rates.push_back(std::get<double>(v));
        } else if (std::holds_alternative<std::int64_t>(v)) {
          rates.push_back(static_cast<double>(std::get<std::int64_t>(v)));
        } else {
          throw UsageError("learning_rate grid values must be numbers");
        }
      } else {
        throw UsageError("deep tuning grids support the axes batch_size and learning_rate; got " +
                         name);
      }
    }
  }
  if (batches.empty() || rates.empty()) {
    throw UsageError("deep tuning grid needs both batch_size and learning_rate values");
  }

  NeuralArchitecture arch =
      NeuralArchitecture::for_kind(kind, config.features.dim, config.features.max_len);
  options.arch.apply(arch);
  arch.validate();

  struct Cell {
    std::int64_t batch = 0;
    double rate = 0.0;
    double accuracy = 0.0;
  };
  const std::size_t total = batches.size() * rates.size();
  std::vector<Cell> cells(total);
  parallel_for(total, [&](std::size_t c) {
    Cell& cell = cells[c];
    cell.batch = batches[c / rates.size()];
    cell.rate = rates[c % rates.size()];
    TrainConfig tc = options.train;
    tc.batch_size = static_cast<std::size_t>(cell.batch);
    tc.learning_rate = cell.rate;
    tc.seed = mix_seed(mix_seed(config.seed, 0xDEE9ull), c);
    tc.validate();
    NeuralModel model = build_model(arch, table, mix_seed(tc.seed, 0xB01Dull));
    TrainHistory history = train(model, train_set, val_set, tc);
    cell.accuracy = *std::max_element(history.validation_accuracy.begin(),
                                      history.validation_accuracy.end());
  });

  std::size_t best = 0;
  for (std::size_t c = 1; c < total; ++c) {
    if (cells[c].accuracy > cells[best].accuracy) best = c;
  }

  std::ostringstream csv;
  csv << "combination,batch_size,learning_rate,validation_accuracy\n";
  for (std::size_t c = 0; c < total; ++c) {
    csv << c << ',' << cells[c].batch << ',' << nlohmann::json(cells[c].rate).dump() << ','
        << nlohmann::json(cells[c].accuracy).dump() << '\n';
  }
  ensure_output_dir(config.output_dir);
  std::filesystem::path base(config.output_dir);
  const std::string csv_file = (base / ("cv_" + options.model_name + ".csv")).string();
  const std::string best_file =
      (base / ("best_params_" + options.model_name + ".json")).string();
  nlohmann::json best_params = {{"model", arch_kind_name(kind)},
                                {"batch_size", cells[best].batch},
                                {"learning_rate", cells[best].rate},
                                {"validation_accuracy", cells[best].accuracy}};
  write_text_file(csv_file, csv.str());
  write_text_file(best_file, best_params.dump(2) + "\n");

  return nlohmann::json{{"model", options.model_name},
                        {"family", "neural"},
                        {"combinations", total},
                        {"best", best_params},
                        {"csv_file", csv_file},
                        {"best_params_file", best_file}};
}

}  // namespace

nlohmann::json run_tune(const PipelineConfig& config, const TuneOptions& options) {
  config.validate();
  if (options.grid_path.empty()) throw UsageError("tune needs a grid file");
  require_file(options.grid_path, "grid");

  PreprocessConfig pre = config.resolve_preprocess();
  std::vector<LabeledDocument> docs = load_corpus(config.corpus_path, config.corpus_format);
  DataSplit parts = split(docs, config.test_frac, config.val_frac, config.stratified, config.seed);

  // The search works the train+validation pool; the test split stays unseen.
  std::vector<LabeledDocument> pool = parts.train;
  pool.insert(pool.end(), parts.validation.begin(), parts.validation.end());
  std::vector<std::vector<std::string>> pool_tokens = tokenize_docs(pool, pre);
  Vocabulary vocab = Vocabulary::build(pool_tokens, config.features.min_freq);

  std::string deep_name = options.model_name == "deep" ? "lstm" : options.model_name;
  Algorithm algorithm = Algorithm::logreg;
  ArchKind kind = ArchKind::lstm;
  ModelFamily family = classify_model_name(deep_name, &algorithm, &kind);
  if (family == ModelFamily::ensemble) {
    throw UsageError("tune works on a single model, not the ensemble");
  }

  if (family == ModelFamily::neural) {
    std::vector<std::vector<std::string>> train_tokens = tokenize_docs(parts.train, pre);
    std::vector<std::vector<std::string>> val_tokens = tokenize_docs(parts.validation, pre);
    EmbeddingTable table = resolve_embedding(config, vocab, config.seed, nullptr);
    EncodedSet train_set =
        encode_set(train_tokens, labels_of(parts.train), vocab, config.features.max_len);
    EncodedSet val_set =
        encode_set(val_tokens, labels_of(parts.validation), vocab, config.features.max_len);
    return tune_deep(config, options, kind, train_set, val_set, table);
  }

  nlohmann::ordered_json grid_json;
  try {
    grid_json = nlohmann::ordered_json::parse(read_text_file(options.grid_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse grid " + options.grid_path + ": " + e.what());
  }
  GridSpec grid = GridSpec::from_json(grid_json);

  nlohmann::json embed_info;
  EmbeddingTable table;
  const EmbeddingTable* table_ptr = nullptr;
  if (config.features.type == "embedding") {
    table = resolve_embedding(config, vocab, config.seed, &embed_info);
    table_ptr = &table;
  }
  DenseMatrix x = classical_features(pool_tokens, vocab, config.features, table_ptr);
  std::vector<int> y = labels_of(pool);

  ClassicalSpec base_spec;
  base_spec.algorithm = algorithm;
  if (algorithm == Algorithm::naive_bayes && config.features.type == "embedding") {
    base_spec.params["variant"] = std::string("gaussian");
  }
  CVResult result = grid_search_cv(base_spec, grid, x, y, options.folds, config.seed);

  ensure_output_dir(config.output_dir);
  std::filesystem::path base(config.output_dir);
  const std::string csv_file = (base / ("cv_" + options.model_name + ".csv")).string();
  const std::string best_file =
      (base / ("best_params_" + options.model_name + ".json")).string();
  nlohmann::json best_params = {{"model", algorithm_name(algorithm)},
                                {"params", result.best_params()["params"]},
                                {"mean_accuracy", result.best().mean_accuracy}};
  write_text_file(csv_file, result.to_csv());
  write_text_file(best_file, best_params.dump(2) + "\n");

  std::size_t valid = 0;
  for (const CVCombination& c : result.combinations) {
    if (c.valid) ++valid;
  }
  return nlohmann::json{{"model", options.model_name},
                        {"family", "classical"},
                        {"combinations", result.combinations.size()},
                        {"valid_combinations", valid},
                        {"folds", options.folds},
                        {"best", best_params},
                        {"csv_file", csv_file},
                        {"best_params_file", best_file}};
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

nlohmann::json run_train(const PipelineConfig& config, const TrainOptions& options) {
  config.validate();
  options.train.validate();
  if (options.repeats < 1) throw UsageError("repeats must be at least 1");

  PreprocessConfig pre = config.resolve_preprocess();
  std::vector<LabeledDocument> docs = load_corpus(config.corpus_path, config.corpus_format);
  const std::string fingerprint = corpus_fingerprint(docs);
  DataSplit parts = split(docs, config.test_frac, config.val_frac, config.stratified, config.seed);
  if (parts.train.empty()) throw DataError("training split is empty");

  std::vector<std::vector<std::string>> train_tokens = tokenize_docs(parts.train, pre);
  std::vector<std::vector<std::string>> val_tokens = tokenize_docs(parts.validation, pre);
  std::vector<std::vector<std::string>> test_tokens = tokenize_docs(parts.test, pre);
  std::vector<int> train_y = labels_of(parts.train);
  std::vector<int> val_y = labels_of(parts.validation);
  std::vector<int> test_y = labels_of(parts.test);

  // The model's token universe comes from the training split only.
  Vocabulary vocab = Vocabulary::build(train_tokens, config.features.min_freq);

  Algorithm algorithm = Algorithm::logreg;
  ArchKind kind = ArchKind::bigru;
  ModelFamily family = classify_model_name(options.model_name, &algorithm, &kind);

  ensure_output_dir(config.output_dir);
  std::filesystem::path base(config.output_dir);
  const std::string artifact_path =
      options.artifact_path.empty() ? (base / ("model_" + options.model_name + ".bin")).string()
                                    : options.artifact_path;

  nlohmann::json summary = {{"model", options.model_name},
                            {"artifact", artifact_path},
                            {"vocabulary_size", vocab.size()},
                            {"documents",
                             {{"train", parts.train.size()},
                              {"validation", parts.validation.size()},
                              {"test", parts.test.size()}}}};

  std::vector<double> test_accuracies;
  ModelBundle bundle;
  bundle.preprocess = pre;
  bundle.features = config.features;
  bundle.vocabulary = vocab;
  bundle.training.seed = options.train.seed;
  bundle.training.corpus_fingerprint = fingerprint;

  for (std::size_t r = 0; r < options.repeats; ++r) {
    const std::uint64_t run_seed =
        r == 0 ? options.train.seed : mix_seed(options.train.seed, 0x5EED0000ull + r);
    const bool keep = r == 0;

    if (family == ModelFamily::classical) {
      nlohmann::json params = options.params;
      // Counts want the multinomial variant; continuous embedding features
      // need the gaussian one. Only applied when the caller didn't choose.
      if (algorithm == Algorithm::naive_bayes && config.features.type == "embedding" &&
          !params.contains("variant")) {
        params["variant"] = "gaussian";
      }
      ClassicalSpec spec = ClassicalSpec::from_json(
          {{"algorithm", algorithm_name(algorithm)}, {"params", params}});
      validate_spec(spec);

      nlohmann::json embed_info;
      EmbeddingTable table;
      const EmbeddingTable* table_ptr = nullptr;
      if (config.features.type == "embedding") {
        table = resolve_embedding(config, vocab, run_seed, &embed_info);
        table_ptr = &table;
      }

      // Hyper-parameters were selected by cross-validation over this same
      // pool, so the final fit uses all of it.
      std::vector<std::vector<std::string>> pool_tokens = train_tokens;
      pool_tokens.insert(pool_tokens.end(), val_tokens.begin(), val_tokens.end());
      std::vector<int> pool_y = train_y;
      pool_y.insert(pool_y.end(), val_y.begin(), val_y.end());

      DenseMatrix x = classical_features(pool_tokens, vocab, config.features, table_ptr);
      std::unique_ptr<ClassicalModel> model = train_classical(spec, x, pool_y, run_seed);

      if (!test_tokens.empty()) {
        DenseMatrix xt = classical_features(test_tokens, vocab, config.features, table_ptr);
        test_accuracies.push_back(accuracy_of(test_y, scores_to_labels(model->predict_scores(xt))));
      }
      if (keep) {
        bundle.kind = BundleKind::classical;
        bundle.spec = spec;
        bundle.classical = std::move(model);
        if (table_ptr != nullptr) bundle.embedding_table = table;
        summary["params"] = spec.to_json()["params"];
        if (!embed_info.is_null()) summary["embedding"] = embed_info;
        bundle.training.config = {{"model", options.model_name},
                                  {"params", spec.to_json()["params"]},
                                  {"pooled_validation", true}};
      }
    } else {
      nlohmann::json embed_info;
      EmbeddingTable table = resolve_embedding(config, vocab, run_seed, &embed_info);
      EncodedSet train_set = encode_set(train_tokens, train_y, vocab, config.features.max_len);
      EncodedSet val_set = encode_set(val_tokens, val_y, vocab, config.features.max_len);
      EncodedSet test_set = encode_set(test_tokens, test_y, vocab, config.features.max_len);

      std::vector<NeuralModel> members;
      std::vector<TrainHistory> histories;
      if (family == ModelFamily::neural) {
        NeuralArchitecture arch =
            NeuralArchitecture::for_kind(kind, config.features.dim, config.features.max_len);
        options.arch.apply(arch);
        arch.validate();
        members.push_back(build_model(arch, table, mix_seed(run_seed, 0xB01Dull)));
        TrainConfig tc = options.train;
        tc.seed = run_seed;
        histories.push_back(train(members[0], train_set, val_set, tc));
      } else {
        NeuralArchitecture first = NeuralArchitecture::for_kind(
            ArchKind::bilstm, config.features.dim, config.features.max_len);
        NeuralArchitecture second = NeuralArchitecture::for_kind(
            ArchKind::bigru, config.features.dim, config.features.max_len);
        options.arch.apply(first);
        options.arch.apply(second);
        first.validate();
        second.validate();
        members.push_back(build_model(first, table, mix_seed(run_seed, 0xB01Dull)));
        members.push_back(build_model(second, table, mix_seed(run_seed, 0xB02Dull)));
        histories.resize(2);
        parallel_for(2, [&](std::size_t m) {
          TrainConfig tc = options.train;
          tc.seed = m == 0 ? run_seed : mix_seed(run_seed, 0xB16Aull);
          histories[m] = train(members[m], train_set, val_set, tc);
        });
      }

      if (!test_set.sequences.empty()) {
        std::vector<int> predicted;
        if (family == ModelFamily::neural) {
          SequenceResult res = run_sequence(members[0], test_set.sequences);
          predicted = scores_to_labels(res.probabilities);
        } else {
          EnsembleResult res = ensemble_predict(members[0], members[1], test_set.sequences);
          predicted = res.labels;
        }
        test_accuracies.push_back(accuracy_of(test_y, predicted));
      }

      if (keep) {
        bundle.kind = family == ModelFamily::neural ? BundleKind::neural : BundleKind::ensemble;
        bundle.members = std::move(members);
        bundle.training.config = {{"model", options.model_name},
                                  {"train", options.train.to_json()}};
        summary["embedding"] = embed_info;
        summary["epochs"] = options.train.epochs;
        nlohmann::json final_val = nlohmann::json::array();
        std::size_t total_steps = 0;
        for (std::size_t m = 0; m < histories.size(); ++m) {
          final_val.push_back(histories[m].validation_accuracy.empty()
                                  ? 0.0
                                  : histories[m].validation_accuracy.back());
          total_steps += histories[m].total_steps;
          const std::string dir =
              family == ModelFamily::neural
                  ? config.output_dir
                  : (base / arch_kind_name(bundle.members[m].arch.kind)).string();
          export_history(histories[m], dir, options.svg);
        }
        summary["final_validation_accuracy"] = final_val;
        summary["total_steps"] = total_steps;
      }
    }
  }

  bundle.training.created_at = current_utc_timestamp();
  save_bundle(bundle, artifact_path);

  if (!test_accuracies.empty()) {
    double mean = 0.0;
    for (double a : test_accuracies) mean += a;
    mean /= static_cast<double>(test_accuracies.size());
    double var = 0.0;
    for (double a : test_accuracies) var += (a - mean) * (a - mean);
    var /= static_cast<double>(test_accuracies.size());
    summary["test_accuracy"] = {
        {"mean", mean}, {"std", std::sqrt(var)}, {"runs", test_accuracies}};
  }
  summary["repeats"] = options.repeats;
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate / report / predict / compare
// ---------------------------------------------------------------------------

EvaluationResult evaluate_artifact(const PipelineConfig& config, const std::string& artifact_path,
                                   const std::string& split_name, bool svg, bool write_files) {
  config.validate();
  ModelBundle bundle = load_bundle(artifact_path);
  std::vector<LabeledDocument> docs = load_corpus(config.corpus_path, config.corpus_format);
  const std::string fingerprint = corpus_fingerprint(docs);
  DataSplit parts = split(docs, config.test_frac, config.val_frac, config.stratified, config.seed);
  std::vector<LabeledDocument> selected = pick_split(parts, split_name);
  if (selected.empty()) throw DataError("split " + split_name + " is empty");

  std::vector<std::vector<std::string>> tokens = tokenize_docs(selected, bundle.preprocess);
  BundlePredictions pred = bundle_predict(bundle, tokens);
  std::vector<int> y = labels_of(selected);

  EvaluationResult result;
  result.confusion = confusion_matrix(y, pred.labels);
  result.report = classification_report(result.confusion);
  result.roc = roc_ovr(y, pred.probabilities);

  nlohmann::json auc = nlohmann::json::object();
  for (int j = 0; j < kNumLabels; ++j) {
    const RocCurve& c = result.roc.per_label[static_cast<std::size_t>(j)];
    auc[label_name(j)] = c.defined ? nlohmann::json(c.auc) : nlohmann::json(nullptr);
  }
  auc["micro"] = result.roc.micro.defined ? nlohmann::json(result.roc.micro.auc)
                                          : nlohmann::json(nullptr);
  auc["macro"] = result.roc.macro.defined ? nlohmann::json(result.roc.macro.auc)
                                          : nlohmann::json(nullptr);

  result.summary = {{"artifact", artifact_path},
                    {"model", model_display_name(bundle)},
                    {"split", split_name},
                    {"documents", selected.size()},
                    {"corpus_fingerprint_match", fingerprint == bundle.training.corpus_fingerprint},
                    {"report", result.report.to_json()},
                    {"auc", auc}};

  if (write_files) {
    ensure_output_dir(config.output_dir);
    std::filesystem::path base(config.output_dir);
    write_text_file((base / "report.json").string(), result.summary.dump(2) + "\n");
    write_text_file((base / "confusion.csv").string(), result.confusion.to_csv());
    export_roc(result.roc, config.output_dir, svg);
  }
  return result;
}

nlohmann::json run_evaluate(const PipelineConfig& config, const std::string& artifact_path,
                            const std::string& split_name, bool svg) {
  return evaluate_artifact(config, artifact_path, split_name, svg, true).summary;
}

std::string run_report(const PipelineConfig& config, const std::string& artifact_path,
                       const std::string& split_name) {
  EvaluationResult result = evaluate_artifact(config, artifact_path, split_name, true, true);
  std::ostringstream out;
  out << result.summary["model"].get<std::string>() << " on the " << split_name << " split ("
      << result.report.total << " documents)\n\n";
  out << result.report.to_text();
  return out.str();
}

nlohmann::json predict_with_bundle(const ModelBundle& bundle, const std::string& text) {
  std::vector<std::string> tokens = preprocess_text(text, "input", bundle.preprocess).tokens;
  BundlePredictions pred = bundle_predict(bundle, {tokens});
  nlohmann::json probabilities;
  for (int j = 0; j < kNumLabels; ++j) {
    probabilities[label_name(j)] = pred.probabilities.at(0, static_cast<std::size_t>(j));
  }
  return nlohmann::json{{"label", label_name(pred.labels[0])},
                        {"probabilities", probabilities}};
}

nlohmann::json run_predict(const std::string& artifact_path, const std::string& text) {
  return predict_with_bundle(load_bundle(artifact_path), text);
}

nlohmann::json bundle_info(const ModelBundle& bundle) {
  return nlohmann::json{{"kind", bundle_kind_name(bundle.kind)},
                        {"model", model_display_name(bundle)},
                        {"vocabulary_size", bundle.vocabulary.size()},
                        {"features", bundle.features.to_json()},
                        {"created_at", bundle.training.created_at},
                        {"corpus_fingerprint", bundle.training.corpus_fingerprint},
                        {"seed", bundle.training.seed}};
}

std::string run_compare(const PipelineConfig& config,
                        const std::vector<std::string>& artifact_paths,
                        const std::string& split_name) {
  config.validate();
  if (artifact_paths.empty()) throw UsageError("compare needs at least one artifact");
  std::vector<LabeledDocument> docs = load_corpus(config.corpus_path, config.corpus_format);
  DataSplit parts = split(docs, config.test_frac, config.val_frac, config.stratified, config.seed);
  std::vector<LabeledDocument> selected = pick_split(parts, split_name);
  if (selected.empty()) throw DataError("split " + split_name + " is empty");
  std::vector<int> y = labels_of(selected);

  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof(line), "%-34s%s\n", "Model", "Accuracy");
  out << line;
  out << std::string(42, '-') << '\n';
  for (const std::string& path : artifact_paths) {
    ModelBundle bundle = load_bundle(path);
    std::vector<std::vector<std::string>> tokens = tokenize_docs(selected, bundle.preprocess);
    BundlePredictions pred = bundle_predict(bundle, tokens);
    std::snprintf(line, sizeof(line), "%-34s%.4f\n", model_display_name(bundle).c_str(),
                  accuracy_of(y, pred.labels));
    out << line;
  }
  return out.str();
}

}  // namespace emoclass
