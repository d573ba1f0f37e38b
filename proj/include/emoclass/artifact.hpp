#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emoclass/classical.hpp"
#include "emoclass/features.hpp"
#include "emoclass/neural.hpp"
#include "emoclass/textprep.hpp"
#include "json.hpp"

namespace emoclass {

enum class BundleKind { classical, neural, ensemble };

BundleKind parse_bundle_kind(const std::string& name);
const char* bundle_kind_name(BundleKind kind);

struct FeatureSettings {
  std::string type = "embedding";  // "bow" | "embedding"
  std::size_t max_len = 40;
  std::int64_t min_freq = 1;
  std::size_t dim = 300;  // embedding width; unused for bow

  void validate() const;
  nlohmann::json to_json() const;
  static FeatureSettings from_json(const nlohmann::json& j);
};

struct TrainingMeta {
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string corpus_fingerprint;
  std::string created_at;  // ISO-8601 UTC; excluded from determinism checks
};

nlohmann::json preprocess_to_json(const PreprocessConfig& config);
PreprocessConfig preprocess_from_json(const nlohmann::json& j);

// A trained model plus everything needed to run it on raw text: the
// preprocessing recipe, the feature encoding, the vocabulary, and (for
// classical models over embeddings) the frozen lookup table.
struct ModelBundle {
  BundleKind kind = BundleKind::classical;
  PreprocessConfig preprocess;
  FeatureSettings features;
  Vocabulary vocabulary;

  // kind == classical
  ClassicalSpec spec;
  std::unique_ptr<ClassicalModel> classical;
  std::optional<EmbeddingTable> embedding_table;  // embedding features only

  // kind == neural (one member) or ensemble (bilstm + bigru)
  std::vector<NeuralModel> members;

  TrainingMeta training;
};

std::string current_utc_timestamp();

// Self-contained binary image: 8-byte magic, u32 version, u64 descriptor
// length, descriptor JSON (sorted keys), then raw little-endian f64 blocks in
// descriptor manifest order.
std::string bundle_to_bytes(const ModelBundle& bundle);
ModelBundle bundle_from_bytes(const std::string& bytes);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

// True if the file starts with the artifact magic (used to tell a saved model
// apart from a word2vec text file).
bool is_artifact_file(const std::string& path);

}  // namespace emoclass
