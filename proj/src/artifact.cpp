#include "emoclass/artifact.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>

#include "emoclass/corpus.hpp"
#include "emoclass/util.hpp"

namespace emoclass {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'O', 'C', 'L', 'A', 'S', 'S'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

BundleKind parse_bundle_kind(const std::string& name) {
  if (name == "classical") return BundleKind::classical;
  if (name == "neural") return BundleKind::neural;
  if (name == "ensemble") return BundleKind::ensemble;
  throw DataError("unknown artifact kind: " + name);
}

const char* bundle_kind_name(BundleKind kind) {
  switch (kind) {
    case BundleKind::classical: return "classical";
    case BundleKind::neural: return "neural";
    default: return "ensemble";
  }
}

void FeatureSettings::validate() const {
  if (type != "bow" && type != "embedding") {
    throw UsageError("feature type must be 'bow' or 'embedding'");
  }
  if (max_len < 1) throw UsageError("max_len must be at least 1");
  if (min_freq < 1) throw UsageError("min_freq must be at least 1");
  if (type == "embedding" && dim < 1) throw UsageError("embedding dim must be at least 1");
}

nlohmann::json FeatureSettings::to_json() const {
  return {{"type", type}, {"max_len", max_len}, {"min_freq", min_freq}, {"dim", dim}};
}

FeatureSettings FeatureSettings::from_json(const nlohmann::json& j) {
  FeatureSettings s;
  if (j.contains("type")) s.type = j.at("type").get<std::string>();
  if (j.contains("max_len")) s.max_len = j.at("max_len").get<std::size_t>();
  if (j.contains("min_freq")) s.min_freq = j.at("min_freq").get<std::int64_t>();
  if (j.contains("dim")) s.dim = j.at("dim").get<std::size_t>();
  s.validate();
  return s;
}

nlohmann::json preprocess_to_json(const PreprocessConfig& config) {
  std::vector<std::string> stopwords(config.stopwords.begin(), config.stopwords.end());
  std::sort(stopwords.begin(), stopwords.end());
  nlohmann::json abbreviations = nlohmann::json::object();
  for (const auto& [key, value] : config.abbreviations) abbreviations[key] = value;
  return {{"lowercase", config.lowercase},
          {"strip_html", config.strip_html},
          {"strip_urls", config.strip_urls},
          {"strip_punctuation", config.strip_punctuation},
          {"preserve_emoticons", config.preserve_emoticons},
          {"normalizer", normalizer_name(config.normalizer)},
          {"stopwords", std::move(stopwords)},
          {"abbreviations", std::move(abbreviations)},
          {"emoticons", config.emoticons}};
}

PreprocessConfig preprocess_from_json(const nlohmann::json& j) {
  PreprocessConfig config;
  config.lowercase = j.at("lowercase").get<bool>();
  config.strip_html = j.at("strip_html").get<bool>();
  config.strip_urls = j.at("strip_urls").get<bool>();
  config.strip_punctuation = j.at("strip_punctuation").get<bool>();
  config.preserve_emoticons = j.at("preserve_emoticons").get<bool>();
  config.normalizer = parse_normalizer(j.at("normalizer").get<std::string>());
  config.stopwords.clear();
  for (const auto& w : j.at("stopwords")) config.stopwords.insert(w.get<std::string>());
  config.abbreviations.clear();
  for (const auto& [key, value] : j.at("abbreviations").items()) {
    config.abbreviations[key] = value.get<std::string>();
  }
  config.emoticons.clear();
  for (const auto& e : j.at("emoticons")) config.emoticons.push_back(e.get<std::string>());
  return config;
}

std::string current_utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

struct TensorBlock {
  std::string name;
  std::vector<std::size_t> shape;
  const std::vector<double>* values;
};

nlohmann::json training_to_json(const TrainingMeta& meta) {
  return {{"config", meta.config},
          {"seed", meta.seed},
          {"corpus_fingerprint", meta.corpus_fingerprint},
          {"created_at", meta.created_at}};
}

TrainingMeta training_from_json(const nlohmann::json& j) {
  TrainingMeta meta;
  meta.config = j.at("config");
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
  meta.created_at = j.at("created_at").get<std::string>();
  return meta;
}

}  // namespace

std::string bundle_to_bytes(const ModelBundle& bundle) {
  bundle.features.validate();
  nlohmann::json descriptor;
  descriptor["kind"] = bundle_kind_name(bundle.kind);
  nlohmann::json labels = nlohmann::json::array();
  for (int j = 0; j < kNumLabels; ++j) labels.push_back(label_name(j));
  descriptor["label_order"] = std::move(labels);
  descriptor["preprocess"] = preprocess_to_json(bundle.preprocess);
  descriptor["features"] = bundle.features.to_json();
  descriptor["vocabulary"] = nlohmann::json::parse(bundle.vocabulary.to_json());
  descriptor["training"] = training_to_json(bundle.training);

  std::vector<TensorBlock> blocks;
  if (bundle.kind == BundleKind::classical) {
    if (!bundle.classical) throw UsageError("classical bundle has no trained model");
    descriptor["classical"] = {{"spec", bundle.spec.to_json()},
                               {"state", bundle.classical->learned_state()}};
    if (bundle.features.type == "embedding") {
      if (!bundle.embedding_table.has_value()) {
        throw UsageError("classical embedding bundle needs its lookup table");
      }
      blocks.push_back({"embedding_table",
                        {bundle.embedding_table->rows(), bundle.embedding_table->dim()},
                        &bundle.embedding_table->values()});
    }
  } else {
    std::size_t expected = bundle.kind == BundleKind::ensemble ? 2 : 1;
    if (bundle.members.size() != expected) {
      throw UsageError("bundle member count does not match its kind");
    }
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t m = 0; m < bundle.members.size(); ++m) {
      members.push_back({{"arch", bundle.members[m].arch.to_json()}});
      for (const auto& [name, tensor] : bundle.members[m].params) {
        blocks.push_back({"member" + std::to_string(m) + "/" + name, tensor.shape(),
                          &tensor.values()});
      }
    }
    descriptor["neural"] = {{"members", std::move(members)}};
  }

  nlohmann::json manifest = nlohmann::json::array();
  for (const TensorBlock& block : blocks) {
    manifest.push_back({{"name", block.name}, {"shape", block.shape}});
  }
  descriptor["tensors"] = std::move(manifest);

  std::string json_text = descriptor.dump();
  std::string out;
  out.reserve(8 + 12 + json_text.size());
  out.append(kMagic, sizeof(kMagic));
  append_u32le(out, kVersion);
  append_u64le(out, json_text.size());
  out += json_text;
  for (const TensorBlock& block : blocks) {
    for (double v : *block.values) append_f64le(out, v);
  }
  return out;
}

ModelBundle bundle_from_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a model artifact (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  std::uint32_t version = read_u32le(bytes, pos);
  if (version != kVersion) {
    throw DataError("unsupported artifact version " + std::to_string(version));
  }
  std::uint64_t json_len = read_u64le(bytes, pos);
  if (pos + json_len > bytes.size()) throw DataError("artifact descriptor is truncated");
  nlohmann::json descriptor = nlohmann::json::parse(bytes.substr(pos, json_len));
  pos += json_len;

  ModelBundle bundle;
  bundle.kind = parse_bundle_kind(descriptor.at("kind").get<std::string>());
  bundle.preprocess = preprocess_from_json(descriptor.at("preprocess"));
  bundle.features = FeatureSettings::from_json(descriptor.at("features"));
  bundle.vocabulary = Vocabulary::from_json(descriptor.at("vocabulary").dump());
  bundle.training = training_from_json(descriptor.at("training"));

  // Read every manifest block, in order.
  std::vector<std::pair<std::string, Tensor>> tensors;
  for (const auto& entry : descriptor.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (const auto& d : entry.at("shape")) {
      shape.push_back(d.get<std::size_t>());
      count *= shape.back();
    }
    if (pos + count * 8 > bytes.size()) throw DataError("artifact tensor data is truncated");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = read_f64le(bytes, pos);
    tensors.emplace_back(std::move(name), Tensor::from_values(shape, std::move(values)));
  }
  if (pos != bytes.size()) throw DataError("artifact has trailing bytes");

  auto find_tensor = [&](const std::string& name) -> Tensor {
    for (const auto& [key, tensor] : tensors) {
      if (key == name) return tensor;
    }
    throw DataError("artifact is missing tensor block: " + name);
  };

  if (bundle.kind == BundleKind::classical) {
    bundle.spec = ClassicalSpec::from_json(descriptor.at("classical").at("spec"));
    bundle.classical =
        classical_from_state(bundle.spec, descriptor.at("classical").at("state"));
    if (bundle.features.type == "embedding") {
      Tensor t = find_tensor("embedding_table");
      if (t.shape().size() != 2) throw DataError("embedding_table block must be 2-D");
      EmbeddingTable table(t.dim(0), t.dim(1));
      table.values() = t.values();
      bundle.embedding_table = std::move(table);
    }
  } else {
    const auto& members = descriptor.at("neural").at("members");
    for (std::size_t m = 0; m < members.size(); ++m) {
      NeuralModel model;
      model.arch = NeuralArchitecture::from_json(members[m].at("arch"));
      std::string prefix = "member" + std::to_string(m) + "/";
      for (const auto& [key, tensor] : tensors) {
        if (key.rfind(prefix, 0) == 0) {
          model.params.emplace_back(key.substr(prefix.size()), tensor);
        }
      }
      if (model.params.empty()) throw DataError("artifact member has no parameters");
      bundle.members.push_back(std::move(model));
    }
    std::size_t expected = bundle.kind == BundleKind::ensemble ? 2 : 1;
    if (bundle.members.size() != expected) {
      throw DataError("artifact member count does not match its kind");
    }
  }
  return bundle;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  write_text_file(path, bundle_to_bytes(bundle));
}

ModelBundle load_bundle(const std::string& path) {
  return bundle_from_bytes(read_text_file(path));
}

bool is_artifact_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char head[8] = {};
  in.read(head, sizeof(head));
  return in.gcount() == 8 && std::memcmp(head, kMagic, sizeof(kMagic)) == 0;
}

}  // namespace emoclass
