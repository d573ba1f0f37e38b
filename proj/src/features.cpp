#include "emoclass/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "json.hpp"

namespace emoclass {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>"};
  token_to_id_ = {{"<pad>", kPadId}, {"<unk>", kUnkId}};
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents,
                             std::int64_t min_freq) {
  if (min_freq < 1) throw UsageError("min_freq must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& doc : documents) {
    for (const auto& token : doc) {
      if (token.empty() || token == "<pad>" || token == "<unk>") continue;
      ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  ranked.reserve(counts.size());
  for (auto& kv : counts) {
    if (kv.second >= min_freq) ranked.emplace_back(kv.first, kv.second);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_freq_ = min_freq;
  v.corpus_tokens_.reserve(ranked.size());
  for (auto& kv : ranked) {
    v.token_to_id_.emplace(kv.first, static_cast<std::int32_t>(v.id_to_token_.size()));
    v.id_to_token_.push_back(kv.first);
    v.corpus_tokens_.push_back(kv.first);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens,
                                   std::int64_t min_freq) {
  Vocabulary v;
  v.min_freq_ = min_freq;
  v.corpus_tokens_.reserve(tokens.size());
  for (const auto& token : tokens) {
    if (token.empty() || token == "<pad>" || token == "<unk>")
      throw DataError("vocabulary token list may not contain '" + token + "'");
    auto [it, inserted] =
        v.token_to_id_.emplace(token, static_cast<std::int32_t>(v.id_to_token_.size()));
    if (!inserted) throw DataError("duplicate vocabulary token '" + token + "'");
    v.id_to_token_.push_back(token);
    v.corpus_tokens_.push_back(token);
  }
  return v;
}

std::int32_t Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.find(token) != token_to_id_.end();
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw UsageError("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::to_json() const {
  nlohmann::json j;
  j["tokens"] = corpus_tokens_;
  j["min_freq"] = min_freq_;
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid vocabulary json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array())
    throw DataError("vocabulary json must be an object with a 'tokens' array");
  std::vector<std::string> tokens;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw DataError("vocabulary tokens must be strings");
    tokens.push_back(t.get<std::string>());
  }
  std::int64_t min_freq = j.value("min_freq", std::int64_t{1});
  return from_tokens(tokens, min_freq);
}

BowVector bow_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  BowVector counts;
  for (const auto& token : tokens) {
    ++counts[vocab.id(token)];
  }
  return counts;
}

DenseMatrix bow_matrix(const std::vector<std::vector<std::string>>& documents,
                       const Vocabulary& vocab) {
  DenseMatrix m(documents.size(), vocab.size());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    for (const auto& [id, count] : bow_vector(documents[i], vocab)) {
      m.at(i, static_cast<std::size_t>(id)) = static_cast<double>(count);
    }
  }
  return m;
}

EmbeddingTable::EmbeddingTable(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

EmbeddingTable EmbeddingTable::from_word2vec(const Vocabulary& vocab, const std::string& path,
                                             std::uint64_t seed, EmbeddingCoverage* coverage) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> file_vectors;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double x = 0.0;
    while (fields >> x) values.push_back(x);
    if (line_no == 1 && values.size() == 1) {
      // "count dim" header: token parsed as the count
      char* end = nullptr;
      std::strtoull(token.c_str(), &end, 10);
      if (end != nullptr && *end == '\0') {
        dim = static_cast<std::size_t>(values[0]);
        continue;
      }
    }
    if (values.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": no vector values");
    if (dim == 0) dim = values.size();
    if (values.size() != dim)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                      " values, got " + std::to_string(values.size()));
    if (vocab.contains(token)) file_vectors.emplace(std::move(token), std::move(values));
  }
  if (dim == 0) throw DataError(path + ": no embedding vectors found");

  EmbeddingTable table(vocab.size(), dim);
  EmbeddingCoverage stats;
  Rng rng(mix_seed(seed, 0xE3BEDD1D));
  // Ids in order so the random draws for missing tokens are reproducible.
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    auto it = file_vectors.find(vocab.token(static_cast<std::int32_t>(id)));
    double* row = table.row(id);
    if (it != file_vectors.end()) {
      std::copy(it->second.begin(), it->second.end(), row);
      ++stats.found;
    } else {
      for (std::size_t d = 0; d < dim; ++d) row[d] = rng.uniform(-0.25, 0.25);
      ++stats.missing;
    }
  }
  // The unk row gets a random vector too, from the tail of the same stream.
  {
    double* row = table.row(Vocabulary::kUnkId);
    for (std::size_t d = 0; d < dim; ++d) row[d] = rng.uniform(-0.25, 0.25);
  }
  if (coverage != nullptr) *coverage = stats;
  return table;
}

EmbeddingTable EmbeddingTable::random(const Vocabulary& vocab, std::size_t dim,
                                      std::uint64_t seed) {
  if (dim == 0) throw UsageError("embedding dim must be positive");
  EmbeddingTable table(vocab.size(), dim);
  Rng rng(mix_seed(seed, 0xE3BEDD1D));
  for (std::size_t id = 1; id < vocab.size(); ++id) {  // pad row stays zero
    double* row = table.row(id);
    for (std::size_t d = 0; d < dim; ++d) row[d] = rng.uniform(-0.25, 0.25);
  }
  return table;
}

std::vector<std::int32_t> encode_sequence(const std::vector<std::string>& tokens,
                                          const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw UsageError("max_len must be positive");
  std::vector<std::int32_t> ids(max_len, Vocabulary::kPadId);
  std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

std::vector<double> flatten_embedded(const std::vector<std::int32_t>& ids,
                                     const EmbeddingTable& table) {
  std::vector<double> out;
  out.reserve(ids.size() * table.dim());
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
      throw UsageError("token id " + std::to_string(id) + " outside embedding table");
    const double* row = table.row(static_cast<std::size_t>(id));
    out.insert(out.end(), row, row + table.dim());
  }
  return out;
}

DenseMatrix embedded_matrix(const std::vector<std::vector<std::string>>& documents,
                            const Vocabulary& vocab, const EmbeddingTable& table,
                            std::size_t max_len) {
  DenseMatrix m(documents.size(), max_len * table.dim());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    std::vector<double> row = flatten_embedded(encode_sequence(documents[i], vocab, max_len), table);
    std::copy(row.begin(), row.end(), m.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  }
  return m;
}

}  // namespace emoclass
