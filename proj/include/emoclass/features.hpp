#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "emoclass/dense.hpp"
#include "emoclass/util.hpp"

namespace emoclass {

// Token ids: 0 is reserved for padding, 1 for out-of-vocabulary tokens.
// Corpus tokens get ids from 2 up, ordered by descending frequency with
// lexicographic tie-break, optionally cut off below min_freq.
class Vocabulary {
 public:
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kUnkId = 1;

  Vocabulary();
  static Vocabulary build(const std::vector<std::vector<std::string>>& documents,
                          std::int64_t min_freq = 1);
  // Reconstruct from an ordered token list (ids 2, 3, ... in list order).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens,
                                std::int64_t min_freq = 1);

  std::int32_t id(const std::string& token) const;  // kUnkId when absent
  bool contains(const std::string& token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return id_to_token_.size(); }  // includes pad + unk
  std::int64_t min_freq() const { return min_freq_; }

  // Tokens with ids >= 2, in id order.
  const std::vector<std::string>& corpus_tokens() const { return corpus_tokens_; }

  std::string to_json() const;
  static Vocabulary from_json(const std::string& json_text);

 private:
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::string> corpus_tokens_;
  std::int64_t min_freq_ = 1;
};

// Sparse token-count vector; ordered map keeps iteration deterministic.
using BowVector = std::map<std::int32_t, std::int32_t>;

BowVector bow_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// Rows of counts, one column per vocabulary id (including pad and unk
// columns, which stay zero for pad and count OOV hits for unk).
DenseMatrix bow_matrix(const std::vector<std::vector<std::string>>& documents,
                       const Vocabulary& vocab);

struct EmbeddingCoverage {
  std::int64_t found = 0;
  std::int64_t missing = 0;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim);

  // Vectors from a word2vec-format text file (optional "count dim" header;
  // token followed by dim floats per line). Tokens absent from the file are
  // initialized Uniform(-0.25, 0.25) from `seed`; the pad row stays zero.
  static EmbeddingTable from_word2vec(const Vocabulary& vocab, const std::string& path,
                                      std::uint64_t seed, EmbeddingCoverage* coverage = nullptr);
  // All rows except pad randomly initialized Uniform(-0.25, 0.25).
  static EmbeddingTable random(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  double* row(std::size_t r) { return data_.data() + r * dim_; }
  const double* row(std::size_t r) const { return data_.data() + r * dim_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Token ids truncated or right-padded with kPadId to max_len.
std::vector<std::int32_t> encode_sequence(const std::vector<std::string>& tokens,
                                          const Vocabulary& vocab, std::size_t max_len);

// Concatenated embedding rows for an encoded sequence: max_len * dim values.
std::vector<double> flatten_embedded(const std::vector<std::int32_t>& ids,
                                     const EmbeddingTable& table);

// One flattened embedded row per document.
DenseMatrix embedded_matrix(const std::vector<std::vector<std::string>>& documents,
                            const Vocabulary& vocab, const EmbeddingTable& table,
                            std::size_t max_len);

}  // namespace emoclass
