#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "emoclass/features.hpp"

using namespace emoclass;

namespace {

std::vector<std::vector<std::string>> sample_docs() {
  return {
      {"happy", "joy", "happy"},
      {"sad", "happy"},
      {"fear", "sad", "happy"},
  };
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("vocabulary orders by frequency then token") {
  // happy:4 sad:2 fear:1 joy:1 -> ids: happy=2 sad=3 fear=4 joy=5
  Vocabulary v = Vocabulary::build(sample_docs());
  CHECK(v.size() == 6);
  CHECK(v.id("happy") == 2);
  CHECK(v.id("sad") == 3);
  CHECK(v.id("fear") == 4);  // ties break lexicographically
  CHECK(v.id("joy") == 5);
  CHECK(v.id("<pad>") == 0);
  CHECK(v.id("<unk>") == 1);
  CHECK(v.id("absent") == Vocabulary::kUnkId);
  CHECK(v.token(2) == "happy");
  CHECK(v.corpus_tokens() == std::vector<std::string>{"happy", "sad", "fear", "joy"});
}

TEST_CASE("vocabulary honours min_freq") {
  Vocabulary v = Vocabulary::build(sample_docs(), 2);
  CHECK(v.size() == 4);  // pad, unk, happy, sad
  CHECK(v.contains("happy"));
  CHECK(!v.contains("fear"));
}

TEST_CASE("vocabulary ignores reserved literals in documents") {
  Vocabulary v = Vocabulary::build({{"<pad>", "x", "<unk>", "x"}});
  CHECK(v.size() == 3);
  CHECK(v.id("x") == 2);
}

TEST_CASE("vocabulary json round-trip") {
  Vocabulary v = Vocabulary::build(sample_docs(), 1);
  Vocabulary w = Vocabulary::from_json(v.to_json());
  CHECK(w.size() == v.size());
  CHECK(w.id("happy") == v.id("happy"));
  CHECK(w.id("joy") == v.id("joy"));
  CHECK(w.min_freq() == v.min_freq());
  CHECK_THROWS_AS(Vocabulary::from_json("{\"nope\":1}"), DataError);
  CHECK_THROWS_AS(Vocabulary::from_json("not json"), DataError);
}

TEST_CASE("bow vector counts tokens with unk fallback") {
  Vocabulary v = Vocabulary::build(sample_docs());
  BowVector b = bow_vector({"happy", "happy", "novel", "sad"}, v);
  CHECK(b.at(2) == 2);   // happy
  CHECK(b.at(3) == 1);   // sad
  CHECK(b.at(1) == 1);   // unk
  CHECK(b.size() == 3);
}

TEST_CASE("bow matrix lays out counts densely") {
  Vocabulary v = Vocabulary::build(sample_docs());
  DenseMatrix m = bow_matrix(sample_docs(), v);
  CHECK(m.rows == 3);
  CHECK(m.cols == 6);
  CHECK(m.at(0, 2) == 2.0);  // doc0 happy x2
  CHECK(m.at(0, 5) == 1.0);  // doc0 joy
  CHECK(m.at(0, 3) == 0.0);
  CHECK(m.at(2, 4) == 1.0);  // doc2 fear
}

TEST_CASE("encode_sequence truncates and right-pads") {
  Vocabulary v = Vocabulary::build(sample_docs());
  CHECK(encode_sequence({"happy", "sad"}, v, 4) ==
        std::vector<std::int32_t>{2, 3, 0, 0});
  CHECK(encode_sequence({"happy", "sad", "fear", "joy", "happy"}, v, 3) ==
        std::vector<std::int32_t>{2, 3, 4});
  CHECK(encode_sequence({"x"}, v, 2) == std::vector<std::int32_t>{1, 0});
}

TEST_CASE("embedding loader reads word2vec text with and without header") {
  Vocabulary v = Vocabulary::build(sample_docs());
  std::string dir = std::filesystem::temp_directory_path().string();
  write_text_file(dir + "/emb1.vec", "3 2\nhappy 0.5 -0.25\nsad 1 2\nunused 9 9\n");
  EmbeddingCoverage cov;
  EmbeddingTable t = EmbeddingTable::from_word2vec(v, dir + "/emb1.vec", 7, &cov);
  CHECK(t.rows() == v.size());
  CHECK(t.dim() == 2);
  CHECK(t.row(2)[0] == 0.5);
  CHECK(t.row(2)[1] == -0.25);
  CHECK(t.row(3)[0] == 1.0);
  CHECK(cov.found == 2);
  CHECK(cov.missing == 2);  // fear, joy
  // pad row all zero
  CHECK(t.row(0)[0] == 0.0);
  CHECK(t.row(0)[1] == 0.0);
  // missing tokens drawn from Uniform(-0.25, 0.25)
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(std::abs(t.row(4)[d]) <= 0.25);
    CHECK(std::abs(t.row(5)[d]) <= 0.25);
  }

  write_text_file(dir + "/emb2.vec", "happy 0.5 -0.25 1.0\n");
  EmbeddingTable t2 = EmbeddingTable::from_word2vec(v, dir + "/emb2.vec", 7, nullptr);
  CHECK(t2.dim() == 3);
}

TEST_CASE("embedding loader is deterministic per seed") {
  Vocabulary v = Vocabulary::build(sample_docs());
  std::string dir = std::filesystem::temp_directory_path().string();
  write_text_file(dir + "/emb3.vec", "happy 0.5 -0.25\n");
  EmbeddingTable a = EmbeddingTable::from_word2vec(v, dir + "/emb3.vec", 11, nullptr);
  EmbeddingTable b = EmbeddingTable::from_word2vec(v, dir + "/emb3.vec", 11, nullptr);
  EmbeddingTable c = EmbeddingTable::from_word2vec(v, dir + "/emb3.vec", 12, nullptr);
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());
}

TEST_CASE("embedding loader rejects ragged files") {
  Vocabulary v = Vocabulary::build(sample_docs());
  std::string dir = std::filesystem::temp_directory_path().string();
  write_text_file(dir + "/bad.vec", "happy 1 2\nsad 1 2 3\n");
  CHECK_THROWS_AS(EmbeddingTable::from_word2vec(v, dir + "/bad.vec", 1, nullptr), DataError);
  write_text_file(dir + "/empty.vec", "\n");
  CHECK_THROWS_AS(EmbeddingTable::from_word2vec(v, dir + "/empty.vec", 1, nullptr), DataError);
}

TEST_CASE("random embedding table keeps the pad row zero") {
  Vocabulary v = Vocabulary::build(sample_docs());
  EmbeddingTable t = EmbeddingTable::random(v, 4, 3);
  for (std::size_t d = 0; d < 4; ++d) CHECK(t.row(0)[d] == 0.0);
  bool any_nonzero = false;
  for (std::size_t d = 0; d < 4; ++d) any_nonzero = any_nonzero || t.row(2)[d] != 0.0;
  CHECK(any_nonzero);
}

TEST_CASE("flatten_embedded concatenates rows in order") {
  Vocabulary v = Vocabulary::build(sample_docs());
  EmbeddingTable t(v.size(), 2);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    t.row(r)[0] = static_cast<double>(r);
    t.row(r)[1] = static_cast<double>(r) + 0.5;
  }
  auto flat = flatten_embedded({2, 0, 3}, t);
  CHECK(flat == std::vector<double>{2.0, 2.5, 0.0, 0.5, 3.0, 3.5});

  DenseMatrix m = embedded_matrix({{"happy"}, {"sad", "fear"}}, v, t, 2);
  CHECK(m.rows == 2);
  CHECK(m.cols == 4);
  CHECK(m.at(0, 0) == 2.0);   // happy row
  CHECK(m.at(0, 2) == 0.0);   // pad row
  CHECK(m.at(1, 2) == 4.0);   // fear row
}

}  // TEST_SUITE
