#include <cmath>
#include <vector>

#include "doctest.h"
#include "emoclass/corpus.hpp"
#include "emoclass/neural.hpp"
#include "emoclass/tensor.hpp"
#include "emoclass/util.hpp"

using namespace emoclass;

namespace {

// Random embedding table over a tiny vocabulary (pad row stays zero).
EmbeddingTable tiny_table(std::size_t vocab_rows, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table(vocab_rows, dim);
  Rng rng(seed);
  for (std::size_t r = 1; r < vocab_rows; ++r) {
    for (std::size_t d = 0; d < dim; ++d) table.row(r)[d] = rng.uniform(-0.25, 0.25);
  }
  return table;
}

NeuralArchitecture toy_arch(ArchKind kind) {
  NeuralArchitecture arch;
  arch.kind = kind;
  if (kind == ArchKind::cnn) {
    arch.embed_dim = 6;
    arch.max_len = 6;
    arch.conv_filters = 2;
    arch.fc_units = 4;
    arch.dropout = 0.8;
  } else {
    arch.embed_dim = 4;
    arch.max_len = 5;
    arch.hidden_units = 3;
    arch.fc_units = 4;
    arch.dropout = 0.5;
  }
  arch.output_units = 4;
  return arch;
}

std::vector<std::vector<std::int32_t>> toy_batch(const NeuralArchitecture& arch, bool with_pads) {
  std::vector<std::vector<std::int32_t>> batch;
  if (with_pads) {
    batch.push_back({2, 3, 4, 0, 0});
    batch.push_back({5, 2, 0, 0, 0});
    batch.push_back({3, 6, 7, 2, 5});
  } else {
    // Full-length rows with varied ids (identical neighbouring embedding rows
    // would tie under max pooling).
    std::size_t t = arch.max_len;
    std::vector<std::int32_t> row1;
    std::vector<std::int32_t> row2;
    for (std::size_t i = 0; i < t; ++i) {
      row1.push_back(static_cast<std::int32_t>(2 + i % 6));
      row2.push_back(static_cast<std::int32_t>(2 + (5 * i + 3) % 6));
    }
    batch.push_back(row1);
    batch.push_back(row2);
  }
  for (auto& row : batch) row.resize(arch.max_len, 0);
  return batch;
}

Tensor onehot_targets(std::size_t rows) {
  Tensor t = Tensor::zeros({rows, kNumLabels});
  for (std::size_t i = 0; i < rows; ++i) t.values()[i * kNumLabels + i % kNumLabels] = 1.0;
  return t;
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("architecture kinds and defaults") {
  for (const char* name : {"cnn", "lstm", "gru", "bilstm", "bigru"}) {
    CHECK(arch_kind_name(parse_arch_kind(name)) == name);
  }
  CHECK_THROWS_AS(parse_arch_kind("transformer"), UsageError);

  NeuralArchitecture cnn = NeuralArchitecture::for_kind(ArchKind::cnn, 300, 40);
  CHECK(cnn.fc_units == 50);
  CHECK(cnn.dropout == 0.8);
  CHECK(cnn.conv_filters == 32);
  NeuralArchitecture bigru = NeuralArchitecture::for_kind(ArchKind::bigru, 300, 40);
  CHECK(bigru.fc_units == 100);
  CHECK(bigru.dropout == 0.5);
  CHECK(bigru.hidden_units == 128);
  CHECK(bigru.representation_dim() == 256);
  NeuralArchitecture gru = NeuralArchitecture::for_kind(ArchKind::gru, 300, 40);
  CHECK(gru.representation_dim() == 128);
}

TEST_CASE("architecture json round-trip and validation") {
  NeuralArchitecture arch = NeuralArchitecture::for_kind(ArchKind::bilstm, 16, 12);
  NeuralArchitecture back = NeuralArchitecture::from_json(arch.to_json());
  CHECK(back.to_json() == arch.to_json());

  NeuralArchitecture bad = arch;
  bad.output_units = 3;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  NeuralArchitecture small_cnn = NeuralArchitecture::for_kind(ArchKind::cnn, 4, 5);
  CHECK_THROWS_AS(small_cnn.validate(), UsageError);
  NeuralArchitecture bad_dropout = arch;
  bad_dropout.dropout = 1.0;
  CHECK_THROWS_AS(bad_dropout.validate(), UsageError);
}

TEST_CASE("cnn representation matches the published shape arithmetic") {
  // 40x300 input: 3x3 -> 38x298 -> pooled 19x149; 5x5 -> 36x296 -> pooled 18x148.
  NeuralArchitecture arch = NeuralArchitecture::for_kind(ArchKind::cnn, 300, 40);
  CHECK(arch.representation_dim() == 32 * (19 * 149 + 18 * 148));
}

TEST_CASE("lstm parameter count matches the standard formula") {
  NeuralArchitecture arch = NeuralArchitecture::for_kind(ArchKind::lstm, 300, 8);
  EmbeddingTable table = tiny_table(10, 300, 1);
  NeuralModel model = build_model(arch, table, 7);
  std::size_t recurrent_params = model.param("fw.w").numel() + model.param("fw.b").numel();
  CHECK(recurrent_params == 219648);  // 4 * (128*(300+128) + 128)
}

TEST_CASE("initialization is xavier-bounded, zero-biased, and seed-deterministic") {
  NeuralArchitecture arch = toy_arch(ArchKind::bigru);
  EmbeddingTable table = tiny_table(8, arch.embed_dim, 3);
  NeuralModel a = build_model(arch, table, 11);
  NeuralModel b = build_model(arch, table, 11);
  NeuralModel c = build_model(arch, table, 12);

  REQUIRE(a.params.size() == b.params.size());
  bool any_diff_c = false;
  for (std::size_t p = 0; p < a.params.size(); ++p) {
    CHECK(a.params[p].first == b.params[p].first);
    CHECK(a.params[p].second.values() == b.params[p].second.values());
    if (a.params[p].second.values() != c.params[p].second.values()) any_diff_c = true;
  }
  CHECK(any_diff_c);

  // Weight bound for fw.wzr: r = sqrt(6 / ((4+3) + 2*3)).
  double r = std::sqrt(6.0 / (7.0 + 6.0));
  for (double v : a.param("fw.wzr").values()) {
    CHECK(std::abs(v) <= r);
  }
  for (double v : a.param("fc.b").values()) CHECK(v == 0.0);
  for (double v : a.param("out.b").values()) CHECK(v == 0.0);

  // Pad row copied from the table: all zeros.
  for (std::size_t d = 0; d < arch.embed_dim; ++d) CHECK(a.param("embedding").values()[d] == 0.0);
}

TEST_CASE("lstm cell fixtures") {
  const std::size_t hidden = 3;
  const std::size_t in_dim = 2;
  LstmWeights w;
  w.w = Tensor::zeros({in_dim + hidden, 4 * hidden});
  w.b = Tensor::zeros({4 * hidden});

  Tensor x = Tensor::zeros({1, in_dim});
  Tensor h = Tensor::zeros({1, hidden});
  Tensor c = Tensor::zeros({1, hidden});

  SUBCASE("all-zero parameters and inputs give a zero state") {
    auto [h2, c2] = lstm_step(x, h, c, w, nullptr);
    for (double v : h2.values()) CHECK(v == 0.0);
    for (double v : c2.values()) CHECK(v == 0.0);
  }

  SUBCASE("saturated forget gate carries memory through") {
    for (std::size_t u = 0; u < hidden; ++u) w.b.values()[hidden + u] = 50.0;  // f-gate block
    Tensor c0 = Tensor::from_values({1, hidden}, {0.3, -0.7, 1.2});
    auto [h2, c2] = lstm_step(x, h, c0, w, nullptr);
    for (std::size_t u = 0; u < hidden; ++u) {
      CHECK(c2.values()[u] == doctest::Approx(c0.values()[u]).epsilon(1e-9));
    }
  }

  SUBCASE("gradient check against finite differences") {
    Rng rng(21);
    for (double& v : w.w.values()) v = rng.uniform(-0.5, 0.5);
    for (double& v : w.b.values()) v = rng.uniform(-0.5, 0.5);
    Tensor xr = Tensor::zeros({2, in_dim});
    Tensor hr = Tensor::zeros({2, hidden});
    Tensor cr = Tensor::zeros({2, hidden});
    for (double& v : xr.values()) v = rng.uniform(-1.0, 1.0);
    for (double& v : hr.values()) v = rng.uniform(-1.0, 1.0);
    for (double& v : cr.values()) v = rng.uniform(-1.0, 1.0);
    double err = gradient_check(
        [&](Tape* tape) {
          auto [h2, c2] = lstm_step(xr, hr, cr, w, tape);
          return sum(add(h2, c2, tape), tape);
        },
        {w.w, w.b, xr, hr, cr});
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("gru cell fixtures") {
  const std::size_t hidden = 3;
  const std::size_t in_dim = 2;
  GruWeights w;
  w.wzr = Tensor::zeros({in_dim + hidden, 2 * hidden});
  w.bzr = Tensor::zeros({2 * hidden});
  w.wg = Tensor::zeros({in_dim + hidden, hidden});
  w.bg = Tensor::zeros({hidden});

  SUBCASE("zero parameters and inputs give a zero state") {
    Tensor x = Tensor::zeros({1, in_dim});
    Tensor h = Tensor::zeros({1, hidden});
    Tensor h2 = gru_step(x, h, w, nullptr);
    for (double v : h2.values()) CHECK(v == 0.0);
  }

  SUBCASE("closed update gate keeps the previous state") {
    for (std::size_t u = 0; u < hidden; ++u) w.bzr.values()[u] = -50.0;  // z-gate block
    Tensor x = Tensor::from_values({1, in_dim}, {0.4, -0.9});
    Tensor h = Tensor::from_values({1, hidden}, {0.3, -0.7, 1.2});
    Tensor h2 = gru_step(x, h, w, nullptr);
    for (std::size_t u = 0; u < hidden; ++u) {
      CHECK(h2.values()[u] == doctest::Approx(h.values()[u]).epsilon(1e-9));
    }
  }

  SUBCASE("gradient check against finite differences") {
    Rng rng(22);
    for (double& v : w.wzr.values()) v = rng.uniform(-0.5, 0.5);
    for (double& v : w.bzr.values()) v = rng.uniform(-0.5, 0.5);
    for (double& v : w.wg.values()) v = rng.uniform(-0.5, 0.5);
    for (double& v : w.bg.values()) v = rng.uniform(-0.5, 0.5);
    Tensor xr = Tensor::zeros({2, in_dim});
    Tensor hr = Tensor::zeros({2, hidden});
    for (double& v : xr.values()) v = rng.uniform(-1.0, 1.0);
    for (double& v : hr.values()) v = rng.uniform(-1.0, 1.0);
    double err = gradient_check(
        [&](Tape* tape) { return sum(gru_step(xr, hr, w, tape), tape); },
        {w.wzr, w.bzr, w.wg, w.bg, xr, hr});
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("forward output shape and softmax normalization") {
  for (ArchKind kind : {ArchKind::cnn, ArchKind::lstm, ArchKind::gru, ArchKind::bilstm,
                        ArchKind::bigru}) {
    NeuralArchitecture arch = toy_arch(kind);
    EmbeddingTable table = tiny_table(8, arch.embed_dim, 5);
    NeuralModel model = build_model(arch, table, 9);
    auto batch = toy_batch(arch, kind != ArchKind::cnn);

    SequenceResult result = run_sequence(model, batch);
    REQUIRE(result.probabilities.rows == batch.size());
    REQUIRE(result.probabilities.cols == kNumLabels);
    for (std::size_t i = 0; i < result.probabilities.rows; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < kNumLabels; ++j) {
        double p = result.probabilities.at(i, j);
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    CHECK_FALSE(result.warned_empty);
  }
}

TEST_CASE("batch rows must be encoded to max_len") {
  NeuralArchitecture arch = toy_arch(ArchKind::gru);
  NeuralModel model = build_model(arch, tiny_table(8, arch.embed_dim, 5), 9);
  std::vector<std::vector<std::int32_t>> bad = {{2, 3}};
  CHECK_THROWS_AS(model_forward(model, bad, nullptr, false, 0), UsageError);
}

TEST_CASE("pad masking makes recurrent output invariant to extra padding") {
  for (ArchKind kind : {ArchKind::lstm, ArchKind::gru, ArchKind::bilstm, ArchKind::bigru}) {
    NeuralArchitecture small = toy_arch(kind);
    small.max_len = 4;
    EmbeddingTable table = tiny_table(8, small.embed_dim, 5);
    NeuralModel model = build_model(small, table, 31);

    // Same parameters, longer padded window.
    NeuralModel wide = model;
    wide.arch.max_len = 9;

    std::vector<std::vector<std::int32_t>> short_batch = {{2, 5, 3, 0}, {4, 0, 0, 0}};
    std::vector<std::vector<std::int32_t>> long_batch = {{2, 5, 3, 0, 0, 0, 0, 0, 0},
                                                         {4, 0, 0, 0, 0, 0, 0, 0, 0}};
    Tensor a = model_forward(model, short_batch, nullptr, false, 0);
    Tensor b = model_forward(wide, long_batch, nullptr, false, 0);
    REQUIRE(a.values().size() == b.values().size());
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      CHECK(a.values()[i] == b.values()[i]);  // exact equality
    }
  }
}

TEST_CASE("bilstm with tied directions agrees on a palindrome") {
  NeuralArchitecture arch = toy_arch(ArchKind::bilstm);
  EmbeddingTable table = tiny_table(8, arch.embed_dim, 5);
  NeuralModel model = build_model(arch, table, 13);
  model.param("bw.w").values() = model.param("fw.w").values();
  model.param("bw.b").values() = model.param("fw.b").values();

  std::vector<std::vector<std::int32_t>> batch = {{2, 6, 2, 0, 0}};
  Tensor fw = recurrent_direction_state(model, "fw", false, batch, nullptr);
  Tensor bw = recurrent_direction_state(model, "bw", true, batch, nullptr);
  REQUIRE(fw.values().size() == bw.values().size());
  for (std::size_t i = 0; i < fw.values().size(); ++i) {
    CHECK(fw.values()[i] == bw.values()[i]);
  }
}

TEST_CASE("empty sequences produce uniform rows and a warning") {
  NeuralArchitecture arch = toy_arch(ArchKind::bigru);
  NeuralModel model = build_model(arch, tiny_table(8, arch.embed_dim, 5), 9);
  std::vector<std::vector<std::int32_t>> batch = {{0, 0, 0, 0, 0}, {2, 3, 0, 0, 0}};
  SequenceResult result = run_sequence(model, batch);
  CHECK(result.warned_empty);
  for (std::size_t j = 0; j < kNumLabels; ++j) {
    CHECK(result.probabilities.at(0, j) == 0.25);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < kNumLabels; ++j) sum += result.probabilities.at(1, j);
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("full-model gradient checks at toy dimensions") {
  for (ArchKind kind : {ArchKind::lstm, ArchKind::gru, ArchKind::bilstm, ArchKind::bigru,
                        ArchKind::cnn}) {
    CAPTURE(arch_kind_name(kind));
    for (std::uint64_t seed : {100ull, 101ull}) {
      NeuralArchitecture arch = toy_arch(kind);
      EmbeddingTable table = tiny_table(8, arch.embed_dim, seed);
      NeuralModel model = build_model(arch, table, seed + 1);
      // The cnn consumes pad rows as image content, so keep its batch unpadded;
      // recurrent batches mix real pads to exercise masking.
      auto batch = toy_batch(arch, kind != ArchKind::cnn);
      Tensor targets = onehot_targets(batch.size());

      double err = gradient_check(
          [&](Tape* tape) {
            Tensor logits = model_forward(model, batch, tape, false, 0);
            auto [loss, probs] = softmax_cross_entropy(logits, targets, tape);
            return loss;
          },
          model.parameter_list());
      CHECK(err <= 1e-4);
    }
  }
}

TEST_CASE("training-mode dropout is seed-stable and off at inference") {
  NeuralArchitecture arch = toy_arch(ArchKind::gru);
  NeuralModel model = build_model(arch, tiny_table(8, arch.embed_dim, 5), 9);
  auto batch = toy_batch(arch, true);

  Tensor t1 = model_forward(model, batch, nullptr, true, 77);
  Tensor t2 = model_forward(model, batch, nullptr, true, 77);
  CHECK(t1.values() == t2.values());
  Tensor t3 = model_forward(model, batch, nullptr, true, 78);
  CHECK(t1.values() != t3.values());
  Tensor i1 = model_forward(model, batch, nullptr, false, 77);
  Tensor i2 = model_forward(model, batch, nullptr, false, 123);
  CHECK(i1.values() == i2.values());
}

TEST_CASE("ensemble combination fixtures") {
  SUBCASE("agreement keeps the agreed label") {
    DenseMatrix a(1, 4);
    DenseMatrix b(1, 4);
    a.at(0, 2) = 0.9; a.at(0, 0) = 0.1;
    b.at(0, 2) = 0.5; b.at(0, 1) = 0.3; b.at(0, 0) = 0.2;
    EnsembleResult r = combine_majority(a, b);
    CHECK(r.labels[0] == 2);
  }
  SUBCASE("disagreement takes the higher averaged confidence") {
    DenseMatrix a(1, 4);
    DenseMatrix b(1, 4);
    double va[4] = {0.6, 0.2, 0.1, 0.1};
    double vb[4] = {0.1, 0.7, 0.1, 0.1};
    for (std::size_t j = 0; j < 4; ++j) {
      a.at(0, j) = va[j];
      b.at(0, j) = vb[j];
    }
    EnsembleResult r = combine_majority(a, b);
    CHECK(r.labels[0] == 1);  // averaged [0.35, 0.45, 0.1, 0.1]
    CHECK(r.probabilities.at(0, 0) == doctest::Approx(0.35));
    CHECK(r.probabilities.at(0, 1) == doctest::Approx(0.45));
  }
  SUBCASE("exact average tie falls back to canonical order") {
    DenseMatrix a(1, 4);
    DenseMatrix b(1, 4);
    double va[4] = {0.6, 0.2, 0.1, 0.1};
    double vb[4] = {0.2, 0.6, 0.1, 0.1};
    for (std::size_t j = 0; j < 4; ++j) {
      a.at(0, j) = va[j];
      b.at(0, j) = vb[j];
    }
    EnsembleResult r = combine_majority(a, b);
    CHECK(r.labels[0] == 0);  // anger wins the tie
  }
  SUBCASE("scores are always the elementwise mean") {
    DenseMatrix a(2, 4);
    DenseMatrix b(2, 4);
    Rng rng(5);
    for (std::size_t i = 0; i < 8; ++i) {
      a.data[i] = rng.uniform();
      b.data[i] = rng.uniform();
    }
    EnsembleResult r = combine_majority(a, b);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(r.probabilities.data[i] == (a.data[i] + b.data[i]) / 2.0);
    }
  }
  SUBCASE("shape mismatch is rejected") {
    DenseMatrix a(1, 4);
    DenseMatrix b(2, 4);
    CHECK_THROWS_AS(combine_majority(a, b), UsageError);
  }
}

TEST_CASE("ensemble_predict runs two models end to end") {
  NeuralArchitecture bilstm_arch = toy_arch(ArchKind::bilstm);
  NeuralArchitecture bigru_arch = toy_arch(ArchKind::bigru);
  EmbeddingTable table = tiny_table(8, bilstm_arch.embed_dim, 5);
  NeuralModel m1 = build_model(bilstm_arch, table, 41);
  NeuralModel m2 = build_model(bigru_arch, table, 42);
  auto batch = toy_batch(bilstm_arch, true);

  EnsembleResult r = ensemble_predict(m1, m2, batch);
  SequenceResult r1 = run_sequence(m1, batch);
  SequenceResult r2 = run_sequence(m2, batch);
  REQUIRE(r.labels.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      CHECK(r.probabilities.at(i, j) ==
            (r1.probabilities.at(i, j) + r2.probabilities.at(i, j)) / 2.0);
    }
  }
}

}  // TEST_SUITE
