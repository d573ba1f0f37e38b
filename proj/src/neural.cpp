#include "emoclass/neural.hpp"

#include <algorithm>
#include <cmath>

#include "emoclass/corpus.hpp"
#include "emoclass/util.hpp"

namespace emoclass {

ArchKind parse_arch_kind(const std::string& name) {
  if (name == "cnn") return ArchKind::cnn;
  if (name == "lstm") return ArchKind::lstm;
  if (name == "gru") return ArchKind::gru;
  if (name == "bilstm") return ArchKind::bilstm;
  if (name == "bigru") return ArchKind::bigru;
  throw UsageError("unknown architecture: " + name);
}

std::string arch_kind_name(ArchKind kind) {
  switch (kind) {
    case ArchKind::cnn: return "cnn";
    case ArchKind::lstm: return "lstm";
    case ArchKind::gru: return "gru";
    case ArchKind::bilstm: return "bilstm";
    case ArchKind::bigru: return "bigru";
  }
  throw UsageError("unknown architecture enum value");
}

bool is_recurrent(ArchKind kind) { return kind != ArchKind::cnn; }

bool is_bidirectional(ArchKind kind) {
  return kind == ArchKind::bilstm || kind == ArchKind::bigru;
}

NeuralArchitecture NeuralArchitecture::for_kind(ArchKind kind, std::size_t embed_dim,
                                                std::size_t max_len) {
  NeuralArchitecture arch;
  arch.kind = kind;
  arch.embed_dim = embed_dim;
  arch.max_len = max_len;
  arch.hidden_units = 128;
  arch.fc_units = kind == ArchKind::cnn ? 50 : 100;
  arch.conv_filters = 32;
  arch.dropout = kind == ArchKind::cnn ? 0.8 : 0.5;
  arch.output_units = kNumLabels;
  return arch;
}

nlohmann::json NeuralArchitecture::to_json() const {
  return nlohmann::json{{"kind", arch_kind_name(kind)},
                        {"embed_dim", embed_dim},
                        {"max_len", max_len},
                        {"hidden_units", hidden_units},
                        {"fc_units", fc_units},
                        {"conv_filters", conv_filters},
                        {"dropout", dropout},
                        {"output_units", output_units}};
}

NeuralArchitecture NeuralArchitecture::from_json(const nlohmann::json& j) {
  NeuralArchitecture arch;
  arch.kind = parse_arch_kind(j.at("kind").get<std::string>());
  arch.embed_dim = j.at("embed_dim").get<std::size_t>();
  arch.max_len = j.at("max_len").get<std::size_t>();
  arch.hidden_units = j.at("hidden_units").get<std::size_t>();
  arch.fc_units = j.at("fc_units").get<std::size_t>();
  arch.conv_filters = j.at("conv_filters").get<std::size_t>();
  arch.dropout = j.at("dropout").get<double>();
  arch.output_units = j.at("output_units").get<std::size_t>();
  arch.validate();
  return arch;
}

namespace {

std::size_t conv_pooled_cells(std::size_t len, std::size_t dim, std::size_t kernel) {
  std::size_t oh = (len - kernel) / 1 + 1;
  std::size_t ow = (dim - kernel) / 1 + 1;
  return (oh / 2) * (ow / 2);
}

}  // namespace

std::size_t NeuralArchitecture::representation_dim() const {
  if (kind == ArchKind::cnn) {
    return conv_filters * (conv_pooled_cells(max_len, embed_dim, 3) +
                           conv_pooled_cells(max_len, embed_dim, 5));
  }
  return is_bidirectional(kind) ? 2 * hidden_units : hidden_units;
}

void NeuralArchitecture::validate() const {
  if (output_units != kNumLabels) {
    throw UsageError("output layer width must equal the number of emotion labels");
  }
  if (embed_dim == 0 || max_len == 0) throw UsageError("embed_dim and max_len must be positive");
  if (fc_units == 0) throw UsageError("fc_units must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout must lie in [0, 1)");
  if (kind == ArchKind::cnn) {
    if (conv_filters == 0) throw UsageError("conv_filters must be positive");
    // The 5x5 branch must survive convolution and 2x2 pooling.
    if (max_len < 6 || embed_dim < 6) {
      throw UsageError("cnn needs max_len >= 6 and embed_dim >= 6 for the 5x5 branch");
    }
  } else if (hidden_units == 0) {
    throw UsageError("hidden_units must be positive");
  }
}

Tensor NeuralModel::param(const std::string& name) const {
  for (const auto& [key, tensor] : params) {
    if (key == name) return tensor;
  }
  throw UsageError("model has no parameter named " + name);
}

std::vector<Tensor> NeuralModel::parameter_list() const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& [key, tensor] : params) out.push_back(tensor);
  return out;
}

std::size_t NeuralModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [key, tensor] : params) {
    if (key != "embedding") total += tensor.numel();
  }
  return total;
}

namespace {

Tensor xavier(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out) {
  double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  std::vector<double> values(count);
  for (double& v : values) v = rng.uniform(-r, r);
  return Tensor::from_values(std::move(shape), std::move(values));
}

void add_recurrent_params(NeuralModel& model, const std::string& prefix, bool lstm_cell,
                          std::size_t embed_dim, std::size_t hidden, Rng& rng) {
  std::size_t in = embed_dim + hidden;
  if (lstm_cell) {
    model.params.emplace_back(prefix + ".w", xavier(rng, {in, 4 * hidden}, in, 4 * hidden));
    model.params.emplace_back(prefix + ".b", Tensor::zeros({4 * hidden}));
  } else {
    model.params.emplace_back(prefix + ".wzr", xavier(rng, {in, 2 * hidden}, in, 2 * hidden));
    model.params.emplace_back(prefix + ".bzr", Tensor::zeros({2 * hidden}));
    model.params.emplace_back(prefix + ".wg", xavier(rng, {in, hidden}, in, hidden));
    model.params.emplace_back(prefix + ".bg", Tensor::zeros({hidden}));
  }
}

}  // namespace

NeuralModel build_model(const NeuralArchitecture& arch, const EmbeddingTable& embedding,
                        std::uint64_t seed) {
  arch.validate();
  if (embedding.dim() != arch.embed_dim) {
    throw UsageError("embedding table dimension does not match the architecture");
  }
  if (embedding.rows() < 2) throw UsageError("embedding table must cover pad and unk rows");

  NeuralModel model;
  model.arch = arch;
  model.params.emplace_back(
      "embedding", Tensor::from_values({embedding.rows(), embedding.dim()}, embedding.values()));

  Rng rng(seed);
  const std::size_t h = arch.hidden_units;
  switch (arch.kind) {
    case ArchKind::lstm:
      add_recurrent_params(model, "fw", true, arch.embed_dim, h, rng);
      break;
    case ArchKind::bilstm:
      add_recurrent_params(model, "fw", true, arch.embed_dim, h, rng);
      add_recurrent_params(model, "bw", true, arch.embed_dim, h, rng);
      break;
    case ArchKind::gru:
      add_recurrent_params(model, "fw", false, arch.embed_dim, h, rng);
      break;
    case ArchKind::bigru:
      add_recurrent_params(model, "fw", false, arch.embed_dim, h, rng);
      add_recurrent_params(model, "bw", false, arch.embed_dim, h, rng);
      break;
    case ArchKind::cnn: {
      std::size_t f = arch.conv_filters;
      model.params.emplace_back("conv3.w", xavier(rng, {f, 3, 3}, 3 * 3, f * 3 * 3));
      model.params.emplace_back("conv3.b", Tensor::zeros({f}));
      model.params.emplace_back("conv5.w", xavier(rng, {f, 5, 5}, 5 * 5, f * 5 * 5));
      model.params.emplace_back("conv5.b", Tensor::zeros({f}));
      break;
    }
  }

  std::size_t rep = arch.representation_dim();
  model.params.emplace_back("fc.w", xavier(rng, {rep, arch.fc_units}, rep, arch.fc_units));
  model.params.emplace_back("fc.b", Tensor::zeros({arch.fc_units}));
  model.params.emplace_back("out.w",
                            xavier(rng, {arch.fc_units, arch.output_units}, arch.fc_units,
                                   arch.output_units));
  model.params.emplace_back("out.b", Tensor::zeros({arch.output_units}));
  return model;
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmWeights& weights, Tape* tape) {
  std::size_t hidden = h.shape()[1];
  Tensor cat = concat_cols(x, h, tape);
  Tensor gates = add(matmul(cat, weights.w, tape), weights.b, tape);
  Tensor i = sigmoid(slice_cols(gates, 0, hidden, tape), tape);
  Tensor f = sigmoid(slice_cols(gates, hidden, hidden, tape), tape);
  Tensor o = sigmoid(slice_cols(gates, 2 * hidden, hidden, tape), tape);
  Tensor g = tanh_op(slice_cols(gates, 3 * hidden, hidden, tape), tape);
  Tensor c_new = add(mul(f, c, tape), mul(i, g, tape), tape);
  Tensor h_new = mul(o, tanh_op(c_new, tape), tape);
  return {h_new, c_new};
}

Tensor gru_step(const Tensor& x, const Tensor& h, const GruWeights& weights, Tape* tape) {
  std::size_t hidden = h.shape()[1];
  Tensor cat = concat_cols(x, h, tape);
  Tensor zr = add(matmul(cat, weights.wzr, tape), weights.bzr, tape);
  Tensor z = sigmoid(slice_cols(zr, 0, hidden, tape), tape);
  Tensor r = sigmoid(slice_cols(zr, hidden, hidden, tape), tape);
  Tensor cat2 = concat_cols(x, mul(r, h, tape), tape);
  Tensor g = tanh_op(add(matmul(cat2, weights.wg, tape), weights.bg, tape), tape);
  // (1-z)*h + z*g written as h - z*h + z*g to avoid a ones constant.
  Tensor zh = mul(z, h, tape);
  return add(add(h, scale(zh, -1.0, tape), tape), mul(z, g, tape), tape);
}

namespace {

std::size_t sequence_length(const std::vector<std::int32_t>& ids) {
  std::size_t len = ids.size();
  while (len > 0 && ids[len - 1] == Vocabulary::kPadId) --len;
  return len;
}

void check_batch(const NeuralModel& model, const std::vector<std::vector<std::int32_t>>& batch) {
  if (batch.empty()) throw UsageError("batch must not be empty");
  for (const auto& row : batch) {
    if (row.size() != model.arch.max_len) {
      throw UsageError("every sequence must be encoded to exactly max_len ids");
    }
  }
}

// One direction of a recurrent pass over a padded batch. Steps at or past each
// row's true length are masked: state rows carry the previous value through.
Tensor direction_state(const NeuralModel& model, const std::string& prefix, bool reversed,
                       const std::vector<std::vector<std::int32_t>>& batch, Tape* tape) {
  const std::size_t b = batch.size();
  const std::size_t t_max = model.arch.max_len;
  const std::size_t hidden = model.arch.hidden_units;
  const bool lstm_cell = model.arch.kind == ArchKind::lstm || model.arch.kind == ArchKind::bilstm;

  Tensor embedding = model.param("embedding");
  LstmWeights lw;
  GruWeights gw;
  if (lstm_cell) {
    lw.w = model.param(prefix + ".w");
    lw.b = model.param(prefix + ".b");
  } else {
    gw.wzr = model.param(prefix + ".wzr");
    gw.bzr = model.param(prefix + ".bzr");
    gw.wg = model.param(prefix + ".wg");
    gw.bg = model.param(prefix + ".bg");
  }

  std::vector<std::size_t> lengths(b);
  for (std::size_t i = 0; i < b; ++i) lengths[i] = sequence_length(batch[i]);

  Tensor h = Tensor::zeros({b, hidden});
  Tensor c = Tensor::zeros({b, hidden});
  std::vector<std::int32_t> ids(b);
  std::vector<double> keep(b);
  std::vector<double> carry(b);

  for (std::size_t s = 0; s < t_max; ++s) {
    std::size_t t = reversed ? t_max - 1 - s : s;
    bool any_active = false;
    for (std::size_t i = 0; i < b; ++i) {
      ids[i] = batch[i][t];
      bool active = t < lengths[i];
      keep[i] = active ? 1.0 : 0.0;
      carry[i] = active ? 0.0 : 1.0;
      if (active) any_active = true;
    }
    if (!any_active) continue;

    Tensor x = embedding_rows(embedding, ids, tape);
    Tensor mask = Tensor::from_values({b}, keep);
    Tensor inv_mask = Tensor::from_values({b}, carry);
    if (lstm_cell) {
      auto [h_new, c_new] = lstm_step(x, h, c, lw, tape);
      h = add(row_scale(h_new, mask, tape), row_scale(h, inv_mask, tape), tape);
      c = add(row_scale(c_new, mask, tape), row_scale(c, inv_mask, tape), tape);
    } else {
      Tensor h_new = gru_step(x, h, gw, tape);
      h = add(row_scale(h_new, mask, tape), row_scale(h, inv_mask, tape), tape);
    }
  }
  return h;
}

Tensor cnn_representation(const NeuralModel& model,
                          const std::vector<std::vector<std::int32_t>>& batch, Tape* tape) {
  const std::size_t b = batch.size();
  const std::size_t t_max = model.arch.max_len;
  std::vector<std::int32_t> flat;
  flat.reserve(b * t_max);
  for (const auto& row : batch) flat.insert(flat.end(), row.begin(), row.end());

  Tensor emb = embedding_seq(model.param("embedding"), flat, b, t_max, tape);
  Tensor p3 = flatten(
      maxpool2d(conv2d(emb, model.param("conv3.w"), model.param("conv3.b"), 1, tape), tape), tape);
  Tensor p5 = flatten(
      maxpool2d(conv2d(emb, model.param("conv5.w"), model.param("conv5.b"), 1, tape), tape), tape);
  return concat_cols(p3, p5, tape);
}

}  // namespace

Tensor recurrent_direction_state(const NeuralModel& model, const std::string& prefix,
                                 bool reversed,
                                 const std::vector<std::vector<std::int32_t>>& batch, Tape* tape) {
  check_batch(model, batch);
  if (!is_recurrent(model.arch.kind)) throw UsageError("not a recurrent model");
  return direction_state(model, prefix, reversed, batch, tape);
}

Tensor model_forward(const NeuralModel& model,
                     const std::vector<std::vector<std::int32_t>>& batch, Tape* tape,
                     bool training, std::uint64_t dropout_seed) {
  check_batch(model, batch);
  const NeuralArchitecture& arch = model.arch;

  Tensor rep;
  if (arch.kind == ArchKind::cnn) {
    rep = cnn_representation(model, batch, tape);
  } else if (is_bidirectional(arch.kind)) {
    Tensor fw = direction_state(model, "fw", false, batch, tape);
    Tensor bw = direction_state(model, "bw", true, batch, tape);
    rep = concat_cols(fw, bw, tape);
  } else {
    rep = direction_state(model, "fw", false, batch, tape);
  }

  Tensor dropped = dropout(rep, arch.dropout, training, mix_seed(dropout_seed, 1), tape);
  Tensor fc = relu(add(matmul(dropped, model.param("fc.w"), tape), model.param("fc.b"), tape), tape);
  if (is_recurrent(arch.kind)) {
    fc = dropout(fc, arch.dropout, training, mix_seed(dropout_seed, 2), tape);
  }
  return add(matmul(fc, model.param("out.w"), tape), model.param("out.b"), tape);
}

SequenceResult run_sequence(const NeuralModel& model,
                            const std::vector<std::vector<std::int32_t>>& batch) {
  Tensor logits = model_forward(model, batch, nullptr, false, 0);
  const std::size_t b = batch.size();
  const std::size_t k = model.arch.output_units;

  SequenceResult result;
  result.probabilities = DenseMatrix(b, k);
  for (std::size_t i = 0; i < b; ++i) {
    if (sequence_length(batch[i]) == 0) {
      result.warned_empty = true;
      for (std::size_t j = 0; j < k; ++j) result.probabilities.at(i, j) = 1.0 / static_cast<double>(k);
      continue;
    }
    double top = logits.values()[i * k];
    for (std::size_t j = 1; j < k; ++j) top = std::max(top, logits.values()[i * k + j]);
    double norm = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double e = std::exp(logits.values()[i * k + j] - top);
      result.probabilities.at(i, j) = e;
      norm += e;
    }
    for (std::size_t j = 0; j < k; ++j) result.probabilities.at(i, j) /= norm;
  }
  return result;
}

EnsembleResult combine_majority(const DenseMatrix& prob_a, const DenseMatrix& prob_b) {
  if (prob_a.rows != prob_b.rows || prob_a.cols != prob_b.cols) {
    throw UsageError("ensemble members disagree on output shape");
  }
  EnsembleResult result;
  result.probabilities = DenseMatrix(prob_a.rows, prob_a.cols);
  result.labels.assign(prob_a.rows, 0);

  auto argmax = [](std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    return static_cast<int>(best);
  };

  for (std::size_t i = 0; i < prob_a.rows; ++i) {
    for (std::size_t j = 0; j < prob_a.cols; ++j) {
      result.probabilities.at(i, j) = (prob_a.at(i, j) + prob_b.at(i, j)) / 2.0;
    }
    int label_a = argmax(prob_a.row(i));
    int label_b = argmax(prob_b.row(i));
    result.labels[i] = label_a == label_b ? label_a : argmax(result.probabilities.row(i));
  }
  return result;
}

EnsembleResult ensemble_predict(const NeuralModel& bilstm, const NeuralModel& bigru,
                                const std::vector<std::vector<std::int32_t>>& batch) {
  if (bilstm.arch.output_units != bigru.arch.output_units) {
    throw UsageError("ensemble members disagree on the label set");
  }
  SequenceResult a = run_sequence(bilstm, batch);
  SequenceResult b = run_sequence(bigru, batch);
  EnsembleResult result = combine_majority(a.probabilities, b.probabilities);
  result.warned_empty = a.warned_empty || b.warned_empty;
  return result;
}

}  // namespace emoclass
