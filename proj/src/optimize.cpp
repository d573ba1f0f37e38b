#include "emoclass/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "emoclass/corpus.hpp"
#include "emoclass/util.hpp"

namespace emoclass {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw UsageError("unknown optimizer: " + name);
}

const char* optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw UsageError("adam_epsilon must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"epochs", epochs},
          {"optimizer", optimizer_name(optimizer)},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_epsilon", adam_epsilon},
          {"seed", seed},
          {"shuffle_each_epoch", shuffle_each_epoch}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig config;
  if (j.contains("batch_size")) config.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("learning_rate")) config.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("epochs")) config.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("optimizer")) config.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  if (j.contains("beta1")) config.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) config.beta2 = j.at("beta2").get<double>();
  if (j.contains("adam_epsilon")) config.adam_epsilon = j.at("adam_epsilon").get<double>();
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("shuffle_each_epoch")) {
    config.shuffle_each_epoch = j.at("shuffle_each_epoch").get<bool>();
  }
  config.validate();
  return config;
}

void sgd_step(const std::vector<Tensor>& params, const TrainConfig& config) {
  for (const Tensor& p : params) {
    Tensor t = p;
    auto& values = t.values();
    const auto& grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] -= config.learning_rate * grad[i];
    }
  }
}

void adam_step(const std::vector<Tensor>& params, AdamState& state, const TrainConfig& config) {
  if (state.m.size() != params.size()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(params[p].numel(), 0.0);
      state.v[p].assign(params[p].numel(), 0.0);
    }
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor t = params[p];
    auto& values = t.values();
    const auto& grad = t.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      double g = grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
  }
}

namespace {

Tensor onehot_rows(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  Tensor t = Tensor::zeros({rows.size(), static_cast<std::size_t>(kNumLabels)});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.values()[i * kNumLabels + static_cast<std::size_t>(labels[rows[i]])] = 1.0;
  }
  return t;
}

void check_set(const EncodedSet& set, const char* what) {
  if (set.sequences.empty()) throw UsageError(std::string(what) + " set is empty");
  if (set.sequences.size() != set.labels.size()) {
    throw UsageError(std::string(what) + " set has mismatched sequence and label counts");
  }
  for (int label : set.labels) {
    if (label < 0 || label >= static_cast<int>(kNumLabels)) {
      throw UsageError(std::string(what) + " set has a label outside the four-emotion range");
    }
  }
}

// Argmax with ties toward the lower label, matching scores_to_labels.
int argmax_label(const double* row) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(kNumLabels); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

std::pair<double, double> evaluate_set(const NeuralModel& model, const EncodedSet& set,
                                       std::size_t batch_size) {
  check_set(set, "evaluation");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  std::size_t n = set.size();
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::size_t stop = std::min(n, start + batch_size);
    std::vector<std::vector<std::int32_t>> batch(set.sequences.begin() + start,
                                                 set.sequences.begin() + stop);
    std::vector<std::size_t> rows(stop - start);
    std::iota(rows.begin(), rows.end(), start);
    Tensor targets = onehot_rows(set.labels, rows);
    Tensor logits = model_forward(model, batch, nullptr, false, 0);
    auto [loss, probs] = softmax_cross_entropy(logits, targets, nullptr);
    loss_sum += loss.values()[0] * static_cast<double>(stop - start);
    for (std::size_t i = 0; i < stop - start; ++i) {
      if (argmax_label(probs.values().data() + i * kNumLabels) == set.labels[start + i]) {
        ++correct;
      }
    }
  }
  return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

TrainHistory train(NeuralModel& model, const EncodedSet& train_set,
                   const EncodedSet& validation_set, const TrainConfig& config) {
  config.validate();
  check_set(train_set, "training");
  check_set(validation_set, "validation");

  std::vector<Tensor> params = model.parameter_list();
  for (Tensor& p : params) p.set_requires_grad(true);
  AdamState adam;
  TrainHistory history;

  std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle_each_epoch) {
      Rng rng(mix_seed(config.seed, 0xE70C0000ull + epoch));
      rng.shuffle(order);
    }
    std::size_t steps = (n + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < steps; ++b) {
      std::size_t start = b * config.batch_size;
      std::size_t stop = std::min(n, start + config.batch_size);
      std::vector<std::vector<std::int32_t>> batch;
      std::vector<std::size_t> rows;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(train_set.sequences[order[i]]);
        rows.push_back(order[i]);
      }
      Tensor targets = onehot_rows(train_set.labels, rows);

      for (Tensor& p : params) p.zero_grad();
      try {
        Tape tape;
        std::uint64_t dropout_seed = mix_seed(mix_seed(config.seed, epoch), b);
        Tensor logits = model_forward(model, batch, &tape, true, dropout_seed);
        auto [loss, probs] = softmax_cross_entropy(logits, targets, &tape);
        if (!std::isfinite(loss.values()[0])) throw NumericError("non-finite loss");
        backward(loss, tape);
      } catch (const NumericError& e) {
        throw NumericError("training diverged: " + std::string(e.what()) + " at epoch " +
                           std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1));
      }
      if (config.optimizer == OptimizerKind::adam) {
        adam_step(params, adam, config);
      } else {
        sgd_step(params, config);
      }
      history.total_steps += 1;
    }

    double train_loss;
    double train_acc;
    double val_loss;
    double val_acc;
    try {
      std::tie(train_loss, train_acc) = evaluate_set(model, train_set, config.batch_size);
      std::tie(val_loss, val_acc) = evaluate_set(model, validation_set, config.batch_size);
      if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
        throw NumericError("non-finite loss");
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged: " + std::string(e.what()) +
                         " while evaluating epoch " + std::to_string(epoch + 1));
    }
    history.train_loss.push_back(train_loss);
    history.train_accuracy.push_back(train_acc);
    history.validation_loss.push_back(val_loss);
    history.validation_accuracy.push_back(val_acc);
  }
  return history;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                  std::uint64_t seed) {
  if (k < 2) throw UsageError("kfold_split needs k >= 2");
  if (n < k) throw DataError("kfold_split needs at least k samples");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0xF01D5ull));
  rng.shuffle(idx);

  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t base = n / k;
  std::size_t extra = n % k;
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(idx.begin() + cursor, idx.begin() + cursor + size);
    cursor += size;
  }
  return folds;
}

std::size_t GridSpec::combination_count() const {
  std::size_t total = axes.empty() ? 0 : 1;
  for (const auto& [name, values] : axes) total *= values.size();
  return total;
}

GridSpec GridSpec::from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw UsageError("grid file must be a JSON object of parameter lists");
  GridSpec grid;
  for (const auto& [name, list] : j.items()) {
    if (!list.is_array() || list.empty()) {
      throw UsageError("grid axis '" + name + "' must be a non-empty array");
    }
    std::vector<ParamValue> values;
    for (const auto& v : list) {
      if (v.is_null()) {
        values.emplace_back(std::monostate{});
      } else if (v.is_number_integer() || v.is_number_unsigned()) {
        values.emplace_back(v.get<std::int64_t>());
      } else if (v.is_number_float()) {
        values.emplace_back(v.get<double>());
      } else if (v.is_string()) {
        values.emplace_back(v.get<std::string>());
      } else {
        throw UsageError("grid axis '" + name + "' has an unsupported value type");
      }
    }
    grid.axes.emplace_back(name, std::move(values));
  }
  return grid;
}

nlohmann::ordered_json GridSpec::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, values] : axes) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const ParamValue& v : values) {
      if (std::holds_alternative<std::monostate>(v)) {
        list.push_back(nullptr);
      } else if (std::holds_alternative<double>(v)) {
        list.push_back(std::get<double>(v));
      } else if (std::holds_alternative<std::int64_t>(v)) {
        list.push_back(std::get<std::int64_t>(v));
      } else {
        list.push_back(std::get<std::string>(v));
      }
    }
    j[name] = std::move(list);
  }
  return j;
}

nlohmann::json CVResult::best_params() const {
  return best().spec.to_json();
}

std::string CVResult::to_csv() const {
  std::ostringstream out;
  out << "combination,fold,accuracy\n";
  for (const CVCombination& combo : combinations) {
    if (!combo.valid) continue;
    for (std::size_t f = 0; f < combo.fold_accuracy.size(); ++f) {
      out << combo.index << ',' << f << ',' << nlohmann::json(combo.fold_accuracy[f]).dump()
          << '\n';
    }
  }
  return out.str();
}

nlohmann::json CVResult::to_json() const {
  nlohmann::json combos = nlohmann::json::array();
  for (const CVCombination& combo : combinations) {
    nlohmann::json entry = {{"index", combo.index},
                            {"params", combo.spec.to_json()},
                            {"valid", combo.valid}};
    if (combo.valid) {
      entry["fold_accuracy"] = combo.fold_accuracy;
      entry["mean_accuracy"] = combo.mean_accuracy;
    } else {
      entry["skip_reason"] = combo.skip_reason;
    }
    combos.push_back(std::move(entry));
  }
  return {{"combinations", std::move(combos)},
          {"best_index", best_index},
          {"best_params", best_params()}};
}

namespace {

// Combination c -> per-axis value indices, advancing the last axis fastest.
std::vector<std::size_t> axis_indices(const GridSpec& grid, std::size_t c) {
  std::vector<std::size_t> idx(grid.axes.size(), 0);
  for (std::size_t a = grid.axes.size(); a-- > 0;) {
    std::size_t len = grid.axes[a].second.size();
    idx[a] = c % len;
    c /= len;
  }
  return idx;
}

DenseMatrix gather_rows(const DenseMatrix& x, const std::vector<std::size_t>& rows) {
  DenseMatrix out(rows.size(), x.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

CVResult grid_search_cv(const ClassicalSpec& base, const GridSpec& grid, const DenseMatrix& x,
                        const std::vector<int>& y, std::size_t k, std::uint64_t seed) {
  if (grid.axes.empty()) throw UsageError("grid has no axes");
  if (y.size() != x.rows) throw UsageError("label count does not match sample count");
  std::size_t total = grid.combination_count();

  // One shared fold assignment for every combination.
  std::vector<std::vector<std::size_t>> folds = kfold_split(x.rows, k, seed);
  std::vector<std::vector<std::size_t>> train_rows(k);
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g == f) continue;
      train_rows[f].insert(train_rows[f].end(), folds[g].begin(), folds[g].end());
    }
  }

  CVResult result;
  result.combinations.resize(total);
  parallel_for(total, [&](std::size_t c) {
    CVCombination& combo = result.combinations[c];
    combo.index = c;
    combo.spec = base;
    std::vector<std::size_t> idx = axis_indices(grid, c);
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      combo.spec.params[grid.axes[a].first] = grid.axes[a].second[idx[a]];
    }
    try {
      validate_spec(combo.spec);
    } catch (const UsageError& e) {
      combo.valid = false;
      combo.skip_reason = e.what();
      return;
    }
    double sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      DenseMatrix xtr = gather_rows(x, train_rows[f]);
      std::vector<int> ytr;
      ytr.reserve(train_rows[f].size());
      for (std::size_t r : train_rows[f]) ytr.push_back(y[r]);
      DenseMatrix xval = gather_rows(x, folds[f]);

      auto model = train_classical(combo.spec, xtr, ytr, mix_seed(mix_seed(seed, c), f));
      std::vector<int> predicted = scores_to_labels(model->predict_scores(xval));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < folds[f].size(); ++i) {
        if (predicted[i] == y[folds[f][i]]) ++hits;
      }
      double acc = static_cast<double>(hits) / static_cast<double>(folds[f].size());
      combo.fold_accuracy.push_back(acc);
      sum += acc;
    }
    combo.mean_accuracy = sum / static_cast<double>(k);
  });

  bool found = false;
  for (std::size_t c = 0; c < total; ++c) {
    const CVCombination& combo = result.combinations[c];
    if (!combo.valid) continue;
    if (!found || combo.mean_accuracy > result.combinations[result.best_index].mean_accuracy) {
      result.best_index = c;
      found = true;
    }
  }
  if (!found) throw UsageError("every grid combination was invalid");
  return result;
}

}  // namespace emoclass
