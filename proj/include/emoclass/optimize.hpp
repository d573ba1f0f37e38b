#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emoclass/classical.hpp"
#include "emoclass/dense.hpp"
#include "emoclass/neural.hpp"
#include "json.hpp"

namespace emoclass {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(const std::string& name);
const char* optimizer_name(OptimizerKind kind);

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  std::size_t epochs = 35;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;

  void validate() const;  // batch_size >= 1, learning_rate > 0, epochs >= 1
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Encoded documents ready for a neural model: id sequences plus labels.
struct EncodedSet {
  std::vector<std::vector<std::int32_t>> sequences;
  std::vector<int> labels;

  std::size_t size() const { return sequences.size(); }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> validation_loss;
  std::vector<double> validation_accuracy;
  std::size_t total_steps = 0;
};

// Per-parameter first/second moment accumulators for adam.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// One optimizer step over `params` using the gradients already on their tapes.
void sgd_step(const std::vector<Tensor>& params, const TrainConfig& config);
void adam_step(const std::vector<Tensor>& params, AdamState& state, const TrainConfig& config);

// Mini-batch training; the model is updated in place and per-epoch metrics are
// recorded on both sets. The returned model is the last-epoch model.
TrainHistory train(NeuralModel& model, const EncodedSet& train_set,
                   const EncodedSet& validation_set, const TrainConfig& config);

// Mean cross-entropy loss and argmax accuracy of the model on a set.
std::pair<double, double> evaluate_set(const NeuralModel& model, const EncodedSet& set,
                                       std::size_t batch_size);

// Disjoint index folds: sizes differ by at most one (first n % k folds take the
// extra sample), order seeded.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                  std::uint64_t seed);

// Ordered hyper-parameter axes; enumeration advances the last axis fastest.
struct GridSpec {
  std::vector<std::pair<std::string, std::vector<ParamValue>>> axes;

  std::size_t combination_count() const;
  static GridSpec from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json to_json() const;
};

struct CVCombination {
  std::size_t index = 0;
  ClassicalSpec spec;
  bool valid = true;
  std::string skip_reason;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

struct CVResult {
  std::vector<CVCombination> combinations;
  std::size_t best_index = 0;

  const CVCombination& best() const { return combinations[best_index]; }
  nlohmann::json best_params() const;
  std::string to_csv() const;  // combination, fold, accuracy
  nlohmann::json to_json() const;
};

// Trains every valid grid combination k times (train on k-1 folds, validate on
// the held-out fold); invalid combinations are skipped and logged on the result.
CVResult grid_search_cv(const ClassicalSpec& base, const GridSpec& grid, const DenseMatrix& x,
                        const std::vector<int>& y, std::size_t k, std::uint64_t seed);

}  // namespace emoclass
