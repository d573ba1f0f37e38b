#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoclass/dense.hpp"

namespace emoclass {

enum class Algorithm {
  logreg,
  svm,
  knn,
  naive_bayes,
  decision_tree,
  random_forest,
};

Algorithm parse_algorithm(const std::string& name);
std::string algorithm_name(Algorithm a);

// Hyper-parameter value: null (e.g. unlimited max_depth), number, or keyword.
using ParamValue = std::variant<std::monostate, double, std::int64_t, std::string>;

struct ClassicalSpec {
  Algorithm algorithm = Algorithm::logreg;
  std::map<std::string, ParamValue> params;

  // {"algorithm": "...", "params": {...}}; params values may be null, numeric, or string.
  static ClassicalSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  bool has(const std::string& name) const;
  bool is_null(const std::string& name) const;
  double get_double(const std::string& name, double fallback) const;
  std::int64_t get_int(const std::string& name, std::int64_t fallback) const;
  std::string get_string(const std::string& name, const std::string& fallback) const;
};

// Rejects unknown parameter names, out-of-range values, and unsupported
// penalty/solver combinations. Throws UsageError.
void validate_spec(const ClassicalSpec& spec);

class ClassicalModel {
 public:
  virtual ~ClassicalModel() = default;
  virtual Algorithm algorithm() const = 0;
  virtual std::size_t feature_dim() const = 0;
  // One row per input row, one column per label in canonical order. Rows are
  // probabilities for logreg / naive bayes / forest, leaf class frequencies for
  // the tree, signed decision values for svm, inverse-distance weights for knn.
  virtual DenseMatrix predict_scores(const DenseMatrix& x) const = 0;
  // Learned parameters, sufficient to rebuild the model via classical_from_state.
  virtual nlohmann::json learned_state() const = 0;
};

std::unique_ptr<ClassicalModel> train_classical(const ClassicalSpec& spec, const DenseMatrix& x,
                                                const std::vector<int>& y, std::uint64_t seed);
std::unique_ptr<ClassicalModel> classical_from_state(const ClassicalSpec& spec,
                                                     const nlohmann::json& state);

// Argmax per row; ties break toward the lower label index.
std::vector<int> scores_to_labels(const DenseMatrix& scores);

struct GiniSplit {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

// Exhaustive scan over midpoints of consecutive distinct sorted values per feature.
// Ties break toward the lowest feature index, then the lowest threshold. A split is
// only reported when both children would hold at least min_samples_leaf rows and the
// Gini decrease is strictly positive; otherwise found=false signals "make a leaf".
GiniSplit gini_best_split(const DenseMatrix& x, const std::vector<int>& y, int min_samples_leaf);

// Exact brute-force k nearest neighbours under the Minkowski-p metric (p in {1,2});
// returns (index, distance) pairs sorted by distance, ties toward the lower index.
// Throws UsageError when k exceeds the number of stored points.
std::vector<std::pair<std::size_t, double>> knn_neighbors(const DenseMatrix& points,
                                                          std::span<const double> query, int k,
                                                          int p);

// Internals exposed for property tests.

struct BinaryLinearFit {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> objective_trace;  // regularized objective after each epoch (index 0 = initial)
};

// One-vs-rest building block for logistic regression: z holds +1/-1 targets.
// Minimizes 0.5*||w||^2 + C*sum(log(1+exp(-z*s))) for l2, or ||w||_1 + C*sum(...)
// for l1 (proximal step), with backtracking line search; the objective trace is
// non-increasing. Stops when the per-epoch decrease falls to 1e-6 or after 1000 epochs.
BinaryLinearFit fit_binary_linear(const DenseMatrix& x, const std::vector<double>& z, double c,
                                  bool l1_penalty);

enum class KernelKind { linear, rbf, poly, sigmoid };

KernelKind parse_kernel(const std::string& name);

struct KernelParams {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;
  double degree = 3.0;
  double coef0 = 0.0;
};

double kernel_eval(const KernelParams& kp, std::span<const double> a, std::span<const double> b);

struct BinarySvmFit {
  std::vector<double> alpha;
  double bias = 0.0;
};

// Sequential minimal optimization for the binary soft-margin dual; z holds +1/-1.
// Deterministic (no randomized working-set choices); converges to KKT tolerance tol.
BinarySvmFit fit_binary_svm(const DenseMatrix& x, const std::vector<double>& z, double c,
                            const KernelParams& kp, double tol);

}  // namespace emoclass
