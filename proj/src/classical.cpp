#include "emoclass/classical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <unordered_map>

#include "emoclass/corpus.hpp"
#include "emoclass/util.hpp"

namespace emoclass {

namespace {

constexpr int kLabels = static_cast<int>(kNumLabels);

double softplus(double t) {
  // log(1 + exp(t)) without overflow.
  if (t > 35.0) return t;
  return std::log1p(std::exp(t));
}

double stable_sigmoid(double t) {
  if (t >= 0.0) {
    double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(t);
  return e / (1.0 + e);
}

void require_dim(const DenseMatrix& x, std::size_t dim, const char* what) {
  if (x.cols != dim) {
    throw UsageError(std::string(what) + ": expected " + std::to_string(dim) +
                     " features, got " + std::to_string(x.cols));
  }
}

std::vector<std::int64_t> label_counts(const std::vector<int>& y) {
  std::vector<std::int64_t> counts(kLabels, 0);
  for (int label : y) {
    if (label < 0 || label >= kLabels) throw UsageError("label out of range: " + std::to_string(label));
    ++counts[static_cast<std::size_t>(label)];
  }
  return counts;
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "logreg") return Algorithm::logreg;
  if (name == "svm") return Algorithm::svm;
  if (name == "knn") return Algorithm::knn;
  if (name == "naive_bayes") return Algorithm::naive_bayes;
  if (name == "decision_tree") return Algorithm::decision_tree;
  if (name == "random_forest") return Algorithm::random_forest;
  throw UsageError("unknown algorithm: " + name);
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::logreg: return "logreg";
    case Algorithm::svm: return "svm";
    case Algorithm::knn: return "knn";
    case Algorithm::naive_bayes: return "naive_bayes";
    case Algorithm::decision_tree: return "decision_tree";
    case Algorithm::random_forest: return "random_forest";
  }
  throw UsageError("unknown algorithm enum value");
}

ClassicalSpec ClassicalSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("classifier spec must be a JSON object");
  if (!j.contains("algorithm") || !j.at("algorithm").is_string()) {
    throw UsageError("classifier spec needs an \"algorithm\" string");
  }
  ClassicalSpec spec;
  spec.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (!p.is_object()) throw UsageError("\"params\" must be a JSON object");
    for (auto it = p.begin(); it != p.end(); ++it) {
      const auto& v = it.value();
      if (v.is_null()) {
        spec.params[it.key()] = std::monostate{};
      } else if (v.is_number_integer()) {
        spec.params[it.key()] = v.get<std::int64_t>();
      } else if (v.is_number_float()) {
        spec.params[it.key()] = v.get<double>();
      } else if (v.is_string()) {
        spec.params[it.key()] = v.get<std::string>();
      } else {
        throw UsageError("parameter \"" + it.key() + "\" must be null, a number, or a string");
      }
    }
  }
  return spec;
}

nlohmann::json ClassicalSpec::to_json() const {
  nlohmann::json p = nlohmann::json::object();
  for (const auto& [name, value] : params) {
    if (std::holds_alternative<std::monostate>(value)) {
      p[name] = nullptr;
    } else if (std::holds_alternative<double>(value)) {
      p[name] = std::get<double>(value);
    } else if (std::holds_alternative<std::int64_t>(value)) {
      p[name] = std::get<std::int64_t>(value);
    } else {
      p[name] = std::get<std::string>(value);
    }
  }
  return nlohmann::json{{"algorithm", algorithm_name(algorithm)}, {"params", p}};
}

bool ClassicalSpec::has(const std::string& name) const { return params.count(name) > 0; }

bool ClassicalSpec::is_null(const std::string& name) const {
  auto it = params.find(name);
  return it != params.end() && std::holds_alternative<std::monostate>(it->second);
}

double ClassicalSpec::get_double(const std::string& name, double fallback) const {
  auto it = params.find(name);
  if (it == params.end()) return fallback;
  if (std::holds_alternative<double>(it->second)) return std::get<double>(it->second);
  if (std::holds_alternative<std::int64_t>(it->second)) {
    return static_cast<double>(std::get<std::int64_t>(it->second));
  }
  throw UsageError("parameter \"" + name + "\" must be numeric");
}

std::int64_t ClassicalSpec::get_int(const std::string& name, std::int64_t fallback) const {
  auto it = params.find(name);
  if (it == params.end()) return fallback;
  if (std::holds_alternative<std::int64_t>(it->second)) return std::get<std::int64_t>(it->second);
  if (std::holds_alternative<double>(it->second)) {
    double v = std::get<double>(it->second);
    if (std::floor(v) != v) throw UsageError("parameter \"" + name + "\" must be an integer");
    return static_cast<std::int64_t>(v);
  }
  throw UsageError("parameter \"" + name + "\" must be an integer");
}

std::string ClassicalSpec::get_string(const std::string& name, const std::string& fallback) const {
  auto it = params.find(name);
  if (it == params.end()) return fallback;
  if (std::holds_alternative<std::string>(it->second)) return std::get<std::string>(it->second);
  throw UsageError("parameter \"" + name + "\" must be a string");
}

namespace {

void check_param_names(const ClassicalSpec& spec, std::initializer_list<const char*> allowed) {
  for (const auto& [name, value] : spec.params) {
    bool ok = false;
    for (const char* a : allowed) {
      if (name == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw UsageError("unknown parameter \"" + name + "\" for " + algorithm_name(spec.algorithm));
    }
  }
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0)) throw UsageError(std::string(name) + " must be > 0");
}

void check_min_int(std::int64_t v, std::int64_t lo, const char* name) {
  if (v < lo) throw UsageError(std::string(name) + " must be >= " + std::to_string(lo));
}

}  // namespace

void validate_spec(const ClassicalSpec& spec) {
  switch (spec.algorithm) {
    case Algorithm::logreg: {
      check_param_names(spec, {"C", "penalty", "solver"});
      check_positive(spec.get_double("C", 1.0), "C");
      std::string penalty = spec.get_string("penalty", "l2");
      if (penalty != "l1" && penalty != "l2") throw UsageError("penalty must be l1 or l2");
      std::string solver = spec.get_string("solver", "liblinear");
      bool known = solver == "liblinear" || solver == "lbfgs" || solver == "newton-cg" ||
                   solver == "sag" || solver == "saga";
      if (!known) throw UsageError("unknown solver: " + solver);
      bool l1_capable = solver == "liblinear" || solver == "saga";
      if (penalty == "l1" && !l1_capable) {
        throw UsageError("solver " + solver + " does not support the l1 penalty");
      }
      break;
    }
    case Algorithm::svm: {
      check_param_names(spec, {"C", "gamma", "kernel"});
      check_positive(spec.get_double("C", 1.0), "C");
      if (spec.has("gamma") && !spec.is_null("gamma")) {
        bool is_keyword = std::holds_alternative<std::string>(spec.params.at("gamma"));
        if (is_keyword) {
          std::string g = spec.get_string("gamma", "scale");
          if (g != "scale" && g != "auto") throw UsageError("gamma must be numeric, \"scale\", or \"auto\"");
        } else {
          check_positive(spec.get_double("gamma", 1.0), "gamma");
        }
      }
      parse_kernel(spec.get_string("kernel", "rbf"));
      break;
    }
    case Algorithm::knn: {
      check_param_names(spec, {"n_neighbors", "p", "leaf_size"});
      check_min_int(spec.get_int("n_neighbors", 5), 1, "n_neighbors");
      std::int64_t p = spec.get_int("p", 2);
      if (p != 1 && p != 2) throw UsageError("p must be 1 or 2");
      check_min_int(spec.get_int("leaf_size", 30), 1, "leaf_size");
      break;
    }
    case Algorithm::naive_bayes: {
      check_param_names(spec, {"variant", "alpha"});
      std::string variant = spec.get_string("variant", "multinomial");
      if (variant != "multinomial" && variant != "gaussian") {
        throw UsageError("variant must be multinomial or gaussian");
      }
      if (spec.get_double("alpha", 1.0) < 0.0) throw UsageError("alpha must be >= 0");
      break;
    }
    case Algorithm::decision_tree: {
      check_param_names(spec, {"max_depth", "min_samples_split", "min_samples_leaf"});
      if (spec.has("max_depth") && !spec.is_null("max_depth")) {
        check_min_int(spec.get_int("max_depth", 1), 1, "max_depth");
      }
      check_min_int(spec.get_int("min_samples_split", 2), 1, "min_samples_split");
      check_min_int(spec.get_int("min_samples_leaf", 1), 1, "min_samples_leaf");
      break;
    }
    case Algorithm::random_forest: {
      check_param_names(spec, {"n_estimators", "max_depth", "min_samples_split", "min_samples_leaf"});
      check_min_int(spec.get_int("n_estimators", 100), 1, "n_estimators");
      if (spec.has("max_depth") && !spec.is_null("max_depth")) {
        check_min_int(spec.get_int("max_depth", 1), 1, "max_depth");
      }
      check_min_int(spec.get_int("min_samples_split", 2), 1, "min_samples_split");
      check_min_int(spec.get_int("min_samples_leaf", 1), 1, "min_samples_leaf");
      break;
    }
  }
}

std::vector<int> scores_to_labels(const DenseMatrix& scores) {
  std::vector<int> labels(scores.rows, 0);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    auto row = scores.row(i);
    int best = 0;
    for (std::size_t j = 1; j < scores.cols; ++j) {
      if (row[j] > row[best]) best = static_cast<int>(j);
    }
    labels[i] = best;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Gini splits and decision trees
// ---------------------------------------------------------------------------

namespace {

// Gini decrease for a candidate split, computed from integer label counts.
// The brute-force test oracle recomputes the same expression so the results
// compare bitwise equal.
double gini_decrease_from_counts(const std::vector<std::int64_t>& left,
                                 const std::vector<std::int64_t>& total, std::int64_t n_left,
                                 std::int64_t n_total) {
  std::int64_t n_right = n_total - n_left;
  double parent = 1.0;
  double gl = 1.0;
  double gr = 1.0;
  for (std::size_t c = 0; c < total.size(); ++c) {
    double pt = static_cast<double>(total[c]) / static_cast<double>(n_total);
    parent -= pt * pt;
    double pl = static_cast<double>(left[c]) / static_cast<double>(n_left);
    gl -= pl * pl;
    double pr = static_cast<double>(total[c] - left[c]) / static_cast<double>(n_right);
    gr -= pr * pr;
  }
  double weighted = (static_cast<double>(n_left) * gl + static_cast<double>(n_right) * gr) /
                    static_cast<double>(n_total);
  return parent - weighted;
}

// Split search over a row subset and a feature subset (both ascending).
GiniSplit best_split_subset(const DenseMatrix& x, const std::vector<int>& y,
                            const std::vector<std::size_t>& rows,
                            const std::vector<int>& features, int min_samples_leaf) {
  const std::int64_t n = static_cast<std::int64_t>(rows.size());
  GiniSplit best;
  if (n < 2) return best;

  std::vector<std::int64_t> total(kLabels, 0);
  for (std::size_t r : rows) ++total[static_cast<std::size_t>(y[r])];

  std::vector<std::size_t> order(rows.size());
  std::vector<std::int64_t> left(kLabels, 0);
  for (int f : features) {
    order.assign(rows.begin(), rows.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x.at(a, static_cast<std::size_t>(f)) < x.at(b, static_cast<std::size_t>(f));
    });
    std::fill(left.begin(), left.end(), 0);
    for (std::int64_t s = 1; s < n; ++s) {
      ++left[static_cast<std::size_t>(y[order[static_cast<std::size_t>(s - 1)]])];
      double lo = x.at(order[static_cast<std::size_t>(s - 1)], static_cast<std::size_t>(f));
      double hi = x.at(order[static_cast<std::size_t>(s)], static_cast<std::size_t>(f));
      if (lo == hi) continue;
      if (s < min_samples_leaf || n - s < min_samples_leaf) continue;
      double decrease = gini_decrease_from_counts(left, total, s, n);
      if (decrease > best.decrease) {
        best.found = true;
        best.feature = f;
        best.threshold = (lo + hi) / 2.0;
        best.decrease = decrease;
      }
    }
  }
  if (!(best.decrease > 0.0)) best.found = false;
  return best;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, kNumLabels> dist{};
};

// Optional per-node feature subsampling for forests.
struct FeatureSampler {
  Rng* rng = nullptr;
  int mtry = 0;

  std::vector<int> pick(int dim) const {
    std::vector<int> all(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) all[static_cast<std::size_t>(i)] = i;
    if (rng == nullptr || mtry >= dim) return all;
    for (int i = 0; i < mtry; ++i) {
      std::size_t j = static_cast<std::size_t>(i) +
                      rng->uniform_index(static_cast<std::size_t>(dim - i));
      std::swap(all[static_cast<std::size_t>(i)], all[j]);
    }
    all.resize(static_cast<std::size_t>(mtry));
    std::sort(all.begin(), all.end());
    return all;
  }
};

struct TreeParams {
  std::int64_t max_depth = -1;  // -1 = unlimited
  std::int64_t min_samples_split = 2;
  std::int64_t min_samples_leaf = 1;
};

class TreeBuilder {
 public:
  TreeBuilder(const DenseMatrix& x, const std::vector<int>& y, const TreeParams& params,
              const FeatureSampler& sampler)
      : x_(x), y_(y), params_(params), sampler_(sampler) {}

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> rows, std::int64_t depth) {
    int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    std::vector<std::int64_t> counts(kLabels, 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(y_[r])];
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    for (int c = 0; c < kLabels; ++c) {
      nodes_[static_cast<std::size_t>(index)].dist[static_cast<std::size_t>(c)] =
          static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(n);
    }

    bool pure = false;
    for (int c = 0; c < kLabels; ++c) {
      if (counts[static_cast<std::size_t>(c)] == n) pure = true;
    }
    bool depth_capped = params_.max_depth >= 0 && depth >= params_.max_depth;
    if (pure || depth_capped || n < params_.min_samples_split) return index;

    std::vector<int> features = sampler_.pick(static_cast<int>(x_.cols));
    GiniSplit split = best_split_subset(x_, y_, rows, features,
                                        static_cast<int>(params_.min_samples_leaf));
    if (!split.found) return index;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : rows) {
      if (x_.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold) {
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();

    int left = grow(std::move(left_rows), depth + 1);
    int right = grow(std::move(right_rows), depth + 1);
    nodes_[static_cast<std::size_t>(index)].feature = split.feature;
    nodes_[static_cast<std::size_t>(index)].threshold = split.threshold;
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
    return index;
  }

  const DenseMatrix& x_;
  const std::vector<int>& y_;
  TreeParams params_;
  FeatureSampler sampler_;
  std::vector<TreeNode> nodes_;
};

const TreeNode& tree_leaf(const std::vector<TreeNode>& nodes, std::span<const double> row) {
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    std::size_t f = static_cast<std::size_t>(nodes[at].feature);
    at = static_cast<std::size_t>(row[f] <= nodes[at].threshold ? nodes[at].left : nodes[at].right);
  }
  return nodes[at];
}

nlohmann::json tree_node_json(const std::vector<TreeNode>& nodes, std::size_t at) {
  const TreeNode& node = nodes[at];
  if (node.feature < 0) {
    return nlohmann::json{{"dist", node.dist}};
  }
  return nlohmann::json{{"feature", node.feature},
                        {"threshold", node.threshold},
                        {"left", tree_node_json(nodes, static_cast<std::size_t>(node.left))},
                        {"right", tree_node_json(nodes, static_cast<std::size_t>(node.right))}};
}

int tree_node_parse(const nlohmann::json& j, std::vector<TreeNode>& nodes) {
  int index = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (j.contains("feature")) {
    double threshold = j.at("threshold").get<double>();
    int feature = j.at("feature").get<int>();
    int left = tree_node_parse(j.at("left"), nodes);
    int right = tree_node_parse(j.at("right"), nodes);
    nodes[static_cast<std::size_t>(index)].feature = feature;
    nodes[static_cast<std::size_t>(index)].threshold = threshold;
    nodes[static_cast<std::size_t>(index)].left = left;
    nodes[static_cast<std::size_t>(index)].right = right;
  } else {
    auto dist = j.at("dist").get<std::array<double, kNumLabels>>();
    nodes[static_cast<std::size_t>(index)].dist = dist;
  }
  return index;
}

TreeParams tree_params_from_spec(const ClassicalSpec& spec) {
  TreeParams params;
  params.max_depth = spec.is_null("max_depth") || !spec.has("max_depth")
                         ? -1
                         : spec.get_int("max_depth", -1);
  params.min_samples_split = spec.get_int("min_samples_split", 2);
  params.min_samples_leaf = spec.get_int("min_samples_leaf", 1);
  return params;
}

}  // namespace

GiniSplit gini_best_split(const DenseMatrix& x, const std::vector<int>& y, int min_samples_leaf) {
  if (x.rows != y.size()) throw UsageError("feature rows and labels differ in length");
  if (x.rows < 2) throw UsageError("a split needs at least two samples");
  if (x.cols == 0) throw UsageError("a split needs at least one feature");
  label_counts(y);  // validates the label range
  std::vector<std::size_t> rows(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) rows[i] = i;
  std::vector<int> features(x.cols);
  for (std::size_t f = 0; f < x.cols; ++f) features[f] = static_cast<int>(f);
  return best_split_subset(x, y, rows, features, min_samples_leaf);
}

// ---------------------------------------------------------------------------
// k nearest neighbours
// ---------------------------------------------------------------------------

namespace {

double minkowski(std::span<const double> a, std::span<const double> b, int p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(a[i] - b[i]);
    acc += p == 1 ? d : d * d;
  }
  return p == 1 ? acc : std::sqrt(acc);
}

}  // namespace

std::vector<std::pair<std::size_t, double>> knn_neighbors(const DenseMatrix& points,
                                                          std::span<const double> query, int k,
                                                          int p) {
  if (p != 1 && p != 2) throw UsageError("p must be 1 or 2");
  if (k < 1) throw UsageError("k must be >= 1");
  if (static_cast<std::size_t>(k) > points.rows) {
    throw UsageError("k exceeds the number of stored points");
  }
  require_dim(points, query.size(), "knn query");

  std::vector<std::pair<double, std::size_t>> all(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    all[i] = {minkowski(points.row(i), query, p), i};
  }
  std::sort(all.begin(), all.end());
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    out.emplace_back(all[static_cast<std::size_t>(i)].second, all[static_cast<std::size_t>(i)].first);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

namespace {

double linear_objective(const DenseMatrix& x, const std::vector<double>& z,
                        const std::vector<double>& w, double b, double c, bool l1) {
  double reg = 0.0;
  if (l1) {
    for (double v : w) reg += std::abs(v);
  } else {
    for (double v : w) reg += v * v;
    reg *= 0.5;
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = x.row(i);
    double s = b;
    for (std::size_t j = 0; j < x.cols; ++j) s += w[j] * row[j];
    loss += softplus(-z[i] * s);
  }
  return reg + c * loss;
}

// Gradient of the smooth part: C * sum softplus(-z*s), plus w itself for l2.
void linear_gradient(const DenseMatrix& x, const std::vector<double>& z,
                     const std::vector<double>& w, double b, double c, bool l1,
                     std::vector<double>& gw, double& gb) {
  gw.assign(w.size(), 0.0);
  gb = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = x.row(i);
    double s = b;
    for (std::size_t j = 0; j < x.cols; ++j) s += w[j] * row[j];
    double factor = -z[i] * stable_sigmoid(-z[i] * s);
    for (std::size_t j = 0; j < x.cols; ++j) gw[j] += factor * row[j];
    gb += factor;
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    gw[j] *= c;
    if (!l1) gw[j] += w[j];
  }
  gb *= c;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

BinaryLinearFit fit_binary_linear(const DenseMatrix& x, const std::vector<double>& z, double c,
                                  bool l1_penalty) {
  if (x.rows != z.size()) throw UsageError("feature rows and targets differ in length");
  if (x.rows == 0) throw UsageError("training requires at least one sample");

  BinaryLinearFit fit;
  fit.weights.assign(x.cols, 0.0);
  fit.bias = 0.0;

  double f = linear_objective(x, z, fit.weights, fit.bias, c, l1_penalty);
  fit.objective_trace.push_back(f);

  std::vector<double> gw;
  std::vector<double> next_w(x.cols, 0.0);
  double step = 1.0;
  const double tol = 1e-6;
  const int max_epochs = 1000;

  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    double gb = 0.0;
    linear_gradient(x, z, fit.weights, fit.bias, c, l1_penalty, gw, gb);

    step = std::min(step * 2.0, 1.0);
    double f_next = f;
    double next_b = fit.bias;
    bool moved = false;
    while (step > 1e-18) {
      if (l1_penalty) {
        // Proximal gradient step; accept when the smooth part is majorized so the
        // composite objective cannot increase.
        for (std::size_t j = 0; j < x.cols; ++j) {
          next_w[j] = soft_threshold(fit.weights[j] - step * gw[j], step);
        }
        next_b = fit.bias - step * gb;
        double cand = linear_objective(x, z, next_w, next_b, c, true);
        double model = f;
        double sq = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
          double d = next_w[j] - fit.weights[j];
          model += gw[j] * d - std::abs(fit.weights[j]) + std::abs(next_w[j]);
          sq += d * d;
        }
        double db = next_b - fit.bias;
        model += gb * db;
        sq += db * db;
        model += sq / (2.0 * step);
        if (cand <= model && cand <= f) {
          f_next = cand;
          moved = true;
          break;
        }
      } else {
        for (std::size_t j = 0; j < x.cols; ++j) next_w[j] = fit.weights[j] - step * gw[j];
        next_b = fit.bias - step * gb;
        double cand = linear_objective(x, z, next_w, next_b, c, false);
        double gnorm2 = gb * gb;
        for (double g : gw) gnorm2 += g * g;
        if (cand <= f - 1e-4 * step * gnorm2) {
          f_next = cand;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }

    if (!moved) break;
    fit.weights.swap(next_w);
    fit.bias = next_b;
    double decrease = f - f_next;
    f = f_next;
    fit.objective_trace.push_back(f);
    if (decrease <= tol) break;
  }
  return fit;
}

// ---------------------------------------------------------------------------
// SVM (sequential minimal optimization)
// ---------------------------------------------------------------------------

KernelKind parse_kernel(const std::string& name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "rbf") return KernelKind::rbf;
  if (name == "poly") return KernelKind::poly;
  if (name == "sigmoid") return KernelKind::sigmoid;
  throw UsageError("unknown kernel: " + name);
}

namespace {

std::string kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::linear: return "linear";
    case KernelKind::rbf: return "rbf";
    case KernelKind::poly: return "poly";
    case KernelKind::sigmoid: return "sigmoid";
  }
  throw UsageError("unknown kernel enum value");
}

}  // namespace

double kernel_eval(const KernelParams& kp, std::span<const double> a, std::span<const double> b) {
  switch (kp.kind) {
    case KernelKind::linear: {
      double dot = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
      return dot;
    }
    case KernelKind::rbf: {
      double sq = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sq += d * d;
      }
      return std::exp(-kp.gamma * sq);
    }
    case KernelKind::poly: {
      double dot = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
      return std::pow(kp.gamma * dot + kp.coef0, kp.degree);
    }
    case KernelKind::sigmoid: {
      double dot = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
      return std::tanh(kp.gamma * dot + kp.coef0);
    }
  }
  throw UsageError("unknown kernel enum value");
}

namespace {

// Bounded cache of Gram-matrix rows, FIFO eviction.
class KernelCache {
 public:
  KernelCache(const DenseMatrix& x, const KernelParams& kp, std::size_t max_rows)
      : x_(x), kp_(kp), max_rows_(std::max<std::size_t>(max_rows, 2)) {}

  std::span<const double> row(std::size_t i) {
    auto it = rows_.find(i);
    if (it != rows_.end()) return it->second;
    if (rows_.size() >= max_rows_) {
      rows_.erase(order_.front());
      order_.pop_front();
    }
    std::vector<double> values(x_.rows);
    auto xi = x_.row(i);
    for (std::size_t j = 0; j < x_.rows; ++j) values[j] = kernel_eval(kp_, xi, x_.row(j));
    auto [pos, inserted] = rows_.emplace(i, std::move(values));
    order_.push_back(i);
    return pos->second;
  }

 private:
  const DenseMatrix& x_;
  KernelParams kp_;
  std::size_t max_rows_;
  std::unordered_map<std::size_t, std::vector<double>> rows_;
  std::deque<std::size_t> order_;
};

class SmoSolver {
 public:
  SmoSolver(const DenseMatrix& x, const std::vector<double>& z, double c,
            const KernelParams& kp, double tol)
      : x_(x),
        z_(z),
        c_(c),
        tol_(tol),
        cache_(x, kp, x.rows <= 2048 ? x.rows : 512),
        alpha_(x.rows, 0.0),
        error_(x.rows, 0.0) {
    for (std::size_t i = 0; i < x_.rows; ++i) error_[i] = -z_[i];  // f = 0 initially
  }

  BinarySvmFit solve() {
    const std::size_t n = x_.rows;
    bool examine_all = true;
    std::size_t changed = 0;
    std::size_t guard = 0;
    const std::size_t max_passes = 50000;
    do {
      changed = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (examine_all || is_free(i)) changed += examine(i);
      }
      if (examine_all) {
        examine_all = false;
      } else if (changed == 0) {
        examine_all = true;
      }
      ++guard;
    } while ((changed > 0 || examine_all) && guard < max_passes);
    return BinarySvmFit{alpha_, bias_};
  }

 private:
  bool is_free(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < c_; }

  std::size_t examine(std::size_t i2) {
    double y2 = z_[i2];
    double a2 = alpha_[i2];
    double e2 = error_[i2];
    double r2 = e2 * y2;
    bool violates = (r2 < -tol_ && a2 < c_) || (r2 > tol_ && a2 > 0.0);
    if (!violates) return 0;

    // Second-choice heuristic: largest |e1 - e2| over free points, lowest index on ties.
    std::size_t best = x_.rows;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < x_.rows; ++i) {
      if (!is_free(i)) continue;
      double gap = std::abs(error_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best < x_.rows && take_step(best, i2)) return 1;
    for (std::size_t i = 0; i < x_.rows; ++i) {
      if (is_free(i) && take_step(i, i2)) return 1;
    }
    for (std::size_t i = 0; i < x_.rows; ++i) {
      if (take_step(i, i2)) return 1;
    }
    return 0;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    double a1 = alpha_[i1];
    double a2 = alpha_[i2];
    double y1 = z_[i1];
    double y2 = z_[i2];
    double e1 = error_[i1];
    double e2 = error_[i2];
    double s = y1 * y2;

    double lo;
    double hi;
    if (s < 0.0) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c_, c_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c_);
      hi = std::min(c_, a1 + a2);
    }
    if (lo >= hi) return false;

    // Copied out of the cache: fetching the second row may evict the first.
    auto r1 = cache_.row(i1);
    row1_.assign(r1.begin(), r1.end());
    auto r2 = cache_.row(i2);
    row2_.assign(r2.begin(), r2.end());
    double k11 = row1_[i1];
    double k12 = row1_[i2];
    double k22 = row2_[i2];
    double eta = k11 + k22 - 2.0 * k12;

    double a2_new;
    if (eta > 0.0) {
      a2_new = a2 + y2 * (e1 - e2) / eta;
      a2_new = std::clamp(a2_new, lo, hi);
    } else {
      // Flat or concave direction: evaluate the dual objective at both clip ends.
      double f1 = y1 * (e1 + bias_) - a1 * k11 - s * a2 * k12;
      double f2 = y2 * (e2 + bias_) - s * a1 * k12 - a2 * k22;
      double l1 = a1 + s * (a2 - lo);
      double h1 = a1 + s * (a2 - hi);
      double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                      s * lo * l1 * k12;
      double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                      s * hi * h1 * k12;
      const double eps = 1e-12;
      if (obj_lo < obj_hi - eps) {
        a2_new = lo;
      } else if (obj_lo > obj_hi + eps) {
        a2_new = hi;
      } else {
        return false;
      }
    }

    if (std::abs(a2_new - a2) < 1e-10 * (a2_new + a2 + 1e-10)) return false;
    double a1_new = a1 + s * (a2 - a2_new);
    if (a1_new < 0.0) {
      a2_new += s * a1_new;
      a1_new = 0.0;
    } else if (a1_new > c_) {
      a2_new += s * (a1_new - c_);
      a1_new = c_;
    }

    double d1 = y1 * (a1_new - a1);
    double d2 = y2 * (a2_new - a2);
    double b1 = bias_ - e1 - d1 * k11 - d2 * k12;
    double b2 = bias_ - e2 - d1 * k12 - d2 * k22;
    double new_bias;
    if (a1_new > 0.0 && a1_new < c_) {
      new_bias = b1;
    } else if (a2_new > 0.0 && a2_new < c_) {
      new_bias = b2;
    } else {
      new_bias = (b1 + b2) / 2.0;
    }
    double db = new_bias - bias_;

    for (std::size_t j = 0; j < x_.rows; ++j) {
      error_[j] += d1 * row1_[j] + d2 * row2_[j] + db;
    }
    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    bias_ = new_bias;
    return true;
  }

  const DenseMatrix& x_;
  const std::vector<double>& z_;
  double c_;
  double tol_;
  KernelCache cache_;
  std::vector<double> alpha_;
  std::vector<double> error_;
  std::vector<double> row1_;
  std::vector<double> row2_;
  double bias_ = 0.0;
};

}  // namespace

BinarySvmFit fit_binary_svm(const DenseMatrix& x, const std::vector<double>& z, double c,
                            const KernelParams& kp, double tol) {
  if (x.rows != z.size()) throw UsageError("feature rows and targets differ in length");
  if (x.rows == 0) throw UsageError("training requires at least one sample");

  bool has_pos = false;
  bool has_neg = false;
  for (double v : z) {
    if (v > 0.0) has_pos = true;
    if (v < 0.0) has_neg = true;
  }
  if (!has_pos || !has_neg) {
    // One-class degenerate case: constant decision at the class sign.
    BinarySvmFit fit;
    fit.alpha.assign(x.rows, 0.0);
    fit.bias = has_pos ? 1.0 : -1.0;
    return fit;
  }
  return SmoSolver(x, z, c, kp, tol).solve();
}

// ---------------------------------------------------------------------------
// Model classes
// ---------------------------------------------------------------------------

namespace {

class LogregModel final : public ClassicalModel {
 public:
  LogregModel(std::size_t dim, DenseMatrix weights, std::vector<double> bias)
      : dim_(dim), weights_(std::move(weights)), bias_(std::move(bias)) {}

  Algorithm algorithm() const override { return Algorithm::logreg; }
  std::size_t feature_dim() const override { return dim_; }

  DenseMatrix predict_scores(const DenseMatrix& x) const override {
    require_dim(x, dim_, "logreg predict");
    DenseMatrix scores(x.rows, kNumLabels);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto row = x.row(i);
      double total = 0.0;
      for (int c = 0; c < kLabels; ++c) {
        double s = bias_[static_cast<std::size_t>(c)];
        auto w = weights_.row(static_cast<std::size_t>(c));
        for (std::size_t j = 0; j < dim_; ++j) s += w[j] * row[j];
        double p = stable_sigmoid(s);
        scores.at(i, static_cast<std::size_t>(c)) = p;
        total += p;
      }
      for (int c = 0; c < kLabels; ++c) {
        if (total > 1e-300) {
          scores.at(i, static_cast<std::size_t>(c)) /= total;
        } else {
          scores.at(i, static_cast<std::size_t>(c)) = 1.0 / kLabels;
        }
      }
    }
    return scores;
  }

  nlohmann::json learned_state() const override {
    nlohmann::json weights = nlohmann::json::array();
    for (int c = 0; c < kLabels; ++c) {
      auto w = weights_.row(static_cast<std::size_t>(c));
      weights.push_back(std::vector<double>(w.begin(), w.end()));
    }
    return nlohmann::json{{"dim", dim_}, {"weights", weights}, {"bias", bias_}};
  }

 private:
  std::size_t dim_;
  DenseMatrix weights_;  // [labels, dim]
  std::vector<double> bias_;
};

std::unique_ptr<ClassicalModel> train_logreg(const ClassicalSpec& spec, const DenseMatrix& x,
                                             const std::vector<int>& y) {
  double c = spec.get_double("C", 1.0);
  bool l1 = spec.get_string("penalty", "l2") == "l1";
  DenseMatrix weights(kNumLabels, x.cols);
  std::vector<double> bias(kNumLabels, 0.0);
  std::vector<double> z(x.rows);
  for (int cls = 0; cls < kLabels; ++cls) {
    for (std::size_t i = 0; i < x.rows; ++i) z[i] = y[i] == cls ? 1.0 : -1.0;
    BinaryLinearFit fit = fit_binary_linear(x, z, c, l1);
    for (std::size_t j = 0; j < x.cols; ++j) weights.at(static_cast<std::size_t>(cls), j) = fit.weights[j];
    bias[static_cast<std::size_t>(cls)] = fit.bias;
  }
  return std::make_unique<LogregModel>(x.cols, std::move(weights), std::move(bias));
}

class SvmModel final : public ClassicalModel {
 public:
  SvmModel(std::size_t dim, KernelParams kp, DenseMatrix support, DenseMatrix dual_coef,
           std::vector<double> bias)
      : dim_(dim),
        kp_(kp),
        support_(std::move(support)),
        dual_coef_(std::move(dual_coef)),
        bias_(std::move(bias)) {}

  Algorithm algorithm() const override { return Algorithm::svm; }
  std::size_t feature_dim() const override { return dim_; }

  DenseMatrix predict_scores(const DenseMatrix& x) const override {
    require_dim(x, dim_, "svm predict");
    DenseMatrix scores(x.rows, kNumLabels);
    std::vector<double> kern(support_.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto q = x.row(i);
      for (std::size_t s = 0; s < support_.rows; ++s) kern[s] = kernel_eval(kp_, support_.row(s), q);
      for (int c = 0; c < kLabels; ++c) {
        double f = bias_[static_cast<std::size_t>(c)];
        auto coef = dual_coef_.row(static_cast<std::size_t>(c));
        for (std::size_t s = 0; s < support_.rows; ++s) f += coef[s] * kern[s];
        scores.at(i, static_cast<std::size_t>(c)) = f;
      }
    }
    return scores;
  }

  nlohmann::json learned_state() const override {
    nlohmann::json support = nlohmann::json::array();
    for (std::size_t s = 0; s < support_.rows; ++s) {
      auto row = support_.row(s);
      support.push_back(std::vector<double>(row.begin(), row.end()));
    }
    nlohmann::json coef = nlohmann::json::array();
    for (int c = 0; c < kLabels; ++c) {
      auto row = dual_coef_.row(static_cast<std::size_t>(c));
      coef.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return nlohmann::json{{"dim", dim_},
                          {"kernel", kernel_name(kp_.kind)},
                          {"gamma", kp_.gamma},
                          {"degree", kp_.degree},
                          {"coef0", kp_.coef0},
                          {"support", support},
                          {"dual_coef", coef},
                          {"bias", bias_}};
  }

 private:
  std::size_t dim_;
  KernelParams kp_;
  DenseMatrix support_;    // [n_sv, dim]
  DenseMatrix dual_coef_;  // [labels, n_sv], alpha * z, zero when not a support vector
  std::vector<double> bias_;
};

double resolve_gamma(const ClassicalSpec& spec, const DenseMatrix& x) {
  bool keyword = !spec.has("gamma") ||
                 std::holds_alternative<std::string>(spec.params.at("gamma"));
  if (!keyword) return spec.get_double("gamma", 1.0);
  std::string mode = spec.get_string("gamma", "scale");
  double d = static_cast<double>(x.cols);
  if (mode == "auto") return d > 0.0 ? 1.0 / d : 1.0;
  // "scale": 1 / (n_features * variance of all entries)
  double mean = 0.0;
  for (double v : x.data) mean += v;
  mean /= static_cast<double>(x.data.size());
  double var = 0.0;
  for (double v : x.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.data.size());
  if (var <= 0.0 || d <= 0.0) return 1.0;
  return 1.0 / (d * var);
}

std::unique_ptr<ClassicalModel> train_svm(const ClassicalSpec& spec, const DenseMatrix& x,
                                          const std::vector<int>& y) {
  double c = spec.get_double("C", 1.0);
  KernelParams kp;
  kp.kind = parse_kernel(spec.get_string("kernel", "rbf"));
  kp.gamma = resolve_gamma(spec, x);

  std::vector<double> z(x.rows);
  std::array<BinarySvmFit, kNumLabels> fits;
  for (int cls = 0; cls < kLabels; ++cls) {
    for (std::size_t i = 0; i < x.rows; ++i) z[i] = y[i] == cls ? 1.0 : -1.0;
    fits[static_cast<std::size_t>(cls)] = fit_binary_svm(x, z, c, kp, 1e-3);
  }

  std::vector<std::size_t> sv_rows;
  for (std::size_t i = 0; i < x.rows; ++i) {
    bool used = false;
    for (int cls = 0; cls < kLabels; ++cls) {
      if (fits[static_cast<std::size_t>(cls)].alpha[i] > 0.0) used = true;
    }
    if (used) sv_rows.push_back(i);
  }

  DenseMatrix support(sv_rows.size(), x.cols);
  for (std::size_t s = 0; s < sv_rows.size(); ++s) {
    auto src = x.row(sv_rows[s]);
    auto dst = support.row(s);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  DenseMatrix dual(kNumLabels, sv_rows.size());
  std::vector<double> bias(kNumLabels, 0.0);
  for (int cls = 0; cls < kLabels; ++cls) {
    const auto& fit = fits[static_cast<std::size_t>(cls)];
    bias[static_cast<std::size_t>(cls)] = fit.bias;
    for (std::size_t s = 0; s < sv_rows.size(); ++s) {
      std::size_t i = sv_rows[s];
      double zi = y[i] == cls ? 1.0 : -1.0;
      dual.at(static_cast<std::size_t>(cls), s) = fit.alpha[i] * zi;
    }
  }
  return std::make_unique<SvmModel>(x.cols, kp, std::move(support), std::move(dual),
                                    std::move(bias));
}

class KnnModel final : public ClassicalModel {
 public:
  KnnModel(DenseMatrix points, std::vector<int> labels, int k, int p)
      : points_(std::move(points)), labels_(std::move(labels)), k_(k), p_(p) {}

  Algorithm algorithm() const override { return Algorithm::knn; }
  std::size_t feature_dim() const override { return points_.cols; }

  DenseMatrix predict_scores(const DenseMatrix& x) const override {
    require_dim(x, points_.cols, "knn predict");
    int k = std::min<int>(k_, static_cast<int>(points_.rows));
    DenseMatrix scores(x.rows, kNumLabels);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto neighbors = knn_neighbors(points_, x.row(i), k, p_);
      for (const auto& [index, dist] : neighbors) {
        scores.at(i, static_cast<std::size_t>(labels_[index])) += 1.0 / std::max(dist, 1e-12);
      }
    }
    return scores;
  }

  nlohmann::json learned_state() const override {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t r = 0; r < points_.rows; ++r) {
      auto row = points_.row(r);
      points.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return nlohmann::json{{"dim", points_.cols},
                          {"points", points},
                          {"labels", labels_},
                          {"n_neighbors", k_},
                          {"p", p_}};
  }

 private:
  DenseMatrix points_;
  std::vector<int> labels_;
  int k_;
  int p_;
};

class NaiveBayesModel final : public ClassicalModel {
 public:
  // Multinomial state: per-class feature counts + class counts.
  // Gaussian state: per-class mean/variance (variance already smoothed) + class counts.
  NaiveBayesModel(bool gaussian, std::size_t dim, std::vector<std::int64_t> class_counts,
                  DenseMatrix a, DenseMatrix b, double alpha)
      : gaussian_(gaussian),
        dim_(dim),
        class_counts_(std::move(class_counts)),
        a_(std::move(a)),
        b_(std::move(b)),
        alpha_(alpha) {}

  Algorithm algorithm() const override { return Algorithm::naive_bayes; }
  std::size_t feature_dim() const override { return dim_; }

  DenseMatrix predict_scores(const DenseMatrix& x) const override {
    require_dim(x, dim_, "naive bayes predict");
    double total = 0.0;
    for (std::int64_t c : class_counts_) total += static_cast<double>(c);
    std::array<double, kNumLabels> log_prior{};
    for (int c = 0; c < kLabels; ++c) {
      std::int64_t n = class_counts_[static_cast<std::size_t>(c)];
      log_prior[static_cast<std::size_t>(c)] =
          n > 0 ? std::log(static_cast<double>(n) / total) : -std::numeric_limits<double>::infinity();
    }

    DenseMatrix log_like(kNumLabels, dim_);
    std::array<double, kNumLabels> log_norm{};
    if (!gaussian_) {
      for (int c = 0; c < kLabels; ++c) {
        auto counts = a_.row(static_cast<std::size_t>(c));
        double class_total = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) class_total += counts[j];
        double denom = std::log(class_total + alpha_ * static_cast<double>(dim_));
        for (std::size_t j = 0; j < dim_; ++j) {
          log_like.at(static_cast<std::size_t>(c), j) = std::log(counts[j] + alpha_) - denom;
        }
        log_norm[static_cast<std::size_t>(c)] = 0.0;
      }
    }

    DenseMatrix scores(x.rows, kNumLabels);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto row = x.row(i);
      std::array<double, kNumLabels> jll{};
      for (int c = 0; c < kLabels; ++c) {
        double v = log_prior[static_cast<std::size_t>(c)];
        if (!std::isinf(v)) {
          if (gaussian_) {
            auto mean = a_.row(static_cast<std::size_t>(c));
            auto var = b_.row(static_cast<std::size_t>(c));
            for (std::size_t j = 0; j < dim_; ++j) {
              double d = row[j] - mean[j];
              v += -0.5 * std::log(2.0 * kPi * var[j]) - d * d / (2.0 * var[j]);
            }
          } else {
            for (std::size_t j = 0; j < dim_; ++j) {
              if (row[j] != 0.0) v += row[j] * log_like.at(static_cast<std::size_t>(c), j);
            }
          }
        }
        jll[static_cast<std::size_t>(c)] = v;
      }
      double top = -std::numeric_limits<double>::infinity();
      for (double v : jll) top = std::max(top, v);
      double norm = 0.0;
      std::array<double, kNumLabels> p{};
      for (int c = 0; c < kLabels; ++c) {
        double v = jll[static_cast<std::size_t>(c)];
        p[static_cast<std::size_t>(c)] = std::isinf(v) && v < 0.0 ? 0.0 : std::exp(v - top);
        norm += p[static_cast<std::size_t>(c)];
      }
      for (int c = 0; c < kLabels; ++c) {
        scores.at(i, static_cast<std::size_t>(c)) =
            norm > 0.0 ? p[static_cast<std::size_t>(c)] / norm : 1.0 / kLabels;
      }
    }
    return scores;
  }

  nlohmann::json learned_state() const override {
    auto matrix_json = [](const DenseMatrix& m) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t r = 0; r < m.rows; ++r) {
        auto row = m.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
      }
      return rows;
    };
    nlohmann::json j{{"dim", dim_},
                     {"variant", gaussian_ ? "gaussian" : "multinomial"},
                     {"class_counts", class_counts_},
                     {"alpha", alpha_}};
    if (gaussian_) {
      j["means"] = matrix_json(a_);
      j["variances"] = matrix_json(b_);
    } else {
      j["feature_counts"] = matrix_json(a_);
    }
    return j;
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  bool gaussian_;
  std::size_t dim_;
  std::vector<std::int64_t> class_counts_;
  DenseMatrix a_;  // multinomial: feature counts; gaussian: means
  DenseMatrix b_;  // gaussian: smoothed variances (unused for multinomial)
  double alpha_;
};

std::unique_ptr<ClassicalModel> train_naive_bayes(const ClassicalSpec& spec, const DenseMatrix& x,
                                                  const std::vector<int>& y) {
  bool gaussian = spec.get_string("variant", "multinomial") == "gaussian";
  double alpha = spec.get_double("alpha", 1.0);
  std::vector<std::int64_t> counts = label_counts(y);

  if (!gaussian) {
    for (double v : x.data) {
      if (v < 0.0) throw DataError("multinomial naive bayes requires non-negative features");
    }
    DenseMatrix feature_counts(kNumLabels, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto row = x.row(i);
      auto dst = feature_counts.row(static_cast<std::size_t>(y[i]));
      for (std::size_t j = 0; j < x.cols; ++j) dst[j] += row[j];
    }
    return std::make_unique<NaiveBayesModel>(false, x.cols, std::move(counts),
                                             std::move(feature_counts), DenseMatrix(), alpha);
  }

  DenseMatrix means(kNumLabels, x.cols);
  DenseMatrix vars(kNumLabels, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = x.row(i);
    auto m = means.row(static_cast<std::size_t>(y[i]));
    for (std::size_t j = 0; j < x.cols; ++j) m[j] += row[j];
  }
  for (int c = 0; c < kLabels; ++c) {
    std::int64_t n = counts[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    auto m = means.row(static_cast<std::size_t>(c));
    for (std::size_t j = 0; j < x.cols; ++j) m[j] /= static_cast<double>(n);
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = x.row(i);
    auto m = means.row(static_cast<std::size_t>(y[i]));
    auto v = vars.row(static_cast<std::size_t>(y[i]));
    for (std::size_t j = 0; j < x.cols; ++j) {
      double d = row[j] - m[j];
      v[j] += d * d;
    }
  }
  // Smoothing floor: 1e-9 times the largest per-feature variance of the whole input.
  double max_var = 0.0;
  for (std::size_t j = 0; j < x.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) mean += x.at(i, j);
    mean /= static_cast<double>(x.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      double d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(x.rows);
    max_var = std::max(max_var, var);
  }
  double epsilon = 1e-9 * (max_var > 0.0 ? max_var : 1.0);
  for (int c = 0; c < kLabels; ++c) {
    std::int64_t n = counts[static_cast<std::size_t>(c)];
    auto v = vars.row(static_cast<std::size_t>(c));
    for (std::size_t j = 0; j < x.cols; ++j) {
      if (n > 0) v[j] /= static_cast<double>(n);
      v[j] += epsilon;
    }
  }
  return std::make_unique<NaiveBayesModel>(true, x.cols, std::move(counts), std::move(means),
                                           std::move(vars), alpha);
}

class TreeModel final : public ClassicalModel {
 public:
  TreeModel(std::size_t dim, std::vector<TreeNode> nodes) : dim_(dim), nodes_(std::move(nodes)) {}

  Algorithm algorithm() const override { return Algorithm::decision_tree; }
  std::size_t feature_dim() const override { return dim_; }

  DenseMatrix predict_scores(const DenseMatrix& x) const override {
    require_dim(x, dim_, "tree predict");
    DenseMatrix scores(x.rows, kNumLabels);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const TreeNode& leaf = tree_leaf(nodes_, x.row(i));
      for (int c = 0; c < kLabels; ++c) {
        scores.at(i, static_cast<std::size_t>(c)) = leaf.dist[static_cast<std::size_t>(c)];
      }
    }
    return scores;
  }

  nlohmann::json learned_state() const override {
    return nlohmann::json{{"dim", dim_}, {"tree", tree_node_json(nodes_, 0)}};
  }

 private:
  std::size_t dim_;
  std::vector<TreeNode> nodes_;
};

std::unique_ptr<ClassicalModel> train_tree(const ClassicalSpec& spec, const DenseMatrix& x,
                                           const std::vector<int>& y) {
  TreeParams params = tree_params_from_spec(spec);
  std::vector<std::size_t> rows(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) rows[i] = i;
  FeatureSampler sampler;  // all features
  TreeBuilder builder(x, y, params, sampler);
  return std::make_unique<TreeModel>(x.cols, builder.build(std::move(rows)));
}

class ForestModel final : public ClassicalModel {
 public:
  ForestModel(std::size_t dim, std::vector<std::vector<TreeNode>> trees)
      : dim_(dim), trees_(std::move(trees)) {}

  Algorithm algorithm() const override { return Algorithm::random_forest; }
  std::size_t feature_dim() const override { return dim_; }

  DenseMatrix predict_scores(const DenseMatrix& x) const override {
    require_dim(x, dim_, "forest predict");
    DenseMatrix scores(x.rows, kNumLabels);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto row = x.row(i);
      for (const auto& tree : trees_) {
        const TreeNode& leaf = tree_leaf(tree, row);
        for (int c = 0; c < kLabels; ++c) {
          scores.at(i, static_cast<std::size_t>(c)) += leaf.dist[static_cast<std::size_t>(c)];
        }
      }
      for (int c = 0; c < kLabels; ++c) {
        scores.at(i, static_cast<std::size_t>(c)) /= static_cast<double>(trees_.size());
      }
    }
    return scores;
  }

  nlohmann::json learned_state() const override {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : trees_) trees.push_back(tree_node_json(tree, 0));
    return nlohmann::json{{"dim", dim_}, {"trees", trees}};
  }

 private:
  std::size_t dim_;
  std::vector<std::vector<TreeNode>> trees_;
};

std::unique_ptr<ClassicalModel> train_forest(const ClassicalSpec& spec, const DenseMatrix& x,
                                             const std::vector<int>& y, std::uint64_t seed) {
  TreeParams params = tree_params_from_spec(spec);
  std::int64_t n_estimators = spec.get_int("n_estimators", 100);
  int mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols)))));

  std::vector<std::vector<TreeNode>> trees;
  trees.reserve(static_cast<std::size_t>(n_estimators));
  for (std::int64_t t = 0; t < n_estimators; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) rows[i] = rng.uniform_index(x.rows);
    FeatureSampler sampler{&rng, mtry};
    TreeBuilder builder(x, y, params, sampler);
    trees.push_back(builder.build(std::move(rows)));
  }
  return std::make_unique<ForestModel>(x.cols, std::move(trees));
}

DenseMatrix matrix_from_json(const nlohmann::json& j, std::size_t expect_cols) {
  if (!j.is_array()) throw DataError("expected a JSON array of rows");
  DenseMatrix m(j.size(), expect_cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || row.size() != expect_cols) {
      throw DataError("model state row has the wrong width");
    }
    for (std::size_t c = 0; c < expect_cols; ++c) m.at(r, c) = row.at(c).get<double>();
  }
  return m;
}

}  // namespace

std::unique_ptr<ClassicalModel> train_classical(const ClassicalSpec& spec, const DenseMatrix& x,
                                                const std::vector<int>& y, std::uint64_t seed) {
  validate_spec(spec);
  if (x.rows != y.size()) throw UsageError("feature rows and labels differ in length");
  if (x.rows == 0) throw UsageError("training requires at least one sample");
  if (x.cols == 0) throw UsageError("training requires at least one feature");
  label_counts(y);  // validates the label range
  for (double v : x.data) {
    if (!std::isfinite(v)) throw DataError("training features must be finite");
  }

  switch (spec.algorithm) {
    case Algorithm::logreg: return train_logreg(spec, x, y);
    case Algorithm::svm: return train_svm(spec, x, y);
    case Algorithm::knn: {
      int k = static_cast<int>(spec.get_int("n_neighbors", 5));
      int p = static_cast<int>(spec.get_int("p", 2));
      DenseMatrix points = x;
      return std::make_unique<KnnModel>(std::move(points), y, k, p);
    }
    case Algorithm::naive_bayes: return train_naive_bayes(spec, x, y);
    case Algorithm::decision_tree: return train_tree(spec, x, y);
    case Algorithm::random_forest: return train_forest(spec, x, y, seed);
  }
  throw UsageError("unknown algorithm enum value");
}

std::unique_ptr<ClassicalModel> classical_from_state(const ClassicalSpec& spec,
                                                     const nlohmann::json& state) {
  validate_spec(spec);
  if (!state.is_object() || !state.contains("dim")) throw DataError("malformed model state");
  std::size_t dim = state.at("dim").get<std::size_t>();

  switch (spec.algorithm) {
    case Algorithm::logreg: {
      DenseMatrix weights = matrix_from_json(state.at("weights"), dim);
      auto bias = state.at("bias").get<std::vector<double>>();
      if (weights.rows != kNumLabels || bias.size() != kNumLabels) {
        throw DataError("malformed logreg state");
      }
      return std::make_unique<LogregModel>(dim, std::move(weights), std::move(bias));
    }
    case Algorithm::svm: {
      KernelParams kp;
      kp.kind = parse_kernel(state.at("kernel").get<std::string>());
      kp.gamma = state.at("gamma").get<double>();
      kp.degree = state.at("degree").get<double>();
      kp.coef0 = state.at("coef0").get<double>();
      DenseMatrix support = matrix_from_json(state.at("support"), dim);
      DenseMatrix dual = matrix_from_json(state.at("dual_coef"), support.rows);
      auto bias = state.at("bias").get<std::vector<double>>();
      if (dual.rows != kNumLabels || bias.size() != kNumLabels) throw DataError("malformed svm state");
      return std::make_unique<SvmModel>(dim, kp, std::move(support), std::move(dual),
                                        std::move(bias));
    }
    case Algorithm::knn: {
      DenseMatrix points = matrix_from_json(state.at("points"), dim);
      auto labels = state.at("labels").get<std::vector<int>>();
      if (labels.size() != points.rows) throw DataError("malformed knn state");
      return std::make_unique<KnnModel>(std::move(points), std::move(labels),
                                        state.at("n_neighbors").get<int>(),
                                        state.at("p").get<int>());
    }
    case Algorithm::naive_bayes: {
      bool gaussian = state.at("variant").get<std::string>() == "gaussian";
      auto counts = state.at("class_counts").get<std::vector<std::int64_t>>();
      if (counts.size() != kNumLabels) throw DataError("malformed naive bayes state");
      double alpha = state.at("alpha").get<double>();
      if (gaussian) {
        DenseMatrix means = matrix_from_json(state.at("means"), dim);
        DenseMatrix vars = matrix_from_json(state.at("variances"), dim);
        return std::make_unique<NaiveBayesModel>(true, dim, std::move(counts), std::move(means),
                                                 std::move(vars), alpha);
      }
      DenseMatrix fc = matrix_from_json(state.at("feature_counts"), dim);
      return std::make_unique<NaiveBayesModel>(false, dim, std::move(counts), std::move(fc),
                                               DenseMatrix(), alpha);
    }
    case Algorithm::decision_tree: {
      std::vector<TreeNode> nodes;
      tree_node_parse(state.at("tree"), nodes);
      return std::make_unique<TreeModel>(dim, std::move(nodes));
    }
    case Algorithm::random_forest: {
      std::vector<std::vector<TreeNode>> trees;
      for (const auto& t : state.at("trees")) {
        std::vector<TreeNode> nodes;
        tree_node_parse(t, nodes);
        trees.push_back(std::move(nodes));
      }
      if (trees.empty()) throw DataError("malformed forest state");
      return std::make_unique<ForestModel>(dim, std::move(trees));
    }
  }
  throw UsageError("unknown algorithm enum value");
}

}  // namespace emoclass
