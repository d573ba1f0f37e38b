#pragma once

// Brute-force oracles and randomized instance generators for the classical
// classifiers and the ROC machinery, shared by the unit tests and the
// acceptance runner. Every classifier instance stays within 8 samples x 4
// features x 4 labels so the oracles can afford exhaustive scans.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "emoclass/classical.hpp"
#include "emoclass/corpus.hpp"
#include "emoclass/dense.hpp"
#include "emoclass/metrics.hpp"
#include "emoclass/util.hpp"

namespace emoclass::oracle {

struct OracleReport {
  int checked = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

// --- Gini split -------------------------------------------------------------

// Recounts labels for every candidate split by direct scan (no prefix sums) and
// keeps the arithmetic of the decrease in the same evaluation order as the
// library so the reported values compare bitwise equal.
inline GiniSplit brute_force_gini_split(const DenseMatrix& x, const std::vector<int>& y,
                                        int min_samples_leaf) {
  const std::int64_t n = static_cast<std::int64_t>(x.rows);
  GiniSplit best;
  std::vector<std::int64_t> total(kNumLabels, 0);
  for (int label : y) ++total[static_cast<std::size_t>(label)];

  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> values(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) values[i] = x.at(i, f);
    std::vector<double> distinct = values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    for (std::size_t v = 0; v + 1 < distinct.size(); ++v) {
      double threshold = (distinct[v] + distinct[v + 1]) / 2.0;
      std::vector<std::int64_t> left(kNumLabels, 0);
      std::int64_t n_left = 0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        if (values[i] <= threshold) {
          ++left[static_cast<std::size_t>(y[i])];
          ++n_left;
        }
      }
      std::int64_t n_right = n - n_left;
      if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;

      double parent = 1.0;
      double gl = 1.0;
      double gr = 1.0;
      for (std::size_t c = 0; c < kNumLabels; ++c) {
        double pt = static_cast<double>(total[c]) / static_cast<double>(n);
        parent -= pt * pt;
        double pl = static_cast<double>(left[c]) / static_cast<double>(n_left);
        gl -= pl * pl;
        double pr = static_cast<double>(total[c] - left[c]) / static_cast<double>(n_right);
        gr -= pr * pr;
      }
      double weighted = (static_cast<double>(n_left) * gl + static_cast<double>(n_right) * gr) /
                        static_cast<double>(n);
      double decrease = parent - weighted;
      if (decrease > best.decrease) {
        best.found = true;
        best.feature = static_cast<int>(f);
        best.threshold = threshold;
        best.decrease = decrease;
      }
    }
  }
  if (!(best.decrease > 0.0)) best.found = false;
  return best;
}

inline OracleReport run_tree_split_oracle(std::uint64_t seed, int instances) {
  Rng rng(seed);
  OracleReport report;
  for (int t = 0; t < instances; ++t) {
    std::size_t n = 2 + rng.uniform_index(7);   // 2..8
    std::size_t d = 1 + rng.uniform_index(4);   // 1..4
    int labels = 1 + static_cast<int>(rng.uniform_index(4));
    bool grid_values = rng.uniform() < 0.5;
    int msl = 1 + static_cast<int>(rng.uniform_index(3));

    DenseMatrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        x.at(i, j) = grid_values ? static_cast<double>(rng.uniform_index(4)) : rng.uniform();
      }
      y[i] = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(labels)));
    }

    GiniSplit got = gini_best_split(x, y, msl);
    GiniSplit want = brute_force_gini_split(x, y, msl);
    bool same = got.found == want.found;
    if (same && got.found) {
      same = got.feature == want.feature && got.threshold == want.threshold &&
             got.decrease == want.decrease;
    }
    ++report.checked;
    if (!same) {
      std::ostringstream msg;
      msg << "tree split mismatch on instance " << t << ": got (found=" << got.found
          << ", f=" << got.feature << ", thr=" << got.threshold << ", dec=" << got.decrease
          << ") want (found=" << want.found << ", f=" << want.feature << ", thr=" << want.threshold
          << ", dec=" << want.decrease << ")";
      report.failures.push_back(msg.str());
    }
  }
  return report;
}

// --- k nearest neighbours ---------------------------------------------------

// Repeated minimum extraction with an explicit (distance, index) tie rule; the
// distance arithmetic matches the library's Minkowski evaluation.
inline std::vector<std::pair<std::size_t, double>> brute_force_knn(const DenseMatrix& points,
                                                                   std::span<const double> query,
                                                                   int k, int p) {
  std::vector<double> dist(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    auto row = points.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      double dd = std::abs(row[j] - query[j]);
      acc += p == 1 ? dd : dd * dd;
    }
    dist[i] = p == 1 ? acc : std::sqrt(acc);
  }
  std::vector<bool> taken(points.rows, false);
  std::vector<std::pair<std::size_t, double>> out;
  for (int round = 0; round < k; ++round) {
    std::size_t best = points.rows;
    for (std::size_t i = 0; i < points.rows; ++i) {
      if (taken[i]) continue;
      if (best == points.rows || dist[i] < dist[best]) best = i;
    }
    taken[best] = true;
    out.emplace_back(best, dist[best]);
  }
  return out;
}

inline OracleReport run_knn_oracle(std::uint64_t seed, int instances) {
  Rng rng(seed);
  OracleReport report;
  for (int t = 0; t < instances; ++t) {
    std::size_t n = 1 + rng.uniform_index(8);  // 1..8
    std::size_t d = 1 + rng.uniform_index(4);
    bool grid_values = rng.uniform() < 0.5;
    int k = 1 + static_cast<int>(rng.uniform_index(n));
    int p = rng.uniform() < 0.5 ? 1 : 2;

    DenseMatrix points(n, d);
    std::vector<double> query(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        points.at(i, j) = grid_values ? static_cast<double>(rng.uniform_index(3)) : rng.uniform();
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      query[j] = grid_values ? static_cast<double>(rng.uniform_index(3)) : rng.uniform();
    }

    auto got = knn_neighbors(points, query, k, p);
    auto want = brute_force_knn(points, query, k, p);
    ++report.checked;
    if (got != want) {
      std::ostringstream msg;
      msg << "knn mismatch on instance " << t << " (n=" << n << ", k=" << k << ", p=" << p << "):";
      for (std::size_t i = 0; i < got.size(); ++i) {
        msg << " got[" << got[i].first << "," << got[i].second << "] want[" << want[i].first << ","
            << want[i].second << "]";
      }
      report.failures.push_back(msg.str());
    }
  }
  return report;
}

// --- multinomial naive bayes ------------------------------------------------

// Direct posterior computation: per-class joint log likelihood with log of the
// probability ratio (rather than a difference of logs), normalized without the
// max-subtraction trick. Agreement is expected to 1e-12, not bitwise.
inline std::vector<double> brute_force_nb_posterior(const DenseMatrix& x, const std::vector<int>& y,
                                                    double alpha, std::span<const double> query) {
  std::vector<double> prior(kNumLabels, 0.0);
  for (int label : y) prior[static_cast<std::size_t>(label)] += 1.0;

  std::vector<double> weight(kNumLabels, 0.0);
  double norm = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (prior[c] == 0.0) continue;
    double class_total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      if (static_cast<std::size_t>(y[i]) != c) continue;
      for (std::size_t j = 0; j < x.cols; ++j) class_total += x.at(i, j);
    }
    double jll = std::log(prior[c] / static_cast<double>(y.size()));
    for (std::size_t j = 0; j < x.cols; ++j) {
      if (query[j] == 0.0) continue;
      double count = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        if (static_cast<std::size_t>(y[i]) == c) count += x.at(i, j);
      }
      double theta = (count + alpha) / (class_total + alpha * static_cast<double>(x.cols));
      jll += query[j] * std::log(theta);
    }
    weight[c] = std::exp(jll);
    norm += weight[c];
  }
  std::vector<double> posterior(kNumLabels, 0.0);
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    posterior[c] = norm > 0.0 ? weight[c] / norm : 1.0 / static_cast<double>(kNumLabels);
  }
  return posterior;
}

inline OracleReport run_nb_oracle(std::uint64_t seed, int instances) {
  Rng rng(seed);
  OracleReport report;
  const double alphas[] = {0.5, 1.0, 2.0};
  for (int t = 0; t < instances; ++t) {
    std::size_t n = 2 + rng.uniform_index(7);
    std::size_t d = 1 + rng.uniform_index(4);
    int labels = 1 + static_cast<int>(rng.uniform_index(4));
    double alpha = alphas[rng.uniform_index(3)];

    DenseMatrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x.at(i, j) = static_cast<double>(rng.uniform_index(4));
      y[i] = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(labels)));
    }
    DenseMatrix query(1, d);
    for (std::size_t j = 0; j < d; ++j) query.at(0, j) = static_cast<double>(rng.uniform_index(4));

    ClassicalSpec spec;
    spec.algorithm = Algorithm::naive_bayes;
    spec.params["variant"] = std::string("multinomial");
    spec.params["alpha"] = alpha;
    auto model = train_classical(spec, x, y, 0);
    DenseMatrix scores = model->predict_scores(query);
    auto want = brute_force_nb_posterior(x, y, alpha, query.row(0));

    ++report.checked;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      double diff = std::abs(scores.at(0, c) - want[c]);
      if (!(diff <= 1e-12)) {
        std::ostringstream msg;
        msg << "nb posterior mismatch on instance " << t << " label " << c << ": got "
            << scores.at(0, c) << " want " << want[c] << " (diff " << diff << ")";
        report.failures.push_back(msg.str());
        break;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// ROC AUC oracle: the Mann-Whitney U statistic over positive/negative pairs,
// ties at half weight, normalized by P*N. Equals the trapezoid area of the
// distinct-threshold sweep.
inline double mann_whitney_auc(const std::vector<int>& truth01,
                               const std::vector<double>& score) {
  double u = 0.0;
  std::int64_t pos = 0;
  std::int64_t neg = 0;
  for (std::size_t i = 0; i < truth01.size(); ++i) {
    if (truth01[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < truth01.size(); ++j) {
      if (truth01[j] == 1) continue;
      if (score[i] > score[j]) {
        u += 1.0;
      } else if (score[i] == score[j]) {
        u += 0.5;
      }
    }
  }
  for (int t : truth01) {
    if (t != 1) ++neg;
  }
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

inline OracleReport run_roc_auc_oracle(std::uint64_t seed, int instances) {
  Rng rng(seed);
  OracleReport report;
  for (int t = 0; t < instances; ++t) {
    std::size_t n = 2 + rng.uniform_index(39);
    bool coarse = rng.uniform() < 0.5;  // coarse grids force score ties
    std::vector<int> truth(n);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.uniform_index(2));
      score[i] = coarse ? static_cast<double>(rng.uniform_index(5)) / 4.0 : rng.uniform();
    }
    truth[0] = 1;  // guarantee both classes
    truth[n - 1] = 0;

    RocCurve curve = roc_binary(truth, score);
    double want = mann_whitney_auc(truth, score);
    ++report.checked;
    double diff = std::abs(curve.auc - want);
    if (!(diff <= 1e-12)) {
      std::ostringstream msg;
      msg << "auc mismatch on instance " << t << ": trapezoid " << curve.auc
          << " vs mann-whitney " << want << " (diff " << diff << ")";
      report.failures.push_back(msg.str());
    }
  }
  return report;
}

}  // namespace emoclass::oracle
