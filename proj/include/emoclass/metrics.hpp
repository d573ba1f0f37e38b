#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "emoclass/dense.hpp"
#include "emoclass/optimize.hpp"
#include "json.hpp"

namespace emoclass {

// Rows are true labels, columns are predicted labels, canonical order.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 4>, 4> counts{};

  std::int64_t total() const;
  std::int64_t row_sum(int label) const;
  std::int64_t col_sum(int label) const;
  std::string to_csv() const;  // header row/column of label names
};

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred);

struct LabelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct ClassificationReport {
  std::array<LabelMetrics, 4> per_label;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  std::int64_t total = 0;

  nlohmann::json to_json() const;
  std::string to_text() const;  // fixed four-decimal table
};

ClassificationReport classification_report(const ConfusionMatrix& cm);

struct RocCurve {
  std::vector<double> fpr;  // non-decreasing, starts at 0, ends at 1
  std::vector<double> tpr;
  double auc = 0.0;
  bool defined = true;
};

// One-vs-rest binary curve: truth01 flags positives, higher score means more
// positive. Threshold sweep over the distinct score values, descending.
RocCurve roc_binary(const std::vector<int>& truth01, const std::vector<double>& score);

struct RocSet {
  std::array<RocCurve, 4> per_label;
  RocCurve micro;  // pools all (sample, label) decisions
  RocCurve macro;  // mean of defined per-label curves on a 101-point fpr grid
  std::vector<int> undefined_labels;
};

RocSet roc_ovr(const std::vector<int>& y_true, const DenseMatrix& scores);

// CSV/SVG exports under `dir`. History: learning_curves.csv (+ accuracy/loss
// charts when `svg` is set). Roc: roc_<label>.csv x4, roc_micro.csv,
// roc_macro.csv (+ roc.svg). export_curves writes both sets.
void export_history(const TrainHistory& history, const std::string& dir, bool svg);
void export_roc(const RocSet& curves, const std::string& dir, bool svg);
void export_curves(const TrainHistory& history, const RocSet& curves, const std::string& dir,
                   bool svg);

}  // namespace emoclass
