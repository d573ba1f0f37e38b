#include "emoclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "emoclass/corpus.hpp"
#include "emoclass/svgplot.hpp"
#include "emoclass/util.hpp"

namespace emoclass {

namespace {

void check_labels(const std::vector<int>& labels, const char* what) {
  for (int v : labels) {
    if (v < 0 || v >= kNumLabels) {
      throw UsageError(std::string(what) + " contains a label outside the four-emotion range");
    }
  }
}

std::string num(double v) { return nlohmann::json(v).dump(); }

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) {
    for (std::int64_t v : row) t += v;
  }
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int label) const {
  std::int64_t t = 0;
  for (std::int64_t v : counts[static_cast<std::size_t>(label)]) t += v;
  return t;
}

std::int64_t ConfusionMatrix::col_sum(int label) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[static_cast<std::size_t>(label)];
  return t;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "true\\predicted";
  for (int j = 0; j < kNumLabels; ++j) out << ',' << label_name(j);
  out << '\n';
  for (int i = 0; i < kNumLabels; ++i) {
    out << label_name(i);
    for (int j = 0; j < kNumLabels; ++j) {
      out << ',' << counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) throw UsageError("label lists differ in length");
  if (y_true.empty()) throw UsageError("confusion matrix needs at least one sample");
  check_labels(y_true, "y_true");
  check_labels(y_pred, "y_pred");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    cm.counts[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])] += 1;
  }
  return cm;
}

ClassificationReport classification_report(const ConfusionMatrix& cm) {
  std::int64_t total = cm.total();
  if (total < 1) throw UsageError("classification report needs at least one sample");

  ClassificationReport report;
  report.total = total;
  std::int64_t trace = 0;
  for (int j = 0; j < kNumLabels; ++j) {
    std::size_t u = static_cast<std::size_t>(j);
    std::int64_t tp = cm.counts[u][u];
    std::int64_t col = cm.col_sum(j);
    std::int64_t row = cm.row_sum(j);
    trace += tp;
    LabelMetrics& m = report.per_label[u];
    m.support = row;
    m.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    m.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
  }
  report.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  for (int j = 0; j < kNumLabels; ++j) {
    const LabelMetrics& m = report.per_label[static_cast<std::size_t>(j)];
    report.macro_precision += m.precision / kNumLabels;
    report.macro_recall += m.recall / kNumLabels;
    report.macro_f1 += m.f1 / kNumLabels;
    double w = static_cast<double>(m.support) / static_cast<double>(total);
    report.weighted_precision += w * m.precision;
    report.weighted_recall += w * m.recall;
    report.weighted_f1 += w * m.f1;
  }
  return report;
}

nlohmann::json ClassificationReport::to_json() const {
  nlohmann::json labels = nlohmann::json::object();
  for (int j = 0; j < kNumLabels; ++j) {
    const LabelMetrics& m = per_label[static_cast<std::size_t>(j)];
    labels[label_name(j)] = {{"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support}};
  }
  return {{"accuracy", accuracy},
          {"labels", std::move(labels)},
          {"macro", {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}}},
          {"weighted",
           {{"precision", weighted_precision},
            {"recall", weighted_recall},
            {"f1", weighted_f1}}},
          {"total", total}};
}

std::string ClassificationReport::to_text() const {
  char buf[160];
  std::ostringstream out;
  out << "              precision    recall  f1-score   support\n";
  for (int j = 0; j < kNumLabels; ++j) {
    const LabelMetrics& m = per_label[static_cast<std::size_t>(j)];
    std::snprintf(buf, sizeof(buf), "%-12s%11.4f%10.4f%10.4f%10lld\n", label_name(j), m.precision,
                  m.recall, m.f1, static_cast<long long>(m.support));
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-12s%31.4f%10lld\n", "accuracy", accuracy,
                static_cast<long long>(total));
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-12s%11.4f%10.4f%10.4f%10lld\n", "macro avg", macro_precision,
                macro_recall, macro_f1, static_cast<long long>(total));
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-12s%11.4f%10.4f%10.4f%10lld\n", "weighted avg",
                weighted_precision, weighted_recall, weighted_f1, static_cast<long long>(total));
  out << buf;
  return out.str();
}

RocCurve roc_binary(const std::vector<int>& truth01, const std::vector<double>& score) {
  if (truth01.size() != score.size()) throw UsageError("truth and score lengths differ");
  if (truth01.empty()) throw UsageError("roc needs at least one sample");
  std::int64_t pos = 0;
  std::int64_t neg = 0;
  for (std::size_t i = 0; i < truth01.size(); ++i) {
    if (truth01[i] != 0 && truth01[i] != 1) throw UsageError("truth flags must be 0 or 1");
    if (!std::isfinite(score[i])) throw DataError("roc scores must be finite");
    if (truth01[i] == 1) {
      ++pos;
    } else {
      ++neg;
    }
  }
  RocCurve curve;
  if (pos == 0 || neg == 0) {
    curve.defined = false;
    return curve;
  }

  std::vector<std::size_t> order(truth01.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double v = score[order[i]];
    // Every sample tied at this threshold flips at once.
    while (i < order.size() && score[order[i]] == v) {
      if (truth01[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
  }

  double auc = 0.0;
  for (std::size_t p = 1; p < curve.fpr.size(); ++p) {
    auc += (curve.fpr[p] - curve.fpr[p - 1]) * (curve.tpr[p] + curve.tpr[p - 1]) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

namespace {

// Linear interpolation of a curve's tpr at grid fpr values; duplicate fpr
// points collapse to their maximum tpr first.
std::vector<double> tpr_on_grid(const RocCurve& curve, const std::vector<double>& grid) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
    if (!xs.empty() && curve.fpr[i] == xs.back()) {
      ys.back() = std::max(ys.back(), curve.tpr[i]);
    } else {
      xs.push_back(curve.fpr[i]);
      ys.push_back(curve.tpr[i]);
    }
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double g : grid) {
    if (g <= xs.front()) {
      out.push_back(ys.front());
    } else if (g >= xs.back()) {
      out.push_back(ys.back());
    } else {
      std::size_t hi = static_cast<std::size_t>(
          std::upper_bound(xs.begin(), xs.end(), g) - xs.begin());
      double t = (g - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
      out.push_back(ys[hi - 1] + t * (ys[hi] - ys[hi - 1]));
    }
  }
  return out;
}

}  // namespace

RocSet roc_ovr(const std::vector<int>& y_true, const DenseMatrix& scores) {
  if (y_true.empty()) throw UsageError("roc needs at least one sample");
  if (scores.rows != y_true.size() || scores.cols != static_cast<std::size_t>(kNumLabels)) {
    throw UsageError("score matrix must be samples x 4");
  }
  check_labels(y_true, "y_true");

  RocSet set;
  std::vector<int> pooled_truth;
  std::vector<double> pooled_score;
  pooled_truth.reserve(y_true.size() * kNumLabels);
  pooled_score.reserve(y_true.size() * kNumLabels);
  for (int j = 0; j < kNumLabels; ++j) {
    std::vector<int> truth(y_true.size());
    std::vector<double> column(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      truth[i] = y_true[i] == j ? 1 : 0;
      column[i] = scores.at(i, static_cast<std::size_t>(j));
      pooled_truth.push_back(truth[i]);
      pooled_score.push_back(column[i]);
    }
    set.per_label[static_cast<std::size_t>(j)] = roc_binary(truth, column);
    if (!set.per_label[static_cast<std::size_t>(j)].defined) set.undefined_labels.push_back(j);
  }
  set.micro = roc_binary(pooled_truth, pooled_score);

  std::vector<double> grid(101);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i) / 100.0;
  std::vector<double> mean_tpr(grid.size(), 0.0);
  std::size_t defined = 0;
  for (int j = 0; j < kNumLabels; ++j) {
    const RocCurve& c = set.per_label[static_cast<std::size_t>(j)];
    if (!c.defined) continue;
    std::vector<double> t = tpr_on_grid(c, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) mean_tpr[i] += t[i];
    ++defined;
  }
  if (defined == 0) {
    set.macro.defined = false;
  } else {
    for (double& v : mean_tpr) v /= static_cast<double>(defined);
    set.macro.fpr = grid;
    set.macro.tpr = mean_tpr;
    double auc = 0.0;
    for (std::size_t p = 1; p < grid.size(); ++p) {
      auc += (grid[p] - grid[p - 1]) * (mean_tpr[p] + mean_tpr[p - 1]) / 2.0;
    }
    set.macro.auc = auc;
  }
  return set;
}

namespace {

std::string roc_csv(const RocCurve& curve) {
  std::ostringstream out;
  out << "fpr,tpr\n";
  if (curve.defined) {
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
      out << num(curve.fpr[i]) << ',' << num(curve.tpr[i]) << '\n';
    }
  }
  return out.str();
}

PlotSeries roc_series(const std::string& name, const RocCurve& curve) {
  PlotSeries s;
  s.name = name;
  s.x = curve.fpr;
  s.y = curve.tpr;
  return s;
}

}  // namespace

namespace {

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory: " + dir);
}

}  // namespace

void export_history(const TrainHistory& history, const std::string& dir, bool svg) {
  if (history.train_loss.empty()) throw UsageError("history is empty");
  ensure_directory(dir);

  std::ostringstream lc;
  lc << "epoch,train_loss,train_accuracy,validation_loss,validation_accuracy\n";
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    lc << (e + 1) << ',' << num(history.train_loss[e]) << ',' << num(history.train_accuracy[e])
       << ',' << num(history.validation_loss[e]) << ',' << num(history.validation_accuracy[e])
       << '\n';
  }
  std::filesystem::path base(dir);
  write_text_file((base / "learning_curves.csv").string(), lc.str());

  if (!svg) return;
  std::vector<double> epochs(history.train_loss.size());
  for (std::size_t e = 0; e < epochs.size(); ++e) epochs[e] = static_cast<double>(e + 1);
  std::vector<PlotSeries> acc = {{"train", epochs, history.train_accuracy},
                                 {"validation", epochs, history.validation_accuracy}};
  std::vector<PlotSeries> loss = {{"train", epochs, history.train_loss},
                                  {"validation", epochs, history.validation_loss}};
  write_text_file((base / "learning_accuracy.svg").string(),
                  render_line_chart("Model accuracy", "epoch", "accuracy", acc));
  write_text_file((base / "learning_loss.svg").string(),
                  render_line_chart("Model loss", "epoch", "loss", loss));
}

void export_roc(const RocSet& curves, const std::string& dir, bool svg) {
  ensure_directory(dir);
  std::filesystem::path base(dir);
  for (int j = 0; j < kNumLabels; ++j) {
    write_text_file((base / ("roc_" + std::string(label_name(j)) + ".csv")).string(),
                    roc_csv(curves.per_label[static_cast<std::size_t>(j)]));
  }
  write_text_file((base / "roc_micro.csv").string(), roc_csv(curves.micro));
  write_text_file((base / "roc_macro.csv").string(), roc_csv(curves.macro));

  if (!svg) return;
  std::vector<PlotSeries> roc_lines;
  for (int j = 0; j < kNumLabels; ++j) {
    const RocCurve& c = curves.per_label[static_cast<std::size_t>(j)];
    if (c.defined) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s (auc %.4f)", label_name(j), c.auc);
      roc_lines.push_back(roc_series(name, c));
    }
  }
  if (curves.micro.defined) {
    char name[64];
    std::snprintf(name, sizeof(name), "micro avg (auc %.4f)", curves.micro.auc);
    roc_lines.push_back(roc_series(name, curves.micro));
  }
  if (curves.macro.defined) {
    char name[64];
    std::snprintf(name, sizeof(name), "macro avg (auc %.4f)", curves.macro.auc);
    roc_lines.push_back(roc_series(name, curves.macro));
  }
  if (!roc_lines.empty()) {
    write_text_file((base / "roc.svg").string(),
                    render_line_chart("ROC curves (one-vs-rest)", "false positive rate",
                                      "true positive rate", roc_lines));
  }
}

void export_curves(const TrainHistory& history, const RocSet& curves, const std::string& dir,
                   bool svg) {
  export_history(history, dir, svg);
  export_roc(curves, dir, svg);
}

}  // namespace emoclass
