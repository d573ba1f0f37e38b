#include "emoclass/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "emoclass/util.hpp"

#include <json.hpp>

namespace emoclass {

EmotionLabel parse_label(const std::string& text) {
  std::string t = to_lower_ascii(trim(text));
  if (t == "anger") return EmotionLabel::anger;
  if (t == "fear") return EmotionLabel::fear;
  if (t == "joy") return EmotionLabel::joy;
  if (t == "sadness") return EmotionLabel::sadness;
  throw DataError("unknown label \"" + text +
                  "\" (expected one of: anger, fear, joy, sadness)");
}

const char* label_name(EmotionLabel label) { return label_name(static_cast<int>(label)); }

const char* label_name(int index) {
  static const char* names[kNumLabels] = {"anger", "fear", "joy", "sadness"};
  if (index < 0 || index >= kNumLabels) throw UsageError("label index out of range");
  return names[index];
}

CorpusFormat parse_corpus_format(const std::string& name) {
  std::string n = to_lower_ascii(trim(name));
  if (n == "csv") return CorpusFormat::csv;
  if (n == "jsonl") return CorpusFormat::jsonl;
  throw UsageError("unknown corpus format \"" + name + "\" (expected csv or jsonl)");
}

namespace {

std::string auto_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08zu", index);
  return buf;
}

void check_document(LabeledDocument& doc, std::size_t line,
                    std::unordered_set<std::string>& seen_ids) {
  if (trim(doc.text).empty()) {
    throw DataError("line " + std::to_string(line) + ": empty text");
  }
  if (!seen_ids.insert(doc.id).second) {
    throw DataError("line " + std::to_string(line) + ": duplicate id \"" + doc.id + "\"");
  }
}

std::vector<LabeledDocument> load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  auto records = parse_csv(in);
  if (records.empty()) throw DataError(path + ": empty file");

  const auto& header = records[0].fields;
  int id_col = -1, text_col = -1, label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name = to_lower_ascii(trim(header[c]));
    if (name == "id") id_col = static_cast<int>(c);
    else if (name == "text") text_col = static_cast<int>(c);
    else if (name == "label") label_col = static_cast<int>(c);
  }
  if (text_col < 0 || label_col < 0) {
    throw DataError(path + ": header must contain `text` and `label` columns");
  }

  std::vector<LabeledDocument> docs;
  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto need = static_cast<std::size_t>(std::max(text_col, label_col)) + 1;
    if (rec.fields.size() < need) {
      throw DataError("line " + std::to_string(rec.line) + ": expected at least " +
                      std::to_string(need) + " fields, got " +
                      std::to_string(rec.fields.size()));
    }
    LabeledDocument doc;
    doc.id = (id_col >= 0 && static_cast<std::size_t>(id_col) < rec.fields.size())
                 ? rec.fields[static_cast<std::size_t>(id_col)]
                 : auto_id(r - 1);
    doc.text = rec.fields[static_cast<std::size_t>(text_col)];
    try {
      doc.label = parse_label(rec.fields[static_cast<std::size_t>(label_col)]);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(rec.line) + ": " + e.what());
    }
    check_document(doc, rec.line, seen_ids);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<LabeledDocument> load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);

  std::vector<LabeledDocument> docs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  std::size_t record_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj.contains("label")) {
      throw DataError("line " + std::to_string(line_no) +
                      ": record must have `text` and `label` fields");
    }
    LabeledDocument doc;
    doc.id = obj.contains("id") ? obj["id"].is_string() ? obj["id"].get<std::string>()
                                                        : obj["id"].dump()
                                : auto_id(record_no);
    doc.text = obj["text"].get<std::string>();
    try {
      doc.label = parse_label(obj["label"].get<std::string>());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    check_document(doc, line_no, seen_ids);
    docs.push_back(std::move(doc));
    ++record_no;
  }
  return docs;
}

}  // namespace

std::vector<LabeledDocument> load_corpus(const std::string& path, CorpusFormat format) {
  return format == CorpusFormat::csv ? load_csv(path) : load_jsonl(path);
}

std::array<std::int64_t, kNumLabels> class_distribution(
    std::span<const LabeledDocument> docs) {
  std::array<std::int64_t, kNumLabels> counts{};
  for (const auto& doc : docs) counts[static_cast<std::size_t>(doc.label)]++;
  return counts;
}

namespace {

// Largest-remainder apportionment of `total` across groups proportional to
// their sizes. Ties go to the lower group index.
std::array<std::size_t, kNumLabels> apportion(
    const std::array<std::size_t, kNumLabels>& group_sizes, double frac,
    std::size_t total) {
  std::array<std::size_t, kNumLabels> out{};
  std::array<double, kNumLabels> remainders{};
  std::size_t assigned = 0;
  for (int j = 0; j < kNumLabels; ++j) {
    double ideal = static_cast<double>(group_sizes[static_cast<std::size_t>(j)]) * frac;
    auto fl = static_cast<std::size_t>(std::floor(ideal));
    fl = std::min(fl, group_sizes[static_cast<std::size_t>(j)]);
    out[static_cast<std::size_t>(j)] = fl;
    remainders[static_cast<std::size_t>(j)] = ideal - static_cast<double>(fl);
    assigned += fl;
  }
  while (assigned < total) {
    int best = -1;
    for (int j = 0; j < kNumLabels; ++j) {
      auto ju = static_cast<std::size_t>(j);
      if (out[ju] >= group_sizes[ju]) continue;
      if (best < 0 || remainders[ju] > remainders[static_cast<std::size_t>(best)]) best = j;
    }
    if (best < 0) break;
    out[static_cast<std::size_t>(best)]++;
    remainders[static_cast<std::size_t>(best)] = -1.0;
    assigned++;
  }
  // Overshoot can only come from per-group floors already exceeding total;
  // trim from the largest groups for determinism.
  while (assigned > total) {
    int best = -1;
    for (int j = 0; j < kNumLabels; ++j) {
      auto ju = static_cast<std::size_t>(j);
      if (out[ju] == 0) continue;
      if (best < 0 || out[ju] > out[static_cast<std::size_t>(best)]) best = j;
    }
    out[static_cast<std::size_t>(best)]--;
    assigned--;
  }
  return out;
}

}  // namespace

DataSplit split(std::vector<LabeledDocument> docs, double test_frac, double val_frac,
                bool stratified, std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) {
    throw UsageError("test_frac must be in (0, 1)");
  }
  if (!(val_frac >= 0.0 && val_frac < 1.0)) {
    throw UsageError("val_frac must be in [0, 1)");
  }
  if (docs.size() < 10) throw UsageError("corpus too small to split (need >= 10 documents)");

  std::stable_sort(docs.begin(), docs.end(),
                   [](const LabeledDocument& a, const LabeledDocument& b) {
                     return a.id < b.id;
                   });

  const std::size_t n = docs.size();
  const auto n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * test_frac));
  const auto n_val = static_cast<std::size_t>(
      std::floor(static_cast<double>(n - n_test) * val_frac));

  DataSplit result;
  result.seed = seed;
  Rng rng(mix_seed(seed, 0x5EED5EEDULL));

  if (!stratified) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < n; ++i) {
      auto& doc = docs[order[i]];
      if (i < n_test) result.test.push_back(std::move(doc));
      else if (i < n_test + n_val) result.validation.push_back(std::move(doc));
      else result.train.push_back(std::move(doc));
    }
    return result;
  }

  std::array<std::vector<std::size_t>, kNumLabels> groups;
  for (std::size_t i = 0; i < n; ++i) {
    groups[static_cast<std::size_t>(docs[i].label)].push_back(i);
  }
  std::array<std::size_t, kNumLabels> sizes{};
  for (int j = 0; j < kNumLabels; ++j) {
    auto ju = static_cast<std::size_t>(j);
    sizes[ju] = groups[ju].size();
    rng.shuffle(groups[ju]);
  }

  auto test_counts = apportion(sizes, test_frac, n_test);
  std::array<std::size_t, kNumLabels> remaining{};
  for (int j = 0; j < kNumLabels; ++j) {
    auto ju = static_cast<std::size_t>(j);
    remaining[ju] = sizes[ju] - test_counts[ju];
  }
  auto val_counts = apportion(remaining, val_frac, n_val);

  for (int j = 0; j < kNumLabels; ++j) {
    auto ju = static_cast<std::size_t>(j);
    if (sizes[ju] == 0) continue;
    std::size_t train_count = sizes[ju] - test_counts[ju] - val_counts[ju];
    if (test_counts[ju] == 0 || (n_val > 0 && val_counts[ju] == 0) || train_count == 0) {
      throw DataError(std::string("stratified split cannot give every part at least one "
                                  "document of label \"") +
                      label_name(j) + "\"");
    }
  }

  for (int j = 0; j < kNumLabels; ++j) {
    auto ju = static_cast<std::size_t>(j);
    const auto& idx = groups[ju];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto& doc = docs[idx[i]];
      if (i < test_counts[ju]) result.test.push_back(std::move(doc));
      else if (i < test_counts[ju] + val_counts[ju]) result.validation.push_back(std::move(doc));
      else result.train.push_back(std::move(doc));
    }
  }
  return result;
}

std::string corpus_fingerprint(std::span<const LabeledDocument> docs) {
  std::vector<std::string> lines;
  lines.reserve(docs.size());
  for (const auto& doc : docs) {
    lines.push_back(doc.id + "\x1f" + doc.text + "\x1f" + label_name(doc.label));
  }
  std::sort(lines.begin(), lines.end());
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& line : lines) {
    h ^= fnv1a64(line);
    h *= 0x100000001B3ULL;
  }
  return to_hex(h);
}

}  // namespace emoclass
