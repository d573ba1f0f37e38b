#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace emoclass {

// Canonical label order; every index-addressed structure in the toolkit
// (score rows, confusion matrices, one-hot targets) uses it.
enum class EmotionLabel : int { anger = 0, fear = 1, joy = 2, sadness = 3 };

inline constexpr int kNumLabels = 4;

// Throws DataError for anything outside the four-label schema.
EmotionLabel parse_label(const std::string& text);
const char* label_name(EmotionLabel label);
const char* label_name(int index);

struct LabeledDocument {
  std::string id;
  std::string text;
  EmotionLabel label;
};

struct DataSplit {
  std::vector<LabeledDocument> train;
  std::vector<LabeledDocument> validation;
  std::vector<LabeledDocument> test;
  std::uint64_t seed = 0;
};

enum class CorpusFormat { csv, jsonl };

CorpusFormat parse_corpus_format(const std::string& name);

// CSV: header `text,label` (an optional leading `id` column is accepted),
// RFC-4180 quoting. JSONL: one object per line with `id` (optional), `text`,
// `label`. Documents without ids get zero-padded record indices.
std::vector<LabeledDocument> load_corpus(const std::string& path, CorpusFormat format);

std::array<std::int64_t, kNumLabels> class_distribution(
    std::span<const LabeledDocument> docs);

// Deterministic partition: |test| = floor(test_frac*N),
// |validation| = floor(val_frac*(N-|test|)), remainder to train. Input order
// is normalized by id before shuffling, so the split depends only on
// (contents, fractions, stratified, seed). Stratified mode keeps per-label
// proportions within one document per part (largest-remainder rounding).
DataSplit split(std::vector<LabeledDocument> docs, double test_frac = 0.20,
                double val_frac = 0.10, bool stratified = true,
                std::uint64_t seed = 0);

// Content hash over (id, text, label) of every document, order-insensitive.
std::string corpus_fingerprint(std::span<const LabeledDocument> docs);

}  // namespace emoclass
