#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace emoclass {

enum class Normalizer { none, stem, lemma, lemma_then_stem };

Normalizer parse_normalizer(const std::string& name);
const char* normalizer_name(Normalizer mode);

struct PreprocessConfig {
  bool lowercase = true;
  bool strip_html = true;
  bool strip_urls = true;
  bool strip_punctuation = true;
  bool preserve_emoticons = true;
  Normalizer normalizer = Normalizer::lemma_then_stem;
  std::unordered_set<std::string> stopwords;              // lowercase
  std::unordered_map<std::string, std::string> abbreviations;  // lowercase key -> phrase
  std::vector<std::string> emoticons;                     // surface forms, longest first

  // Built-in emoticon lexicon; also shipped as data/emoticons.txt.
  static const std::vector<std::string>& default_emoticons();
};

// Loaders for the plain-text data files (stopwords.txt, abbreviations.tsv,
// emoticons.txt). Inputs are normalized per the config invariants.
std::unordered_set<std::string> load_stopwords(const std::string& path);
std::unordered_map<std::string, std::string> load_abbreviations(const std::string& path);
std::vector<std::string> load_emoticons(const std::string& path);

struct TokenizedDocument {
  std::vector<std::string> tokens;
  std::vector<std::size_t> emoticon_tokens;  // indices into tokens
  std::string source_id;
};

// HTML tag, URL and punctuation removal with emoticon shielding; collapses
// whitespace. Total on every UTF-8 input and idempotent.
std::string clean(const std::string& text, const PreprocessConfig& config);

// Whitespace tokenization of cleaned text: lowercases (emoticons excepted),
// drops stopwords, records emoticon indices.
TokenizedDocument tokenize(const std::string& cleaned, const PreprocessConfig& config);

// Token-level abbreviation expansion, case-insensitive keys, in-place order.
std::vector<std::string> expand_abbreviations(
    const std::vector<std::string>& tokens,
    const std::unordered_map<std::string, std::string>& table);

// Same, but keeps emoticon indices aligned.
TokenizedDocument expand_abbreviations(
    const TokenizedDocument& doc,
    const std::unordered_map<std::string, std::string>& table);

// stem: full Porter (1980) suffix stripping. lemma: irregular-forms table,
// then Porter step 1. Tokens containing anything but lowercase ASCII letters
// (emoticons, numbers, mixed case) pass through unchanged.
std::string normalize_token(const std::string& token, Normalizer mode);

std::string porter_stem(const std::string& word);

// clean -> tokenize -> expand -> normalize, dropping tokens that normalize
// to empty.
TokenizedDocument preprocess_text(const std::string& text, const std::string& source_id,
                                  const PreprocessConfig& config);

}  // namespace emoclass
