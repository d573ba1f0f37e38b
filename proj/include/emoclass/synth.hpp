#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emoclass/corpus.hpp"

namespace emoclass {

// Deterministic four-class toy corpus: every document mixes two or three
// class-marker words with shared fillers, plus an occasional emoticon. Classes
// are balanced (n is rounded down to a multiple of four).
std::vector<LabeledDocument> make_synthetic_corpus(std::size_t n, std::uint64_t seed);

// RFC-4180 `id,text,label` rendering of any document list.
std::string corpus_to_csv(const std::vector<LabeledDocument>& docs);

}  // namespace emoclass
