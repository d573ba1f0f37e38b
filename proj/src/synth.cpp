#include "emoclass/synth.hpp"

#include <array>
#include <cstdio>
#include <sstream>

#include "emoclass/util.hpp"

namespace emoclass {

namespace {

const std::array<std::vector<std::string>, 4> kMarkers = {{
    // anger
    {"furious", "rage", "angry", "outraged", "annoyed", "irritated", "fuming", "livid"},
    // fear
    {"afraid", "scared", "terrified", "anxious", "frightened", "panicking", "worried",
     "nervous"},
    // joy
    {"happy", "delighted", "joyful", "excited", "cheerful", "thrilled", "grateful", "smiling"},
    // sadness
    {"sad", "miserable", "crying", "gloomy", "heartbroken", "lonely", "grieving", "hopeless"},
}};

const std::vector<std::string> kFillers = {
    "today",   "morning", "weather", "coffee",  "friend", "work",    "news",
    "traffic", "weekend", "evening", "phone",   "email",  "meeting", "dinner",
    "movie",   "music",   "street",  "window",  "garden", "city"};

const std::array<std::string, 4> kEmoticons = {">:(", ":|", ":)", ":("};

}  // namespace

std::vector<LabeledDocument> make_synthetic_corpus(std::size_t n, std::uint64_t seed) {
  std::vector<LabeledDocument> docs;
  std::size_t per_class = n / 4;
  docs.reserve(per_class * 4);
  std::size_t index = 0;
  for (int cls = 0; cls < 4; ++cls) {
    const auto& pool = kMarkers[static_cast<std::size_t>(cls)];
    for (std::size_t i = 0; i < per_class; ++i, ++index) {
      Rng rng(mix_seed(seed, index));
      std::vector<std::string> words;
      std::size_t marker_count = 2 + rng.uniform_index(2);  // 2..3
      std::size_t filler_count = 3 + rng.uniform_index(3);  // 3..5
      for (std::size_t m = 0; m < marker_count; ++m) {
        words.push_back(pool[rng.uniform_index(pool.size())]);
      }
      for (std::size_t f = 0; f < filler_count; ++f) {
        words.push_back(kFillers[rng.uniform_index(kFillers.size())]);
      }
      rng.shuffle(words);
      if (rng.uniform() < 0.25) {
        words.push_back(kEmoticons[static_cast<std::size_t>(cls)]);
      }
      std::ostringstream text;
      for (std::size_t w = 0; w < words.size(); ++w) {
        if (w > 0) text << ' ';
        text << words[w];
      }
      LabeledDocument doc;
      char id[16];
      std::snprintf(id, sizeof(id), "syn%04zu", index);
      doc.id = id;
      doc.text = text.str();
      doc.label = static_cast<EmotionLabel>(cls);
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

std::string corpus_to_csv(const std::vector<LabeledDocument>& docs) {
  std::ostringstream out;
  out << "id,text,label\n";
  for (const LabeledDocument& doc : docs) {
    out << csv_quote(doc.id) << ',' << csv_quote(doc.text) << ','
        << label_name(doc.label) << '\n';
  }
  return out.str();
}

}  // namespace emoclass
