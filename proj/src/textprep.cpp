#include "emoclass/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <sstream>

#include "emoclass/util.hpp"

namespace emoclass {

namespace {

// ---------------------------------------------------------------------------
// Porter stemmer, as published in 1980 (none of the later web revisions).
// Operates on b[0..k]; j marks the stem end while a rule is being tested.
// ---------------------------------------------------------------------------
struct Porter {
  std::string b;
  int k = 0;  // index of last letter
  int j = 0;  // stem end set by ends()

  bool cons(int i) const {
    switch (b[static_cast<std::size_t>(i)]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0;
    int i = 0;
    while (true) {
      if (i > j) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j; ++i) {
      if (!cons(i)) return true;
    }
    return false;
  }

  bool double_cons(int i) const {
    if (i < 1) return false;
    if (b[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i - 1)]) return false;
    return cons(i);
  }

  // consonant-vowel-consonant ending at i, final consonant not w, x or y.
  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    char c = b[static_cast<std::size_t>(i)];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(const char* s) {
    int length = static_cast<int>(std::strlen(s));
    if (length > k + 1) return false;
    if (std::memcmp(b.data() + k - length + 1, s, static_cast<std::size_t>(length)) != 0)
      return false;
    j = k - length;
    return true;
  }

  void set_to(const char* s) {
    int length = static_cast<int>(std::strlen(s));
    b.resize(static_cast<std::size_t>(j + 1));
    b.append(s);
    k = j + length;
  }

  void r(const char* s) {
    if (m() > 0) set_to(s);
  }

  // Plural and -ed/-ing endings.
  void step1ab() {
    if (b[static_cast<std::size_t>(k)] == 's') {
      if (ends("sses")) {
        k -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (b[static_cast<std::size_t>(k - 1)] != 's') {
        --k;
      }
    }
    if (ends("eed")) {
      if (m() > 0) --k;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k = j;
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_cons(k)) {
        char c = b[static_cast<std::size_t>(k)];
        if (c != 'l' && c != 's' && c != 'z') --k;
      } else {
        j = k;
        if (m() == 1 && cvc(k)) set_to("e");
      }
    }
  }

  // y -> i when the stem holds a vowel.
  void step1c() {
    if (ends("y") && vowel_in_stem()) b[static_cast<std::size_t>(k)] = 'i';
  }

  void step2() {
    if (k < 1) return;
    switch (b[static_cast<std::size_t>(k - 1)]) {
      case 'a':
        if (ends("ational")) { r("ate"); break; }
        if (ends("tional")) { r("tion"); break; }
        break;
      case 'c':
        if (ends("enci")) { r("ence"); break; }
        if (ends("anci")) { r("ance"); break; }
        break;
      case 'e':
        if (ends("izer")) { r("ize"); break; }
        break;
      case 'l':
        if (ends("abli")) { r("able"); break; }
        if (ends("alli")) { r("al"); break; }
        if (ends("entli")) { r("ent"); break; }
        if (ends("eli")) { r("e"); break; }
        if (ends("ousli")) { r("ous"); break; }
        break;
      case 'o':
        if (ends("ization")) { r("ize"); break; }
        if (ends("ation")) { r("ate"); break; }
        if (ends("ator")) { r("ate"); break; }
        break;
      case 's':
        if (ends("alism")) { r("al"); break; }
        if (ends("iveness")) { r("ive"); break; }
        if (ends("fulness")) { r("ful"); break; }
        if (ends("ousness")) { r("ous"); break; }
        break;
      case 't':
        if (ends("aliti")) { r("al"); break; }
        if (ends("iviti")) { r("ive"); break; }
        if (ends("biliti")) { r("ble"); break; }
        break;
      default:
        break;
    }
  }

  void step3() {
    switch (b[static_cast<std::size_t>(k)]) {
      case 'e':
        if (ends("icate")) { r("ic"); break; }
        if (ends("ative")) { r(""); break; }
        if (ends("alize")) { r("al"); break; }
        break;
      case 'i':
        if (ends("iciti")) { r("ic"); break; }
        break;
      case 'l':
        if (ends("ical")) { r("ic"); break; }
        if (ends("ful")) { r(""); break; }
        break;
      case 's':
        if (ends("ness")) { r(""); break; }
        break;
      default:
        break;
    }
  }

  void step4() {
    if (k < 1) return;
    switch (b[static_cast<std::size_t>(k - 1)]) {
      case 'a':
        if (ends("al")) break;
        return;
      case 'c':
        if (ends("ance")) break;
        if (ends("ence")) break;
        return;
      case 'e':
        if (ends("er")) break;
        return;
      case 'i':
        if (ends("ic")) break;
        return;
      case 'l':
        if (ends("able")) break;
        if (ends("ible")) break;
        return;
      case 'n':
        if (ends("ant")) break;
        if (ends("ement")) break;
        if (ends("ment")) break;
        if (ends("ent")) break;
        return;
      case 'o':
        if (ends("ion") && j >= 0 &&
            (b[static_cast<std::size_t>(j)] == 's' || b[static_cast<std::size_t>(j)] == 't'))
          break;
        if (ends("ou")) break;
        return;
      case 's':
        if (ends("ism")) break;
        return;
      case 't':
        if (ends("ate")) break;
        if (ends("iti")) break;
        return;
      case 'u':
        if (ends("ous")) break;
        return;
      case 'v':
        if (ends("ive")) break;
        return;
      case 'z':
        if (ends("ize")) break;
        return;
      default:
        return;
    }
    if (m() > 1) k = j;
  }

  void step5() {
    j = k;
    if (b[static_cast<std::size_t>(k)] == 'e') {
      int a = m();
      if (a > 1 || (a == 1 && !cvc(k - 1))) --k;
    }
    if (b[static_cast<std::size_t>(k)] == 'l' && double_cons(k) && m() > 1) --k;
  }

  std::string stem(const std::string& word) {
    b = word;
    k = static_cast<int>(b.size()) - 1;
    if (k <= 0) return word;  // single letters are left alone
    step1ab();
    step1c();
    step2();
    step3();
    step4();
    step5();
    b.resize(static_cast<std::size_t>(k + 1));
    return b;
  }
};

// Irregular word forms mapped to their base form; checked before the
// suffix rules so e.g. "ran" -> "run" rather than "ran".
const std::unordered_map<std::string, std::string>& irregular_forms() {
  static const std::unordered_map<std::string, std::string> table = {
      {"am", "be"},       {"are", "be"},      {"is", "be"},       {"was", "be"},
      {"were", "be"},     {"been", "be"},     {"began", "begin"}, {"begun", "begin"},
      {"bought", "buy"},  {"broke", "break"}, {"broken", "break"},{"brought", "bring"},
      {"built", "build"}, {"came", "come"},   {"caught", "catch"},{"children", "child"},
      {"chose", "choose"},{"did", "do"},      {"does", "do"},     {"done", "do"},
      {"drank", "drink"}, {"drawn", "draw"},  {"drew", "draw"},   {"drove", "drive"},
      {"ate", "eat"},     {"eaten", "eat"},   {"fell", "fall"},   {"fallen", "fall"},
      {"felt", "feel"},   {"feet", "foot"},   {"flew", "fly"},    {"forgot", "forget"},
      {"forgotten", "forget"},                {"found", "find"},  {"gave", "give"},
      {"given", "give"},  {"went", "go"},     {"gone", "go"},     {"got", "get"},
      {"gotten", "get"},  {"grew", "grow"},   {"grown", "grow"},  {"had", "have"},
      {"has", "have"},    {"heard", "hear"},  {"held", "hold"},   {"hid", "hide"},
      {"hidden", "hide"}, {"kept", "keep"},   {"knew", "know"},   {"known", "know"},
      {"led", "lead"},    {"left", "leave"},  {"lost", "lose"},   {"made", "make"},
      {"meant", "mean"},  {"men", "man"},     {"met", "meet"},    {"mice", "mouse"},
      {"paid", "pay"},    {"people", "person"},                   {"ran", "run"},
      {"rang", "ring"},   {"said", "say"},    {"sang", "sing"},   {"sat", "sit"},
      {"saw", "see"},     {"seen", "see"},    {"sent", "send"},   {"slept", "sleep"},
      {"sold", "sell"},   {"spent", "spend"}, {"spoke", "speak"}, {"spoken", "speak"},
      {"stood", "stand"}, {"swam", "swim"},   {"taken", "take"},  {"taught", "teach"},
      {"teeth", "tooth"}, {"thought", "think"},                   {"threw", "throw"},
      {"thrown", "throw"},{"told", "tell"},   {"took", "take"},   {"understood", "understand"},
      {"woke", "wake"},   {"women", "woman"}, {"won", "win"},     {"wore", "wear"},
      {"worn", "wear"},   {"wrote", "write"}, {"written", "write"},
  };
  return table;
}

bool all_lower_alpha(const std::string& token) {
  if (token.empty()) return false;
  for (char c : token) {
    if (c < 'a' || c > 'z') return false;
  }
  return true;
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2F) || (u >= 0x3A && u <= 0x40) || (u >= 0x5B && u <= 0x60) ||
         (u >= 0x7B && u <= 0x7E);
}

// Placeholder for shielded emoticons: \x01 + index + \x01 cannot collide
// with document text because control bytes are stripped as punctuation.
std::string shield_marker(std::size_t index) {
  return std::string(1, '\x01') + std::to_string(index) + std::string(1, '\x01');
}

}  // namespace

std::string porter_stem(const std::string& word) {
  Porter p;
  return p.stem(word);
}

Normalizer parse_normalizer(const std::string& name) {
  std::string n = to_lower_ascii(trim(name));
  if (n == "none") return Normalizer::none;
  if (n == "stem") return Normalizer::stem;
  if (n == "lemma") return Normalizer::lemma;
  if (n == "lemma_then_stem" || n == "stem_then_lemma" || n == "both")
    return Normalizer::lemma_then_stem;
  throw UsageError("unknown normalizer '" + name +
                   "' (expected none, stem, lemma or lemma_then_stem)");
}

const char* normalizer_name(Normalizer mode) {
  switch (mode) {
    case Normalizer::none: return "none";
    case Normalizer::stem: return "stem";
    case Normalizer::lemma: return "lemma";
    case Normalizer::lemma_then_stem: return "lemma_then_stem";
  }
  return "none";
}

const std::vector<std::string>& PreprocessConfig::default_emoticons() {
  static const std::vector<std::string> list = {
      // longest first so greedy matching prefers ":-)))" over ":-)"
      ">:-(", ">:-)", ":'-(", ":'-)", ":-))", "D-':",
      ":-)", ":-(", ":-D", ":-P", ":-p", ":-O", ":-o", ":-|", ":-/", ":-\\",
      ":-*", ":-X", ";-)", ";-(", ";-P", "=-D", "8-)", "B-)", "X-D", "x-D",
      ">:(", ">:)", ":')", ":'(", "D:<", ":-]", ":-[",
      ":)", ":(", ":D", ":P", ":p", ":O", ":o", ":|", ":/", ":\\", ":*",
      ":]", ":[", ";)", ";(", ";P", ";D", "=)", "=(", "=D", "=P", "=/",
      "8)", "B)", "XD", "xD", "D:", ":3", "<3", "</3", "^_^", "-_-", "T_T",
      "o_O", "O_o", ":$", ":@",
  };
  return list;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::unordered_set<std::string> words;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::string w = to_lower_ascii(trim(line));
    if (w.empty() || w[0] == '#') continue;
    words.insert(w);
  }
  return words;
}

std::unordered_map<std::string, std::string> load_abbreviations(const std::string& path) {
  std::unordered_map<std::string, std::string> table;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected <abbreviation>\\t<expansion>");
    std::string key = to_lower_ascii(trim(line.substr(0, tab)));
    std::string value = trim(line.substr(tab + 1));
    if (key.empty() || value.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty abbreviation or expansion");
    table[key] = value;
  }
  return table;
}

std::vector<std::string> load_emoticons(const std::string& path) {
  std::vector<std::string> list;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string e = trim(line);
    if (e.empty() || e[0] == '#') continue;
    list.push_back(e);
  }
  std::sort(list.begin(), list.end(), [](const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a < b;
  });
  list.erase(std::unique(list.begin(), list.end()), list.end());
  return list;
}

std::string clean(const std::string& text, const PreprocessConfig& config) {
  std::string s = text;

  if (config.strip_html) {
    // '<' opens a tag only when followed by a letter, '!' or '/'+letter, so
    // "1 < 2" and the "</3" emoticon survive.
    auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
    auto tag_start = [&](std::size_t i) {
      if (s[i] != '<' || i + 1 >= s.size()) return false;
      char n = s[i + 1];
      if (is_alpha(n) || n == '!') return true;
      return n == '/' && i + 2 < s.size() && is_alpha(s[i + 2]);
    };
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
      if (tag_start(i)) {
        std::size_t close = s.find('>', i + 1);
        if (close == std::string::npos) {  // unclosed: not a tag after all
          out.push_back(s[i]);
          ++i;
        } else {
          out.push_back(' ');
          i = close + 1;
        }
      } else {
        out.push_back(s[i]);
        ++i;
      }
    }
    s = std::move(out);
  }

  if (config.strip_urls) {
    std::string lower = to_lower_ascii(s);
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
      bool url = false;
      if (lower.compare(i, 7, "http://") == 0 || lower.compare(i, 8, "https://") == 0) {
        url = true;
      } else if (lower.compare(i, 4, "www.") == 0) {
        // only at a word start
        url = i == 0 || is_ascii_space(s[i - 1]);
      }
      if (url) {
        while (i < s.size() && !is_ascii_space(s[i])) ++i;
        out.push_back(' ');
      } else {
        out.push_back(s[i]);
        ++i;
      }
    }
    s = std::move(out);
  }

  // Shield emoticons before punctuation removal, then restore them padded
  // with spaces so they tokenize as standalone tokens.
  std::vector<std::string> found;
  if (config.preserve_emoticons && config.strip_punctuation) {
    const std::vector<std::string>& lexicon =
        config.emoticons.empty() ? PreprocessConfig::default_emoticons() : config.emoticons;
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
      bool matched = false;
      for (const std::string& emo : lexicon) {
        if (s.compare(i, emo.size(), emo) == 0) {
          out += shield_marker(found.size());
          found.push_back(emo);
          i += emo.size();
          matched = true;
          break;
        }
      }
      if (!matched) {
        out.push_back(s[i]);
        ++i;
      }
    }
    s = std::move(out);
  }

  if (config.strip_punctuation) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '\x01') {  // shield marker: copy through
        out.push_back(s[i]);
        continue;
      }
      char c = s[i];
      unsigned char u = static_cast<unsigned char>(c);
      if (is_ascii_punct(c) || (u < 0x20 && !is_ascii_space(c))) {
        out.push_back(' ');
      } else {
        out.push_back(c);
      }
    }
    s = std::move(out);
  }

  if (!found.empty()) {
    std::string out;
    out.reserve(s.size() + found.size() * 4);
    std::size_t i = 0;
    while (i < s.size()) {
      if (s[i] == '\x01') {
        std::size_t end = s.find('\x01', i + 1);
        std::size_t index = static_cast<std::size_t>(std::stoul(s.substr(i + 1, end - i - 1)));
        out.push_back(' ');
        out += found[index];
        out.push_back(' ');
        i = end + 1;
      } else {
        out.push_back(s[i]);
        ++i;
      }
    }
    s = std::move(out);
  }

  // Collapse whitespace runs and trim.
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

TokenizedDocument tokenize(const std::string& cleaned, const PreprocessConfig& config) {
  TokenizedDocument doc;
  const std::vector<std::string>& lexicon =
      config.emoticons.empty() ? PreprocessConfig::default_emoticons() : config.emoticons;
  std::unordered_set<std::string> emoticon_set(lexicon.begin(), lexicon.end());

  for (std::string& raw : split_whitespace(cleaned)) {
    bool is_emoticon = config.preserve_emoticons && emoticon_set.count(raw) > 0;
    std::string token = is_emoticon || !config.lowercase ? raw : to_lower_ascii(raw);
    if (!is_emoticon && config.stopwords.count(to_lower_ascii(token)) > 0) continue;
    if (is_emoticon) doc.emoticon_tokens.push_back(doc.tokens.size());
    doc.tokens.push_back(std::move(token));
  }
  return doc;
}

std::vector<std::string> expand_abbreviations(
    const std::vector<std::string>& tokens,
    const std::unordered_map<std::string, std::string>& table) {
  TokenizedDocument doc;
  doc.tokens = tokens;
  return expand_abbreviations(doc, table).tokens;
}

TokenizedDocument expand_abbreviations(
    const TokenizedDocument& doc,
    const std::unordered_map<std::string, std::string>& table) {
  TokenizedDocument out;
  out.source_id = doc.source_id;
  std::unordered_set<std::size_t> emoticon_at(doc.emoticon_tokens.begin(),
                                              doc.emoticon_tokens.end());
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const std::string& token = doc.tokens[i];
    if (emoticon_at.count(i) > 0) {
      out.emoticon_tokens.push_back(out.tokens.size());
      out.tokens.push_back(token);
      continue;
    }
    auto it = table.find(to_lower_ascii(token));
    if (it == table.end()) {
      out.tokens.push_back(token);
      continue;
    }
    for (std::string& part : split_whitespace(it->second)) {
      out.tokens.push_back(to_lower_ascii(part));
    }
  }
  return out;
}

std::string normalize_token(const std::string& token, Normalizer mode) {
  if (mode == Normalizer::none || !all_lower_alpha(token)) return token;
  std::string t = token;
  if (mode == Normalizer::lemma || mode == Normalizer::lemma_then_stem) {
    auto it = irregular_forms().find(t);
    if (it != irregular_forms().end()) {
      t = it->second;
    } else {
      Porter p;
      p.b = t;
      p.k = static_cast<int>(t.size()) - 1;
      if (p.k > 0) {
        p.step1ab();
        p.step1c();
        p.b.resize(static_cast<std::size_t>(p.k + 1));
        t = p.b;
      }
    }
  }
  if (mode == Normalizer::stem || mode == Normalizer::lemma_then_stem) {
    t = porter_stem(t);
  }
  return t;
}

TokenizedDocument preprocess_text(const std::string& text, const std::string& source_id,
                                  const PreprocessConfig& config) {
  TokenizedDocument doc = tokenize(clean(text, config), config);
  doc.source_id = source_id;
  doc = expand_abbreviations(doc, config.abbreviations);
  if (config.normalizer == Normalizer::none) return doc;

  TokenizedDocument out;
  out.source_id = doc.source_id;
  std::unordered_set<std::size_t> emoticon_at(doc.emoticon_tokens.begin(),
                                              doc.emoticon_tokens.end());
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    if (emoticon_at.count(i) > 0) {
      out.emoticon_tokens.push_back(out.tokens.size());
      out.tokens.push_back(doc.tokens[i]);
      continue;
    }
    std::string t = normalize_token(doc.tokens[i], config.normalizer);
    if (t.empty()) continue;
    out.tokens.push_back(std::move(t));
  }
  return out;
}

}  // namespace emoclass
