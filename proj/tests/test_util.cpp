#include <atomic>
#include <cstdlib>
#include <set>
#include <sstream>

#include "doctest.h"
#include "emoclass/util.hpp"

using namespace emoclass;

TEST_SUITE("util") {

TEST_CASE("rng is deterministic across instances") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng uniform stays in [0,1) and fills the range") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("rng uniform(lo,hi) respects bounds") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-0.25, 0.25);
    CHECK(u >= -0.25);
    CHECK(u < 0.25);
  }
}

TEST_CASE("shuffle is a permutation and seed-stable") {
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> w = v;
  Rng a(11), b(11);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::multiset<int> s(v.begin(), v.end());
  std::multiset<int> t{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(s == t);
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(1, 5) == mix_seed(1, 5));
}

TEST_CASE("fnv1a64 matches published test vectors") {
  // Reference values for the 64-bit FNV-1a parameters.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("string helpers") {
  CHECK(trim("  hi \t\n") == "hi");
  CHECK(trim("") == "");
  CHECK(to_lower_ascii("AbC:) ÄÖ") == "abc:) ÄÖ");  // non-ASCII untouched
  CHECK(split_whitespace("  a  b\tc\n") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_whitespace("") == std::vector<std::string>{});
  CHECK(starts_with_ci("HTTP://x", "http://"));
  CHECK(!starts_with_ci("htt", "http://"));
}

TEST_CASE("csv parser handles quoting, escapes and embedded newlines") {
  std::istringstream in("a,b,c\r\n\"x,y\",\"he said \"\"hi\"\"\",\"line1\nline2\"\nlast,,\n");
  auto records = parse_csv(in);
  REQUIRE(records.size() == 3);
  CHECK(records[0].fields == std::vector<std::string>{"a", "b", "c"});
  CHECK(records[1].fields == std::vector<std::string>{"x,y", "he said \"hi\"", "line1\nline2"});
  CHECK(records[1].line == 2);
  CHECK(records[2].fields == std::vector<std::string>{"last", "", ""});
}

TEST_CASE("csv parser rejects an unterminated quote") {
  std::istringstream in("a,\"oops\n");
  CHECK_THROWS_AS(parse_csv(in), DataError);
}

TEST_CASE("csv_quote round-trips through the parser") {
  std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ",";
    line += csv_quote(fields[i]);
  }
  std::istringstream in(line + "\n");
  auto records = parse_csv(in);
  REQUIRE(records.size() == 1);
  CHECK(records[0].fields == fields);
}

TEST_CASE("little-endian f64 round-trip") {
  std::string buf;
  append_f64le(buf, 1.5);
  append_f64le(buf, -0.0);
  append_u32le(buf, 0xDEADBEEF);
  append_u64le(buf, 0x0123456789ABCDEFULL);
  CHECK(buf.size() == 8 + 8 + 4 + 8);
  std::size_t pos = 0;
  CHECK(read_f64le(buf, pos) == 1.5);
  CHECK(read_f64le(buf, pos) == 0.0);
  CHECK(read_u32le(buf, pos) == 0xDEADBEEF);
  CHECK(read_u64le(buf, pos) == 0x0123456789ABCDEFULL);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, [&](std::size_t i) { hits[i] += 1; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(
      parallel_for(10, [](std::size_t i) { if (i == 3) throw DataError("boom"); }),
      DataError);
}

}  // TEST_SUITE
