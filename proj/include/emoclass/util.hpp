#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace emoclass {

// Error taxonomy mirrored by the C API status codes and CLI exit codes.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic cross-platform RNG (SplitMix64). std::shuffle and
// distributions are implementation-defined, so every seeded behaviour in the
// toolkit goes through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::size_t uniform_index(std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(next_u64() % n);
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Stable derivation of per-purpose sub-seeds from one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t value);

// --- string helpers ---
std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// --- RFC-4180 CSV ---
struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

std::vector<CsvRecord> parse_csv(std::istream& in);
std::string csv_quote(const std::string& field);

// --- file helpers ---
std::string read_text_file(const std::string& path);  // throws DataError
void write_text_file(const std::string& path, const std::string& content);

// --- little-endian binary encoding (artifact format) ---
void append_u32le(std::string& out, std::uint32_t v);
void append_u64le(std::string& out, std::uint64_t v);
void append_f64le(std::string& out, double v);
std::uint32_t read_u32le(const std::string& buf, std::size_t& pos);
std::uint64_t read_u64le(const std::string& buf, std::size_t& pos);
double read_f64le(const std::string& buf, std::size_t& pos);

// Worker cap for grid search / ensemble training: min(hardware, EMOCLASS_THREADS).
unsigned worker_limit();

// Runs fn(i) for i in [0, n) on up to worker_limit() threads. Exceptions are
// rethrown on the caller thread (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace emoclass
