#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace npga {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

using MatrixRef = Eigen::Ref<Matrix>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<Vector>;
using ConstVectorRef = Eigen::Ref<const Vector>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A spec struct (kernel, corruption, model config...) violates its invariants.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// Numeric input data is unusable (non-finite entries, empty where forbidden).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A label matrix violates its encoding contract (e.g. a non-one-hot row).
class InvalidLabelError : public Error {
 public:
  using Error::Error;
};

/// Flat parameter vector does not match the layout built from the config.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Binary file does not follow the expected on-disk format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Config file problem; the message names the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Text table problem; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Cholesky factorization failed even after the jitter retry.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double attempted_jitter)
      : Error(what), jitter_(attempted_jitter) {}
  double attempted_jitter() const { return jitter_; }

 private:
  double jitter_;
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed for a named purpose. Keeping purposes on
/// separate streams means e.g. projection inits do not perturb training noise.
inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return splitmix64(seed ^ h);
}

inline Rng make_rng(std::uint64_t seed, std::string_view tag) {
  return Rng(sub_seed(seed, tag));
}

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline bool all_finite(const ConstMatrixRef& m) { return m.allFinite(); }

inline void require_finite(const ConstMatrixRef& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(what) + " contains non-finite entries");
  }
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace npga
