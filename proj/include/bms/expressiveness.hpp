#pragma once

// Expressive-power calculator for the three behavioral-expression modes:
// observation (constant), representation (k^n), structure (k^(n(n-1))).

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "bms/errors.hpp"

namespace bms {

enum class ExpressMode { Observation, Representation, Structure };

inline const char* express_mode_name(ExpressMode m) {
  switch (m) {
    case ExpressMode::Observation: return "observation";
    case ExpressMode::Representation: return "representation";
    case ExpressMode::Structure: return "structure";
  }
  return "?";
}

struct PowerResult {
  double log2_count = 0.0;                    // exact in log space
  std::optional<std::string> exact;           // decimal digits, when <= cap
  bool overflowed = false;
};

inline std::int64_t express_exponent(ExpressMode mode, std::int64_t n) {
  switch (mode) {
    case ExpressMode::Observation: return 0;
    case ExpressMode::Representation: return n;
    case ExpressMode::Structure: return n * (n - 1);
  }
  return 0;
}

// Count of distinct expressible behaviors; exact big integer up to
// `digit_cap` decimal digits, log2 always.
inline PowerResult power(ExpressMode mode, std::int64_t n, std::int64_t k,
                         std::size_t digit_cap = 1000000) {
  if (n < 1 || k < 1) throw Error(ErrorCode::InvalidK, "need n >= 1, k >= 1");
  std::int64_t exponent = express_exponent(mode, n);
  PowerResult r;
  r.log2_count = double(exponent) * std::log2(double(k));
  double est_digits = double(exponent) * std::log10(double(k));
  if (est_digits <= double(digit_cap)) {
    boost::multiprecision::cpp_int v =
        boost::multiprecision::pow(boost::multiprecision::cpp_int(k),
                                   static_cast<unsigned>(exponent));
    std::ostringstream os;
    os << v;
    r.exact = os.str();
  } else {
    r.overflowed = true;
  }
  return r;
}

// Smallest n with structure-count >= representation-count, i.e.
// n(n-1) log2(k_struct) >= n log2(k_rep). None when k_struct == 1.
inline std::optional<std::int64_t> crossover(std::int64_t k_rep,
                                             std::int64_t k_struct) {
  if (k_struct < 1 || k_rep < 1)
    throw Error(ErrorCode::InvalidK, "k values must be >= 1");
  if (k_struct == 1) return std::nullopt;
  for (std::int64_t n = 1;; ++n) {
    double lhs = double(n) * double(n - 1) * std::log2(double(k_struct));
    double rhs = double(n) * std::log2(double(k_rep));
    if (lhs >= rhs) return n;
  }
}

struct CurveRow {
  std::int64_t n;
  ExpressMode mode;
  double log2_count;
};

inline std::vector<CurveRow> express_curve(std::int64_t n_min, std::int64_t n_max,
                                           std::int64_t k_rep,
                                           std::int64_t k_struct) {
  if (n_min < 1 || n_max < n_min)
    throw Error(ErrorCode::InvalidK, "empty n range");
  std::vector<CurveRow> rows;
  for (std::int64_t n = n_min; n <= n_max; ++n) {
    rows.push_back({n, ExpressMode::Observation, 0.0});
    rows.push_back({n, ExpressMode::Representation,
                    double(n) * std::log2(double(k_rep))});
    rows.push_back({n, ExpressMode::Structure,
                    double(n) * double(n - 1) * std::log2(double(k_struct))});
  }
  return rows;
}

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream os;
  os << "n,mode,log2_count\n";
  for (const auto& r : rows)
    os << r.n << "," << express_mode_name(r.mode) << "," << r.log2_count << "\n";
  return os.str();
}

}  // namespace bms
