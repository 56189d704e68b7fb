#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "geosoc/error.hpp"

namespace geosoc {

struct AlphaParams {
  double beta = 5.0;
  double gamma = 2.0;

  void validate() const {
    if (!(beta > 0.0)) throw Error(Errc::InvalidArgument, "beta must be > 0");
    if (!(gamma > 0.0)) throw Error(Errc::InvalidArgument, "gamma must be > 0");
  }
};

struct CountStats {
  std::uint64_t min = 0;
  std::uint64_t max = 0;
  double average = 0.0;
  std::uint64_t n = 0;

  void validate() const {
    if (n == 0 || static_cast<double>(min) > average || average > static_cast<double>(max)) {
      throw Error(Errc::InvalidStats, "expected min <= average <= max and n >= 1");
    }
  }
};

inline CountStats count_stats(std::span<const std::uint64_t> counts) {
  if (counts.empty()) throw Error(Errc::EmptyInput, "count_stats of an empty list");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  long double sum = 0;
  for (const auto c : counts) sum += static_cast<long double>(c);
  CountStats s{*lo, *hi, static_cast<double>(sum / static_cast<long double>(counts.size())),
               counts.size()};
  // Rounding of the mean must not escape [min, max].
  s.average = std::clamp(s.average, static_cast<double>(s.min), static_cast<double>(s.max));
  return s;
}

/// sign(x) * |x|^gamma
inline double signed_power(double x, double gamma) {
  if (x == 0.0) return 0.0;
  const double magnitude = std::pow(std::fabs(x), gamma);
  return x < 0.0 ? -magnitude : magnitude;
}

/// Comment-volume multiplier. Below-average counts shrink it towards
/// 1 - 1/beta, above-average counts grow it towards 1 + 1/beta.
inline double alpha(std::uint64_t count, const CountStats& stats, const AlphaParams& params) {
  stats.validate();
  params.validate();
  if (count < stats.min || count > stats.max) {
    throw Error(Errc::InvalidArgument, "count " + std::to_string(count) + " outside [min, max]");
  }
  const double c = static_cast<double>(count);
  double denom;
  if (c < stats.average) {
    denom = stats.average - static_cast<double>(stats.min);
  } else {
    denom = static_cast<double>(stats.max) - stats.average;
  }
  if (stats.n == 1 || denom == 0.0) return 1.0;
  const double x = std::clamp((c - stats.average) / denom, -1.0, 1.0);
  return 1.0 + signed_power(x, params.gamma) / params.beta;
}

inline double score_c(double alpha_value, double rating) {
  if (!(rating >= 1.0 && rating <= 5.0)) {
    throw Error(Errc::RatingOutOfRange, std::to_string(rating));
  }
  return alpha_value * rating;
}

}  // namespace geosoc
