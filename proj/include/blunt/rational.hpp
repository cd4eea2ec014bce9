#pragma once

#include <boost/rational.hpp>
#include <string>

namespace blunt {

/// Exact probability arithmetic. Denominators in this artifact stay tiny
/// (products of small random-domain sizes), so long long is ample.
using Rat = boost::rational<long long>;

inline Rat rat_pow(Rat base, int exp) {
  Rat r(1);
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

inline double rat_double(const Rat& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::string rat_str(const Rat& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace blunt
