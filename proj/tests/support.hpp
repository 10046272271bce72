#pragma once

#include <map>
#include <random>
#include <tuple>

#include "defectlab/profile.hpp"

namespace testing {

// Solved profiles shared across test cases of one binary.
inline const defectlab::Profile& profile(double t, int k, int intervals = 4096,
                                         double r_max = 40.0) {
  static std::map<std::tuple<double, int, int, double>, defectlab::Profile> cache;
  const auto key = std::make_tuple(t, k, intervals, r_max);
  auto it = cache.find(key);
  if (it == cache.end()) {
    defectlab::MeshSpec m;
    m.r_max = r_max;
    m.intervals = intervals;
    it = cache.emplace(key, defectlab::solve_profile({t, k}, m)).first;
  }
  return it->second;
}

inline constexpr double kThird = 1.0 / 3.0;

}  // namespace testing
