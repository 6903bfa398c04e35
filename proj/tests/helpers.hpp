#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "svytree/error.hpp"
#include "svytree/frame.hpp"
#include "svytree/rng.hpp"

namespace testutil {

inline std::filesystem::path data_dir() { return SVYTREE_TEST_DATA; }

/// Unique scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("svytree-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Frame with categorical predictors a (la levels), b (lb levels) and a
/// numeric study variable y whose mean depends on a x b.
inline svytree::Frame random_frame(std::uint64_t seed, std::size_t N,
                                   std::size_t la = 5, std::size_t lb = 3) {
  using namespace svytree;
  Rng rng(seed);
  auto labels = [](const char* prefix, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
  };
  std::vector<double> a(N), b(N), y(N);
  std::vector<double> cell_mean(la * lb);
  for (double& m : cell_mean) m = 20.0 * rng.uniform();
  for (std::size_t j = 0; j < N; ++j) {
    // Cycle through the levels first so every level is present.
    a[j] = static_cast<double>(j < la ? j : rng.below(la));
    b[j] = static_cast<double>(j < lb ? j : rng.below(lb));
    const double m = cell_mean[static_cast<std::size_t>(a[j]) * lb +
                               static_cast<std::size_t>(b[j])];
    y[j] = m + 5.0 * (rng.uniform() - 0.5);
  }
  return Frame({VariableSpec::categorical("a", labels("a", la)),
                VariableSpec::categorical("b", labels("b", lb)),
                VariableSpec::numeric("y")},
               {a, b, y});
}

/// Plain two-pass population total used as an oracle.
inline double naive_total(std::span<const double> y) {
  long double s = 0.0L;
  for (double v : y) s += v;
  return static_cast<double>(s);
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  return scale == 0.0 ? 0.0 : std::fabs(a - b) / scale;
}

/// Error code raised by f, or nullopt when it returns normally.
inline std::optional<svytree::Errc> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const svytree::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testutil
