// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "rhnlm/model.hpp"
#include "rhnlm/rng.hpp"

namespace rhnlm::testing {

// Draws `count` independent cases from a seeded generator and hands each to
// `body` together with its own Rng.
template <typename Fn>
void for_cases(std::size_t count, std::uint64_t seed, Fn&& body) {
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, i);
    body(rng, i);
  }
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

template <typename Real>
std::vector<Real> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<Real> v(n);
  for (auto& x : v) x = static_cast<Real>(rng.uniform(-scale, scale));
  return v;
}

inline std::vector<std::uint32_t> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<std::uint32_t> v(n);
  for (auto& x : v) x = static_cast<std::uint32_t>(rng.below(vocab));
  return v;
}

// Perturbs every parameter so gates sit away from their initial bias and
// gradients are not dominated by one regime.
template <typename Real>
void jitter(ModelParams<Real>& p, Rng& rng, double scale) {
  for_each_tensor(p, [&](const TensorRef<Real>& t) {
    for (auto& v : t.values) v += static_cast<Real>(rng.uniform(-scale, scale));
  });
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("RHNLM_TEST_TMP");
  std::filesystem::path dir = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path();
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rhnlm::testing
