// SPDX-License-Identifier: Apache-2.0
//
// Flat tensor container: a line-oriented text header followed by a
// little-endian binary payload. See docs/FORMAT.md for the grammar.
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rhnlm/model.hpp"

namespace rhnlm {

struct TensorRecord {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  int precision = 64;  // bits per element on disk: 32 or 64
  std::vector<double> values;
};

struct TensorContainer {
  // Ordered key/value metadata; keys may not contain whitespace.
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<TensorRecord> tensors;

  const std::string* find_meta(const std::string& key) const;
  const TensorRecord* find_tensor(const std::string& name) const;
};

void write_container(std::ostream& out, const TensorContainer& c);
TensorContainer read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const TensorContainer& c);
TensorContainer load_container(const std::filesystem::path& path);

// ModelConfig <-> "config.<key>" metadata entries.
std::vector<std::pair<std::string, std::string>> config_to_pairs(const ModelConfig& config);
ModelConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

template <typename Real>
TensorContainer make_checkpoint(const ModelConfig& config, const ModelParams<Real>& params);

// Reads params for `config` out of a checkpoint container, converting the
// on-disk precision to Real.
template <typename Real>
ModelParams<Real> params_from_container(const TensorContainer& c, const ModelConfig& config);

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams<Real>& params);

struct LoadedConfig {
  ModelConfig config;
  TensorContainer container;
};

LoadedConfig load_checkpoint(const std::filesystem::path& path);

std::string format_real(double v);

}  // namespace rhnlm
