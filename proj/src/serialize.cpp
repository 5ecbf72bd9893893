// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/serialize.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace rhnlm {
namespace {

constexpr const char* kMagic = "RHNLM-TENSORS 1";

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
    return r;
  }
  return v;
}

void append_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') return false;
  }
  return true;
}

std::size_t parse_size(const std::string& text, const std::string& what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ContractError("serialize: bad " + what + " '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw ContractError("serialize: bad value for " + key + ": '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ContractError("serialize: bad boolean for " + key + ": '" + text + "'");
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const std::string* TensorContainer::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

const TensorRecord* TensorContainer::find_tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_container(std::ostream& out, const TensorContainer& c) {
  std::string header = std::string(kMagic) + "\n";
  for (const auto& [k, v] : c.meta) {
    require(valid_token(k), "serialize: metadata key '" + k + "' is empty or has whitespace");
    require(v.find('\n') == std::string::npos, "serialize: metadata value for " + k + " spans lines");
    header += "meta " + k + " " + v + "\n";
  }
  std::string payload;
  for (const auto& t : c.tensors) {
    require(valid_token(t.name), "serialize: tensor name '" + t.name + "' is empty or has whitespace");
    require(t.precision == 32 || t.precision == 64, "serialize: precision must be 32 or 64");
    require(t.values.size() == t.rows * t.cols, "serialize: tensor " + t.name + " size mismatch");
    header += "tensor " + t.name + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) +
              (t.precision == 32 ? " f32 " : " f64 ") + std::to_string(payload.size()) + "\n";
    for (double v : t.values) {
      if (t.precision == 32) {
        const auto bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        append_bytes(payload, &bits, sizeof(bits));
      } else {
        const auto bits = to_little(std::bit_cast<std::uint64_t>(v));
        append_bytes(payload, &bits, sizeof(bits));
      }
    }
  }
  header += "end " + std::to_string(payload.size()) + "\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ContractError("serialize: write failed");
}

TensorContainer read_container(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw ContractError("serialize: missing '" + std::string(kMagic) + "' header");
  }
  TensorContainer c;
  std::vector<std::size_t> offsets;
  std::size_t payload_size = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      require(valid_token(key), "serialize: malformed meta line '" + line + "'");
      c.meta.emplace_back(key, value);
    } else if (kind == "tensor") {
      std::string name, rows, cols, prec, offset, extra;
      ls >> name >> rows >> cols >> prec >> offset;
      require(!offset.empty() && !(ls >> extra), "serialize: malformed tensor line '" + line + "'");
      require(prec == "f32" || prec == "f64", "serialize: unknown precision '" + prec + "'");
      TensorRecord t;
      t.name = name;
      t.rows = parse_size(rows, "row count");
      t.cols = parse_size(cols, "column count");
      t.precision = prec == "f32" ? 32 : 64;
      offsets.push_back(parse_size(offset, "offset"));
      c.tensors.push_back(std::move(t));
    } else if (kind == "end") {
      std::string size;
      ls >> size;
      payload_size = parse_size(size, "payload size");
      ended = true;
      break;
    } else {
      throw ContractError("serialize: unexpected header line '" + line + "'");
    }
  }
  require(ended, "serialize: header has no 'end' line");
  std::string payload(payload_size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_size));
  require(static_cast<std::size_t>(in.gcount()) == payload_size, "serialize: truncated payload");
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    auto& t = c.tensors[i];
    const std::size_t elem = t.precision == 32 ? 4 : 8;
    const std::size_t count = t.rows * t.cols;
    require(offsets[i] + count * elem <= payload_size,
            "serialize: tensor " + t.name + " runs past the payload");
    t.values.resize(count);
    const char* base = payload.data() + offsets[i];
    for (std::size_t j = 0; j < count; ++j) {
      if (t.precision == 32) {
        std::uint32_t bits;
        std::memcpy(&bits, base + j * elem, elem);
        t.values[j] = std::bit_cast<float>(to_little(bits));
      } else {
        std::uint64_t bits;
        std::memcpy(&bits, base + j * elem, elem);
        t.values[j] = std::bit_cast<double>(to_little(bits));
      }
    }
  }
  return c;
}

void save_container(const std::filesystem::path& path, const TensorContainer& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("serialize: cannot open " + path.string() + " for writing");
  write_container(out, c);
}

TensorContainer load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("serialize: cannot open " + path.string());
  return read_container(in);
}

std::vector<std::pair<std::string, std::string>> config_to_pairs(const ModelConfig& c) {
  std::vector<std::pair<std::string, std::string>> p{
      {"config.depth", std::to_string(c.depth)},
      {"config.hidden", std::to_string(c.hidden)},
      {"config.embed", std::to_string(c.embed_size())},
      {"config.vocab", std::to_string(c.vocab)},
      {"config.coupled", c.coupled ? "true" : "false"},
      {"config.use_hsg", c.use_hsg ? "true" : "false"},
      {"config.dropout_embed", format_real(c.dropout_embed)},
      {"config.dropout_state", format_real(c.dropout_state)},
      {"config.dropout_output", format_real(c.dropout_output)},
      {"config.dropout_in_hsg", c.dropout_in_hsg ? "true" : "false"},
      {"config.gate_bias_init", format_real(c.gate_bias_init)},
      {"config.precision", std::to_string(c.precision)},
  };
  if (c.hsg_bias_init) p.emplace_back("config.hsg_bias_init", format_real(*c.hsg_bias_init));
  return p;
}

ModelConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  ModelConfig c;
  bool saw_vocab = false;
  for (const auto& [key, value] : pairs) {
    if (!key.starts_with("config.")) continue;
    const std::string k = key.substr(7);
    if (k == "depth") c.depth = parse_size(value, k);
    else if (k == "hidden") c.hidden = parse_size(value, k);
    else if (k == "embed") c.embed = parse_size(value, k);
    else if (k == "vocab") { c.vocab = parse_size(value, k); saw_vocab = true; }
    else if (k == "coupled") c.coupled = parse_bool(k, value);
    else if (k == "use_hsg") c.use_hsg = parse_bool(k, value);
    else if (k == "dropout_embed") c.dropout_embed = parse_double(k, value);
    else if (k == "dropout_state") c.dropout_state = parse_double(k, value);
    else if (k == "dropout_output") c.dropout_output = parse_double(k, value);
    else if (k == "dropout_in_hsg") c.dropout_in_hsg = parse_bool(k, value);
    else if (k == "gate_bias_init") c.gate_bias_init = parse_double(k, value);
    else if (k == "hsg_bias_init") c.hsg_bias_init = parse_double(k, value);
    else if (k == "precision") c.precision = static_cast<int>(parse_size(value, k));
    else throw ContractError("serialize: unknown config key '" + k + "'");
  }
  require(saw_vocab, "serialize: checkpoint has no config block");
  c.validate();
  return c;
}

template <typename Real>
TensorContainer make_checkpoint(const ModelConfig& config, const ModelParams<Real>& params) {
  validate(params, config);
  TensorContainer c;
  c.meta = config_to_pairs(config);
  for_each_tensor(params, [&](const TensorRef<const Real>& t) {
    TensorRecord r;
    r.name = t.name;
    r.rows = t.rows;
    r.cols = t.cols;
    r.precision = sizeof(Real) == 4 ? 32 : 64;
    r.values.assign(t.values.begin(), t.values.end());
    c.tensors.push_back(std::move(r));
  });
  return c;
}

template <typename Real>
ModelParams<Real> params_from_container(const TensorContainer& c, const ModelConfig& config) {
  ModelParams<Real> p = make_model_params<Real>(config);
  for_each_tensor(p, [&](const TensorRef<Real>& t) {
    const TensorRecord* r = c.find_tensor(t.name);
    require(r != nullptr, "serialize: checkpoint lacks tensor " + t.name);
    require(r->rows == t.rows && r->cols == t.cols,
            "serialize: tensor " + t.name + " has shape " + std::to_string(r->rows) + "x" +
                std::to_string(r->cols) + ", expected " + std::to_string(t.rows) + "x" +
                std::to_string(t.cols));
    for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = static_cast<Real>(r->values[i]);
  });
  return p;
}

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams<Real>& params) {
  save_container(path, make_checkpoint(config, params));
}

LoadedConfig load_checkpoint(const std::filesystem::path& path) {
  LoadedConfig out;
  out.container = load_container(path);
  out.config = config_from_pairs(out.container.meta);
  return out;
}

template TensorContainer make_checkpoint(const ModelConfig&, const ModelParams<float>&);
template TensorContainer make_checkpoint(const ModelConfig&, const ModelParams<double>&);
template ModelParams<float> params_from_container<float>(const TensorContainer&, const ModelConfig&);
template ModelParams<double> params_from_container<double>(const TensorContainer&,
                                                           const ModelConfig&);
template void save_checkpoint(const std::filesystem::path&, const ModelConfig&,
                              const ModelParams<float>&);
template void save_checkpoint(const std::filesystem::path&, const ModelConfig&,
                              const ModelParams<double>&);

}  // namespace rhnlm
