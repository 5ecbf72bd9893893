// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "rhnlm/errors.hpp"
#include "rhnlm/rng.hpp"

namespace rhnlm {

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  if (std::find(v.tokens_.begin(), v.tokens_.end(), kUnkToken) == v.tokens_.end()) {
    v.tokens_.emplace_back(kUnkToken);
  }
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    const auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<std::uint32_t>(i));
    require(inserted, "data: duplicate vocabulary entry '" + v.tokens_[i] + "'");
  }
  v.unk_ = v.index_.at(std::string(kUnkToken));
  return v;
}

std::uint32_t Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_ : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

const std::string& Vocab::token(std::uint32_t id) const {
  require(id < tokens_.size(), "data: token id out of range");
  return tokens_[id];
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t newline = text.find('\n', pos);
    const std::size_t end = newline == std::string_view::npos ? text.size() : newline;
    std::istringstream words{std::string(text.substr(pos, end - pos))};
    std::string w;
    while (words >> w) out.push_back(std::move(w));
    if (newline == std::string_view::npos) break;
    out.emplace_back(kEosToken);
    pos = newline + 1;
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool line_start = true;
  for (const auto& t : tokens) {
    if (t == kEosToken) {
      out += '\n';
      line_start = true;
      continue;
    }
    if (!line_start) out += ' ';
    out += t;
    line_start = false;
  }
  return out;
}

Vocab build_vocab(std::span<const std::string> train_tokens, std::size_t cap) {
  require(!train_tokens.empty(), "data: cannot build a vocabulary from empty text");
  require(cap == 0 || cap >= 2, "data: vocabulary cap must be 0 (unlimited) or at least 2");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : train_tokens) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  if (cap == 0) {
    for (auto& [tok, count] : ranked) kept.push_back(tok);
  } else {
    const std::size_t limit = cap - 1;
    for (auto& [tok, count] : ranked) {
      if (tok == kUnkToken) continue;
      if (kept.size() == limit) break;
      kept.push_back(tok);
    }
  }
  return Vocab::from_tokens(std::move(kept));
}

Vocab build_vocab(std::string_view train_text, std::size_t cap) {
  const auto tokens = tokenize(train_text);
  return build_vocab(std::span<const std::string>(tokens), cap);
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::valid:
      return "valid";
    case Split::test:
      return "test";
  }
  return "unknown";
}

TokenCorpus encode(const Vocab& vocab, std::span<const std::string> tokens, Split split) {
  TokenCorpus c;
  c.split = split;
  c.ids.reserve(tokens.size());
  for (const auto& t : tokens) c.ids.push_back(vocab.id(t));
  return c;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("data: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("data: cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::string text;
  for (const auto& t : vocab.tokens()) text += t + "\n";
  write_text_file(path, text);
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  require(!tokens.empty(), "data: empty vocabulary file " + path.string());
  return Vocab::from_tokens(std::move(tokens));
}

std::vector<SequenceBatch> batchify(std::span<const std::uint32_t> corpus, std::size_t batch_size,
                                    std::size_t window) {
  require(batch_size >= 1 && window >= 1, "data: batch size and window must be positive");
  require(corpus.size() >= batch_size * (window + 1),
          "data: corpus of " + std::to_string(corpus.size()) + " tokens is too small for " +
              std::to_string(batch_size) + " streams of window " + std::to_string(window));
  const std::size_t chunk = corpus.size() / batch_size;
  const std::size_t windows = (chunk - 1) / window;
  std::vector<SequenceBatch> out(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    auto& batch = out[w];
    batch.inputs.resize(batch_size);
    batch.targets.resize(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
      const std::size_t start = b * chunk + w * window;
      batch.inputs[b].assign(corpus.begin() + start, corpus.begin() + start + window);
      batch.targets[b].assign(corpus.begin() + start + 1, corpus.begin() + start + window + 1);
    }
  }
  return out;
}

CopyTask gen_copy_task(const CopyTaskSpec& spec) {
  require(spec.lag >= 1, "data: copy task lag must be at least 1");
  require(spec.alphabet >= 2, "data: copy task alphabet needs at least two symbols");
  require(spec.sequences >= 1, "data: copy task needs at least one sequence");
  std::vector<std::string> symbols;
  for (std::size_t i = 0; i < spec.alphabet; ++i) symbols.push_back("s" + std::to_string(i));
  symbols.emplace_back("<mark>");
  symbols.emplace_back("<query>");
  symbols.emplace_back(kEosToken);
  CopyTask task;
  task.vocab = Vocab::from_tokens(symbols);
  task.marker_id = task.vocab.id("<mark>");
  task.query_id = task.vocab.id("<query>");
  const std::uint32_t eos = task.vocab.id(kEosToken);

  auto generate = [&](std::size_t count, std::uint64_t stream, Split split) {
    TokenCorpus c;
    c.split = split;
    c.ids.reserve(count * (spec.lag + 5));
    Rng rng(spec.seed, stream);
    for (std::size_t s = 0; s < count; ++s) {
      const auto payload = static_cast<std::uint32_t>(rng.below(spec.alphabet));
      c.ids.push_back(task.marker_id);
      c.ids.push_back(payload);
      for (std::size_t f = 0; f < spec.lag; ++f) {
        c.ids.push_back(static_cast<std::uint32_t>(rng.below(spec.alphabet)));
      }
      c.ids.push_back(task.query_id);
      c.ids.push_back(payload);
      c.ids.push_back(eos);
    }
    return c;
  };
  const std::size_t valid =
      spec.valid_sequences != 0 ? spec.valid_sequences : std::max<std::size_t>(1, spec.sequences / 10);
  task.train = generate(spec.sequences, 1, Split::train);
  task.valid = generate(valid, 2, Split::valid);
  return task;
}

std::vector<std::size_t> query_positions(const TokenCorpus& corpus, std::uint32_t query_id) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < corpus.ids.size(); ++i) {
    if (corpus.ids[i] == query_id) out.push_back(i);
  }
  return out;
}

}  // namespace rhnlm
