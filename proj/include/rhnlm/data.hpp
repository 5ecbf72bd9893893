// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rhnlm {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";

class Vocab {
 public:
  Vocab() = default;

  // Ids follow the given order. Adds <unk> at the end if it is missing.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::uint32_t id(std::string_view token) const;  // unk id when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::uint32_t id) const;
  std::uint32_t unk_id() const { return unk_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint32_t unk_ = 0;
};

// Whitespace tokenization. Every newline-terminated line contributes its
// words followed by <eos>; a trailing unterminated line contributes words only.
std::vector<std::string> tokenize(std::string_view text);

// Inverse of tokenize for canonical text: single spaces between words and
// each line terminated by '\n'.
std::string detokenize(std::span<const std::string> tokens);

// cap == 0 keeps every distinct token (the pre-processed PTB case). Otherwise
// the cap-1 most frequent tokens are kept plus <unk>. Ids are assigned by
// descending frequency, ties broken lexicographically.
Vocab build_vocab(std::span<const std::string> train_tokens, std::size_t cap = 0);
Vocab build_vocab(std::string_view train_text, std::size_t cap = 0);

enum class Split { train, valid, test };
std::string_view split_name(Split s);

struct TokenCorpus {
  std::vector<std::uint32_t> ids;
  Split split = Split::train;

  std::size_t size() const { return ids.size(); }
};

TokenCorpus encode(const Vocab& vocab, std::span<const std::string> tokens, Split split);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// One line per token, in id order.
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

// One truncated-BPTT step across all parallel streams. targets[b][i] is the
// corpus token right after inputs[b][i].
struct SequenceBatch {
  std::vector<std::vector<std::uint32_t>> inputs;
  std::vector<std::vector<std::uint32_t>> targets;

  std::size_t batch_size() const { return inputs.size(); }
  std::size_t window() const { return inputs.empty() ? 0 : inputs.front().size(); }
};

// Splits the corpus into batch_size contiguous chunks and walks them in
// window-length steps. Tokens that cannot fill a whole window are dropped.
std::vector<SequenceBatch> batchify(std::span<const std::uint32_t> corpus, std::size_t batch_size,
                                    std::size_t window);

// Synthetic long-range memory task. Each sequence is one line:
//   <mark> p f_1 ... f_lag <query> p
// where p and every filler f_i are uniform over an alphabet of s0..s{A-1}.
// Predicting the token after <query> requires remembering p across lag+1
// steps; every other position is filler noise or fixed structure.
struct CopyTaskSpec {
  std::size_t sequences = 1000;
  std::size_t valid_sequences = 0;  // 0 means sequences / 10, at least 1
  std::size_t lag = 50;
  std::size_t alphabet = 16;
  std::uint64_t seed = 1;
};

struct CopyTask {
  Vocab vocab;  // s0..s{A-1}, <mark>, <query>, <eos>, <unk>
  TokenCorpus train;
  TokenCorpus valid;
  std::uint32_t marker_id = 0;
  std::uint32_t query_id = 0;
};

CopyTask gen_copy_task(const CopyTaskSpec& spec);

// Indices i such that ids[i] is the query token and i + 1 is in range; the
// loss at evaluation index i is the payload recall loss.
std::vector<std::size_t> query_positions(const TokenCorpus& corpus, std::uint32_t query_id);

}  // namespace rhnlm
