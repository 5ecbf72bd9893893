// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "rhnlm/serialize.hpp"
#include "rhnlm/trainer.hpp"
#include "support.hpp"

namespace rhnlm {
namespace {

using testing::for_cases;
using testing::pick;

ModelConfig random_config(Rng& rng, std::size_t k) {
  ModelConfig c;
  c.depth = pick(rng, 1, 4);
  c.hidden = pick(rng, 1, 7);
  c.embed = pick(rng, 1, 5);
  c.vocab = pick(rng, 2, 9);
  c.coupled = k % 2 == 0;
  c.use_hsg = k % 3 != 0;
  c.dropout_state = 0.125 * static_cast<double>(k % 4);
  c.gate_bias_init = -rng.uniform(0, 5);
  if (k % 5 == 0) c.hsg_bias_init = rng.uniform(-3, 3);
  c.precision = k % 2 == 0 ? 64 : 32;
  return c;
}

TEST(Serialize, CheckpointRoundTripIsBitExact) {
  for_cases(20, 81, [](Rng& rng, std::size_t k) {
    const ModelConfig c = random_config(rng, k);
    auto p = init_model<double>(c, k);
    testing::jitter(p, rng, 0.3);
    std::stringstream ss;
    write_container(ss, make_checkpoint(c, p));
    const auto back = read_container(ss);
    const ModelConfig c2 = config_from_pairs(back.meta);
    EXPECT_EQ(config_to_pairs(c2), config_to_pairs(c));
    EXPECT_TRUE(params_from_container<double>(back, c2) == p);
  });
}

TEST(Serialize, FloatCheckpointRoundTrip) {
  Rng rng(3);
  ModelConfig c = random_config(rng, 1);
  const auto p = init_model<float>(c, 4);
  const auto dir = testing::scratch_dir("serialize_float");
  save_checkpoint(dir / "m.ckpt", c, p);
  const auto loaded = load_checkpoint(dir / "m.ckpt");
  EXPECT_TRUE(params_from_container<float>(loaded.container, loaded.config) == p);
  EXPECT_EQ(loaded.container.tensors.front().precision, 32);
}

TEST(Serialize, HeaderIsReadableText) {
  TensorContainer c;
  c.meta = {{"note", "two words"}};
  c.tensors.push_back({"w", 1, 2, 64, {1.5, -2.0}});
  std::stringstream ss;
  write_container(ss, c);
  const std::string text = ss.str();
  const std::string expect_header = "RHNLM-TENSORS 1\nmeta note two words\ntensor w 1 2 f64 0\nend 16\n";
  EXPECT_EQ(text.substr(0, expect_header.size()), expect_header);
  EXPECT_EQ(text.size(), expect_header.size() + 16);
  std::stringstream in(text);
  const auto back = read_container(in);
  EXPECT_EQ(*back.find_meta("note"), "two words");
  EXPECT_EQ(back.find_tensor("w")->values, (std::vector<double>{1.5, -2.0}));
}

TEST(Serialize, MalformedInputsAreContractErrors) {
  auto read = [](const std::string& s) {
    std::stringstream in(s);
    return read_container(in);
  };
  EXPECT_THROW(read("NOT-A-HEADER\n"), ContractError);
  EXPECT_THROW(read("RHNLM-TENSORS 1\nmeta a b\n"), ContractError);
  EXPECT_THROW(read("RHNLM-TENSORS 1\nbogus line\nend 0\n"), ContractError);
  EXPECT_THROW(read("RHNLM-TENSORS 1\ntensor w 1 2 f16 0\nend 0\n"), ContractError);
  EXPECT_THROW(read("RHNLM-TENSORS 1\ntensor w 1 2 f64 0\nend 16\nshort"), ContractError);
  EXPECT_THROW(read("RHNLM-TENSORS 1\ntensor w 1 x f64 0\nend 0\n"), ContractError);

  TensorContainer bad;
  bad.tensors.push_back({"has space", 1, 1, 64, {1.0}});
  std::stringstream out;
  EXPECT_THROW(write_container(out, bad), ContractError);
}

TEST(Serialize, ShapeMismatchAndUnknownKeysAreRejected) {
  Rng rng(5);
  ModelConfig c = random_config(rng, 2);
  const auto ckpt = make_checkpoint(c, init_model<double>(c, 1));
  ModelConfig bigger = c;
  bigger.hidden += 1;
  EXPECT_THROW(params_from_container<double>(ckpt, bigger), ContractError);
  auto pairs = config_to_pairs(c);
  pairs.emplace_back("config.mystery", "1");
  EXPECT_THROW(config_from_pairs(pairs), ContractError);
  EXPECT_THROW(config_from_pairs({}), ContractError);
}

TEST(Serialize, ResumeStateRoundTripsIncludingInfiniteBest) {
  Rng rng(6);
  ModelConfig c = random_config(rng, 1);
  c.use_hsg = true;
  TrainState<double> s;
  s.epoch = 3;
  s.step = 77;
  s.lr = 0.3;
  s.seed = 9;
  s.carries = {zero_carry<double>(c), zero_carry<double>(c)};
  s.carries[1].s_hat[0] = 0.25;
  std::stringstream ss;
  write_container(ss, make_resume_container(c, init_model<double>(c, 1), s));
  const auto back = train_state_from_container<double>(read_container(ss), c);
  EXPECT_EQ(back.epoch, 3u);
  EXPECT_EQ(back.step, 77u);
  EXPECT_EQ(back.lr, 0.3);
  EXPECT_TRUE(std::isinf(back.best_valid));
  ASSERT_EQ(back.carries.size(), 2u);
  EXPECT_EQ(back.carries[1].s_hat[0], 0.25);
}

TEST(Serialize, FormatRealIsShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(-2.5), "-2.5");
  for_cases(100, 7, [](Rng& rng, std::size_t) {
    const double v = rng.uniform(-1e6, 1e6);
    EXPECT_EQ(std::stod(format_real(v)), v);
  });
}

}  // namespace
}  // namespace rhnlm
