#include <gtest/gtest.h>

#include <sstream>

#include "citl/config.hpp"

using namespace citl;

namespace {

KeyValues parse(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in, "test");
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(Config, ParsesCommentsAndWhitespace) {
  const auto kv = parse("# comment\n\n  C_T = 50 \r\nmode=incremental\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0].first, "C_T");
  EXPECT_EQ(kv[0].second, "50");
  EXPECT_EQ(kv[1].second, "incremental");
}

TEST(Config, AppliesKeys) {
  Settings s;
  apply_settings(s, parse("C_T=50\nC_Tu=2\neta=0.5\nk_nn=3\nmode=incremental\neps=0.1\nsource_eps=0.2\nC=8\n"
                          "L_max=12\ngamma_list=1, 2,3\nforce_accept=false\nseed=9\nlabeled=5\nd=16\n"));
  EXPECT_EQ(s.task.target.c_t, 50.0);
  EXPECT_EQ(s.task.target.c_tu, 2.0);
  EXPECT_EQ(s.task.target.eta, 0.5);
  EXPECT_EQ(s.task.target.k_nn, 3u);
  EXPECT_EQ(s.task.target.mode, WeightMode::Incremental);
  EXPECT_EQ(s.task.target.growth.eps, 0.1);
  EXPECT_EQ(s.task.source.eps, 0.2);
  EXPECT_EQ(s.task.source.C, 8.0);
  EXPECT_EQ(s.task.source.max_nodes, 12u);
  EXPECT_EQ(s.task.target.growth.max_nodes, 12u);
  EXPECT_EQ(s.task.target.growth.gamma_list, (std::vector<double>{1, 2, 3}));
  EXPECT_FALSE(s.task.source.force_accept);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.task.split.labeled_count, 5u);
  EXPECT_EQ(s.synth.d, 16u);
  validate(s);
}

TEST(Config, DefaultsAreTheBenchmark) {
  const Settings s;
  const Benchmark b = synthetic_benchmark();
  EXPECT_EQ(to_json(s.task).dump(), to_json(b.task).dump());
  EXPECT_EQ(s.synth.d, 8u);
  EXPECT_EQ(s.feature_dim, kDefaultFeatureDim);
  EXPECT_EQ(s.task.split.labeled_count, 20u);
  EXPECT_EQ(s.task.split.semisup_unlabeled_count, 20u);
}

TEST(Config, EveryKnownKeyIsAccepted) {
  for (const auto& k : known_keys()) {
    Settings s;
    std::string v = "1";
    if (k == "activation") v = "tanh";
    if (k == "mode") v = "global";
    if (k == "task") v = "x";
    if (k == "r") v = "0.5";
    if (k == "gamma_list") v = "1,2";
    if (k == "n_cycles") v = "50";
    if (k == "d" || k == "feature_dim") v = "4";
    EXPECT_NO_THROW(apply_setting(s, k, v)) << k;
  }
}

TEST(Config, Rejections) {
  Settings s;
  EXPECT_EQ(code_of([&] { apply_setting(s, "C_t", "1"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { apply_setting(s, "eta", "lots"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { apply_setting(s, "k_nn", "2.5"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { apply_setting(s, "mode", "sideways"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { apply_setting(s, "force_accept", "maybe"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { apply_setting(s, "task", "a,b"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { parse("no equals sign\n"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { read_config_file("/nonexistent.cfg"); }), ErrorCode::Io);
}

TEST(Config, ValidationRunsBeforeWork) {
  Settings s;
  apply_setting(s, "r", "1.5");
  EXPECT_EQ(code_of([&] { validate(s); }), ErrorCode::InvalidConfig);
  Settings t;
  apply_setting(t, "C_T", "0");
  EXPECT_EQ(code_of([&] { validate(t); }), ErrorCode::InvalidConfig);
  Settings u;
  apply_setting(u, "n_cycles", "10");
  EXPECT_EQ(code_of([&] { validate(u); }), ErrorCode::InvalidConfig);
}
