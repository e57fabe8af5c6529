#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "citl/eval.hpp"
#include "support.hpp"

using namespace citl;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

// A quick task: the benchmark settings with a smaller node budget.
Benchmark small_benchmark() {
  Benchmark b = synthetic_benchmark();
  b.task.source.max_nodes = 30;
  b.task.target.growth.max_nodes = 15;
  b.task.record_timing = false;
  return b;
}

}  // namespace

TEST(Rmse, Examples) {
  const Vector y{1, 2, 3};
  EXPECT_EQ(rmse(y, y), 0.0);
  EXPECT_DOUBLE_EQ(rmse(y, Vector{2, 3, 4}), 1.0);
  EXPECT_EQ(code_of([] { rmse(Vector{}, Vector{}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { rmse(Vector{1}, Vector{1, 2}); }), ErrorCode::LengthMismatch);
}

TEST(R2, Examples) {
  const Vector y{0.9, 0.8, 0.7, 0.95};
  EXPECT_DOUBLE_EQ(r2(y, y), 1.0);
  const double mean = (0.9 + 0.8 + 0.7 + 0.95) / 4.0;
  EXPECT_NEAR(r2(y, Vector(4, mean)), 0.0, 1e-14);
  EXPECT_DOUBLE_EQ(r2(Vector{0, 1}, Vector{2, 2}), -9.0);
  EXPECT_EQ(code_of([] { r2(Vector{1, 1}, Vector{1, 2}); }), ErrorCode::DegenerateTarget);
  EXPECT_EQ(code_of([] { r2(Vector{1}, Vector{1}); }), ErrorCode::LengthMismatch);
}

TEST(Metrics, PermutationInvariant) {
  RngStream rng(41);
  Vector y = citl::testing::random_vector(rng, 30), yhat = citl::testing::random_vector(rng, 30);
  const double a = rmse(y, yhat), b = r2(y, yhat);
  std::vector<std::size_t> order(30);
  for (std::size_t i = 0; i < 30; ++i) order[i] = 29 - ((i * 7) % 30);
  Vector yp, yhatp;
  for (std::size_t i : order) {
    yp.push_back(y[i]);
    yhatp.push_back(yhat[i]);
  }
  EXPECT_NEAR(rmse(yp, yhatp), a, 1e-14);
  EXPECT_NEAR(r2(yp, yhatp), b, 1e-14);
}

TEST(DeriveSeed, StreamsDiffer) {
  EXPECT_EQ(derive_seed(3, 1), derive_seed(3, 1));
  EXPECT_NE(derive_seed(3, 1), derive_seed(3, 2));
  EXPECT_NE(derive_seed(3, 1), derive_seed(4, 1));
}

TEST(RunTask, DeterministicAndBookkept) {
  const Benchmark b = small_benchmark();
  SynthConfig sc = b.synth;
  sc.seed = 4;
  const SynthTask pair = synth_generate(sc);
  const EvalReport r1 = run_task(pair.source, pair.target, b.task, 4);
  const EvalReport r2 = run_task(pair.source, pair.target, b.task, 4);
  EXPECT_EQ(r1.rmse_pct, r2.rmse_pct);
  EXPECT_EQ(r1.r2, r2.r2);
  EXPECT_EQ(r1.node_count, r2.node_count);
  EXPECT_EQ(r1.train_time_s, 0.0);
  EXPECT_EQ(r1.variant, "full");
  EXPECT_EQ(r1.task, "synth");

  // node_count is the grown model's L.
  GrowConfig g = b.task.source;
  g.seed = derive_seed(4, 1);
  const GrowResult src = train_source(pair.source, g);
  const VariantRun run = run_variant(Variant::Full, src.model, pair.target, b.task, 4);
  EXPECT_EQ(run.report.node_count, run.model.nodes());
  EXPECT_EQ(run.report.rmse_pct, r1.rmse_pct);
}

TEST(RunAblation, FourVariantsPerSeed) {
  const Benchmark b = small_benchmark();
  const SynthTask pair = synth_generate(b.synth);
  const auto rows = run_ablation(pair.source, pair.target, b.task, {1, 2});
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].variant, to_string(kAllVariants[i % 4]));
    EXPECT_EQ(rows[i].seed, i < 4 ? 1u : 2u);
  }
}

TEST(RunAblation, StructuralRiskVariantIsRidgeOnLabels) {
  // With C_Tu = η = 0 the global weights are ridge weights with C = C_T on the
  // accepted nodes' labeled outputs.
  const Benchmark b = small_benchmark();
  const SynthTask pair = synth_generate(b.synth);
  GrowConfig g = b.task.source;
  g.seed = derive_seed(1, 1);
  const GrowResult src = train_source(pair.source, g);
  const VariantRun run = run_variant(Variant::StructuralRisk, src.model, pair.target, b.task, 1);
  ASSERT_GT(run.model.nodes(), 0u);
  const CycleMatrix target = normalized(pair.target, src.model.norm);
  const TargetSplit split = split_protocol(target, b.task.split);
  const Matrix h = hidden_output(run.model.w, run.model.b, run.model.activation, split.labeled.x);
  const Matrix ridge = global_weights_ridge(h, label_matrix(split.labeled.soh), b.task.target.c_t);
  for (std::size_t j = 0; j < ridge.rows(); ++j)
    EXPECT_NEAR(run.model.beta(j, 0), ridge(j, 0), 1e-8 * std::max(1.0, std::abs(ridge(j, 0))));
}

TEST(Report, HeaderAndConfigLine) {
  EvalReport r{"synth", 3, "full", 1.5, 0.9, 0.0, 0.0, 12};
  std::ostringstream out;
  write_report(out, {r}, to_json(synthetic_benchmark().task));
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("# config {", 0), 0u);
  EXPECT_NE(s.find("\ntask,seed,variant,rmse_pct,r2,train_time_s,predict_time_ms,node_count\n"), std::string::npos);
  EXPECT_NE(s.find("\nsynth,3,full,1.5,0.9,0,0,12\n"), std::string::npos);
}
