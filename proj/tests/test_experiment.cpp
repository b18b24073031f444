#include <gtest/gtest.h>

#include <filesystem>

#include "mmelab/experiment.hpp"

using namespace mmelab;

namespace {

ExperimentConfig small_basilica() {
  auto cfg = parse_config(R"(name = "small"
[map]
num = [[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
[atlas]
resolution = 256
ladder = [128, 256, 512]
[measure]
epsilons = [0.08, 0.04, 0.02]
residual_epsilon = 0.05
[sampler]
n = 20000
[rays]
angles = ["1/3"]
pairs = [["1/3", "2/3"]]
)");
  return cfg;
}

const ExperimentResult& shared_run() {
  static const ExperimentResult r = run_experiment(small_basilica());
  return r;
}

}  // namespace

TEST(Experiment, OverridesReplaceFields) {
  const auto cfg = small_basilica();
  const auto same = apply_overrides(cfg, {});
  EXPECT_EQ(same, cfg);
  const auto o = apply_overrides(cfg, {std::uint64_t{9}, 128, std::int64_t{500}});
  EXPECT_EQ(o.rng_seed, 9u);
  EXPECT_EQ(o.resolution, 128);
  EXPECT_EQ(o.n_samples, 500);
  EXPECT_EQ(o.num, cfg.num);
}

TEST(Experiment, ReportHasExpectedShape) {
  const auto& r = shared_run();
  const auto j = report_json(r);
  for (const auto* key : {"map", "classification", "cycles", "components", "estimates", "residual", "dichotomy",
                          "warnings", "extras"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_FALSE(j.contains("timestamp"));
  EXPECT_EQ(j["classification"]["verdict"], "HYPERBOLIC");
  EXPECT_EQ(j["components"].size(), r.atlas->component_count());
  ASSERT_EQ(j["extras"]["ray_pairs"].size(), 1u);
  EXPECT_EQ(j["extras"]["ray_pairs"][0]["verdict"], "COLAND");
  EXPECT_EQ(r.exit_code, 0);
  const auto meta = metadata_json(r);
  EXPECT_TRUE(meta.contains("timestamp"));
  EXPECT_EQ(meta["exit_code"], 0);
}

TEST(Experiment, SummaryOfBasilica) {
  const auto s = summarize(shared_run());
  EXPECT_EQ(s.name, "small");
  EXPECT_EQ(s.classification, "HYPERBOLIC");
  EXPECT_EQ(s.j_candidates.size(), 1u);
  EXPECT_EQ(s.measure_zero.size(), 2u);
  EXPECT_TRUE(s.ambiguous.empty());
  EXPECT_NE(s.grand_orbit, "n/a");  // the 2-cycle of bounded components is checked
}

TEST(Experiment, ReportIsDeterministic) {
  const auto again = run_experiment(small_basilica());
  EXPECT_EQ(report_json(again).dump(), report_json(shared_run()).dump());
}

TEST(Experiment, SkippingLadderAndRays) {
  RunOptions ro;
  ro.ladder = false;
  ro.rays = false;
  const auto r = run_experiment(apply_overrides(small_basilica(), {std::nullopt, 192, std::int64_t{10000}}), ro);
  EXPECT_TRUE(r.dichotomy.entries.empty());
  EXPECT_TRUE(r.rays.empty());
  EXPECT_TRUE(r.pairs.empty());
  ASSERT_TRUE(r.atlas);
  EXPECT_EQ(r.atlas->resolution(), 192);
}

TEST(Experiment, FixtureConfigsAreValid) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(MMELAB_FIXTURE_DIR)) {
    if (e.path().extension() != ".toml") continue;
    const auto cfg = load_config(e.path().string());
    EXPECT_EQ(cfg.name, e.path().stem().string());
    EXPECT_EQ(parse_config(serialize_config(cfg)), cfg);
    ++n;
  }
  EXPECT_EQ(n, 4u);
}
