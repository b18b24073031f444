#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "mmelab/config.hpp"

using namespace mmelab;

namespace {

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(ConfigParser, ScalarsTablesAndArrays) {
  const auto doc = config::parse(R"(# comment
name = "a \"quoted\" name"  # trailing
flag = true
[t]
i = -42
f = 2.5e-3
arr = [
  1, 2,
  [3.0, "x"],
]
a.b = 7
)");
  EXPECT_EQ(doc.at("name").as_string(), "a \"quoted\" name");
  EXPECT_TRUE(doc.at("flag").as_bool());
  EXPECT_EQ(doc.at("t.i").as_int(), -42);
  EXPECT_DOUBLE_EQ(doc.at("t.f").as_double(), 2.5e-3);
  EXPECT_DOUBLE_EQ(doc.at("t.i").as_double(), -42.0);
  const auto& arr = doc.at("t.arr").as_array();
  ASSERT_EQ(arr.size(), 3u);
  EXPECT_EQ(arr[2].as_array()[1].as_string(), "x");
  EXPECT_EQ(doc.at("t.a.b").as_int(), 7);
  EXPECT_EQ(doc.at("t.i").line, 5);
}

TEST(ConfigParser, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("name = \"x\"\n[map]\nnum = [[1.0, 0.0], [2.0], [1.0, 0.0]]\n"), 3);
  EXPECT_EQ(error_line("[map]\nnum = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]\nbogus = 1\n"), 3);
  EXPECT_EQ(error_line("[map]\nnum = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]\nnum = 1\n"), 3);
  EXPECT_EQ(error_line("[map]\nnum = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]\n[atlas]\nresolution = 12\n"), 4);
  EXPECT_EQ(error_line("name = \"unterminated\n"), 1);
  EXPECT_EQ(error_line("[map\n"), 1);
  EXPECT_EQ(error_line("x = [1, 2\n"), 2);  // reported at end of input
  // Degree 1 is not a valid map; reported at the coefficient line.
  EXPECT_EQ(error_line("\n[map]\nnum = [[0.0, 0.0], [1.0, 0.0]]\n"), 3);
}

TEST(ConfigParser, MissingMapIsAnError) { EXPECT_THROW(parse_config("name = \"x\"\n"), ConfigError); }

TEST(ExperimentConfig, FixturesLoad) {
  for (const auto* name : {"basilica", "parabolic2", "petal_pair", "cubic_escape"}) {
    const auto path = std::filesystem::path(MMELAB_FIXTURE_DIR) / (std::string(name) + ".toml");
    const auto cfg = load_config(path.string());
    EXPECT_EQ(cfg.name, name);
    EXPECT_GE(cfg.map().degree(), 2);
    EXPECT_EQ(cfg.ladder_resolutions.size(), cfg.epsilons.size());
  }
  EXPECT_THROW(load_config("/nonexistent/file.toml"), ConfigError);
}

TEST(ExperimentConfig, DefaultsFillIn) {
  const auto cfg = parse_config("[map]\nnum = [[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]\n");
  EXPECT_EQ(cfg.resolution, 1024);
  EXPECT_EQ(cfg.n_samples, 100000);
  EXPECT_EQ(cfg.burn_in, 100);
  EXPECT_EQ(cfg.den.size(), 1u);
  EXPECT_EQ(cfg.epsilons, (std::vector<double>{0.05, 0.02, 0.01}));
}

TEST(ExperimentConfig, RoundTripIsExact) {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    ExperimentConfig cfg;
    cfg.name = "trial \"" + std::to_string(trial) + "\"\\";
    cfg.num = {cplx{g(gen), g(gen)}, cplx{g(gen), 0.0}, cplx{1.0 + std::abs(g(gen)), g(gen)}};
    cfg.den = {cplx{1.0 + std::abs(g(gen)), 0.0}};
    cfg.center = {g(gen) * 1e-3, g(gen)};
    cfg.half_width = 1.0 + std::abs(g(gen));
    cfg.resolution = 64 + static_cast<int>(gen() % 4000);
    cfg.epsilons = {0.1 * std::abs(g(gen)) + 1e-3, 1e-17, 3.0};
    cfg.residual_epsilon = std::abs(g(gen));
    cfg.n_samples = 1 + static_cast<std::int64_t>(gen() % 1000000);
    cfg.rng_seed = gen() >> 1;
    cfg.second_seed = gen() >> 1;
    cfg.ray_angles = {"1/3", "0.125"};
    cfg.ray_pairs = {{"1/3", "2/3"}};
    cfg.output_dir = "out dir/é";
    const auto text = serialize_config(cfg);
    const auto back = parse_config(text);
    EXPECT_EQ(back, cfg) << text;
    EXPECT_EQ(serialize_config(back), text);
  }
}
