// mme_lab: command line front end for the measure-of-maximal-entropy lab.

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmelab.hpp"

namespace fs = std::filesystem;
using namespace mmelab;

namespace {

const std::vector<std::string> kFixtures = {"parabolic2", "petal_pair", "basilica", "cubic_escape"};

void write_png(const fs::path& path, const Image& img) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw Error("libpng failed writing " + path.string());
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> resolution;
  std::optional<std::int64_t> n;

  ExperimentConfig load() const {
    return apply_overrides(load_config(config), RunOverrides{seed, resolution, n});
  }

  fs::path out_dir(const ExperimentConfig& cfg) const {
    fs::path dir = out.empty() ? fs::path(cfg.output_dir) : fs::path(out);
    fs::create_directories(dir);
    return dir;
  }
};

void add_overrides(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "sampler rng seed");
  cmd->add_option("--resolution", c.resolution, "main atlas resolution")->check(CLI::Range(64, 16384));
  cmd->add_option("--n", c.n, "number of samples")->check(CLI::PositiveNumber);
}

int analyze(const ExperimentConfig& cfg, const fs::path& dir) {
  const auto res = run_experiment(cfg);
  write_text(dir / (cfg.name + ".report.json"), report_json(res).dump(2) + "\n");
  write_text(dir / (cfg.name + ".meta.json"), metadata_json(res).dump(2) + "\n");
  std::cout << cfg.name << ": " << to_string(res.classification.verdict) << ", "
            << res.atlas->component_count() << " components, report in " << (dir / (cfg.name + ".report.json")).string()
            << "\n";
  for (const auto& w : res.warnings) std::cout << "  warning: " << w << "\n";
  return res.exit_code;
}

int render(const ExperimentConfig& cfg, const fs::path& dir) {
  const RationalMap map = cfg.map();
  const auto cycles = find_cycles(map, cfg.k_max);
  OrbitOptions oo;
  oo.max_iter = cfg.max_iter;
  const auto atlas = build_atlas(map, GridWindow{cfg.center, cfg.half_width, cfg.resolution}, cycles, oo);
  Image img = render_atlas(atlas);
  write_png(dir / (cfg.name + "_atlas.png"), img);

  const auto samples = sample_backward(map, default_seed(map, cycles), cfg.burn_in,
                                       static_cast<std::size_t>(cfg.n_samples), cfg.rng_seed);
  Image density = img;
  overlay_density(density, atlas, samples);
  write_png(dir / (cfg.name + "_density.png"), density);

  if (!cfg.ray_angles.empty() && map.is_polynomial() &&
      connectivity_of_J_polynomial(map, cfg.max_iter).verdict == Connectivity::connected) {
    Image rays = img;
    for (const auto& a : cfg.ray_angles) overlay_ray(rays, atlas, trace_ray(map, Angle::parse(a)));
    write_png(dir / (cfg.name + "_rays.png"), rays);
  }
  std::cout << cfg.name << ": images in " << dir.string() << "\n";
  return 0;
}

int fixtures(const std::vector<std::string>& only, const std::string& fixture_dir, const Common& c) {
  std::vector<std::string> names = only.empty() ? kFixtures : only;
  for (const auto& n : names) {
    if (!fs::exists(fs::path(fixture_dir) / (n + ".toml"))) {
      std::cerr << "mme_lab: unknown fixture '" << n << "'\n";
      return 1;
    }
  }
  std::vector<FixtureSummary> rows;
  int code = 0;
  for (const auto& n : names) {
    Common fc = c;
    fc.config = (fs::path(fixture_dir) / (n + ".toml")).string();
    const auto cfg = fc.load();
    const auto dir = fc.out_dir(cfg);
    const auto res = run_experiment(cfg);
    write_text(dir / (cfg.name + ".report.json"), report_json(res).dump(2) + "\n");
    write_text(dir / (cfg.name + ".meta.json"), metadata_json(res).dump(2) + "\n");
    rows.push_back(summarize(res));
    code = std::max(code, res.exit_code);
  }
  auto join = [](const std::vector<std::string>& v) {
    if (v.empty()) return std::string("-");
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
    return s;
  };
  std::cout << std::left << std::setw(14) << "fixture" << std::setw(22) << "classification" << std::setw(12)
            << "components" << std::setw(22) << "J candidates" << std::setw(28) << "measure zero" << std::setw(12)
            << "ambiguous" << "grand orbit\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(14) << r.name << std::setw(22) << r.classification << std::setw(12)
              << r.components << std::setw(22) << join(r.j_candidates) << std::setw(28) << join(r.measure_zero)
              << std::setw(12) << join(r.ambiguous) << r.grand_orbit << "\n";
  }
  return code;
}

int trace(const ExperimentConfig& cfg, const std::string& angle, const std::string& out) {
  const auto ray = trace_ray(cfg.map(), Angle::parse(angle));
  if (out.empty() || out == "-") {
    write_ray_csv(std::cout, ray);
  } else {
    std::ofstream os(out);
    if (!os) throw Error("cannot open " + out + " for writing");
    write_ray_csv(os, ray);
  }
  std::cerr << "ray " << ray.theta.to_string() << ": " << to_string(ray.status);
  if (ray.landing_point) std::cerr << " at " << format_double(ray.landing_point->real()) << (ray.landing_point->imag() < 0 ? "" : "+") << format_double(ray.landing_point->imag()) << "i";
  std::cerr << "\n";
  return ray.status == RayStatus::landed ? 0 : 2;
}

int sample(const ExperimentConfig& cfg, const std::string& out) {
  const RationalMap map = cfg.map();
  const auto cycles = find_cycles(map, cfg.k_max);
  const auto samples = sample_backward(map, default_seed(map, cycles), cfg.burn_in,
                                       static_cast<std::size_t>(cfg.n_samples), cfg.rng_seed);
  if (out.empty() || out == "-") {
    write_samples_csv(std::cout, samples);
  } else {
    std::ofstream os(out);
    if (!os) throw Error("cannot open " + out + " for writing");
    write_samples_csv(os, samples);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the measure of maximal entropy of rational maps"};
  app.require_subcommand(1);

  Common an, re, fx, tr, sa;
  std::vector<std::string> only;
  std::string fixture_dir = MMELAB_FIXTURE_DIR;
  std::string angle;

  auto* c_an = app.add_subcommand("analyze", "run the full pipeline and write a JSON report");
  c_an->add_option("--config", an.config, "experiment config")->required()->check(CLI::ExistingFile);
  c_an->add_option("--out", an.out, "output directory (default: output.dir from the config)");
  add_overrides(c_an, an);

  auto* c_re = app.add_subcommand("render", "write atlas, density and ray PNGs");
  c_re->add_option("--config", re.config, "experiment config")->required()->check(CLI::ExistingFile);
  c_re->add_option("--out", re.out, "output directory");
  add_overrides(c_re, re);

  auto* c_fx = app.add_subcommand("fixtures", "analyze the bundled fixture maps and print a summary");
  c_fx->add_option("--only", only, "run only these fixtures");
  c_fx->add_option("--fixtures-dir", fixture_dir, "directory holding the fixture configs");
  c_fx->add_option("--out", fx.out, "output directory");
  add_overrides(c_fx, fx);

  auto* c_tr = app.add_subcommand("trace-ray", "trace one external ray and write it as CSV");
  c_tr->add_option("--config", tr.config, "experiment config")->required()->check(CLI::ExistingFile);
  c_tr->add_option("--angle", angle, "angle in turns, p/q or decimal")->required();
  c_tr->add_option("--out", tr.out, "CSV file (default: stdout)");

  auto* c_sa = app.add_subcommand("sample", "draw backward-iteration samples and write them as CSV");
  c_sa->add_option("--config", sa.config, "experiment config")->required()->check(CLI::ExistingFile);
  c_sa->add_option("--out", sa.out, "CSV file (default: stdout)");
  add_overrides(c_sa, sa);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (c_an->parsed()) {
      const auto cfg = an.load();
      return analyze(cfg, an.out_dir(cfg));
    }
    if (c_re->parsed()) {
      const auto cfg = re.load();
      return render(cfg, re.out_dir(cfg));
    }
    if (c_fx->parsed()) return fixtures(only, fixture_dir, fx);
    if (c_tr->parsed()) return trace(tr.load(), angle, tr.out);
    if (c_sa->parsed()) return sample(sa.load(), sa.out);
  } catch (const ConfigError& e) {
    std::cerr << "mme_lab: config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mme_lab: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
