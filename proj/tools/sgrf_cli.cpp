// Command-line front end for the experiment harness.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "sgrf/error.hpp"
#include "sgrf/harness.hpp"
#include "sgrf/simd/kernels.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> scenes, resolution, rounds, iterations, pool;
  std::optional<std::size_t> primitives, fit_primitives;
  std::string variant, arms, checkpoint;
  bool no_images = false;
};

void add_common(CLI::App* sub, Overrides& o, sgrf::ExperimentMode mode) {
  sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--scenes", o.scenes, "number of seeded scenes");
  sub->add_option("--resolution", o.resolution, "image width and height");
  sub->add_option("--primitives", o.primitives, "ground-truth primitive count");
  sub->add_option("--fit-primitives", o.fit_primitives, "fitted primitive count");
  sub->add_option("--pool", o.pool, "candidate pool size");
  sub->add_option("--iterations", o.iterations, "iterations per stage (planning) or in total");
  sub->add_option("--variant", o.variant, "generator: deterministic, diagonal, block-diagonal, rank-<k>");
  sub->add_option("--arms", o.arms, "comma-separated arm list");
  sub->add_flag("--no-images", o.no_images, "skip PPM output");
  if (mode == sgrf::ExperimentMode::PlanViews || mode == sgrf::ExperimentMode::PlanLights)
    sub->add_option("--rounds", o.rounds, "planning rounds");
  if (mode == sgrf::ExperimentMode::Eval) sub->add_option("--checkpoint", o.checkpoint, "generator checkpoint JSON");
}

sgrf::ExperimentConfig resolve(sgrf::ExperimentMode mode, const Overrides& o) {
  sgrf::ExperimentConfig c = sgrf::default_config(mode);
  if (!o.config.empty()) {
    c = sgrf::load_config(o.config, c);
    if (c.mode != mode) throw sgrf::ConfigError("config mode '" + sgrf::to_string(c.mode) + "' does not match the subcommand");
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output = o.out;
  if (o.scenes) c.scenes = *o.scenes;
  if (o.resolution) c.rig.resolution = *o.resolution;
  if (o.primitives) c.gt_primitives = *o.primitives;
  if (o.fit_primitives) c.fit_primitives = *o.fit_primitives;
  if (o.pool) c.pool_size = *o.pool;
  if (o.rounds) c.rounds = *o.rounds;
  if (o.iterations) {
    if (mode == sgrf::ExperimentMode::PlanViews) c.training.iterations_per_view = *o.iterations;
    else if (mode == sgrf::ExperimentMode::PlanLights) c.training.iterations_per_light = *o.iterations;
    else c.training.total_iterations = *o.iterations;
  }
  if (!o.variant.empty()) c.generator = sgrf::GeneratorSpec::parse(o.variant, c.generator);
  if (!o.arms.empty()) {
    c.arms.clear();
    std::stringstream ss(o.arms);
    std::string a;
    while (std::getline(ss, a, ',')) c.arms.push_back(a);
  }
  if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
  if (o.no_images) c.write_images = false;
  return c;
}

void print_summary(const sgrf::ExperimentReport& r) {
  for (const sgrf::MetricRow& m : r.metrics)
    if (m.scene == -1) std::printf("%-12s round %-3d %-22s %.6g\n", m.arm.c_str(), m.round, m.metric.c_str(), m.value);
  for (const sgrf::ArmStatus& a : r.arms)
    if (!a.ok) std::printf("FAILED scene %d arm %s: %s\n", a.scene, a.arm.c_str(), a.error.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Gaussian radiance fields: fitting, capture planning and evaluation"};
  app.require_subcommand(0, 1);
  bool info = false;
  app.add_flag("--info", info, "print the selected kernel set");

  const std::pair<const char*, sgrf::ExperimentMode> modes[] = {
      {"fit", sgrf::ExperimentMode::Fit},
      {"plan-views", sgrf::ExperimentMode::PlanViews},
      {"plan-lights", sgrf::ExperimentMode::PlanLights},
      {"landscape", sgrf::ExperimentMode::Landscape},
      {"ablate-covariance", sgrf::ExperimentMode::AblateCovariance},
      {"eval", sgrf::ExperimentMode::Eval},
  };
  const char* help[] = {"fit a generator to views of a synthetic scene",
                        "plan camera captures: random, farthest, select, opt-select, opt-random",
                        "plan illumination captures for transfer scenes",
                        "export uncertainty landscapes over the view sphere",
                        "sweep covariance structures and ranks",
                        "test PSNR/SSIM and depth AUSE of a fitted or loaded model"};
  Overrides o[6];
  CLI::App* subs[6];
  for (int i = 0; i < 6; ++i) {
    subs[i] = app.add_subcommand(modes[i].first, help[i]);
    add_common(subs[i], o[i], modes[i].second);
  }
  CLI11_PARSE(app, argc, argv);
  if (info) std::printf("kernels: %s\n", std::string(sgrf::simd::isa_name(sgrf::simd::active().isa)).c_str());
  if (app.get_subcommands().empty()) {
    if (info) return 0;
    std::cerr << app.help();
    return 2;
  }

  for (int i = 0; i < 6; ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      const sgrf::ExperimentConfig cfg = resolve(modes[i].second, o[i]);
      const sgrf::ExperimentReport report = sgrf::run(cfg);
      print_summary(report);
      std::printf("wrote %zu files under %s\n", report.files.size(), cfg.output.string().c_str());
      return report.all_ok() ? 0 : 1;
    } catch (const sgrf::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
