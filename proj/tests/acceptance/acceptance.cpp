// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--out DIR]
//
// Without --criterion every check runs in order. Exit status is 0 only when
// all selected checks pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "CLI11.hpp"

#include "sgrf/harness.hpp"
#include "sgrf/loss.hpp"
#include "sgrf/metrics.hpp"
#include "sgrf/random.hpp"

namespace fs = std::filesystem;
using namespace sgrf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double value(const ExperimentReport& r, const std::string& metric, const std::string& arm, int round) {
  const auto v = r.find(metric, arm, round);
  if (!v) throw std::runtime_error("missing metric " + metric + " for arm " + arm);
  return *v;
}

ExperimentReport run_checked(const ExperimentConfig& c) {
  ExperimentReport r = run(c);
  for (const ArmStatus& a : r.arms)
    if (!a.ok) throw std::runtime_error("scene " + std::to_string(a.scene) + " arm " + a.arm + ": " + a.error);
  return r;
}

// 1. Analytic loss gradients against central differences.
Outcome gradient_suite(const fs::path&) {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 1e-4;
  CameraRig rig;
  rig.resolution = 16;
  std::ostringstream detail;
  std::size_t total = 0, total_good = 0, mismatches = 0, resolved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const AppearanceMode mode = seed % 2 == 1 ? AppearanceMode::Transfer : AppearanceMode::ShColor;
    const GroundTruth gt = generate_scene(seed, 24, 1.0, mode, rig, 4, 1);
    const Camera cam = gt.pool[seed % 4];
    std::vector<double> light;
    if (mode == AppearanceMode::Transfer) {
      const ShCoeffs l = lobe_light(Vec3(0.3, -0.5, 0.8).normalized(), 4.0, 0.3);
      light.assign(l.begin(), l.end());
    }
    const ImageBuffer target = render(gt.scene, cam, light).color;

    Rng rng(seed * 7919);
    Scene model = gt.scene;
    for (GaussianPrimitive& p : model.primitives) {
      for (int k = 0; k < 3; ++k) p.position[k] += uniform(rng, -0.08, 0.08);
      for (int k = 0; k < 3; ++k) p.log_scale[k] += uniform(rng, -0.2, 0.2);
      p.opacity_logit += uniform(rng, -0.5, 0.5);
      for (double& a : p.appearance) a += uniform(rng, -0.1, 0.1);
    }
    const FlatScene flat = flatten(model);
    const Vec3 bg = model.background;

    auto loss_of = [&](std::span<const double> theta, const Camera& c, std::span<const double> l) {
      return photometric_loss(render(SceneView{theta, flat.layout, bg}, c, l).color, target).value;
    };
    const SceneView view{flat.theta, flat.layout, bg};
    const RenderOutput fwd = render(view, cam, light);
    const PhotometricLoss pl = photometric_loss(fwd.color, target);
    const RenderGradients g = render_backward(view, cam, light, fwd, pl.d_rendered);

    std::size_t checked = 0, good = 0;
    // A miss is re-checked with a much smaller step: agreement there means a
    // compositing threshold (alpha cutoff or clamp) lies within +-h.
    auto compare = [&](double analytic, double fd, const std::function<double(double)>& fd_at) {
      if (std::abs(analytic) <= 1e-6) return;
      ++checked;
      auto close = [&](double f) { return std::abs(analytic - f) < 1e-3 * std::max(std::abs(analytic), std::abs(f)); };
      if (close(fd)) {
        ++good;
      } else {
        ++mismatches;
        resolved += close(fd_at(1e-6));
      }
    };
    std::vector<double> theta = flat.theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (std::abs(g.theta[i]) <= 1e-6) continue;
      auto fd_at = [&](double step) {
        const double x = theta[i];
        theta[i] = x + step;
        const double fp = loss_of(theta, cam, light);
        theta[i] = x - step;
        const double fm = loss_of(theta, cam, light);
        theta[i] = x;
        return (fp - fm) / (2 * step);
      };
      compare(g.theta[i], fd_at(h), fd_at);
    }
    for (int k = 0; k < 3; ++k) {
      auto fd_at = [&](double step) {
        Camera p = cam, m = cam;
        double* cp[3] = {&p.latitude, &p.longitude, &p.radius};
        double* cm[3] = {&m.latitude, &m.longitude, &m.radius};
        *cp[k] += step;
        *cm[k] -= step;
        return (loss_of(flat.theta, p, light) - loss_of(flat.theta, m, light)) / (2 * step);
      };
      compare(g.camera[k], fd_at(h), fd_at);
    }
    for (std::size_t k = 0; k < light.size(); ++k) {
      auto fd_at = [&](double step) {
        std::vector<double> lp = light, lm = light;
        lp[k] += step;
        lm[k] -= step;
        return (loss_of(flat.theta, cam, lp) - loss_of(flat.theta, cam, lm)) / (2 * step);
      };
      compare(g.light[k], fd_at(h), fd_at);
    }
    total += checked;
    total_good += good;
    detail << fmt("seed %d %s %.2f%% of %zu; ", static_cast<int>(seed), to_string(mode).c_str(),
                  checked ? 100.0 * good / checked : 0.0, checked);
  }
  const double frac = total ? static_cast<double>(total_good) / total : 0.0;
  const double secs = seconds_since(t0);
  detail << fmt("all %.3f%% of %zu (need 99%%); %zu misses, %zu agree at h=1e-6; %.1f s (limit 120)", 100 * frac,
                total, mismatches, resolved, secs);
  return {frac >= 0.99 && secs < 120.0, detail.str()};
}

// 2. Generator algebra on a rank-2 generator.
Outcome generator_algebra(const fs::path&) {
  const std::size_t d = 300, n = 50000;
  Rng rng(42);
  std::vector<double> mean(d);
  for (double& m : mean) m = uniform(rng, -1.0, 1.0);
  ManifoldGenerator gen = ManifoldGenerator::low_rank(mean, 2, 7, 1e-3);
  for (double& r : gen.raw()) r = uniform(rng, -0.2, 1.0);

  const std::vector<double> zero(2, 0.0);
  const bool exact = gen.sample(zero) == mean;

  const std::vector<double> s = covariance_rank_probe(gen, n, 11);
  const double rank_ratio = s[2] / s[0];

  // Per-direction variances along the principal directions of B.
  const Eigen::MatrixXd b = gen.materialize();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU);
  const Eigen::Vector2d expected = svd.singularValues().array().square() / 3.0;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sum2 = Eigen::Vector2d::Zero();
  std::vector<double> z(2);
  for (std::size_t i = 0; i < n; ++i) {
    z[0] = uniform(rng, -1.0, 1.0);
    z[1] = uniform(rng, -1.0, 1.0);
    const std::vector<double> theta = gen.sample(z);
    Eigen::VectorXd c(d);
    for (std::size_t j = 0; j < d; ++j) c[j] = theta[j] - mean[j];
    const Eigen::Vector2d p = svd.matrixU().transpose() * c;
    sum += p;
    sum2 += p.cwiseProduct(p);
  }
  double worst = 0.0, worst_probe = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double var = sum2[k] / n - (sum[k] / n) * (sum[k] / n);
    worst = std::max(worst, std::abs(var / expected[k] - 1.0));
    worst_probe = std::max(worst_probe, std::abs(s[k] * s[k] / n / expected[k] - 1.0));
  }
  const bool pass = exact && rank_ratio < 1e-3 && worst < 0.05 && worst_probe < 0.05;
  return {pass, fmt("sample(0)==mean %s; s3/s1 %.3g (<1e-3); variance error %.2f%%, probe %.2f%% (<5%%)",
                    exact ? "yes" : "no", rank_ratio, 100 * worst, 100 * worst_probe)};
}

// 3. Corner realizations explain the training views.
Outcome corner_fidelity(const fs::path& out) {
  ExperimentConfig c = default_config(ExperimentMode::Fit);
  c.train_views = 8;
  c.training.total_iterations = 5000;
  c.training.samples_per_iteration = 1;
  c.generator = GeneratorSpec::parse("rank-2");
  c.output = out / "c3";
  c.write_images = false;
  const ExperimentReport r = run_checked(c);
  const double mean = value(r, "train_psnr_mean", "model", 0);
  bool pass = true;
  std::ostringstream detail;
  detail << fmt("mean %.2f dB; corners", mean);
  for (int k = 0; k < 4; ++k) {
    const double p = value(r, "train_psnr_corner" + std::to_string(k), "model", 0);
    pass = pass && p >= 25.0 && std::abs(mean - p) <= 3.0;
    detail << fmt(" %.2f", p);
  }
  detail << " (>= 25 dB, within 3 dB)";
  return {pass, detail.str()};
}

ExperimentConfig landscape_config(const fs::path& out, int initial_views, std::vector<std::string> arms) {
  ExperimentConfig c = default_config(ExperimentMode::Landscape);
  c.scenes = 5;
  c.initial_views = initial_views;
  c.training.total_iterations = 2000;
  c.arms = std::move(arms);
  c.output = out;
  c.write_images = false;
  return c;
}

// 4. U is low at the training view and high behind the object.
Outcome uncertainty_polarity(const fs::path& out) {
  const ExperimentReport r = run_checked(landscape_config(out / "c4", 1, {"rank-2"}));
  const std::vector<double> ratio = r.per_scene("polarity_ratio", "rank-2", 0);
  int ok = 0;
  std::ostringstream detail;
  detail << "U(train)/U(antipodal):";
  for (double v : ratio) {
    ok += v < 0.5;
    detail << fmt(" %.3g", v);
  }
  detail << fmt("; %d/5 below 0.5 (need 3)", ok);
  return {ratio.size() == 5 && ok >= 3, detail.str()};
}

// 5. Planning arms on 5 scenes.
Outcome planning_efficacy(const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c = default_config(ExperimentMode::PlanViews);
  c.scenes = 5;
  c.output = out / "c5";
  c.write_images = false;
  const ExperimentReport r = run_checked(c);
  const double secs = seconds_since(t0);
  const int last = c.rounds;
  const double rnd = value(r, "psnr", "random", last), far = value(r, "psnr", "farthest", last);
  const double sel = value(r, "psnr", "select", last), opt = value(r, "psnr", "opt-select", last);
  const double opt_rnd = value(r, "psnr", "opt-random", last);
  const bool pass = sel >= rnd && sel >= far - 0.3 && opt >= sel - 0.2 && secs < 1800.0;
  return {pass, fmt("test PSNR after %d rounds: select %.3f, random %.3f, farthest %.3f, opt-select %.3f, "
                    "opt-random %.3f; %.0f s (limit 1800)",
                    last, sel, rnd, far, opt, opt_rnd, secs)};
}

// 6. Optimizing from a random camera reaches the best pool candidate.
Outcome optimization_reach(const fs::path& out) {
  const ExperimentReport r = run_checked(landscape_config(out / "c6", 1, {"rank-2"}));
  const std::vector<double> ratio = r.per_scene("opt_random_ratio", "rank-2", 0);
  int ok = 0;
  std::ostringstream detail;
  detail << "U(opt)/U(pool max):";
  for (double v : ratio) {
    ok += v >= 0.95;
    detail << fmt(" %.3f", v);
  }
  detail << fmt("; %d/5 at or above 0.95 (need 4)", ok);
  return {ratio.size() == 5 && ok >= 4, detail.str()};
}

// 7. Low-rank landscapes are smoother than diagonal ones.
Outcome landscape_smoothness(const fs::path& out) {
  const ExperimentReport r = run_checked(landscape_config(out / "c7", 2, {"rank-2", "diagonal"}));
  const std::vector<double> lr = r.per_scene("roughness", "rank-2", 0);
  const std::vector<double> dg = r.per_scene("roughness", "diagonal", 0);
  int ok = 0;
  std::ostringstream detail;
  detail << "roughness rank-2/diagonal:";
  for (std::size_t i = 0; i < std::min(lr.size(), dg.size()); ++i) {
    ok += lr[i] < dg[i];
    detail << fmt(" %.3f/%.3f", lr[i], dg[i]);
  }
  detail << fmt("; rank-2 smoother on %d/5 (need 4)", ok);
  return {lr.size() == 5 && dg.size() == 5 && ok >= 4, detail.str()};
}

// 8. Cost and quality ordering over covariance structures.
Outcome covariance_ablation(const fs::path& out) {
  ExperimentConfig c = default_config(ExperimentMode::AblateCovariance);
  c.scenes = 5;
  c.training.total_iterations = 2000;
  c.arms = {"diagonal", "rank-2"};
  c.output = out / "c8";
  c.write_images = false;
  const ExperimentReport r = run_checked(c);
  const double p2 = value(r, "psnr", "rank-2", 0), pd = value(r, "psnr", "diagonal", 0);

  // Per-iteration wall time: the arms take turns in short blocks so drift in
  // machine load hits all of them alike; the median block is reported.
  const GroundTruth gt = generate_scene(scene_seed(c.seed, 0), c.gt_primitives, c.extent, AppearanceMode::ShColor,
                                        c.rig, c.pool_size, 1);
  std::vector<Camera> cams;
  for (std::size_t idx : spread_indices(gt.pool.size(), 5)) cams.push_back(gt.pool[idx]);
  const std::vector<TrainingView> views = synthesize_dataset(gt.scene, cams);
  const FlatScene init = flatten(random_point_cloud(99, c.fit_primitives, c.extent, AppearanceMode::ShColor));
  const std::vector<std::string> arms{"deterministic", "rank-2", "rank-10"};
  std::vector<Trainer> trainers;
  for (const std::string& a : arms) {
    const GeneratorSpec spec = GeneratorSpec::parse(a);
    TrainingConfig tc = c.training;
    tc.freeze_generator = spec.deterministic();
    trainers.emplace_back(spec.build(init.theta, init.layout, 5), init.layout, gt.scene.background, tc);
    for (const TrainingView& v : views) trainers.back().add_view(v);
    trainers.back().run(50);
  }
  const int blocks = 25, block_iterations = 20;
  std::vector<std::vector<double>> ms(arms.size());
  for (int b = 0; b < blocks; ++b) {
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const auto t0 = std::chrono::steady_clock::now();
      trainers[a].run(block_iterations);
      ms[a].push_back(1000.0 * seconds_since(t0) / block_iterations);
    }
  }
  std::vector<double> med;
  for (auto& m : ms) {
    std::nth_element(m.begin(), m.begin() + m.size() / 2, m.end());
    med.push_back(m[m.size() / 2]);
  }
  const bool pass = med[1] <= 1.5 * med[0] && med[1] < med[2] && p2 >= pd - 0.2;
  return {pass, fmt("ms/iteration deterministic %.3f, rank-2 %.3f (ratio %.3f, limit 1.5), rank-10 %.3f; "
                    "5-view test PSNR rank-2 %.3f, diagonal %.3f",
                    med[0], med[1], med[1] / med[0], med[2], p2, pd)};
}

// 9. Light planning arms on 5 transfer scenes.
Outcome relight_planning(const fs::path& out) {
  ExperimentConfig c = default_config(ExperimentMode::PlanLights);
  c.scenes = 5;
  c.rounds = 4;
  c.rig.resolution = 32;
  c.training.iterations_per_light = 1500;
  c.output = out / "c9";
  c.write_images = false;
  const ExperimentReport r = run_checked(c);
  const double rnd = value(r, "psnr", "random", c.rounds), sel = value(r, "psnr", "select", c.rounds);
  const double opt = value(r, "psnr", "optimize", c.rounds);
  const bool pass = sel >= rnd && opt >= rnd && opt >= sel - 0.2;
  return {pass, fmt("relit test PSNR after %d lights: select %.3f, random %.3f, optimize %.3f", c.rounds, sel, rnd,
                    opt)};
}

// 10. Sparsification analysis.
Outcome ause_pipeline(const fs::path& out) {
  // Oracle ordering and its reverse on a small problem where every ordering
  // can be enumerated.
  std::vector<double> err{0.9, 0.1, 0.4, 0.05, 0.7, 0.3, 0.6, 0.2};
  const int steps = static_cast<int>(err.size());
  const AuseResult oracle = ause(err, err, steps);
  std::vector<double> anti(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) anti[i] = -err[i];
  const AuseResult reversed = ause(err, anti, steps);

  std::vector<std::size_t> perm(err.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const double full = std::accumulate(err.begin(), err.end(), 0.0) / err.size();
  std::vector<double> curves;
  do {
    double area = 0.0;
    for (int k = 0; k < steps; ++k) {
      double kept = 0.0;
      for (std::size_t i = static_cast<std::size_t>(k); i < perm.size(); ++i) kept += err[perm[i]];
      area += kept / (perm.size() - k) / full / steps;
    }
    curves.push_back(area);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double low = *std::min_element(curves.begin(), curves.end());
  const double best = *std::max_element(curves.begin(), curves.end()) - low;

  ExperimentConfig c = default_config(ExperimentMode::Fit);
  c.scenes = 5;
  c.rig.resolution = 48;
  c.training.total_iterations = 1500;
  c.output = out / "c10";
  c.write_images = false;
  const ExperimentReport r = run_checked(c);
  const std::vector<double> per_scene = r.per_scene("ause", "model", 0);
  bool in_range = per_scene.size() == 5;
  std::ostringstream scenes;
  for (double v : per_scene) {
    in_range = in_range && v >= 0.0 && v <= 1.0;
    scenes << fmt(" %.3f", v);
  }
  const bool pass = oracle.area < 1e-6 && std::abs(reversed.area - best) < 1e-6 && in_range;
  return {pass, fmt("oracle area %.2g; reversed area %.6f vs enumerated max %.6f; trained per-scene AUSE%s",
                    oracle.area, reversed.area, best, scenes.str().c_str())};
}

// 11. Byte-identical reruns for every mode.
std::map<std::string, std::string> csv_files(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome determinism(const fs::path& out) {
  std::ostringstream detail;
  bool pass = true;
  for (ExperimentMode mode : {ExperimentMode::Fit, ExperimentMode::Eval, ExperimentMode::PlanViews,
                              ExperimentMode::PlanLights, ExperimentMode::Landscape,
                              ExperimentMode::AblateCovariance}) {
    ExperimentConfig c = default_config(mode);
    c.seed = 17;
    c.scenes = 2;
    c.gt_primitives = 24;
    c.fit_primitives = 16;
    c.rig.resolution = 24;
    c.pool_size = 6;
    c.test_views = 2;
    c.train_views = 3;
    c.ablation_views = 3;
    c.light_cameras = 2;
    c.test_lights = 2;
    c.rounds = 2;
    c.training.total_iterations = 30;
    c.training.iterations_per_view = 15;
    c.training.iterations_per_light = 15;
    c.view_optimization.steps = 5;
    c.light_optimization.steps = 5;
    c.landscape_lat = 8;
    c.landscape_lon = 16;
    c.write_images = false;
    std::map<std::string, std::string> first;
    bool same = true;
    for (int rep = 0; rep < 2; ++rep) {
      c.output = out / "c11" / to_string(mode) / ("run" + std::to_string(rep));
      fs::remove_all(c.output);
      run_checked(c);
      const auto files = csv_files(c.output);
      if (rep == 0)
        first = files;
      else
        same = files == first && !files.empty();
    }
    pass = pass && same;
    detail << fmt("%s %zu csv %s; ", to_string(mode).c_str(), first.size(), same ? "identical" : "DIFFER");
  }
  return {pass, detail.str()};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*check)(const fs::path&);
};

const Criterion kCriteria[] = {
    {1, "gradient suite", gradient_suite},
    {2, "generator algebra", generator_algebra},
    {3, "corner-realization fidelity", corner_fidelity},
    {4, "uncertainty polarity", uncertainty_polarity},
    {5, "planning efficacy", planning_efficacy},
    {6, "optimization reaches pool quality", optimization_reach},
    {7, "landscape smoothness", landscape_smoothness},
    {8, "covariance ablation ordering", covariance_ablation},
    {9, "relighting planning", relight_planning},
    {10, "AUSE pipeline", ause_pipeline},
    {11, "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> selected;
  std::string out = "acceptance_out";
  app.add_option("--criterion", selected, "criterion number (repeatable); default all")->check(CLI::Range(1, 11));
  app.add_option("--out", out, "directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome o;
    try {
      o = c.check(out);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %s: %s | %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
