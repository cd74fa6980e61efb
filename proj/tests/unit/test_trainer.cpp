#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "sgrf/error.hpp"
#include "sgrf/trainer.hpp"
#include "unit/test_util.hpp"

using namespace sgrf;
using sgrf::testing::small_camera;

namespace {

const Vec3 kBackground{0.1, 0.1, 0.1};

std::vector<TrainingView> views_of(const Scene& gt, int count) {
  const FlatScene flat = flatten(gt);
  std::vector<TrainingView> views;
  for (int k = 0; k < count; ++k) {
    const Camera cam = small_camera(0.2 * k - 0.3, 0.9 * k, 16);
    views.push_back({cam, {}, render(SceneView{flat.theta, flat.layout, kBackground}, cam).color,
                     "cam" + std::to_string(k)});
  }
  return views;
}

TrainingConfig quiet_config() {
  TrainingConfig c;
  c.record_timing = false;
  c.volume_weight = 0.1;
  return c;
}

Trainer make_trainer(const TrainingConfig& config, double raw_value, std::uint64_t seed = 2) {
  const FlatScene init = flatten(sgrf::testing::random_scene(6, AppearanceMode::ShColor, seed + 100));
  ManifoldGenerator g = ManifoldGenerator::low_rank(init.theta, 2, seed, 1e-3);
  for (double& r : g.raw()) r = raw_value;
  Trainer t(std::move(g), init.layout, kBackground, config);
  for (TrainingView& v : views_of(sgrf::testing::random_scene(6, AppearanceMode::ShColor, seed), 2))
    t.add_view(std::move(v));
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Trainer, ZeroGeneratorFollowsDeterministicBaseline) {
  TrainingConfig c = quiet_config();
  c.volume_weight = 0.0;
  Trainer stochastic = make_trainer(c, 0.0);
  c.freeze_generator = true;
  Trainer baseline = make_trainer(c, 0.0);
  for (int it = 0; it < 25; ++it) {
    const double a = stochastic.step(), b = baseline.step();
    ASSERT_EQ(a, b) << "iteration " << it;
    const auto ma = stochastic.generator().mean(), mb = baseline.generator().mean();
    ASSERT_TRUE(std::equal(ma.begin(), ma.end(), mb.begin())) << "iteration " << it;
  }
  for (double r : stochastic.generator().raw()) EXPECT_EQ(r, 0.0);
}

TEST(Trainer, VolumeTermOnSchedule) {
  Trainer t = make_trainer(quiet_config(), 0.01);
  t.run(25);
  ASSERT_EQ(t.log().rows().size(), 25u);
  for (const TrainLogRow& r : t.log().rows()) {
    const bool expect = r.iteration % 10 == 0;
    EXPECT_EQ(r.event == "volume", expect) << "iteration " << r.iteration;
    EXPECT_EQ(r.ms, 0.0);
  }
  EXPECT_EQ(t.latent_cursor(), 25u);
}

TEST(Trainer, AddViewEventLandsOnNextRow) {
  Trainer t = make_trainer(quiet_config(), 0.01);
  t.run(3);
  auto extra = views_of(sgrf::testing::random_scene(6, AppearanceMode::ShColor, 2), 3);
  t.add_view(extra[2], "add-view round 1");
  t.run(7);
  EXPECT_EQ(t.log().rows()[3].event, "add-view round 1");
  EXPECT_EQ(t.log().rows()[9].event, "volume");
  EXPECT_EQ(t.views().size(), 3u);
}

TEST(Trainer, NanLossThrowsWithIteration) {
  Trainer t = make_trainer(quiet_config(), 0.01);
  t.run(2);
  for (std::size_t i = 0; i < t.layout().primitive_count(); ++i)
    t.generator().mean()[t.layout().offset(i, Field::Appearance)] = std::numeric_limits<double>::quiet_NaN();
  try {
    t.step();
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 3"), std::string::npos) << e.what();
  }
}

TEST(Trainer, RejectsBadConfigAndViews) {
  TrainingConfig c = quiet_config();
  c.samples_per_iteration = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = quiet_config();
  c.volume_period = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = quiet_config();
  c.raw_lr.position = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);

  Trainer t = make_trainer(quiet_config(), 0.01);
  TrainingView bad = t.views()[0];
  bad.target = ImageBuffer(3, 3);
  EXPECT_THROW(t.add_view(bad), DimensionError);
}

TEST(StepTiming, NeedsEnoughRows) {
  TrainLog log;
  EXPECT_THROW(step_timing_report(log), ConfigError);
  for (int i = 1; i <= 50; ++i) log.append({static_cast<std::uint64_t>(i), 0.0, 1.0, ""});
  EXPECT_THROW(step_timing_report(log), ConfigError);
  for (int i = 51; i <= 110; ++i) log.append({static_cast<std::uint64_t>(i), 0.0, i <= 10 ? 100.0 : 2.0, ""});
  // rows 11..50 at 1 ms, 51..110 at 2 ms
  EXPECT_NEAR(step_timing_report(log), (40.0 * 1.0 + 60.0 * 2.0) / 100.0, 1e-12);
}

TEST(Schedule, FallbackOnPlannerFailure) {
  Trainer t = make_trainer(quiet_config(), 0.01);
  const auto pool = views_of(sgrf::testing::random_scene(6, AppearanceMode::ShColor, 9), 4);
  int stages = 0;
  const PlannerHook planner = [&](const Trainer&, int round) -> std::optional<std::vector<TrainingView>> {
    if (round == 1) return std::nullopt;
    if (round == 2) throw NumericError("boom");
    return std::vector<TrainingView>{pool[round]};
  };
  const PlannerHook fallback = [&](const Trainer&, int) -> std::optional<std::vector<TrainingView>> {
    return std::vector<TrainingView>{pool[0]};
  };
  train(t, {3, 5}, planner, fallback, [&](const Trainer&, int) { ++stages; });
  EXPECT_EQ(stages, 4);
  EXPECT_EQ(t.views().size(), 5u);
  const auto& rows = t.log().rows();
  ASSERT_EQ(rows.size(), 20u);
  EXPECT_EQ(rows[5].event, "planner-fallback round 1");
  EXPECT_EQ(rows[10].event, "planner-fallback round 2");
  EXPECT_EQ(rows[15].event, "add-view round 3");

  Trainer u = make_trainer(quiet_config(), 0.01);
  EXPECT_THROW(train(u, {1, 2}, planner, {}), ConfigError);
}

TEST(Schedule, LogsAreReproducible) {
  const auto dir = std::filesystem::temp_directory_path() / "sgrf_trainer_log";
  std::filesystem::create_directories(dir);
  for (int run = 0; run < 2; ++run) {
    Trainer t = make_trainer(quiet_config(), 0.01);
    t.run(30);
    t.log().write_csv(dir / ("log" + std::to_string(run) + ".csv"));
  }
  const std::string a = slurp(dir / "log0.csv"), b = slurp(dir / "log1.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), "iteration,loss,ms,event");
  std::filesystem::remove_all(dir);
}
