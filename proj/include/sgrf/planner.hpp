#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sgrf/generator.hpp"
#include "sgrf/renderer.hpp"

namespace sgrf {

/// Variance of M rendered realizations at one (camera, light) query.
struct UncertaintyEstimate {
  std::vector<double> variance;        ///< per pixel, summed over RGB
  std::vector<double> depth_variance;  ///< per pixel
  double total = 0.0;                  ///< U = sum of `variance`
  int samples = 0;
  std::vector<std::vector<double>> z;  ///< latent points used
  ImageBuffer mean_color;
  std::vector<double> mean_depth;
};

/// What to differentiate U with respect to.
struct UncertaintyGradient {
  std::array<double, 3> camera{};
  std::array<double, kShBasis> light{};
};

struct UncertaintyOptions {
  int samples = 2;                 ///< M
  std::uint64_t first_cursor = 0;  ///< latent cursor of the first realization
  std::uint64_t latent_seed = 0;   ///< only used for latent dimensions above 32
  RenderSettings render;
};

/// U = sum_pixels (1/M) sum_j ||C_j - mean C||^2 over M realizations at
/// consecutive latent cursors. Throws ConfigError for M < 2.
UncertaintyEstimate render_uncertainty(const ManifoldGenerator& gen, const ParamLayout& layout,
                                       const Vec3& background, const Camera& camera, std::span<const double> light,
                                       const UncertaintyOptions& options = {},
                                       UncertaintyGradient* gradient = nullptr);

/// Candidate cameras (and their chosen flags).
struct CandidatePool {
  std::vector<Camera> cameras;
  std::vector<bool> chosen;

  explicit CandidatePool(std::vector<Camera> cams = {}) : cameras(std::move(cams)), chosen(cameras.size(), false) {}
  std::size_t size() const { return cameras.size(); }
  bool has_unchosen() const;
  /// Marks a candidate chosen; throws ConfigError if already chosen or out of range.
  void choose(std::size_t index);
};

struct ViewSelection {
  std::size_t index = 0;
  double uncertainty = 0.0;
  std::vector<double> scores;  ///< U per candidate (NaN for chosen ones)
};

/// argmax U over unchosen candidates, ties to the lowest index. Marks the
/// winner chosen. Throws ConfigError when no candidate is left.
ViewSelection select_next_view(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                               CandidatePool& pool, std::span<const double> light,
                               const UncertaintyOptions& options = {});

struct ViewOptimizationOptions {
  int steps = 100;
  double learning_rate = 0.05;
  bool optimize_radius = false;
  double min_radius = 1.5;
  double max_latitude = 1.5;  ///< |lat| bound, radians
};

struct ViewOptimizationStep {
  int step = 0;
  Camera camera;
  double uncertainty = 0.0;
};

struct ViewOptimization {
  Camera camera;        ///< best along the trajectory
  double uncertainty = 0.0;
  double initial_uncertainty = 0.0;
  int best_step = 0;
  bool stopped_on_nan = false;
  std::vector<ViewOptimizationStep> trajectory;
};

/// Adam ascent of U over (lat, lon) (and radius when enabled). Returns the
/// best camera seen, including the start. A NaN gradient stops early.
ViewOptimization optimize_next_view(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                                    const Camera& init, std::span<const double> light,
                                    const ViewOptimizationOptions& opt = {}, const UncertaintyOptions& options = {});

/// argmax over unchosen candidates of the minimum distance to the chosen
/// camera positions (`extra` positions count as chosen too). Ties to the
/// lowest index. Throws ConfigError without any chosen position.
std::size_t farthest_point_select(const CandidatePool& pool, std::span<const Vec3> extra = {});

struct Landscape {
  int lat_cells = 0;
  int lon_cells = 0;
  std::vector<double> latitude;   ///< per row, cell center
  std::vector<double> longitude;  ///< per column, cell center
  std::vector<double> values;     ///< row-major U
};

/// U on a lat/lon grid of cameras built from `base` (same radius and
/// intrinsics). Latitudes span (-max_lat, max_lat), longitudes [-pi, pi).
/// Requires at least 8 x 16 cells. All cells share the same latent points.
Landscape uncertainty_landscape(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                                const Camera& base, std::span<const double> light, int lat_cells, int lon_cells,
                                double max_latitude, const UncertaintyOptions& options = {});

/// Mean |difference| between 4-neighbor cells (longitude wraps) divided by
/// the mean value; 0 for an all-zero map.
double landscape_roughness(const Landscape& landscape);

/// CSV `lat,lon,U`, one row per cell, row-major.
void write_landscape_csv(const Landscape& landscape, const std::filesystem::path& path);

/// False-color PPM, one pixel per cell, north row first. Values are scaled by
/// the map maximum and mapped through black (0) -> blue (0.25) -> cyan (0.5)
/// -> yellow (0.75) -> white (1), linear between breakpoints.
void write_landscape_ppm(const Landscape& landscape, const std::filesystem::path& path);
Vec3 landscape_colormap(double t);

/// Planner decisions CSV `round,mode,index,lat,lon,U,steps`.
struct PlannerDecision {
  int round = 0;
  std::string mode;
  long long index = -1;  ///< pool index, or -1 for an optimized camera
  double latitude = 0.0;
  double longitude = 0.0;
  double uncertainty = 0.0;
  int steps = 0;
};
void write_decisions_csv(const std::vector<PlannerDecision>& rows, const std::filesystem::path& path);

}  // namespace sgrf
