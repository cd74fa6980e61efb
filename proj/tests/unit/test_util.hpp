#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sgrf/camera.hpp"
#include "sgrf/gaussian.hpp"

namespace sgrf::testing {

/// A handful of random primitives clustered around the origin.
Scene random_scene(std::size_t count, AppearanceMode mode, std::uint64_t seed, double spread = 0.6);

Camera small_camera(double lat, double lon, int size = 24);

/// Central difference of f at x along coordinate i.
double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                          std::size_t i, double h);

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace sgrf::testing
