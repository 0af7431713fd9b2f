// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "risloc/types.hpp"

namespace risloc {

struct Position3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Position3 operator+(const Position3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Position3 operator-(const Position3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Position3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Position3&) const = default;
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const Position3& a, const Position3& b) { return (a - b).norm(); }

// Range from the reference RIS element, azimuth in (-pi, pi], elevation from +z in [0, pi].
struct PolarPosition {
  double range = 1.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

PolarPosition cartesian_to_polar(const Position3& p);
Position3 polar_to_cartesian(const PolarPosition& p);

// Jacobian d(x, y, z) / d(range, azimuth, elevation).
Eigen::Matrix3d polar_jacobian(const PolarPosition& p);

// 1-based row-major index on the yz plane.
Position3 ris_element_position(int index, int n_elements, double spacing);

struct RisGeometry {
  int n_elements = 0;
  double spacing = 0.0;
  std::vector<Position3> element_positions;

  static RisGeometry uniform_planar(int n_elements, double spacing);
  int side() const;
  double aperture() const;
};

double propagation_delay(const Position3& a, const Position3& b, double c_light);

struct FresnelInterval {
  double lower = 0.0;
  double upper = 0.0;
};

FresnelInterval fresnel_interval(const RisGeometry& geometry, double wavelength);
bool fresnel_region_check(double distance, const RisGeometry& geometry, double wavelength);

}  // namespace risloc
