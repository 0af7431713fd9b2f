// SPDX-License-Identifier: Apache-2.0
#include "risloc/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace risloc {

PolarPosition cartesian_to_polar(const Position3& p) {
  const double r = p.norm();
  if (!(r > 0.0) || !std::isfinite(r)) throw DegenerateGeometry("cartesian_to_polar: point at origin");
  PolarPosition out;
  out.range = r;
  out.azimuth = std::atan2(p.y, p.x);
  if (out.azimuth == -kPi) out.azimuth = kPi;
  out.elevation = std::acos(std::clamp(p.z / r, -1.0, 1.0));
  return out;
}

Position3 polar_to_cartesian(const PolarPosition& p) {
  const double se = std::sin(p.elevation);
  return {p.range * se * std::cos(p.azimuth), p.range * se * std::sin(p.azimuth),
          p.range * std::cos(p.elevation)};
}

Eigen::Matrix3d polar_jacobian(const PolarPosition& p) {
  const double d = p.range;
  const double sa = std::sin(p.azimuth), ca = std::cos(p.azimuth);
  const double se = std::sin(p.elevation), ce = std::cos(p.elevation);
  Eigen::Matrix3d j;
  j << se * ca, -d * se * sa, d * ca * ce,
       se * sa, d * se * ca, d * sa * ce,
       ce, 0.0, -d * se;
  return j;
}

namespace {
int checked_side(int n_elements) {
  if (n_elements < 1) throw std::invalid_argument("RIS element count must be positive");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_elements))));
  if (side * side != n_elements)
    throw std::invalid_argument("RIS element count " + std::to_string(n_elements) + " is not a perfect square");
  return side;
}
}  // namespace

Position3 ris_element_position(int index, int n_elements, double spacing) {
  const int side = checked_side(n_elements);
  if (index < 1 || index > n_elements) throw std::out_of_range("RIS element index out of range");
  const int k = index - 1;
  return {0.0, spacing * (k % side), spacing * (k / side)};
}

RisGeometry RisGeometry::uniform_planar(int n_elements, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("RIS spacing must be positive");
  RisGeometry g;
  g.n_elements = n_elements;
  g.spacing = spacing;
  g.element_positions.reserve(n_elements);
  for (int r = 1; r <= n_elements; ++r) g.element_positions.push_back(ris_element_position(r, n_elements, spacing));
  return g;
}

int RisGeometry::side() const { return checked_side(n_elements); }

double RisGeometry::aperture() const { return std::sqrt(2.0) * spacing * (side() - 1); }

double propagation_delay(const Position3& a, const Position3& b, double c_light) {
  const double d = distance(a, b);
  if (!(d > 0.0)) throw DegenerateGeometry("propagation_delay: coincident points");
  return d / c_light;
}

FresnelInterval fresnel_interval(const RisGeometry& geometry, double wavelength) {
  const double D = geometry.aperture();
  return {0.62 * std::sqrt(D * D * D / wavelength), 2.0 * D * D / wavelength};
}

bool fresnel_region_check(double distance, const RisGeometry& geometry, double wavelength) {
  const FresnelInterval iv = fresnel_interval(geometry, wavelength);
  return distance >= iv.lower && distance <= iv.upper;
}

}  // namespace risloc
