/**
 * Isotropic Gaussian distribution on SO(3).
 *
 * The rotation angle has density proportional to
 *
 *   ((1 - cos w) / pi) * sum_l (2l + 1) exp(-l(l+1) eps) sin((l + 1/2) w) / sin(w / 2)
 *
 * and the axis is uniform on the sphere. Angles are drawn by inverse CDF over
 * a tabulation of (0, pi]; tables are built once per variance and shared
 * between threads. For eps below kIgso3SmallVariance the series needs
 * thousands of terms, and the distribution is replaced by its small-variance
 * limit: a rotation vector drawn from N(0, 2 eps I).
 */

#pragma once

#include <cstddef>

#include "cdrdiff/geometry.hpp"

namespace cdrdiff::geom {

inline constexpr std::size_t kIgso3GridSize = 4096;
inline constexpr double kIgso3SmallVariance = 1e-3;

/// Number of series terms used at variance eps.
std::size_t igso3_truncation(double eps);

/// Unnormalized angle density at w in [0, pi].
double igso3_angle_density(double omega, double eps);

/// Rotation angle drawn from the density above.
double igso3_sample_angle(double eps, Rng& rng);

/// mean * exp(w u) with w from the angle density and u uniform on the sphere.
Mat3 igso3_sample(const Mat3& mean, double eps, Rng& rng);

/// CDF of the rotation angle of a Haar-uniform rotation: (w - sin w) / pi.
double haar_angle_cdf(double omega);

}  // namespace cdrdiff::geom
