/**
 * Rotation algebra, backbone frames, dihedrals, distance encodings and
 * vector rejection.
 */

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cdrdiff/rng.hpp"

namespace cdrdiff::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Unit axis and angle in [0, pi].
struct AxisAngle {
    Vec3 axis = Vec3::UnitX();
    double angle = 0.0;
};

/// True when R^T R = I and det R = +1 within `tol`.
bool is_rotation(const Mat3& r, double tol = 1e-9);

/// Right-handed frame: e1 = unit(C - CA), e2 = unit component of (N - CA)
/// orthogonal to e1, e3 = e1 x e2. Columns of the result are e1, e2, e3.
Mat3 frame_from_backbone(const Vec3& n, const Vec3& ca, const Vec3& c);

/// Torsion angle in (-pi, pi], IUPAC sign: positive when the far bond turns
/// clockwise viewed along p2 -> p3.
double dihedral(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4);

Mat3 rotation_exp(const AxisAngle& aa);
/// Exponential of a rotation vector (axis * angle).
Mat3 rotation_exp(const Vec3& rotvec);
/// Inverse of rotation_exp. At angle pi the axis sign is chosen so that its
/// first nonzero component is positive; at angle 0 the axis is +x.
AxisAngle rotation_log(const Mat3& r);
Vec3 rotation_log_vector(const Mat3& r);

/// Rotation with the same axis and angle scaled by lambda in [0, 1].
Mat3 scale_rotation(const Mat3& r, double lambda);

/// Rotation angle of a^T b.
double geodesic_distance(const Mat3& a, const Mat3& b);

/// Intrinsic (Karcher) mean of rotations by fixed-point iteration.
Mat3 frechet_mean(std::span<const Mat3> rotations, int max_iterations = 50);

Vec3 random_unit_vector(Rng& rng);
/// Haar-uniform rotation.
Mat3 random_rotation(Rng& rng);

/// Gaussian kernels exp(-(d - c_k)^2 / (2 sigma^2)) on a centre grid.
struct RbfGrid {
    std::vector<double> centers;
    double width = 1.0;

    /// `count` centres uniform on [lo, hi]; width equals the grid spacing.
    static RbfGrid uniform(std::size_t count, double lo, double hi);
};

std::vector<double> gaussian_rbf_encode(double distance, const RbfGrid& grid);
void gaussian_rbf_encode(double distance, const RbfGrid& grid, std::span<double> out);

/// Component of v orthogonal to r.
Vec3 vector_rejection(const Vec3& v, const Vec3& r);

/// Ideal C-beta from N, CA, C (tetrahedral placement).
Vec3 ideal_cb(const Vec3& n, const Vec3& ca, const Vec3& c);

/// Places D with |CD| = bond, angle BCD = angle and torsion ABCD = torsion.
Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double angle, double torsion);

/// Backbone atom positions in the local frame of frame_from_backbone, built
/// from ideal bond lengths and angles.
struct IdealResidue {
    Vec3 n;
    Vec3 c;
    Vec3 o;
    Vec3 cb;
};
const IdealResidue& ideal_residue();

/// Row-major 9 values of a 3x3 matrix (the layout used by tensor ops).
void write_row_major(const Mat3& m, double* out);

}  // namespace cdrdiff::geom
