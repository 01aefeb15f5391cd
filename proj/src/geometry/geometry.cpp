#include "cdrdiff/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cdrdiff::geom {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 vee_antisymmetric(const Mat3& r) {
    return 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
}

Mat3 hat(const Vec3& w) {
    Mat3 m;
    m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return m;
}

}  // namespace

bool is_rotation(const Mat3& r, double tol) {
    if (!r.allFinite()) return false;
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 frame_from_backbone(const Vec3& n, const Vec3& ca, const Vec3& c) {
    if (!n.allFinite() || !ca.allFinite() || !c.allFinite()) {
        throw GeometryError("frame_from_backbone: non-finite input");
    }
    const Vec3 u = n - ca;
    const Vec3 v = c - ca;
    if (v.norm() < 1e-8) throw GeometryError("frame_from_backbone: C coincides with CA");
    const Vec3 e1 = v.normalized();
    const Vec3 rejected = u - u.dot(e1) * e1;
    if (rejected.norm() < 1e-8) throw GeometryError("frame_from_backbone: N, CA, C are collinear");
    const Vec3 e2 = rejected.normalized();
    const Vec3 e3 = e1.cross(e2);
    Mat3 r;
    r.col(0) = e1;
    r.col(1) = e2;
    r.col(2) = e3;
    return r;
}

double dihedral(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4) {
    const Vec3 b1 = p2 - p1;
    const Vec3 b2 = p3 - p2;
    const Vec3 b3 = p4 - p3;
    if (b1.norm() < 1e-12 || b2.norm() < 1e-12 || b3.norm() < 1e-12) {
        throw GeometryError("dihedral: zero-length bond vector");
    }
    const Vec3 n1 = b1.cross(b2);
    const Vec3 n2 = b2.cross(b3);
    const double y = b2.norm() * b1.dot(n2);
    const double x = n1.dot(n2);
    double angle = std::atan2(y, x);
    if (angle <= -kPi) angle = kPi;
    return angle;
}

Mat3 rotation_exp(const AxisAngle& aa) {
    const double norm = aa.axis.norm();
    if (std::abs(norm - 1.0) > 1e-9) throw GeometryError("rotation_exp: axis is not unit length");
    return rotation_exp(Vec3(aa.axis / norm * aa.angle));
}

Mat3 rotation_exp(const Vec3& rotvec) {
    const double theta = rotvec.norm();
    const Mat3 k = hat(rotvec);
    if (theta < 1e-8) {
        // Second-order Taylor expansion of Rodrigues' formula.
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * k + b * k * k;
}

AxisAngle rotation_log(const Mat3& r) {
    const Vec3 w = vee_antisymmetric(r);
    const double s = w.norm();
    const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::atan2(s, c);

    AxisAngle out;
    if (s < 1e-300 && c > 0.0) return out;
    if (std::sin(theta) > 1e-4) {
        out.axis = w / s;
        out.angle = theta;
        return out;
    }
    // Near pi: recover the axis from the symmetric part (1 - cos) u u^T.
    const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
    Eigen::Index j = 0;
    b.diagonal().maxCoeff(&j);
    Vec3 axis = b.col(j);
    if (axis.norm() < 1e-300) {
        // theta is numerically 0 (c > 0 branch above did not trigger).
        return out;
    }
    axis.normalize();
    const double side = axis.dot(w);
    if (std::abs(side) > 1e-14) {
        if (side < 0) axis = -axis;
    } else {
        for (int k = 0; k < 3; ++k) {
            if (std::abs(axis[k]) > 1e-12) {
                if (axis[k] < 0) axis = -axis;
                break;
            }
        }
    }
    out.axis = axis;
    out.angle = theta;
    return out;
}

Vec3 rotation_log_vector(const Mat3& r) {
    const AxisAngle aa = rotation_log(r);
    return aa.axis * aa.angle;
}

Mat3 scale_rotation(const Mat3& r, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw GeometryError("scale_rotation: lambda outside [0, 1]");
    if (lambda == 1.0) return r;
    if (lambda == 0.0) return Mat3::Identity();
    const AxisAngle aa = rotation_log(r);
    return rotation_exp(Vec3(aa.axis * (aa.angle * lambda)));
}

double geodesic_distance(const Mat3& a, const Mat3& b) { return rotation_log(a.transpose() * b).angle; }

Mat3 frechet_mean(std::span<const Mat3> rotations, int max_iterations) {
    if (rotations.empty()) throw GeometryError("frechet_mean: no rotations");
    Mat3 mean = rotations.front();
    for (int it = 0; it < max_iterations; ++it) {
        Vec3 step = Vec3::Zero();
        for (const Mat3& r : rotations) step += rotation_log_vector(mean.transpose() * r);
        step /= static_cast<double>(rotations.size());
        mean = mean * rotation_exp(step);
        if (step.norm() < 1e-12) break;
    }
    return mean;
}

Vec3 random_unit_vector(Rng& rng) {
    Vec3 v;
    do {
        v = Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    } while (v.norm() < 1e-12);
    return v.normalized();
}

Mat3 random_rotation(Rng& rng) {
    Eigen::Vector4d q;
    do {
        q = Eigen::Vector4d(standard_normal(rng), standard_normal(rng), standard_normal(rng),
                            standard_normal(rng));
    } while (q.norm() < 1e-12);
    q.normalize();
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

RbfGrid RbfGrid::uniform(std::size_t count, double lo, double hi) {
    if (count < 2 || !(hi > lo)) throw GeometryError("RbfGrid: need at least two centres on a proper interval");
    RbfGrid grid;
    const double spacing = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) grid.centers.push_back(lo + spacing * static_cast<double>(k));
    grid.width = spacing;
    return grid;
}

void gaussian_rbf_encode(double distance, const RbfGrid& grid, std::span<double> out) {
    if (!(distance >= 0.0)) throw GeometryError("gaussian_rbf_encode: negative or NaN distance");
    if (out.size() != grid.centers.size()) throw GeometryError("gaussian_rbf_encode: output width mismatch");
    const double inv = 1.0 / (2.0 * grid.width * grid.width);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double d = distance - grid.centers[k];
        out[k] = std::exp(-d * d * inv);
    }
}

std::vector<double> gaussian_rbf_encode(double distance, const RbfGrid& grid) {
    std::vector<double> out(grid.centers.size());
    gaussian_rbf_encode(distance, grid, out);
    return out;
}

Vec3 vector_rejection(const Vec3& v, const Vec3& r) {
    const double rr = r.squaredNorm();
    if (r.norm() < 1e-12) throw GeometryError("vector_rejection: reference vector is zero");
    return v - (v.dot(r) / rr) * r;
}

Vec3 ideal_cb(const Vec3& n, const Vec3& ca, const Vec3& c) {
    const Vec3 b = ca - n;
    const Vec3 cc = c - ca;
    const Vec3 a = b.cross(cc);
    return -0.58273431 * a + 0.56802827 * b - 0.54067466 * cc + ca;
}

Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double angle, double torsion) {
    const Vec3 bc = (c - b).normalized();
    Vec3 n = (b - a).cross(bc);
    if (n.norm() < 1e-12) throw GeometryError("place_atom: reference atoms are collinear");
    n.normalize();
    const Vec3 m = n.cross(bc);
    const Vec3 d2(-bond * std::cos(angle), bond * std::sin(angle) * std::cos(torsion),
                  bond * std::sin(angle) * std::sin(torsion));
    return c + d2.x() * bc + d2.y() * m + d2.z() * n;
}

const IdealResidue& ideal_residue() {
    static const IdealResidue ideal = [] {
        constexpr double kNCa = 1.458, kCaC = 1.525, kCO = 1.231;
        const double angle_n_ca_c = 111.2 * kPi / 180.0;
        const double angle_ca_c_o = 120.8 * kPi / 180.0;
        IdealResidue r;
        r.c = Vec3(kCaC, 0.0, 0.0);
        r.n = Vec3(kNCa * std::cos(angle_n_ca_c), kNCa * std::sin(angle_n_ca_c), 0.0);
        // Carbonyl O in the N-CA-C plane, on the side away from N.
        r.o = r.c + kCO * Vec3(-std::cos(angle_ca_c_o), -std::sin(angle_ca_c_o), 0.0);
        r.cb = ideal_cb(r.n, Vec3::Zero(), r.c);
        return r;
    }();
    return ideal;
}

void write_row_major(const Mat3& m, double* out) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i * 3 + j] = m(i, j);
}

}  // namespace cdrdiff::geom
