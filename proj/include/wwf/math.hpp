#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wwf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInvPi = std::numbers::inv_pi;

// Clamped dot product, written <a.b> in the shading equations.
inline double cdot(const Vec3& a, const Vec3& b) {
    return std::max(0.0, a.dot(b));
}

// Reflects a direction through the z = 0 plane.
inline Vec3 mirror_z(const Vec3& w) {
    return {w.x(), w.y(), -w.z()};
}

inline double wrap01(double x) {
    double f = x - std::floor(x);
    return f >= 1.0 ? 0.0 : f;
}

// Rodrigues rotation of v about the unit axis k by angle (radians).
inline Vec3 rotate_about(const Vec3& v, const Vec3& k, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c));
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }

// Builds an orthonormal frame (x, y, z) with z = n and x as close as possible to t.
struct Frame {
    Vec3 x, y, z;

    static Frame from_normal_tangent(const Vec3& n, const Vec3& t) {
        Frame f;
        f.z = n;
        Vec3 tx = t - n * n.dot(t);
        if (tx.squaredNorm() < 1e-20) {
            tx = std::abs(n.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
            tx -= n * n.dot(tx);
        }
        f.x = tx.normalized();
        f.y = f.z.cross(f.x);
        return f;
    }

    Vec3 to_local(const Vec3& w) const { return {w.dot(x), w.dot(y), w.dot(z)}; }
    Vec3 to_world(const Vec3& w) const { return x * w.x() + y * w.y() + z * w.z(); }
};

}  // namespace wwf
