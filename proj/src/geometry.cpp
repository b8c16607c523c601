#include "omnigaze/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "omnigaze/errors.hpp"

namespace omnigaze {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRadToDeg = 180.0 / kPi;

bool finite(float v) { return std::isfinite(v); }
}  // namespace

DirectionVector to_direction(const SphericalGaze& g) {
    if (!finite(g.yaw) || !finite(g.pitch))
        throw InvalidArgument("to_direction: non-finite gaze angles");
    // Trig in double so the f32 result is comfortably unit-norm.
    const double cp = std::cos(static_cast<double>(g.pitch));
    const double sp = std::sin(static_cast<double>(g.pitch));
    const double sy = std::sin(static_cast<double>(g.yaw));
    const double cy = std::cos(static_cast<double>(g.yaw));
    return DirectionVector{static_cast<float>(cp * sy), static_cast<float>(sp),
                           static_cast<float>(cp * cy)};
}

SphericalGaze to_spherical(const DirectionVector& v) {
    const double x = v.x, y = v.y, z = v.z;
    if (!finite(v.x) || !finite(v.y) || !finite(v.z))
        throw InvalidArgument("to_spherical: non-finite direction");
    const double norm = std::sqrt(x * x + y * y + z * z);
    if (norm < 1e-8) throw InvalidArgument("to_spherical: zero direction vector");
    const double yc = std::clamp(y, -1.0, 1.0);
    const double pitch = std::asin(yc);
    // Pole: x and z both ~0, yaw unidentifiable; canonicalize to 0.
    double yaw = 0.0;
    if (std::abs(x) > 1e-12 || std::abs(z) > 1e-12) yaw = std::atan2(x, z);
    return SphericalGaze{static_cast<float>(yaw), static_cast<float>(pitch)};
}

AngularErrorDeg angular_error(const DirectionVector& a, const DirectionVector& b) {
    const double na = std::sqrt(static_cast<double>(a.x) * a.x + static_cast<double>(a.y) * a.y +
                                static_cast<double>(a.z) * a.z);
    const double nb = std::sqrt(static_cast<double>(b.x) * b.x + static_cast<double>(b.y) * b.y +
                                static_cast<double>(b.z) * b.z);
    if (na < 1e-8 || nb < 1e-8) throw InvalidArgument("angular_error: zero direction vector");
    const double dot = static_cast<double>(a.x) * b.x + static_cast<double>(a.y) * b.y +
                       static_cast<double>(a.z) * b.z;
    const double c = std::clamp(dot, -1.0, 1.0);
    return AngularErrorDeg{static_cast<float>(std::acos(c) * kRadToDeg)};
}

float cosine_sim(const SphericalGaze& a, const SphericalGaze& b) {
    const DirectionVector va = to_direction(a);
    const DirectionVector vb = to_direction(b);
    const double dot = static_cast<double>(va.x) * vb.x + static_cast<double>(va.y) * vb.y +
                       static_cast<double>(va.z) * vb.z;
    return static_cast<float>(std::clamp(dot, -1.0, 1.0));
}

}  // namespace omnigaze
