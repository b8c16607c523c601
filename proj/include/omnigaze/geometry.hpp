#pragma once

namespace omnigaze {

// Gaze as horizontal (yaw) and vertical (pitch) angles, radians.
// Canonical range: yaw in [-pi, pi), pitch in [-pi/2, pi/2].
struct SphericalGaze {
    float yaw = 0.0f;
    float pitch = 0.0f;
};

// Unit 3-vector form of a gaze direction.
struct DirectionVector {
    float x = 0.0f;
    float y = 0.0f;
    float z = 1.0f;
};

struct AngularErrorDeg {
    float value = 0.0f;  // in [0, 180]
};

// (cos(pitch)*sin(yaw), sin(pitch), cos(pitch)*cos(yaw)); unit norm.
// Throws InvalidArgument on non-finite input.
DirectionVector to_direction(const SphericalGaze& g);

// Inverse map: yaw = atan2(x, z), pitch = asin(clamp(y, -1, 1)).
// At the poles (pitch = +-pi/2) yaw degenerates; returns yaw = 0 there.
// Throws InvalidArgument on the zero vector.
SphericalGaze to_spherical(const DirectionVector& v);

// arccos(clamp(a.b, -1, 1)) in degrees. Symmetric; inputs must be unit-norm.
AngularErrorDeg angular_error(const DirectionVector& a, const DirectionVector& b);

// Dot product of the two direction vectors, clamped to [-1, 1].
float cosine_sim(const SphericalGaze& a, const SphericalGaze& b);

}  // namespace omnigaze
