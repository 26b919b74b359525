#pragma once

// Force-feedback cable following: the servo must pay out cable as the finger
// flexes and retract it as the finger extends. The cable path is a chain of
// straight segments between guide points riding on the phalanx frames; its
// length determines the servo flange angle.
//
//   T_{n-1,n} = rot_z(theta_n) with translation (-l_{n-1}, 0, 0)
//   A-points map through T01, B-points through T01*T12, C-points through
//   T01*T12*T23; La = sum of the six consecutive segment lengths + sigma;
//   theta_s = La / rs.

#include <Eigen/Dense>
#include <array>
#include <stdexcept>

#include "exoglove/model.hpp"

namespace exoglove {

// Joint angles (theta1..theta3) used by the path transforms, radians.
struct FingerPose {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
};

// Homogeneous transform from joint frame n-1 to n: rotation by theta_n about
// z, origin offset -l_{n-1} along x.
inline Eigen::Matrix4d frame_transform(int n, double theta_n, double l_prev) {
  if (n < 1 || n > 3) throw std::invalid_argument("joint index must be in 1..3");
  const double c = std::cos(theta_n);
  const double s = std::sin(theta_n);
  Eigen::Matrix4d t;
  t << c, -s, 0.0, -l_prev,
       s,  c, 0.0,  0.0,
       0.0, 0.0, 1.0, 0.0,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

// The cable path of one finger at one pose: guide points in base
// coordinates, total length, and the corresponding servo flange angle.
struct CablePath {
  std::array<Eigen::Vector3d, kRoutingPointCount> global_points;
  double length_mm = 0.0;    // La
  double servo_angle = 0.0;  // theta_s = La / rs, radians
};

inline CablePath cable_length(const FingerPose& pose, const GloveGeometry& geometry,
                              Finger finger = Finger::Index) {
  const auto& routing = geometry.routing[static_cast<int>(finger)];
  if (routing.size() != kRoutingPointCount)
    throw ConfigValidationError("geometry.routing." +
                                std::string(finger_name(static_cast<int>(finger))) +
                                " must have exactly 7 points");

  const Eigen::Matrix4d t01 = frame_transform(1, pose.theta1, geometry.l0);
  const Eigen::Matrix4d t12 = frame_transform(2, pose.theta2, geometry.l1);
  const Eigen::Matrix4d t23 = frame_transform(3, pose.theta3, geometry.l2);
  const std::array<Eigen::Matrix4d, 4> to_base = {
      Eigen::Matrix4d::Identity(), t01, t01 * t12, t01 * t12 * t23};

  CablePath path;
  for (int i = 0; i < kRoutingPointCount; ++i) {
    const RoutingPoint& p = routing[i];
    const Eigen::Vector4d local(p.x, p.y, p.z, 1.0);
    path.global_points[i] = (to_base[p.frame] * local).head<3>();
  }
  double sum = 0.0;
  for (int i = 0; i + 1 < kRoutingPointCount; ++i)
    sum += (path.global_points[i + 1] - path.global_points[i]).norm();
  path.length_mm = sum + geometry.sigma;
  path.servo_angle = path.length_mm / geometry.rs;
  return path;
}

// Absolute servo flange angle for a pose.
inline double servo_target(const FingerPose& pose, const GloveGeometry& geometry,
                           Finger finger = Finger::Index) {
  return cable_length(pose, geometry, finger).servo_angle;
}

// Payout command relative to the flat pose; positive = pay out cable.
inline double servo_target_delta(const FingerPose& pose, const GloveGeometry& geometry,
                                 Finger finger = Finger::Index) {
  return servo_target(pose, geometry, finger) - servo_target(FingerPose{}, geometry, finger);
}

}  // namespace exoglove
