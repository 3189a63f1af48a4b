// Radar measurement model: polar-to-Cartesian conversion, its Jacobians and
// the pose-inflated Cartesian measurement covariance.
#pragma once

#include <vector>

#include "eslam/geometry.hpp"

namespace eslam {

// One radar detection relative to the platform: range (m) and azimuth (rad,
// measured from the platform heading, in (-pi, pi]).
struct PolarDetection {
  double range = 0.0;
  double azimuth = 0.0;
};

// Platform pose belief: mean [x, y, theta] and 3x3 covariance.
struct PoseBelief {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
};

// Converted detection in the global frame with its per-measurement covariance.
struct CartesianMeasurement {
  Vec2 z = Vec2::Zero();
  Mat2 w = Mat2::Zero();
};

// One odometer reading over a scan interval.  bias_v / bias_omega carry the
// generative bias for provenance; the filter never reads them.
struct OdometryInput {
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s
  double dt = 0.0;     // s, > 0
  double bias_v = 0.0;
  double bias_omega = 0.0;
};

// z = [x + r cos(theta + phi), y + r sin(theta + phi)].
inline Vec2 polar_to_cartesian(const Vec3& pose, const PolarDetection& s) {
  const double b = pose.z() + s.azimuth;
  return Vec2(pose.x() + s.range * std::cos(b), pose.y() + s.range * std::sin(b));
}

// Jacobian of the conversion with respect to the pose [x, y, theta].
inline Mat23 jacobian_wrt_pose(const Vec3& pose, const PolarDetection& s) {
  const double b = pose.z() + s.azimuth;
  Mat23 j;
  j << 1.0, 0.0, -s.range * std::sin(b), 0.0, 1.0, s.range * std::cos(b);
  return j;
}

// Jacobian of the conversion with respect to the detection [r, phi].
inline Mat2 jacobian_wrt_meas(const Vec3& pose, const PolarDetection& s) {
  const double b = pose.z() + s.azimuth;
  Mat2 j;
  j << std::cos(b), -s.range * std::sin(b), std::sin(b), s.range * std::cos(b);
  return j;
}

// W_i = Jx P Jx^T + Js R Js^T, the converted-measurement covariance fed by
// both the platform pose uncertainty and the polar sensor noise R.
inline Mat2 cartesian_noise(const PoseBelief& pose, const PolarDetection& s, const Mat2& sensor_noise) {
  const Mat23 jx = jacobian_wrt_pose(pose.mean, s);
  const Mat2 js = jacobian_wrt_meas(pose.mean, s);
  Mat2 w = jx * pose.cov * jx.transpose() + js * sensor_noise * js.transpose();
  return 0.5 * (w + w.transpose().eval());
}

// "Maximum" of a set of covariances, taken as the member with the largest
// trace.  The list must be non-empty.
inline Mat2 aggregate_noise(const std::vector<Mat2>& ws) {
  const Mat2* best = &ws.front();
  double best_trace = best->trace();
  for (const Mat2& w : ws) {
    const double t = w.trace();
    if (t > best_trace) {
      best_trace = t;
      best = &w;
    }
  }
  return *best;
}

}  // namespace eslam
