// 2D ellipse / SPD-matrix algebra shared by the extent filter, the
// association gates and the evaluation metric.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace eslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w = M_PI;
  return w;
}

// Wraps an ellipse orientation to [-pi/2, pi/2); an ellipse is invariant
// under a half-turn of its axes.
inline double wrap_orientation(double a) {
  double w = std::remainder(a, M_PI);
  if (w >= M_PI / 2.0) w -= M_PI;
  if (w < -M_PI / 2.0) w += M_PI;
  return w;
}

inline Mat2 rotation2(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

// Ellipse as semi-axis lengths plus orientation of the major axis.
struct EllipseParams {
  double semi_major = 1.0;   // m
  double semi_minor = 1.0;   // m
  double orientation = 0.0;  // rad from x-axis, in [-pi/2, pi/2)
};

// X = R(o) diag(a^2, b^2) R(o)^T.  Semi-axis convention: the contour
// {u : u^T X^-1 u = 1} is the ellipse itself, and the covariance of the
// uniform law over the solid ellipse is exactly X/4.
inline Mat2 params_to_spd(const EllipseParams& e) {
  const Mat2 r = rotation2(e.orientation);
  const Mat2 d = Vec2(e.semi_major * e.semi_major, e.semi_minor * e.semi_minor).asDiagonal();
  return r * d * r.transpose();
}

// Inverse of params_to_spd via eigendecomposition.  Near-degenerate input
// (eigenvalue gap below tol) ties the orientation to 0.
inline EllipseParams spd_to_params(const Mat2& x, double degenerate_tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(x);
  const Vec2 ev = es.eigenvalues();  // ascending
  EllipseParams p;
  p.semi_major = std::sqrt(std::max(ev(1), 0.0));
  p.semi_minor = std::sqrt(std::max(ev(0), 0.0));
  if (ev(1) - ev(0) < degenerate_tol) {
    p.orientation = 0.0;
  } else {
    const Vec2 major = es.eigenvectors().col(1);
    p.orientation = wrap_orientation(std::atan2(major.y(), major.x()));
  }
  return p;
}

// Principal square root of an SPD matrix.
inline Mat2 spd_sqrt(const Mat2& x) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(x);
  const Vec2 ev = es.eigenvalues();
  const Vec2 s(std::sqrt(std::max(ev(0), 0.0)), std::sqrt(std::max(ev(1), 0.0)));
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

// Inverse square root with an eigenvalue floor, so near-singular inputs are
// regularized instead of blowing up.
inline Mat2 spd_inv_sqrt(const Mat2& x, double eigen_floor = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(x);
  const Vec2 ev = es.eigenvalues();
  const Vec2 s(1.0 / std::sqrt(std::max(ev(0), eigen_floor)),
               1.0 / std::sqrt(std::max(ev(1), eigen_floor)));
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

// True iff (p-c)^T (scale*X)^-1 (p-c) <= 1.
inline bool point_in_ellipse(const Vec2& p, const Vec2& center, const Mat2& x, double scale = 1.0) {
  const Vec2 d = p - center;
  const Mat2 m = scale * x;
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double q =
      (d.x() * (m(1, 1) * d.x() - m(0, 1) * d.y()) + d.y() * (m(0, 0) * d.y() - m(1, 0) * d.x())) /
      det;
  return q <= 1.0;
}

// Gaussian Wasserstein (GW-2) distance between two (center, extent) pairs:
//   d^2 = |c1-c2|^2 + tr(X1 + X2 - 2 (X1^1/2 X2 X1^1/2)^1/2).
// Tiny negative residue from rounding is clamped to zero before the root.
inline double gwd(const Vec2& c1, const Mat2& x1, const Vec2& c2, const Mat2& x2) {
  const Mat2 s1 = spd_sqrt(x1);
  Mat2 cross = s1 * x2 * s1;
  cross = 0.5 * (cross + cross.transpose().eval());
  const double d2 = (c1 - c2).squaredNorm() + (x1 + x2).trace() - 2.0 * spd_sqrt(cross).trace();
  return std::sqrt(std::max(d2, 0.0));
}

}  // namespace eslam
