// Landmark extent estimation: coarse ellipsoid-fitting initializer (also the
// model-free baseline) and the Bayesian random-matrix predict/update cycle.
#pragma once

#include <deque>
#include <vector>

#include "eslam/geometry.hpp"

namespace eslam {

// Random-matrix extent state: SPD extent matrix X plus the scalar confidence
// alpha.  alpha stays above 2; prediction decays it toward that asymptote and
// every update adds the batch size.
struct ExtentState {
  Mat2 x = Mat2::Identity();
  double alpha = 50.0;
};

// One scan's worth of detections associated to a single landmark, already
// converted to the global frame, with the scan-aggregated conversion noise.
struct MeasurementBatch {
  std::vector<Vec2> points;
  Mat2 w = Mat2::Zero();

  std::size_t count() const { return points.size(); }
};

// Coarse ellipse fit from a point cloud: orientation from the principal axes
// of the sample scatter, semi-axis lengths as half the range of the point
// projections on each axis.  Degenerate (near-collinear) clouds get their
// minor axis clamped to axis_floor.
inline EllipseParams efa_fit(const std::vector<Vec2>& points, double axis_floor = 0.05) {
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : points) mean += p;
  mean /= static_cast<double>(points.size());

  Mat2 scatter = Mat2::Zero();
  for (const Vec2& p : points) {
    const Vec2 d = p - mean;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat2> es(scatter);
  Vec2 axis_minor = es.eigenvectors().col(0);
  Vec2 axis_major = es.eigenvectors().col(1);

  double lo0 = 0.0, hi0 = 0.0, lo1 = 0.0, hi1 = 0.0;
  for (const Vec2& p : points) {
    const Vec2 d = p - mean;
    const double u = axis_major.dot(d);
    const double v = axis_minor.dot(d);
    hi1 = std::max(hi1, u);
    lo1 = std::min(lo1, u);
    hi0 = std::max(hi0, v);
    lo0 = std::min(lo0, v);
  }
  double a = 0.5 * (hi1 - lo1);
  double b = 0.5 * (hi0 - lo0);
  if (b > a) {
    std::swap(a, b);
    std::swap(axis_major, axis_minor);
  }

  EllipseParams out;
  out.semi_minor = std::max(b, axis_floor);
  out.semi_major = std::max(a, out.semi_minor);
  out.orientation = wrap_orientation(std::atan2(axis_major.y(), axis_major.x()));
  return out;
}

// Extent initialization once the caller has accumulated enough associated
// measurements (the N_i gate lives with the caller).
inline ExtentState init_extent(const std::vector<Vec2>& points, double alpha0) {
  return ExtentState{params_to_spd(efa_fit(points)), alpha0};
}

// Extent prediction: X is held constant, the confidence decays toward 2 with
// temporal decay constant tau.
inline ExtentState predict_extent(const ExtentState& e, double dt, double tau) {
  return ExtentState{e.x, 2.0 + std::exp(-dt / tau) * (e.alpha - 2.0)};
}

// Random-matrix extent update for one batch.  centroid / centroid_cov are the
// landmark's PREDICTED position mean and covariance for this scan, read off
// before the EKF landmark update.  gamma_z scales the extent's contribution
// to the single-measurement spread.
inline ExtentState update_extent(const ExtentState& e, const MeasurementBatch& batch,
                                 const Vec2& centroid, const Mat2& centroid_cov, double gamma_z) {
  const double m = static_cast<double>(batch.count());

  Vec2 zbar = Vec2::Zero();
  for (const Vec2& z : batch.points) zbar += z;
  zbar /= m;

  Mat2 spread = Mat2::Zero();
  for (const Vec2& z : batch.points) {
    const Vec2 d = z - zbar;
    spread += d * d.transpose();
  }

  const Mat2 y = gamma_z * e.x + batch.w;
  const Vec2 off = zbar - centroid;
  const Mat2 mean_offset = off * off.transpose();
  const Mat2 s = centroid_cov + y / m;

  const Mat2 x_sqrt = spd_sqrt(e.x);
  const Mat2 a = x_sqrt * spd_inv_sqrt(s);
  const Mat2 b = x_sqrt * spd_inv_sqrt(y);

  const Mat2 m_hat = a * mean_offset * a.transpose();
  const Mat2 y_hat = b * spread * b.transpose();

  ExtentState out;
  out.alpha = e.alpha + m;
  out.x = (e.alpha * e.x + m_hat + y_hat) / out.alpha;
  out.x = 0.5 * (out.x + out.x.transpose().eval());
  return out;
}

// Rolling history of associated measurements backing the model-free EFA
// baseline; the fit is recomputed from the window at each step.
class EfaWindow {
 public:
  explicit EfaWindow(std::size_t capacity = 100) : capacity_(capacity) {}

  void push(const std::vector<Vec2>& points) {
    for (const Vec2& p : points) {
      buffer_.push_back(p);
      if (buffer_.size() > capacity_) buffer_.pop_front();
    }
  }

  std::size_t size() const { return buffer_.size(); }

  std::vector<Vec2> points() const { return {buffer_.begin(), buffer_.end()}; }

 private:
  std::deque<Vec2> buffer_;
  std::size_t capacity_;
};

// Model-free baseline step: re-fit the ellipse from the accumulated history.
inline EllipseParams efa_baseline_step(const EfaWindow& history) {
  return efa_fit(history.points());
}

}  // namespace eslam
