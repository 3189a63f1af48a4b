// Augmented-state EKF-SLAM over platform pose and landmark centroids, with
// per-landmark extent estimation running alongside the filter.  The extent is
// kept outside the EKF state vector; it couples back through the association
// gate and the extent-calibrated measurement covariance.
#pragma once

#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "eslam/extent_filter.hpp"
#include "eslam/measurement.hpp"

namespace eslam {

// Stacked mean [x y theta | p1 | ... | pN] with the joint covariance.
struct AugmentedBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  static AugmentedBelief init(const Vec3& pose, const Mat3& pose_cov) {
    AugmentedBelief b;
    b.mean = pose;
    b.cov = pose_cov;
    return b;
  }

  int num_landmarks() const { return static_cast<int>((mean.size() - 3) / 2); }
  Vec3 pose() const { return mean.head<3>(); }
  Mat3 pose_cov() const { return cov.topLeftCorner<3, 3>(); }
  Vec2 landmark(int slot) const { return mean.segment<2>(3 + 2 * slot); }
  Mat2 landmark_cov(int slot) const { return cov.block<2, 2>(3 + 2 * slot, 3 + 2 * slot); }

  void symmetrize() { cov = 0.5 * (cov + cov.transpose().eval()); }
};

enum class LandmarkStatus { candidate, confirmed };

// Book-keeping for one landmark through its life: candidate position and
// confirmation window, slot in the joint state once confirmed, accumulated
// points for extent initialization, and the two extent estimators.
struct LandmarkRecord {
  int id = 0;
  LandmarkStatus status = LandmarkStatus::candidate;
  int slot = -1;  // index into AugmentedBelief once confirmed

  Vec2 candidate_pos = Vec2::Zero();
  std::deque<bool> confirm_window;  // hit/miss over the last confirm_n scans
  int consecutive_misses = 0;

  std::vector<Vec2> init_buffer;  // associated points until extent init
  EfaWindow efa_window{100};
  std::optional<ExtentState> rma;
  std::optional<EllipseParams> efa;

  // Extent used for gating / measurement calibration: the random-matrix
  // estimate when present, otherwise the fitted baseline.
  std::optional<Mat2> active_extent() const {
    if (rma) return rma->x;
    if (efa) return params_to_spd(*efa);
    return std::nullopt;
  }
};

enum class SiftMode { threshold, extent };

struct SlamConfig {
  Mat2 sensor_noise = Vec2(0.15 * 0.15, std::pow(M_PI / 180.0, 2)).asDiagonal();
  Mat2 control_noise = Vec2(0.1 * 0.1, 0.02 * 0.02).asDiagonal();

  double gate_threshold = 2.5;     // m, Euclidean sifting gate
  double extent_gate_scale = 1.0;  // contour scale on X for extent sifting
  double chi2_gate = 9.210340371976182;  // chi-square 2 dof, 99%
  double default_spread = 0.7;     // m^2, isotropic spread used without extent

  double cluster_radius = 1.5;  // m, single-linkage radius for new candidates
  int min_cluster_size = 3;
  int confirm_m = 3;
  int confirm_n = 5;
  int max_misses = 10;

  int n_init = 20;       // measurements accumulated before extent init
  double tau = 100.0;    // s, extent confidence decay constant
  double alpha0 = 50.0;  // initial extent confidence
  double gamma_z = 0.25; // extent share of the single-measurement spread

  bool exploit_extent = true;  // extent gating + calibrated update covariance
  bool run_rma = true;
  bool run_efa = true;

  // sensor limits the filter assumes when counting in-FoV misses
  double sensor_range = 50.0;
  double sensor_fov = 2.0 * M_PI;
};

// EKF-SLAM prediction: unicycle-model propagation of the platform block, with
// landmark blocks and their cross terms carried along.
inline AugmentedBelief predict(const AugmentedBelief& belief, const OdometryInput& u,
                               const Mat2& control_noise) {
  AugmentedBelief b = belief;
  const double th = b.mean(2);
  const double c = std::cos(th), s = std::sin(th);

  b.mean(0) += u.v * u.dt * c;
  b.mean(1) += u.v * u.dt * s;
  b.mean(2) = wrap_angle(th + u.omega * u.dt);

  Mat3 f = Mat3::Identity();
  f(0, 2) = -u.v * u.dt * s;
  f(1, 2) = u.v * u.dt * c;
  Eigen::Matrix<double, 3, 2> g;
  g << u.dt * c, 0.0, u.dt * s, 0.0, 0.0, u.dt;

  const int n = static_cast<int>(b.mean.size()) - 3;
  b.cov.topLeftCorner<3, 3>() =
      f * b.cov.topLeftCorner<3, 3>() * f.transpose() + g * control_noise * g.transpose();
  if (n > 0) {
    b.cov.topRightCorner(3, n) = f * b.cov.topRightCorner(3, n);
    b.cov.bottomLeftCorner(n, 3) = b.cov.topRightCorner(3, n).transpose();
  }
  b.symmetrize();
  return b;
}

struct SiftResult {
  std::vector<std::vector<int>> batches;  // per record: indices into the scan
  std::vector<int> unassociated;
};

// Assigns each converted detection to at most one confirmed landmark.
// threshold mode: within the Euclidean gate of the nearest landmark.
// extent mode: inside the (scaled) extent contour for landmarks that have an
// extent, falling back to the threshold gate for those that do not; the
// nearest passing landmark wins.
inline SiftResult sift(const std::vector<CartesianMeasurement>& scan,
                       const std::vector<LandmarkRecord>& records, const AugmentedBelief& belief,
                       SiftMode mode, const SlamConfig& cfg) {
  SiftResult out;
  out.batches.resize(records.size());
  for (int i = 0; i < static_cast<int>(scan.size()); ++i) {
    const Vec2& z = scan[i].z;
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (records[r].status != LandmarkStatus::confirmed) continue;
      const Vec2 centroid = belief.landmark(records[r].slot);
      const double dist = (z - centroid).norm();
      bool pass = false;
      std::optional<Mat2> extent;
      if (mode == SiftMode::extent) extent = records[r].active_extent();
      if (extent) {
        pass = point_in_ellipse(z, centroid, *extent, cfg.extent_gate_scale);
      } else {
        pass = dist <= cfg.gate_threshold;
      }
      if (pass && dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(r);
      }
    }
    if (best >= 0) {
      out.batches[best].push_back(i);
    } else {
      out.unassociated.push_back(i);
    }
  }
  return out;
}

enum class UpdateOutcome { updated, gated };

// EKF update of one landmark with the batch-mean pseudo-measurement.  The
// measurement covariance is (gamma_z X + W)/m when an extent is available and
// exploited, otherwise W/m plus the fixed default spread.  Innovations beyond
// the chi-square gate are rejected.
inline UpdateOutcome update_landmark(AugmentedBelief& belief, const LandmarkRecord& record,
                                     const MeasurementBatch& batch, const SlamConfig& cfg) {
  const double m = static_cast<double>(batch.count());
  Vec2 zbar = Vec2::Zero();
  for (const Vec2& z : batch.points) zbar += z;
  zbar /= m;

  Mat2 meas_cov;
  const std::optional<Mat2> extent = record.active_extent();
  if (cfg.exploit_extent && extent) {
    meas_cov = (cfg.gamma_z * (*extent) + batch.w) / m;
  } else {
    meas_cov = batch.w / m + cfg.default_spread * Mat2::Identity();
  }

  const int c = 3 + 2 * record.slot;
  const Mat2 s = belief.cov.block<2, 2>(c, c) + meas_cov;
  const Vec2 nu = zbar - belief.mean.segment<2>(c);
  const Mat2 s_inv = s.inverse();
  if (nu.dot(s_inv * nu) > cfg.chi2_gate) return UpdateOutcome::gated;

  const Eigen::MatrixXd k = belief.cov.middleCols<2>(c) * s_inv;
  belief.mean += k * nu;
  belief.mean(2) = wrap_angle(belief.mean(2));
  belief.cov -= k * s * k.transpose();
  belief.symmetrize();
  return UpdateOutcome::updated;
}

namespace detail {

// Single-linkage clustering with the given merge radius; clusters come out
// ordered by their smallest member index.
inline std::vector<std::vector<int>> single_linkage(const std::vector<Vec2>& points,
                                                    double radius) {
  const int n = static_cast<int>(points.size());
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((points[i] - points[j]).norm() <= radius) {
        const int a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<std::vector<int>> clusters;
  std::vector<int> root_to_cluster(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (root_to_cluster[r] < 0) {
      root_to_cluster[r] = static_cast<int>(clusters.size());
      clusters.emplace_back();
    }
    clusters[root_to_cluster[r]].push_back(i);
  }
  return clusters;
}

// Appends a freshly confirmed landmark to the joint state.  The new block is
// seeded from the accumulated point mean through the conversion Jacobians, so
// it starts correlated with the platform pose.
inline void augment_belief(AugmentedBelief& belief, const Vec2& position, std::size_t num_points,
                           const SlamConfig& cfg) {
  const Vec3 pose = belief.pose();
  const Vec2 d = position - pose.head<2>();
  const PolarDetection rep{d.norm(), wrap_angle(std::atan2(d.y(), d.x()) - pose.z())};
  const Mat23 jx = jacobian_wrt_pose(pose, rep);
  const Mat2 js = jacobian_wrt_meas(pose, rep);

  const double q = static_cast<double>(std::max<std::size_t>(num_points, 1));
  const Mat2 local =
      (js * cfg.sensor_noise * js.transpose() + cfg.default_spread * Mat2::Identity()) / q;
  const Mat2 p_ll = jx * belief.pose_cov() * jx.transpose() + local;

  const int n = static_cast<int>(belief.mean.size());
  belief.mean.conservativeResize(n + 2);
  belief.mean.tail<2>() = position;
  belief.cov.conservativeResize(n + 2, n + 2);
  belief.cov.bottomLeftCorner(2, n) = jx * belief.cov.topLeftCorner(3, n);
  belief.cov.topRightCorner(n, 2) = belief.cov.bottomLeftCorner(2, n).transpose();
  belief.cov.bottomRightCorner<2, 2>() = p_ll;
  belief.symmetrize();
}

// Removes a confirmed landmark's block from the joint state.
inline void remove_slot(AugmentedBelief& belief, int slot) {
  const int n = static_cast<int>(belief.mean.size());
  const int c = 3 + 2 * slot;
  Eigen::VectorXd mean(n - 2);
  mean << belief.mean.head(c), belief.mean.tail(n - c - 2);
  Eigen::MatrixXd cov(n - 2, n - 2);
  cov.topLeftCorner(c, c) = belief.cov.topLeftCorner(c, c);
  cov.topRightCorner(c, n - c - 2) = belief.cov.topRightCorner(c, n - c - 2);
  cov.bottomLeftCorner(n - c - 2, c) = belief.cov.bottomLeftCorner(n - c - 2, c);
  cov.bottomRightCorner(n - c - 2, n - c - 2) = belief.cov.bottomRightCorner(n - c - 2, n - c - 2);
  belief.mean = std::move(mean);
  belief.cov = std::move(cov);
}

}  // namespace detail

struct LifecycleLog {
  int new_candidates = 0;
  int confirmed = 0;
  int removed = 0;
};

// Landmark management for one scan: clusters the unassociated detections,
// feeds candidates (spawn / hit counting / m-of-n confirmation), retires
// confirmed landmarks after too many in-FoV misses, and initializes extents
// once enough points have accumulated.  associated[r] says whether record r
// received an accepted batch this scan; records are only erased in a final
// sweep so that indices stay aligned throughout.
inline LifecycleLog lifecycle(AugmentedBelief& belief, std::vector<LandmarkRecord>& records,
                              const std::vector<Vec2>& unassociated,
                              const std::vector<bool>& associated, const SlamConfig& cfg,
                              int& next_id) {
  LifecycleLog log;
  const std::size_t n_before = records.size();
  std::vector<bool> dead(n_before, false);
  std::vector<bool> candidate_hit(n_before, false);

  // miss counting for confirmed landmarks the sensor should have seen
  for (std::size_t r = 0; r < n_before; ++r) {
    LandmarkRecord& rec = records[r];
    if (rec.status != LandmarkStatus::confirmed) continue;
    if (r < associated.size() && associated[r]) {
      rec.consecutive_misses = 0;
      continue;
    }
    const Vec2 d = belief.landmark(rec.slot) - belief.pose().head<2>();
    const bool in_fov =
        d.norm() <= cfg.sensor_range &&
        std::abs(wrap_angle(std::atan2(d.y(), d.x()) - belief.pose().z())) <= cfg.sensor_fov / 2.0;
    if (in_fov && ++rec.consecutive_misses >= cfg.max_misses) dead[r] = true;
  }

  const auto clusters = detail::single_linkage(unassociated, cfg.cluster_radius);
  for (const auto& cluster : clusters) {
    Vec2 mean = Vec2::Zero();
    for (int i : cluster) mean += unassociated[i];
    mean /= static_cast<double>(cluster.size());

    // nearest pre-existing candidate within the cluster radius absorbs it
    int best = -1;
    double best_dist = cfg.cluster_radius;
    for (std::size_t r = 0; r < n_before; ++r) {
      if (records[r].status != LandmarkStatus::candidate || dead[r]) continue;
      const double dist = (records[r].candidate_pos - mean).norm();
      if (dist <= best_dist) {
        best_dist = dist;
        best = static_cast<int>(r);
      }
    }
    if (best >= 0) {
      LandmarkRecord& rec = records[best];
      for (int i : cluster) rec.init_buffer.push_back(unassociated[i]);
      Vec2 acc = Vec2::Zero();
      for (const Vec2& p : rec.init_buffer) acc += p;
      rec.candidate_pos = acc / static_cast<double>(rec.init_buffer.size());
      candidate_hit[best] = true;
      continue;
    }

    // spill-over next to an existing confirmed landmark is not a new object
    bool near_confirmed = false;
    for (std::size_t r = 0; r < n_before; ++r) {
      if (records[r].status != LandmarkStatus::confirmed || dead[r]) continue;
      if ((belief.landmark(records[r].slot) - mean).norm() <= cfg.cluster_radius) {
        near_confirmed = true;
        break;
      }
    }
    if (near_confirmed) continue;

    if (static_cast<int>(cluster.size()) >= cfg.min_cluster_size) {
      LandmarkRecord rec;
      rec.id = next_id++;
      rec.candidate_pos = mean;
      for (int i : cluster) rec.init_buffer.push_back(unassociated[i]);
      rec.confirm_window.push_back(true);  // the spawning scan is its first hit
      records.push_back(std::move(rec));
      ++log.new_candidates;
    }
  }

  // candidate windows: confirmation by m-of-n, pruning when the window fails
  for (std::size_t r = 0; r < records.size(); ++r) {
    LandmarkRecord& rec = records[r];
    if (rec.status != LandmarkStatus::candidate || (r < n_before && dead[r])) continue;
    if (r < n_before) {
      rec.confirm_window.push_back(candidate_hit[r]);
      while (static_cast<int>(rec.confirm_window.size()) > cfg.confirm_n)
        rec.confirm_window.pop_front();
    }
    const int hits =
        static_cast<int>(std::count(rec.confirm_window.begin(), rec.confirm_window.end(), true));
    if (hits >= cfg.confirm_m) {
      detail::augment_belief(belief, rec.candidate_pos, rec.init_buffer.size(), cfg);
      rec.slot = belief.num_landmarks() - 1;
      rec.status = LandmarkStatus::confirmed;
      rec.efa_window.push(rec.init_buffer);
      ++log.confirmed;
    } else if (r < n_before && static_cast<int>(rec.confirm_window.size()) >= cfg.confirm_n) {
      dead[r] = true;
    }
  }

  // extent initialization once the accumulated buffer clears the gate
  for (std::size_t r = 0; r < records.size(); ++r) {
    LandmarkRecord& rec = records[r];
    if (rec.status != LandmarkStatus::confirmed || (r < n_before && dead[r])) continue;
    if (static_cast<int>(rec.init_buffer.size()) < cfg.n_init) continue;
    if (cfg.run_rma && !rec.rma) rec.rma = init_extent(rec.init_buffer, cfg.alpha0);
    if (cfg.run_efa && !rec.efa) rec.efa = efa_fit(rec.init_buffer);
  }

  // sweep: drop dead records, removing confirmed slots from the joint state
  for (std::size_t r = n_before; r-- > 0;) {
    if (!dead[r]) continue;
    if (records[r].status == LandmarkStatus::confirmed) {
      detail::remove_slot(belief, records[r].slot);
      for (LandmarkRecord& other : records) {
        if (other.slot > records[r].slot) --other.slot;
      }
      ++log.removed;
    }
    records.erase(records.begin() + static_cast<long>(r));
  }
  return log;
}

struct StepLog {
  std::vector<int> assigned_landmark_id;  // per detection, -1 = unassociated
  int associated_detections = 0;
  int gated_batches = 0;
  LifecycleLog lifecycle;
};

// One full scan cycle: predict, convert + sift, extent prediction, EKF
// landmark updates, extent updates, lifecycle.  Deterministic given inputs.
inline StepLog step(AugmentedBelief& belief, std::vector<LandmarkRecord>& records,
                    const OdometryInput& odometry, const std::vector<PolarDetection>& scan,
                    const SlamConfig& cfg, int& next_id) {
  StepLog log;

  belief = predict(belief, odometry, cfg.control_noise);
  const PoseBelief pose{belief.pose(), belief.pose_cov()};

  std::vector<CartesianMeasurement> converted;
  converted.reserve(scan.size());
  for (const PolarDetection& s : scan) {
    converted.push_back(CartesianMeasurement{polar_to_cartesian(pose.mean, s),
                                             cartesian_noise(pose, s, cfg.sensor_noise)});
  }

  const SiftMode mode = cfg.exploit_extent ? SiftMode::extent : SiftMode::threshold;
  SiftResult sifted = sift(converted, records, belief, mode, cfg);

  for (LandmarkRecord& rec : records) {
    if (rec.rma) rec.rma = predict_extent(*rec.rma, odometry.dt, cfg.tau);
  }

  // snapshot of the predicted centroids/covariances for the extent updates
  std::vector<Vec2> pred_centroid(records.size(), Vec2::Zero());
  std::vector<Mat2> pred_cov(records.size(), Mat2::Zero());
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].status == LandmarkStatus::confirmed) {
      pred_centroid[r] = belief.landmark(records[r].slot);
      pred_cov[r] = belief.landmark_cov(records[r].slot);
    }
  }

  std::vector<bool> associated(records.size(), false);
  std::vector<MeasurementBatch> batches(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (sifted.batches[r].empty() || records[r].status != LandmarkStatus::confirmed) continue;
    MeasurementBatch& batch = batches[r];
    std::vector<Mat2> ws;
    for (int i : sifted.batches[r]) {
      batch.points.push_back(converted[i].z);
      ws.push_back(converted[i].w);
    }
    batch.w = aggregate_noise(ws);

    if (update_landmark(belief, records[r], batch, cfg) == UpdateOutcome::updated) {
      associated[r] = true;
      if (!records[r].rma && !records[r].efa) {  // still accumulating toward extent init
        for (const Vec2& p : batch.points) records[r].init_buffer.push_back(p);
      }
      records[r].efa_window.push(batch.points);
    } else {
      ++log.gated_batches;
      sifted.batches[r].clear();  // rejected batch counts as a miss
    }
  }

  for (std::size_t r = 0; r < records.size(); ++r) {
    if (!associated[r]) continue;
    if (records[r].rma) {
      records[r].rma =
          update_extent(*records[r].rma, batches[r], pred_centroid[r], pred_cov[r], cfg.gamma_z);
    }
    if (records[r].efa && static_cast<int>(records[r].efa_window.size()) >= cfg.n_init) {
      records[r].efa = efa_baseline_step(records[r].efa_window);
    }
  }

  log.assigned_landmark_id.assign(scan.size(), -1);
  std::vector<Vec2> unassociated;
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (int i : sifted.batches[r]) {
      log.assigned_landmark_id[i] = records[r].id;
      ++log.associated_detections;
    }
  }
  for (int i = 0; i < static_cast<int>(converted.size()); ++i) {
    if (log.assigned_landmark_id[i] < 0) unassociated.push_back(converted[i].z);
  }

  log.lifecycle = lifecycle(belief, records, unassociated, associated, cfg, next_id);
  return log;
}

}  // namespace eslam
