// Deterministic, seedable car-park scenario generator: ground-truth map of
// elliptical landmarks, loop trajectory, odometry readings and per-scan radar
// detections tagged with their true source.
#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "eslam/measurement.hpp"

namespace eslam {

struct SensorSpec {
  double range = 50.0;                      // m
  double fov = 2.0 * M_PI;                  // rad, full width
  double sigma_range = 0.15;                // m
  double sigma_azimuth = M_PI / 180.0;      // rad
  double mean_detections = 4.0;             // Poisson mean per landmark per scan
  double clutter_rate = 0.0;                // Poisson mean clutter per scan

  Mat2 polar_noise() const {
    return Vec2(sigma_range * sigma_range, sigma_azimuth * sigma_azimuth).asDiagonal();
  }
};

struct OdometryModel {
  double sigma_v = 0.1;      // m/s
  double sigma_omega = 0.02; // rad/s
  double bias_v = 0.0;       // m/s
  double bias_omega = 0.0;   // rad/s
};

struct SimConfig {
  int rows = 2;
  int cars_per_row = 5;
  double car_spacing = 3.5;      // m between car centers along a row
  double row_offset = 6.0;       // |y| of each row
  double car_semi_major = 2.25;  // m
  double car_semi_minor = 0.9;   // m
  double speed = 1.5;            // m/s along the aisle loop
  double turn_radius = 2.0;      // m
  int num_scans = 600;
  double scan_period = 0.1;      // s
  double landmark_jitter = 0.0;  // optional per-seed jitter on car centers (m)
  SensorSpec sensor;
  OdometryModel odometry;
};

struct LandmarkTruth {
  Vec2 center = Vec2::Zero();
  EllipseParams shape;
};

struct TrueMotion {
  double v = 0.0;
  double omega = 0.0;
};

// Ground-truth world: landmark map plus the platform trajectory sampled at
// scan resolution.  poses has num_scans + 1 entries; motions[k] moves
// poses[k] -> poses[k+1] under the unicycle model at scan_period.
struct Scenario {
  SimConfig config;
  std::vector<LandmarkTruth> landmarks;
  std::vector<Vec3> poses;
  std::vector<TrueMotion> motions;
};

struct TaggedDetection {
  PolarDetection s;
  int source = -1;  // ground-truth landmark index, -1 for clutter
};

struct ScanRecord {
  int k = 0;
  OdometryInput odometry;
  std::vector<TaggedDetection> detections;
};

inline Vec3 unicycle_step(const Vec3& pose, double v, double omega, double dt) {
  return Vec3(pose.x() + v * dt * std::cos(pose.z()), pose.y() + v * dt * std::sin(pose.z()),
              wrap_angle(pose.z() + omega * dt));
}

// Builds the car-park scene: two rows of parked-car ellipses facing an aisle,
// and a stadium loop trajectory driven down the aisle at constant speed.  The
// trajectory is generated by rolling the commanded (v, omega) profile through
// the unicycle model, so a noise-free odometry replay reproduces it exactly.
inline Scenario build_carpark(std::uint64_t seed, const SimConfig& cfg) {
  Scenario sc;
  sc.config = cfg;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-cfg.landmark_jitter, cfg.landmark_jitter);

  const double row_len = cfg.car_spacing * (cfg.cars_per_row - 1);
  for (int r = 0; r < cfg.rows; ++r) {
    const double y = (r % 2 == 0 ? -1.0 : 1.0) * cfg.row_offset * (1 + r / 2);
    for (int c = 0; c < cfg.cars_per_row; ++c) {
      LandmarkTruth lm;
      lm.center = Vec2(c * cfg.car_spacing, y);
      if (cfg.landmark_jitter > 0.0) lm.center += Vec2(jitter(rng), jitter(rng));
      // perpendicular parking: long axis toward the aisle
      lm.shape = EllipseParams{cfg.car_semi_major, cfg.car_semi_minor,
                               wrap_orientation(M_PI / 2.0)};
      sc.landmarks.push_back(lm);
    }
  }

  // stadium loop: straights at y = -/+ turn_radius, half-turns at both ends
  Vec3 pose(0.0, -cfg.turn_radius, 0.0);
  sc.poses.push_back(pose);
  int phase = 0;  // 0: +x straight, 1: right-end turn, 2: -x straight, 3: left-end turn
  double turned = 0.0;
  for (int k = 0; k < cfg.num_scans; ++k) {
    if (phase == 0 && pose.x() >= row_len) {
      phase = 1;
      turned = 0.0;
    } else if (phase == 1 && turned >= M_PI) {
      phase = 2;
    } else if (phase == 2 && pose.x() <= 0.0) {
      phase = 3;
      turned = 0.0;
    } else if (phase == 3 && turned >= M_PI) {
      phase = 0;
    }
    const double omega = (phase % 2 == 1) ? cfg.speed / cfg.turn_radius : 0.0;
    if (phase % 2 == 1) turned += omega * cfg.scan_period;
    sc.motions.push_back(TrueMotion{cfg.speed, omega});
    pose = unicycle_step(pose, cfg.speed, omega, cfg.scan_period);
    sc.poses.push_back(pose);
  }
  return sc;
}

// Uniform sample over the solid ellipse: rejection sampling in the unit disk
// mapped through the ellipse's affine transform.
template <typename Rng>
Vec2 sample_uniform_ellipse(const Vec2& center, const EllipseParams& shape, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a, b;
  do {
    a = u(rng);
    b = u(rng);
  } while (a * a + b * b > 1.0);
  return center + rotation2(shape.orientation) * Vec2(shape.semi_major * a, shape.semi_minor * b);
}

inline bool in_field_of_view(const Vec3& pose, const Vec2& point, const SensorSpec& sensor) {
  const Vec2 d = point - pose.head<2>();
  if (d.norm() > sensor.range) return false;
  return std::abs(wrap_angle(std::atan2(d.y(), d.x()) - pose.z())) <= sensor.fov / 2.0;
}

// Draws one scan at the given true pose: per visible landmark a Poisson
// number of uniform-surface samples, converted to exact polar and then
// corrupted with the sensor noise.  Detections pushed outside the sensor
// limits by noise are dropped, so the output always honors the spec.
template <typename Rng>
std::vector<TaggedDetection> sample_detections(const Scenario& sc, const Vec3& true_pose,
                                               Rng& rng) {
  const SensorSpec& sensor = sc.config.sensor;
  std::poisson_distribution<int> count(sensor.mean_detections);
  std::normal_distribution<double> nr(0.0, sensor.sigma_range);
  std::normal_distribution<double> na(0.0, sensor.sigma_azimuth);

  std::vector<TaggedDetection> out;
  for (std::size_t n = 0; n < sc.landmarks.size(); ++n) {
    const LandmarkTruth& lm = sc.landmarks[n];
    if (!in_field_of_view(true_pose, lm.center, sensor)) continue;
    const int m = count(rng);
    for (int i = 0; i < m; ++i) {
      const Vec2 p = sample_uniform_ellipse(lm.center, lm.shape, rng);
      const Vec2 d = p - true_pose.head<2>();
      const double r = d.norm() + nr(rng);
      const double phi = wrap_angle(std::atan2(d.y(), d.x()) - true_pose.z() + na(rng));
      if (r <= 0.0 || r > sensor.range || std::abs(phi) > sensor.fov / 2.0) continue;
      out.push_back(TaggedDetection{PolarDetection{r, phi}, static_cast<int>(n)});
    }
  }
  if (sensor.clutter_rate > 0.0) {
    std::poisson_distribution<int> ccount(sensor.clutter_rate);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int m = ccount(rng);
    for (int i = 0; i < m; ++i) {
      const double r = sensor.range * std::sqrt(u01(rng));  // uniform over the disk
      const double phi = (u01(rng) - 0.5) * sensor.fov;
      if (r <= 0.0) continue;
      out.push_back(TaggedDetection{PolarDetection{r, phi}, -1});
    }
  }
  return out;
}

// Reported odometry = truth + Gaussian noise + constant bias.
template <typename Rng>
OdometryInput sample_odometry(const TrueMotion& truth, double dt, const OdometryModel& model,
                              Rng& rng) {
  std::normal_distribution<double> nv(0.0, model.sigma_v);
  std::normal_distribution<double> nw(0.0, model.sigma_omega);
  OdometryInput o;
  o.v = truth.v + nv(rng) + model.bias_v;
  o.omega = truth.omega + nw(rng) + model.bias_omega;
  o.dt = dt;
  o.bias_v = model.bias_v;
  o.bias_omega = model.bias_omega;
  return o;
}

// Generates the full scan stream for one trial.  Scan k is taken at
// poses[k+1], after applying motions[k].
template <typename Rng>
std::vector<ScanRecord> simulate_scans(const Scenario& sc, Rng& rng) {
  std::vector<ScanRecord> records;
  records.reserve(sc.motions.size());
  for (std::size_t k = 0; k < sc.motions.size(); ++k) {
    ScanRecord rec;
    rec.k = static_cast<int>(k);
    rec.odometry = sample_odometry(sc.motions[k], sc.config.scan_period, sc.config.odometry, rng);
    rec.detections = sample_detections(sc, sc.poses[k + 1], rng);
    records.push_back(std::move(rec));
  }
  return records;
}

// --- scan-stream persistence --------------------------------------------
//
// Line-delimited text, one record per line (field order documented in the
// README):
//   landmark <cx> <cy> <semi_major> <semi_minor> <orientation>
//   pose0 <x> <y> <theta>
//   scan <k> <v> <omega> <dt> <true_x> <true_y> <true_theta> <m> (<r> <phi> <src>){m}

struct ScanStream {
  std::vector<LandmarkTruth> landmarks;
  Vec3 initial_pose = Vec3::Zero();
  std::vector<Vec3> true_poses;  // pose at each scan
  std::vector<ScanRecord> records;
};

inline void save_scan_stream(const std::string& path, const Scenario& sc,
                             const std::vector<ScanRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open scan stream for writing: " + path);
  out.precision(17);
  for (const LandmarkTruth& lm : sc.landmarks) {
    out << "landmark " << lm.center.x() << ' ' << lm.center.y() << ' ' << lm.shape.semi_major
        << ' ' << lm.shape.semi_minor << ' ' << lm.shape.orientation << '\n';
  }
  out << "pose0 " << sc.poses[0].x() << ' ' << sc.poses[0].y() << ' ' << sc.poses[0].z() << '\n';
  for (const ScanRecord& rec : records) {
    const Vec3& tp = sc.poses[rec.k + 1];
    out << "scan " << rec.k << ' ' << rec.odometry.v << ' ' << rec.odometry.omega << ' '
        << rec.odometry.dt << ' ' << tp.x() << ' ' << tp.y() << ' ' << tp.z() << ' '
        << rec.detections.size();
    for (const TaggedDetection& d : rec.detections) {
      out << ' ' << d.s.range << ' ' << d.s.azimuth << ' ' << d.source;
    }
    out << '\n';
  }
}

inline ScanStream load_scan_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scan stream: " + path);
  ScanStream stream;
  std::string tag;
  while (in >> tag) {
    if (tag == "landmark") {
      LandmarkTruth lm;
      in >> lm.center.x() >> lm.center.y() >> lm.shape.semi_major >> lm.shape.semi_minor >>
          lm.shape.orientation;
      stream.landmarks.push_back(lm);
    } else if (tag == "pose0") {
      in >> stream.initial_pose.x() >> stream.initial_pose.y() >> stream.initial_pose.z();
    } else if (tag == "scan") {
      ScanRecord rec;
      Vec3 tp;
      std::size_t m = 0;
      in >> rec.k >> rec.odometry.v >> rec.odometry.omega >> rec.odometry.dt >> tp.x() >> tp.y() >>
          tp.z() >> m;
      rec.detections.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        in >> rec.detections[i].s.range >> rec.detections[i].s.azimuth >> rec.detections[i].source;
      }
      stream.true_poses.push_back(tp);
      stream.records.push_back(std::move(rec));
    } else {
      throw std::runtime_error("unknown scan stream record: " + tag);
    }
  }
  return stream;
}

}  // namespace eslam
