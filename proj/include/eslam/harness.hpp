// Experiment harness: run configuration, single-trial execution, Monte Carlo
// aggregation and result persistence (CSV / JSON / SVG).
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "eslam/simulator.hpp"
#include "eslam/slam.hpp"

namespace eslam {

enum class Estimator { rma, efa, both };

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::rma: return "rma";
    case Estimator::efa: return "efa";
    default: return "both";
  }
}

inline Estimator estimator_from_string(const std::string& s) {
  if (s == "rma") return Estimator::rma;
  if (s == "efa") return Estimator::efa;
  if (s == "both") return Estimator::both;
  throw std::runtime_error("invalid estimator (want rma|efa|both): " + s);
}

// Everything one experiment needs: the scenario, the filter parameters, the
// estimator selection and the run controls.
struct RunConfig {
  SimConfig sim;

  // noise levels the filter assumes (decoupled from the generative truth)
  double filter_sigma_v = 0.1;                       // m/s
  double filter_sigma_omega = 0.02;                  // rad/s
  double filter_sigma_range = 0.15;                  // m
  double filter_sigma_azimuth = M_PI / 180.0;        // rad

  double gate_threshold = 2.5;
  double extent_gate_scale = 1.0;
  double chi2_gate = 9.210340371976182;
  double default_spread = 0.7;
  double cluster_radius = 1.5;
  int min_cluster_size = 3;
  int confirm_m = 3;
  int confirm_n = 5;
  int max_misses = 10;
  int n_init = 20;
  double tau = 100.0;
  double alpha0 = 50.0;
  double gamma_z = 0.25;

  Estimator estimator = Estimator::both;
  bool exploit_extent = true;

  int trials = 1;
  std::uint64_t base_seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  double match_cap = 5.0;  // m, landmark-to-truth matching radius

  SlamConfig slam_config() const {
    SlamConfig c;
    c.sensor_noise = Vec2(filter_sigma_range * filter_sigma_range,
                          filter_sigma_azimuth * filter_sigma_azimuth)
                         .asDiagonal();
    c.control_noise =
        Vec2(filter_sigma_v * filter_sigma_v, filter_sigma_omega * filter_sigma_omega)
            .asDiagonal();
    c.gate_threshold = gate_threshold;
    c.extent_gate_scale = extent_gate_scale;
    c.chi2_gate = chi2_gate;
    c.default_spread = default_spread;
    c.cluster_radius = cluster_radius;
    c.min_cluster_size = min_cluster_size;
    c.confirm_m = confirm_m;
    c.confirm_n = confirm_n;
    c.max_misses = max_misses;
    c.n_init = n_init;
    c.tau = tau;
    c.alpha0 = alpha0;
    c.gamma_z = gamma_z;
    c.exploit_extent = exploit_extent;
    c.run_rma = estimator != Estimator::efa;
    c.run_efa = estimator != Estimator::rma;
    c.sensor_range = sim.sensor.range;
    c.sensor_fov = sim.sensor.fov;
    return c;
  }
};

// --- flat key = value config files ----------------------------------------

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto d = [&] { return std::stod(value); };
  const auto i = [&] { return std::stoi(value); };
  const double deg = M_PI / 180.0;

  if (key == "trials") cfg.trials = i();
  else if (key == "base_seed") cfg.base_seed = std::stoull(value);
  else if (key == "threads") cfg.threads = i();
  else if (key == "estimator") cfg.estimator = estimator_from_string(value);
  else if (key == "exploit_extent") {
    if (value == "on") cfg.exploit_extent = true;
    else if (value == "off") cfg.exploit_extent = false;
    else throw std::runtime_error("exploit_extent wants on|off, got: " + value);
  }
  else if (key == "match_cap") cfg.match_cap = d();
  else if (key == "scans") cfg.sim.num_scans = i();
  else if (key == "scan_period") cfg.sim.scan_period = d();
  else if (key == "speed") cfg.sim.speed = d();
  else if (key == "turn_radius") cfg.sim.turn_radius = d();
  else if (key == "rows") cfg.sim.rows = i();
  else if (key == "cars_per_row") cfg.sim.cars_per_row = i();
  else if (key == "car_spacing") cfg.sim.car_spacing = d();
  else if (key == "row_offset") cfg.sim.row_offset = d();
  else if (key == "car_semi_major") cfg.sim.car_semi_major = d();
  else if (key == "car_semi_minor") cfg.sim.car_semi_minor = d();
  else if (key == "landmark_jitter") cfg.sim.landmark_jitter = d();
  else if (key == "sensor_range") cfg.sim.sensor.range = d();
  else if (key == "sensor_fov_deg") cfg.sim.sensor.fov = d() * deg;
  else if (key == "sigma_range") cfg.sim.sensor.sigma_range = d();
  else if (key == "sigma_azimuth_deg") cfg.sim.sensor.sigma_azimuth = d() * deg;
  else if (key == "mean_detections") cfg.sim.sensor.mean_detections = d();
  else if (key == "clutter_rate") cfg.sim.sensor.clutter_rate = d();
  else if (key == "odom_sigma_v") cfg.sim.odometry.sigma_v = d();
  else if (key == "odom_sigma_omega") cfg.sim.odometry.sigma_omega = d();
  else if (key == "odom_bias_v") cfg.sim.odometry.bias_v = d();
  else if (key == "odom_bias_omega") cfg.sim.odometry.bias_omega = d();
  else if (key == "filter_sigma_v") cfg.filter_sigma_v = d();
  else if (key == "filter_sigma_omega") cfg.filter_sigma_omega = d();
  else if (key == "filter_sigma_range") cfg.filter_sigma_range = d();
  else if (key == "filter_sigma_azimuth_deg") cfg.filter_sigma_azimuth = d() * deg;
  else if (key == "gate_threshold") cfg.gate_threshold = d();
  else if (key == "extent_gate_scale") cfg.extent_gate_scale = d();
  else if (key == "chi2_gate") cfg.chi2_gate = d();
  else if (key == "default_spread") cfg.default_spread = d();
  else if (key == "cluster_radius") cfg.cluster_radius = d();
  else if (key == "min_cluster_size") cfg.min_cluster_size = i();
  else if (key == "confirm_m") cfg.confirm_m = i();
  else if (key == "confirm_n") cfg.confirm_n = i();
  else if (key == "max_misses") cfg.max_misses = i();
  else if (key == "n_init") cfg.n_init = i();
  else if (key == "tau") cfg.tau = d();
  else if (key == "alpha0") cfg.alpha0 = d();
  else if (key == "gamma_z") cfg.gamma_z = d();
  else throw std::runtime_error("unknown config key: " + key);
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
    try {
      apply_config_entry(cfg, key, value);
    } catch (const std::exception& ex) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
}

// Echo of the algorithmic parameters (no paths, nothing run-dependent), so
// output files are reproducible byte-for-byte from (config, seed).
inline nlohmann::json config_echo(const RunConfig& cfg) {
  nlohmann::json j;
  j["trials"] = cfg.trials;
  j["base_seed"] = cfg.base_seed;
  j["estimator"] = to_string(cfg.estimator);
  j["exploit_extent"] = cfg.exploit_extent;
  j["match_cap"] = cfg.match_cap;
  j["sim"] = {{"scans", cfg.sim.num_scans},
              {"scan_period", cfg.sim.scan_period},
              {"speed", cfg.sim.speed},
              {"turn_radius", cfg.sim.turn_radius},
              {"rows", cfg.sim.rows},
              {"cars_per_row", cfg.sim.cars_per_row},
              {"car_spacing", cfg.sim.car_spacing},
              {"row_offset", cfg.sim.row_offset},
              {"car_semi_major", cfg.sim.car_semi_major},
              {"car_semi_minor", cfg.sim.car_semi_minor},
              {"landmark_jitter", cfg.sim.landmark_jitter},
              {"sensor_range", cfg.sim.sensor.range},
              {"sensor_fov", cfg.sim.sensor.fov},
              {"sigma_range", cfg.sim.sensor.sigma_range},
              {"sigma_azimuth", cfg.sim.sensor.sigma_azimuth},
              {"mean_detections", cfg.sim.sensor.mean_detections},
              {"clutter_rate", cfg.sim.sensor.clutter_rate},
              {"odom_sigma_v", cfg.sim.odometry.sigma_v},
              {"odom_sigma_omega", cfg.sim.odometry.sigma_omega},
              {"odom_bias_v", cfg.sim.odometry.bias_v},
              {"odom_bias_omega", cfg.sim.odometry.bias_omega}};
  j["filter"] = {{"sigma_v", cfg.filter_sigma_v},
                 {"sigma_omega", cfg.filter_sigma_omega},
                 {"sigma_range", cfg.filter_sigma_range},
                 {"sigma_azimuth", cfg.filter_sigma_azimuth},
                 {"gate_threshold", cfg.gate_threshold},
                 {"extent_gate_scale", cfg.extent_gate_scale},
                 {"chi2_gate", cfg.chi2_gate},
                 {"default_spread", cfg.default_spread},
                 {"cluster_radius", cfg.cluster_radius},
                 {"min_cluster_size", cfg.min_cluster_size},
                 {"confirm_m", cfg.confirm_m},
                 {"confirm_n", cfg.confirm_n},
                 {"max_misses", cfg.max_misses},
                 {"n_init", cfg.n_init},
                 {"tau", cfg.tau},
                 {"alpha0", cfg.alpha0},
                 {"gamma_z", cfg.gamma_z}};
  return j;
}

// --- metrics ---------------------------------------------------------------

struct TrialMetrics {
  std::vector<double> pos_err;      // m, per scan
  std::vector<double> heading_err;  // rad, per scan
  std::vector<double> gwd_rma;      // per-scan mean over matched landmarks, NaN before init
  std::vector<double> gwd_efa;
  long long unmatched = 0;  // estimates that found no truth within match_cap

  double pos_rmse() const {
    double s = 0;
    for (double e : pos_err) s += e * e;
    return pos_err.empty() ? 0.0 : std::sqrt(s / static_cast<double>(pos_err.size()));
  }
  double heading_rmse() const {
    double s = 0;
    for (double e : heading_err) s += e * e;
    return heading_err.empty() ? 0.0 : std::sqrt(s / static_cast<double>(heading_err.size()));
  }
};

namespace detail {

// Greedy nearest-centroid one-to-one matching of confirmed estimates to
// ground-truth landmarks, capped at match_cap meters.
inline std::vector<std::pair<int, int>> match_landmarks(
    const AugmentedBelief& belief, const std::vector<LandmarkRecord>& records,
    const std::vector<LandmarkTruth>& truths, double match_cap, long long& unmatched) {
  struct Pair {
    double dist;
    int rec;
    int truth;
  };
  std::vector<Pair> pairs;
  std::vector<int> confirmed;
  for (int r = 0; r < static_cast<int>(records.size()); ++r) {
    if (records[r].status != LandmarkStatus::confirmed) continue;
    confirmed.push_back(r);
    const Vec2 c = belief.landmark(records[r].slot);
    for (int t = 0; t < static_cast<int>(truths.size()); ++t) {
      const double dist = (c - truths[t].center).norm();
      if (dist <= match_cap) pairs.push_back(Pair{dist, r, t});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.rec != b.rec) return a.rec < b.rec;
    return a.truth < b.truth;
  });
  std::vector<bool> rec_used(records.size(), false), truth_used(truths.size(), false);
  std::vector<std::pair<int, int>> matches;
  for (const Pair& p : pairs) {
    if (rec_used[p.rec] || truth_used[p.truth]) continue;
    rec_used[p.rec] = truth_used[p.truth] = true;
    matches.emplace_back(p.rec, p.truth);
  }
  for (int r : confirmed) {
    if (!rec_used[r]) ++unmatched;
  }
  return matches;
}

}  // namespace detail

// Runs one full trial: scenario build, scan-by-scan SLAM execution, per-scan
// pose errors and GWD of each matched landmark against its truth.
inline TrialMetrics run_trial(const RunConfig& cfg, std::uint64_t seed) {
  const Scenario sc = build_carpark(seed, cfg.sim);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  const SlamConfig scfg = cfg.slam_config();
  AugmentedBelief belief = AugmentedBelief::init(sc.poses[0], Mat3::Zero());
  std::vector<LandmarkRecord> records;
  int next_id = 0;

  TrialMetrics tm;
  const int n = cfg.sim.num_scans;
  tm.pos_err.reserve(n);
  tm.heading_err.reserve(n);
  tm.gwd_rma.reserve(n);
  tm.gwd_efa.reserve(n);

  for (int k = 0; k < n; ++k) {
    const OdometryInput odo =
        sample_odometry(sc.motions[k], cfg.sim.scan_period, cfg.sim.odometry, rng);
    const std::vector<TaggedDetection> tagged = sample_detections(sc, sc.poses[k + 1], rng);
    std::vector<PolarDetection> scan;
    scan.reserve(tagged.size());
    for (const TaggedDetection& t : tagged) scan.push_back(t.s);

    step(belief, records, odo, scan, scfg, next_id);

    const Vec3& truth = sc.poses[k + 1];
    tm.pos_err.push_back((belief.pose().head<2>() - truth.head<2>()).norm());
    tm.heading_err.push_back(std::abs(wrap_angle(belief.pose().z() - truth.z())));

    const auto matches =
        detail::match_landmarks(belief, records, sc.landmarks, cfg.match_cap, tm.unmatched);
    double sum_rma = 0, sum_efa = 0;
    int n_rma = 0, n_efa = 0;
    for (const auto& [r, t] : matches) {
      const Vec2 centroid = belief.landmark(records[r].slot);
      const Vec2& truth_c = sc.landmarks[t].center;
      const Mat2 truth_x = params_to_spd(sc.landmarks[t].shape);
      if (records[r].rma) {
        sum_rma += gwd(centroid, records[r].rma->x, truth_c, truth_x);
        ++n_rma;
      }
      if (records[r].efa) {
        sum_efa += gwd(centroid, params_to_spd(*records[r].efa), truth_c, truth_x);
        ++n_efa;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    tm.gwd_rma.push_back(n_rma > 0 ? sum_rma / n_rma : nan);
    tm.gwd_efa.push_back(n_efa > 0 ? sum_efa / n_efa : nan);
  }
  return tm;
}

struct TrialSummary {
  double pos_rmse = 0;
  double heading_rmse = 0;
};

// Cross-trial aggregate: per-scan series plus overall summaries.  The steady
// window (second half of the run) feeds the GWD means and series variances.
struct AggregateReport {
  nlohmann::json config;
  int trials = 0;
  int num_scans = 0;
  double scan_period = 0;

  std::vector<double> pos_rmse_series;      // RMSE across trials, per scan
  std::vector<double> heading_rmse_series;  // rad
  std::vector<double> gwd_rma_series;       // mean across trials, per scan
  std::vector<double> gwd_efa_series;

  double position_rmse = 0;     // overall, m
  double heading_rmse = 0;      // overall, rad
  int steady_from = 0;
  double gwd_rma_steady_mean = 0;
  double gwd_efa_steady_mean = 0;
  double gwd_rma_series_var = 0;
  double gwd_efa_series_var = 0;
  long long unmatched = 0;

  std::vector<TrialSummary> per_trial;
};

namespace detail {

inline double steady_mean(const std::vector<double>& series, int from) {
  double s = 0;
  int n = 0;
  for (int k = from; k < static_cast<int>(series.size()); ++k) {
    if (std::isfinite(series[k])) {
      s += series[k];
      ++n;
    }
  }
  return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

inline double steady_var(const std::vector<double>& series, int from) {
  const double mean = steady_mean(series, from);
  if (!std::isfinite(mean)) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  int n = 0;
  for (int k = from; k < static_cast<int>(series.size()); ++k) {
    if (std::isfinite(series[k])) {
      s += (series[k] - mean) * (series[k] - mean);
      ++n;
    }
  }
  return s / n;
}

}  // namespace detail

inline AggregateReport aggregate(const RunConfig& cfg, const std::vector<TrialMetrics>& trials) {
  AggregateReport rep;
  rep.config = config_echo(cfg);
  rep.trials = static_cast<int>(trials.size());
  rep.num_scans = cfg.sim.num_scans;
  rep.scan_period = cfg.sim.scan_period;

  const int n = rep.num_scans;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.pos_rmse_series.assign(n, 0.0);
  rep.heading_rmse_series.assign(n, 0.0);
  rep.gwd_rma_series.assign(n, nan);
  rep.gwd_efa_series.assign(n, nan);

  double pos_sq = 0, heading_sq = 0;
  for (int k = 0; k < n; ++k) {
    double psq = 0, hsq = 0, grma = 0, gefa = 0;
    int nrma = 0, nefa = 0;
    for (const TrialMetrics& tm : trials) {
      psq += tm.pos_err[k] * tm.pos_err[k];
      hsq += tm.heading_err[k] * tm.heading_err[k];
      if (std::isfinite(tm.gwd_rma[k])) {
        grma += tm.gwd_rma[k];
        ++nrma;
      }
      if (std::isfinite(tm.gwd_efa[k])) {
        gefa += tm.gwd_efa[k];
        ++nefa;
      }
    }
    rep.pos_rmse_series[k] = std::sqrt(psq / rep.trials);
    rep.heading_rmse_series[k] = std::sqrt(hsq / rep.trials);
    if (nrma > 0) rep.gwd_rma_series[k] = grma / nrma;
    if (nefa > 0) rep.gwd_efa_series[k] = gefa / nefa;
    pos_sq += psq;
    heading_sq += hsq;
  }
  rep.position_rmse = std::sqrt(pos_sq / (static_cast<double>(rep.trials) * n));
  rep.heading_rmse = std::sqrt(heading_sq / (static_cast<double>(rep.trials) * n));

  rep.steady_from = n / 2;
  rep.gwd_rma_steady_mean = detail::steady_mean(rep.gwd_rma_series, rep.steady_from);
  rep.gwd_efa_steady_mean = detail::steady_mean(rep.gwd_efa_series, rep.steady_from);
  rep.gwd_rma_series_var = detail::steady_var(rep.gwd_rma_series, rep.steady_from);
  rep.gwd_efa_series_var = detail::steady_var(rep.gwd_efa_series, rep.steady_from);

  for (const TrialMetrics& tm : trials) {
    rep.unmatched += tm.unmatched;
    rep.per_trial.push_back(TrialSummary{tm.pos_rmse(), tm.heading_rmse()});
  }
  return rep;
}

// Runs trials with seeds base_seed .. base_seed + trials - 1, in parallel at
// the trial level; per-trial execution stays sequential so results do not
// depend on the schedule.
inline AggregateReport run_monte_carlo(const RunConfig& cfg) {
  std::vector<TrialMetrics> results(cfg.trials);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers =
      std::min<int>(cfg.threads > 0 ? cfg.threads : static_cast<int>(hw), cfg.trials);

  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next.fetch_add(1); i < cfg.trials; i = next.fetch_add(1)) {
      results[i] = run_trial(cfg, cfg.base_seed + static_cast<std::uint64_t>(i));
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  return aggregate(cfg, results);
}

// --- persistence -------------------------------------------------------------

namespace detail {

inline nlohmann::json series_to_json(const std::vector<double>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x)) arr.push_back(x);
    else arr.push_back(nullptr);
  }
  return arr;
}

inline std::vector<double> series_from_json(const nlohmann::json& arr) {
  std::vector<double> v;
  v.reserve(arr.size());
  for (const auto& x : arr) {
    v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  }
  return v;
}

inline nlohmann::json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

inline double number_from_json(const nlohmann::json& x) {
  return x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>();
}

inline std::string format_value(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace detail

inline nlohmann::json report_to_json(const AggregateReport& rep) {
  nlohmann::json j;
  j["config"] = rep.config;
  j["trials"] = rep.trials;
  j["num_scans"] = rep.num_scans;
  j["scan_period"] = rep.scan_period;
  j["summary"] = {{"position_rmse_m", rep.position_rmse},
                  {"heading_rmse_rad", rep.heading_rmse},
                  {"heading_rmse_deg", rep.heading_rmse * 180.0 / M_PI},
                  {"steady_from_scan", rep.steady_from},
                  {"gwd_rma_steady_mean", detail::number_or_null(rep.gwd_rma_steady_mean)},
                  {"gwd_efa_steady_mean", detail::number_or_null(rep.gwd_efa_steady_mean)},
                  {"gwd_rma_series_var", detail::number_or_null(rep.gwd_rma_series_var)},
                  {"gwd_efa_series_var", detail::number_or_null(rep.gwd_efa_series_var)},
                  {"unmatched_estimates", rep.unmatched}};
  j["series"] = {{"pos_rmse", detail::series_to_json(rep.pos_rmse_series)},
                 {"heading_rmse", detail::series_to_json(rep.heading_rmse_series)},
                 {"gwd_rma", detail::series_to_json(rep.gwd_rma_series)},
                 {"gwd_efa", detail::series_to_json(rep.gwd_efa_series)}};
  nlohmann::json per_trial = nlohmann::json::array();
  for (const TrialSummary& t : rep.per_trial) {
    per_trial.push_back({{"pos_rmse", t.pos_rmse}, {"heading_rmse", t.heading_rmse}});
  }
  j["per_trial"] = per_trial;
  return j;
}

inline AggregateReport report_from_json(const nlohmann::json& j) {
  AggregateReport rep;
  rep.config = j.at("config");
  rep.trials = j.at("trials").get<int>();
  rep.num_scans = j.at("num_scans").get<int>();
  rep.scan_period = j.at("scan_period").get<double>();
  const auto& s = j.at("summary");
  rep.position_rmse = s.at("position_rmse_m").get<double>();
  rep.heading_rmse = s.at("heading_rmse_rad").get<double>();
  rep.steady_from = s.at("steady_from_scan").get<int>();
  rep.gwd_rma_steady_mean = detail::number_from_json(s.at("gwd_rma_steady_mean"));
  rep.gwd_efa_steady_mean = detail::number_from_json(s.at("gwd_efa_steady_mean"));
  rep.gwd_rma_series_var = detail::number_from_json(s.at("gwd_rma_series_var"));
  rep.gwd_efa_series_var = detail::number_from_json(s.at("gwd_efa_series_var"));
  rep.unmatched = s.at("unmatched_estimates").get<long long>();
  const auto& series = j.at("series");
  rep.pos_rmse_series = detail::series_from_json(series.at("pos_rmse"));
  rep.heading_rmse_series = detail::series_from_json(series.at("heading_rmse"));
  rep.gwd_rma_series = detail::series_from_json(series.at("gwd_rma"));
  rep.gwd_efa_series = detail::series_from_json(series.at("gwd_efa"));
  for (const auto& t : j.at("per_trial")) {
    rep.per_trial.push_back(
        TrialSummary{t.at("pos_rmse").get<double>(), t.at("heading_rmse").get<double>()});
  }
  return rep;
}

inline void write_json(const AggregateReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report_to_json(rep).dump(2) << '\n';
}

inline AggregateReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  nlohmann::json j;
  in >> j;
  return report_from_json(j);
}

// Per-scan series; for Monte Carlo runs pos_err/heading_err are the RMSE
// across trials at that scan and the GWD columns are cross-trial means.
inline void write_csv(const AggregateReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "scan,t,pos_err,heading_err,mean_gwd_rma,mean_gwd_efa\n";
  for (int k = 0; k < rep.num_scans; ++k) {
    out << k << ',' << detail::format_value((k + 1) * rep.scan_period) << ','
        << detail::format_value(rep.pos_rmse_series[k]) << ','
        << detail::format_value(rep.heading_rmse_series[k]) << ','
        << detail::format_value(rep.gwd_rma_series[k]) << ','
        << detail::format_value(rep.gwd_efa_series[k]) << '\n';
  }
}

// --- minimal SVG line plots --------------------------------------------------

namespace detail {

struct PlotSeries {
  std::string label;
  std::string color;
  const std::vector<double>* values;
};

inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::string& y_label, double scan_period,
                           const std::vector<PlotSeries>& series) {
  const double width = 720, height = 420;
  const double ml = 60, mr = 20, mt = 40, mb = 45;

  std::size_t n = 0;
  double ymax = 0;
  for (const PlotSeries& s : series) {
    n = std::max(n, s.values->size());
    for (double v : *s.values) {
      if (std::isfinite(v)) ymax = std::max(ymax, v);
    }
  }
  if (ymax <= 0) ymax = 1.0;
  ymax *= 1.05;
  const double xmax = static_cast<double>(n) * scan_period;

  auto px = [&](double t) { return ml + (width - ml - mr) * (t / xmax); };
  auto py = [&](double v) { return height - mb - (height - mt - mb) * (v / ymax); };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";

  // axes and ticks
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << height - mb
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double t = xmax * i / 5.0, v = ymax * i / 5.0;
    out << "<line x1=\"" << px(t) << "\" y1=\"" << height - mb << "\" x2=\"" << px(t) << "\" y2=\""
        << height - mb + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(t) << "\" y=\"" << height - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(t) << "</text>\n";
    out << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << ml << "\" y2=\""
        << py(v) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
  }
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">time (s)</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n";

  // polylines, split at NaN gaps
  int legend_y = static_cast<int>(mt) + 8;
  for (const PlotSeries& s : series) {
    std::string points;
    bool open = false;
    auto flush = [&] {
      if (open && !points.empty()) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.4\" points=\""
            << points << "\"/>\n";
      }
      points.clear();
      open = false;
    };
    for (std::size_t k = 0; k < s.values->size(); ++k) {
      const double v = (*s.values)[k];
      if (!std::isfinite(v)) {
        flush();
        continue;
      }
      points += fmt(px((k + 1) * scan_period)) + "," + fmt(py(v)) + " ";
      open = true;
    }
    flush();
    out << "<line x1=\"" << width - mr - 130 << "\" y1=\"" << legend_y << "\" x2=\""
        << width - mr - 106 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << width - mr - 100 << "\" y=\"" << legend_y + 4
        << "\" font-size=\"12\">" << s.label << "</text>\n";
    legend_y += 18;
  }
  out << "</svg>\n";
}

}  // namespace detail

inline void write_svg(const AggregateReport& rep, const std::string& dir) {
  detail::write_svg_plot(dir + "/gwd_vs_time.svg", "Extent estimation error", "mean GWD (m)",
                         rep.scan_period,
                         {{"RMA", "#c0392b", &rep.gwd_rma_series},
                          {"EFA", "#2980b9", &rep.gwd_efa_series}});
  detail::write_svg_plot(dir + "/error_vs_time.svg", "Platform pose error", "RMSE",
                         rep.scan_period,
                         {{"position (m)", "#27ae60", &rep.pos_rmse_series},
                          {"heading (rad)", "#8e44ad", &rep.heading_rmse_series}});
}

// Writes every output format for a finished run into dir.
inline void export_report(const AggregateReport& rep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_json(rep, dir + "/report.json");
  write_csv(rep, dir + "/series.csv");
  write_svg(rep, dir);
}

}  // namespace eslam
