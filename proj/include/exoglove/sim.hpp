#pragma once

// Deterministic discrete-time closed-loop simulator. Per tick: sample the
// true operator pose, synthesize noisy/quantized encoder readings, solve the
// hand, retarget to the robot model, derive contact forces from a linear
// angular spring, and run the haptic feedback policy with every pipeline
// stage latency applied through an ordered delay queue. Integer-microsecond
// time base, seeded PRNG, no wall clock: a (config, seed, trajectory) triple
// reproduces byte-identical traces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "exoglove/cable_follow.hpp"
#include "exoglove/feedback.hpp"
#include "exoglove/kinematics.hpp"
#include "exoglove/model.hpp"
#include "exoglove/retarget.hpp"

namespace exoglove::sim {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feedback pipeline stage delays, microseconds. The defaults decompose the
// plant's 200 ms force-to-servo budget; the bulk is servo mechanics.
struct StageLatencies {
  std::int64_t sensor_us = 5000;
  std::int64_t bus_up_us = 2000;
  std::int64_t compute_us = 3000;
  std::int64_t bus_down_us = 2000;
  std::int64_t servo_mech_us = 188000;

  std::int64_t decision_us() const { return sensor_us + bus_up_us + compute_us; }
  std::int64_t actuation_us() const { return bus_down_us + servo_mech_us; }

  void validate() const {
    for (std::int64_t v : {sensor_us, bus_up_us, compute_us, bus_down_us, servo_mech_us})
      if (v < 0) throw ConfigValidationError("sim stage latencies must be non-negative");
  }
};

struct NoiseModel {
  double encoder_std_rad = 0.0;
  double drift_rad_per_s = 0.0;
};

// Contact force once the commanded distal joint passes the engage angle.
struct ContactModel {
  double stiffness_n_per_rad = 6.0;
  double engage_angle_rad = deg_to_rad(40.0);
};

enum class TrajectoryKind { Static, Sine, Reach, Csv };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Reach;
  double mcp_amp_rad = deg_to_rad(45.0);
  double dip_amp_rad = deg_to_rad(60.0);
  std::int64_t period_us = 1000000;
  std::string csv_path;
};

struct SimConfig {
  std::int64_t tick_us = 10000;  // 100 Hz acquisition
  int record_divider = 3;        // ~30 Hz trace rows
  StageLatencies latencies;
  NoiseModel noise;
  ContactModel contact;
  bool quantize = true;
  std::uint64_t seed = 1;
  std::int64_t episode_us = 3000000;
  TrajectorySpec trajectory;

  void validate() const {
    if (tick_us <= 0) throw ConfigValidationError("sim.tick_us must be strictly positive");
    if (record_divider <= 0) throw ConfigValidationError("sim.record_divider must be strictly positive");
    if (episode_us <= 0) throw ConfigValidationError("sim.episode_ms must be strictly positive");
    if (!(noise.encoder_std_rad >= 0.0))
      throw ConfigValidationError("sim.noise_std_deg must be non-negative");
    if (trajectory.period_us <= 0)
      throw ConfigValidationError("sim.traj_period_ms must be strictly positive");
    latencies.validate();
  }
};

struct SimSetup {
  GloveGeometry geometry = GloveGeometry::defaults();
  EncoderSettings encoders;
  JointLimits limits = JointLimits::defaults();
  FeedbackPolicy policy;
  SimConfig config;
};

// True operator pose as a function of time. duration_us < 0 means unbounded.
struct Trajectory {
  std::function<JointState(std::int64_t)> pose_at;
  std::int64_t duration_us = -1;
};

namespace detail {

inline double profile(TrajectoryKind kind, std::int64_t t_us, std::int64_t period_us) {
  switch (kind) {
    case TrajectoryKind::Static:
      return 1.0;
    case TrajectoryKind::Sine: {
      const double phase = kTau * static_cast<double>(t_us % period_us) / period_us;
      return 0.5 * (1.0 - std::cos(phase));
    }
    case TrajectoryKind::Reach: {
      const double x = static_cast<double>(t_us % period_us) / period_us;
      return x < 0.5 ? 2.0 * x : 2.0 * (1.0 - x);
    }
    case TrajectoryKind::Csv:
      break;
  }
  throw SimError("profile undefined for csv trajectories");
}

}  // namespace detail

// Builds the synthetic trajectory kinds. All bend channels share the profile;
// splay channels stay at zero; the coupled pip entries are kept consistent.
inline Trajectory make_trajectory(const TrajectorySpec& spec, const GloveGeometry& geometry) {
  if (spec.kind == TrajectoryKind::Csv)
    throw SimError("csv trajectories are built by make_csv_trajectory");
  Trajectory traj;
  traj.pose_at = [spec, geometry](std::int64_t t_us) {
    const double p = detail::profile(spec.kind, t_us, spec.period_us);
    JointState s;
    for (int f = 0; f < kBendFingerCount; ++f) {
      s.q[channel_mcp(f)] = spec.mcp_amp_rad * p;
      s.q[channel_dip(f)] = spec.dip_amp_rad * p;
      s.q[channel_pip(f)] = pip_from_dip(s.q[channel_dip(f)], geometry);
      s.q[channel_splay(f)] = 0.0;
    }
    s.q[kThumbMcp] = spec.mcp_amp_rad * p;
    s.q[kThumbIp] = spec.dip_amp_rad * p;
    return s;
  };
  return traj;
}

// Zero-order-hold playback of a recorded pose file
// (rows: timestamp_us, q_00..q_19 in degrees).
inline Trajectory make_csv_trajectory(std::istream& in) {
  std::vector<std::pair<std::int64_t, JointState>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("timestamp", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 1 + kChannelCount)
      throw SimError("trajectory row must have timestamp_us plus 20 angles");
    JointState s;
    for (int i = 0; i < kChannelCount; ++i) s.q[i] = deg_to_rad(vals[1 + i]);
    rows.emplace_back(static_cast<std::int64_t>(vals[0]), s);
  }
  if (rows.empty()) throw SimError("trajectory file has no rows");
  Trajectory traj;
  traj.duration_us = rows.back().first;
  traj.pose_at = [rows](std::int64_t t_us) {
    auto it = std::upper_bound(rows.begin(), rows.end(), t_us,
                               [](std::int64_t t, const auto& r) { return t < r.first; });
    if (it != rows.begin()) --it;
    return it->second;
  };
  return traj;
}

struct TraceRow {
  std::int64_t timestamp_us = 0;
  std::array<std::int32_t, kEncoderCount> enc{};
  std::array<double, kChannelCount> q{};  // solved pose, radians
  std::vector<double> cmd;                // retargeted command, radians
  std::array<double, kFingerCount> force{};
  std::array<int, kFingerCount> mode{};
  std::array<double, kFingerCount> servo{};  // applied payout delta, radians
};

// Causal record of a force-feedback activation: the triggering sample, the
// control decision, and the completed servo action.
struct FeedbackEvent {
  int finger = 0;
  std::int64_t sample_us = 0;
  std::int64_t decision_us = 0;
  std::int64_t applied_us = 0;
};

struct Trace {
  std::vector<TraceRow> rows;
  std::vector<FeedbackEvent> events;  // empty when re-read from CSV
  int hand_dof = 0;
};

namespace detail {

// Box-Muller on top of the (fully specified) mt19937_64 stream; avoids the
// implementation-defined std::normal_distribution so traces are portable.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double sample() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTau * u2);
  }

 private:
  double uniform() {  // [0, 1)
    return static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0);
  }
  std::mt19937_64 rng_;
};

inline std::int64_t align_up(std::int64_t t, std::int64_t tick) {
  return ((t + tick - 1) / tick) * tick;
}

inline FingerPose pose_of_finger(const JointState& s, int finger) {
  if (finger < kBendFingerCount)
    return FingerPose{s.mcp(finger), s.pip(finger), s.dip(finger)};
  return FingerPose{s.thumb_tm_bend(), s.thumb_mcp(), s.thumb_ip()};
}

inline double distal_angle(const JointState& s, int finger) {
  return finger < kBendFingerCount ? s.dip(finger) : s.thumb_ip();
}

}  // namespace detail

inline Trace run_episode(const SimSetup& setup, const Trajectory& trajectory,
                         const HandModel& model) {
  setup.geometry.validate();
  setup.encoders.validate();
  setup.limits.validate();
  setup.policy.validate();
  setup.config.validate();
  model.validate();

  const SimConfig& cfg = setup.config;
  const std::int64_t tick = cfg.tick_us;
  const std::int64_t last_tick = ((cfg.episode_us - 1) / tick) * tick;
  if (trajectory.duration_us >= 0 && trajectory.duration_us < last_tick)
    throw SimError("trajectory shorter than episode");

  detail::GaussianSampler gauss(cfg.seed);
  const Calibration calibration{};  // simulated encoders are zeroed at the flat pose
  FeedbackState fb_state;

  struct PendingSample {
    std::int64_t due;
    ForceSample sample;
  };
  struct PendingServo {
    std::int64_t due;
    int finger;
    double target;
  };
  std::deque<PendingSample> sample_queue;
  std::deque<PendingServo> servo_queue;
  std::array<double, kFingerCount> applied_servo{};

  Trace trace;
  trace.hand_dof = model.dof();
  trace.rows.reserve(static_cast<std::size_t>(cfg.episode_us / (tick * cfg.record_divider)) + 1);

  std::int64_t tick_index = 0;
  for (std::int64_t t = 0; t < cfg.episode_us; t += tick, ++tick_index) {
    const JointState true_state = trajectory.pose_at(t);
    std::array<double, kEncoderCount> enc_true =
        encoder_angles_from_state(true_state, setup.geometry);

    EncoderFrame frame;
    frame.timestamp_us = t;
    const double drift = cfg.noise.drift_rad_per_s * (static_cast<double>(t) * 1e-6);
    for (int i = 0; i < kEncoderCount; ++i) {
      double angle = enc_true[i] + drift;
      if (cfg.noise.encoder_std_rad > 0.0)
        angle += cfg.noise.encoder_std_rad * gauss.sample();
      frame.raw_counts[i] = angle_to_count(angle, setup.encoders.counts_per_rev);
      frame.readings[i] = cfg.quantize
                              ? count_to_angle(frame.raw_counts[i], setup.encoders.counts_per_rev)
                              : angle;
    }

    const HandSolveResult solved =
        solve_hand(frame, setup.geometry, calibration, setup.limits, setup.encoders);
    const HandCommand cmd = retarget(solved.state, model);

    std::array<double, kFingerCount> force{};
    for (int f = 0; f < kFingerCount; ++f) {
      const double excess = detail::distal_angle(solved.state, f) - cfg.contact.engage_angle_rad;
      force[f] = cfg.contact.stiffness_n_per_rad * std::max(0.0, excess);
      ForceSample s;
      s.finger = f;
      s.force_n = force[f];
      s.current_ma = force[f] * setup.policy.current_per_newton;
      s.timestamp_us = t;
      sample_queue.push_back({t + cfg.latencies.decision_us(), s});
    }

    while (!sample_queue.empty() && sample_queue.front().due <= t) {
      const ForceSample s = sample_queue.front().sample;
      sample_queue.pop_front();
      const FeedbackMode before = fb_state.mode[s.finger];
      const FeedbackCommand fb = step_feedback(
          fb_state, s, setup.policy, detail::pose_of_finger(solved.state, s.finger),
          setup.geometry);
      const std::int64_t servo_due = detail::align_up(t + cfg.latencies.actuation_us(), tick);
      servo_queue.push_back({servo_due, s.finger, fb.servo_target});
      if (fb_state.mode[s.finger] == FeedbackMode::ForceFeedback &&
          before != FeedbackMode::ForceFeedback)
        trace.events.push_back({s.finger, s.timestamp_us, t, servo_due});
    }

    while (!servo_queue.empty() && servo_queue.front().due <= t) {
      applied_servo[servo_queue.front().finger] = servo_queue.front().target;
      servo_queue.pop_front();
    }

    if (tick_index % cfg.record_divider == 0) {
      TraceRow row;
      row.timestamp_us = t;
      row.enc = frame.raw_counts;
      row.q = solved.state.q;
      row.cmd = cmd.targets;
      row.force = force;
      for (int f = 0; f < kFingerCount; ++f) row.mode[f] = static_cast<int>(fb_state.mode[f]);
      row.servo = applied_servo;
      trace.rows.push_back(std::move(row));
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out += buf;
}

}  // namespace detail

inline std::string trace_to_csv(const Trace& trace) {
  std::string out;
  out += "# units: time us, angles deg, force N; mode 0=none 1=waveform1 2=waveform2 "
         "3=force_feedback\n";
  out += "timestamp_us";
  for (int i = 0; i < kEncoderCount; ++i) out += ",enc_" + std::string(i < 10 ? "0" : "") + std::to_string(i);
  for (int i = 0; i < kChannelCount; ++i) out += ",q_" + std::string(i < 10 ? "0" : "") + std::to_string(i);
  for (int i = 0; i < trace.hand_dof; ++i) out += ",cmd_" + std::string(i < 10 ? "0" : "") + std::to_string(i);
  for (int i = 0; i < kFingerCount; ++i) out += ",force_" + std::to_string(i);
  for (int i = 0; i < kFingerCount; ++i) out += ",mode_" + std::to_string(i);
  for (int i = 0; i < kFingerCount; ++i) out += ",servo_" + std::to_string(i);
  out += "\n";
  for (const TraceRow& row : trace.rows) {
    out += std::to_string(row.timestamp_us);
    for (std::int32_t c : row.enc) out += "," + std::to_string(c);
    for (double q : row.q) { out += ','; detail::append_double(out, rad_to_deg(q)); }
    for (double c : row.cmd) { out += ','; detail::append_double(out, rad_to_deg(c)); }
    for (double f : row.force) { out += ','; detail::append_double(out, f); }
    for (int m : row.mode) out += "," + std::to_string(m);
    for (double s : row.servo) { out += ','; detail::append_double(out, rad_to_deg(s)); }
    out += "\n";
  }
  return out;
}

inline void write_trace_csv(const Trace& trace, std::ostream& out) { out << trace_to_csv(trace); }

// Reads rows back (events are not serialized; reports fall back to
// row-scanning detectors on re-read traces).
inline Trace read_trace_csv(std::istream& in) {
  Trace trace;
  std::string line;
  int cmd_count = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("timestamp_us", 0) == 0) {
      cmd_count = 0;
      std::stringstream ss(line);
      std::string col;
      while (std::getline(ss, col, ','))
        if (col.rfind("cmd_", 0) == 0) ++cmd_count;
      trace.hand_dof = cmd_count;
      continue;
    }
    if (cmd_count < 0) throw SimError("trace file missing header row");
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    const std::size_t expected = 1 + kEncoderCount + kChannelCount + cmd_count + 3 * kFingerCount;
    if (vals.size() != expected) throw SimError("trace row has wrong column count");
    TraceRow row;
    std::size_t k = 0;
    row.timestamp_us = static_cast<std::int64_t>(vals[k++]);
    for (int i = 0; i < kEncoderCount; ++i) row.enc[i] = static_cast<std::int32_t>(vals[k++]);
    for (int i = 0; i < kChannelCount; ++i) row.q[i] = deg_to_rad(vals[k++]);
    row.cmd.resize(cmd_count);
    for (int i = 0; i < cmd_count; ++i) row.cmd[i] = deg_to_rad(vals[k++]);
    for (int i = 0; i < kFingerCount; ++i) row.force[i] = vals[k++];
    for (int i = 0; i < kFingerCount; ++i) row.mode[i] = static_cast<int>(vals[k++]);
    for (int i = 0; i < kFingerCount; ++i) row.servo[i] = deg_to_rad(vals[k++]);
    trace.rows.push_back(std::move(row));
  }
  if (cmd_count < 0) throw SimError("trace file missing header row");
  return trace;
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct RepeatabilityReport {
  double mean_deg = 0.0;
  double std_deg = 0.0;  // sample standard deviation
  std::vector<double> contact_angles_deg;
};

// Contact angle statistics over repeated reach cycles: the solved distal
// angle at each upward crossing of the contact threshold.
inline RepeatabilityReport repeatability_report(const Trace& trace, int finger,
                                                double threshold_n) {
  const int dip_channel = finger < kBendFingerCount ? channel_dip(finger) : kThumbIp;
  RepeatabilityReport report;
  double prev = 0.0;
  bool have_prev = false;
  for (const TraceRow& row : trace.rows) {
    const double f = row.force[finger];
    if (have_prev && prev < threshold_n && f >= threshold_n)
      report.contact_angles_deg.push_back(rad_to_deg(row.q[dip_channel]));
    prev = f;
    have_prev = true;
  }
  const std::size_t n = report.contact_angles_deg.size();
  if (n < 3) throw SimError("repeatability needs at least 3 contact events, got " +
                            std::to_string(n));
  double sum = 0.0;
  for (double a : report.contact_angles_deg) sum += a;
  report.mean_deg = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double a : report.contact_angles_deg) ss += (a - report.mean_deg) * (a - report.mean_deg);
  report.std_deg = std::sqrt(ss / static_cast<double>(n - 1));
  return report;
}

struct LatencyReport {
  std::vector<std::int64_t> latencies_us;
  double mean_ms = 0.0;
  double max_ms = 0.0;
};

// Force-event to servo-action latency. Uses the simulator's causal event log
// when available; on re-read traces falls back to detecting the first servo
// step down by at least `servo_step_rad` after each upward crossing of
// `threshold_n` (reliable for quasi-static contact).
inline LatencyReport latency_report(const Trace& trace, double threshold_n,
                                    double servo_step_rad) {
  LatencyReport report;
  if (!trace.events.empty()) {
    for (const FeedbackEvent& e : trace.events)
      report.latencies_us.push_back(e.applied_us - e.sample_us);
  } else {
    for (int f = 0; f < kFingerCount; ++f) {
      std::int64_t edge_us = -1;
      for (std::size_t i = 1; i < trace.rows.size(); ++i) {
        const TraceRow& prev = trace.rows[i - 1];
        const TraceRow& row = trace.rows[i];
        if (edge_us < 0 && prev.force[f] <= threshold_n && row.force[f] > threshold_n)
          edge_us = row.timestamp_us;
        if (edge_us >= 0 && prev.servo[f] - row.servo[f] >= servo_step_rad) {
          report.latencies_us.push_back(row.timestamp_us - edge_us);
          edge_us = -1;
        }
      }
    }
  }
  if (report.latencies_us.empty()) throw SimError("trace contains no force-feedback activation");
  double sum = 0.0;
  std::int64_t max = 0;
  for (std::int64_t v : report.latencies_us) {
    sum += static_cast<double>(v);
    max = std::max(max, v);
  }
  report.mean_ms = sum / static_cast<double>(report.latencies_us.size()) / 1000.0;
  report.max_ms = static_cast<double>(max) / 1000.0;
  return report;
}

}  // namespace exoglove::sim
