#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "exoglove/config.hpp"
#include "exoglove/sim.hpp"

using namespace exoglove;
using namespace exoglove::sim;

namespace {

SimSetup basic_setup() {
  SimSetup setup;
  setup.config.episode_us = 3000000;
  setup.config.trajectory.kind = TrajectoryKind::Reach;
  setup.config.trajectory.period_us = 1000000;
  setup.config.contact.engage_angle_rad = deg_to_rad(40.0);
  setup.config.contact.stiffness_n_per_rad = 6.0;
  return setup;
}

SimSetup zero_latency(SimSetup setup) {
  setup.config.latencies = StageLatencies{0, 0, 0, 0, 0};
  return setup;
}

Trace run(const SimSetup& setup) {
  const Trajectory traj = make_trajectory(setup.config.trajectory, setup.geometry);
  return run_episode(setup, traj, hand_model_6dof());
}

}  // namespace

TEST_CASE("static pose with no noise or latency gives a constant trace") {
  SimSetup setup = zero_latency(basic_setup());
  setup.config.trajectory.kind = TrajectoryKind::Static;
  setup.config.trajectory.mcp_amp_rad = deg_to_rad(30.0);
  setup.config.trajectory.dip_amp_rad = deg_to_rad(35.0);
  setup.config.quantize = false;
  setup.config.episode_us = 500000;
  const Trace trace = run(setup);
  REQUIRE(trace.rows.size() > 3);
  const TraceRow& first = trace.rows.front();
  for (const TraceRow& row : trace.rows) {
    CHECK(row.q == first.q);
    CHECK(row.cmd == first.cmd);
    CHECK(row.force == first.force);
    CHECK(row.servo == first.servo);
    CHECK(row.mode == first.mode);
  }
  // Solved pose equals the true pose without quantization.
  const Trajectory traj = make_trajectory(setup.config.trajectory, setup.geometry);
  const JointState truth = traj.pose_at(0);
  for (int ch = 0; ch < kChannelCount; ++ch)
    CHECK(std::abs(first.q[ch] - truth.q[ch]) <= 1e-9);
}

TEST_CASE("noise-free unquantized solve reproduces the trajectory exactly") {
  SimSetup setup = zero_latency(basic_setup());
  setup.config.trajectory.kind = TrajectoryKind::Sine;
  setup.config.quantize = false;
  setup.config.record_divider = 1;
  setup.config.episode_us = 1000000;
  const Trajectory traj = make_trajectory(setup.config.trajectory, setup.geometry);
  const Trace trace = run_episode(setup, traj, hand_model_6dof());
  double worst = 0.0;
  for (const TraceRow& row : trace.rows) {
    const JointState truth = traj.pose_at(row.timestamp_us);
    for (int ch = 0; ch < kChannelCount; ++ch)
      worst = std::max(worst, std::abs(row.q[ch] - truth.q[ch]));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("quantization error stays under the analytic bound") {
  SimSetup setup = zero_latency(basic_setup());
  setup.config.trajectory.kind = TrajectoryKind::Sine;
  setup.config.quantize = true;
  setup.config.record_divider = 1;
  setup.config.episode_us = 2000000;
  const GloveGeometry& g = setup.geometry;
  const double bound = (kTau / 4096.0) * g.rg *
                       (1.0 / g.r1 + 1.0 / (g.r2p / g.pip_coupling_a + g.r3p));
  const Trajectory traj = make_trajectory(setup.config.trajectory, setup.geometry);
  const Trace trace = run_episode(setup, traj, hand_model_6dof());
  double worst = 0.0;
  for (const TraceRow& row : trace.rows) {
    const JointState truth = traj.pose_at(row.timestamp_us);
    for (int f = 0; f < kBendFingerCount; ++f) {
      worst = std::max(worst, std::abs(row.q[channel_mcp(f)] - truth.q[channel_mcp(f)]));
      worst = std::max(worst, std::abs(row.q[channel_dip(f)] - truth.q[channel_dip(f)]));
    }
  }
  CHECK(worst <= bound);
  CHECK(worst > 0.0);  // quantization actually engaged
}

TEST_CASE("default stage split yields the 200 ms budget") {
  const Trace trace = run(basic_setup());
  const LatencyReport report = latency_report(trace, 1.0, 0.05);
  REQUIRE(report.latencies_us.size() >= 3);
  CHECK(std::abs(report.mean_ms - 200.0) <= 10.0);
  for (std::int64_t v : report.latencies_us) CHECK(std::abs(v - 200000) <= 10000);
}

TEST_CASE("zero latencies react within one tick") {
  const Trace trace = run(zero_latency(basic_setup()));
  const LatencyReport report = latency_report(trace, 1.0, 0.05);
  REQUIRE(!report.latencies_us.empty());
  for (std::int64_t v : report.latencies_us) CHECK(v <= 10000);
}

TEST_CASE("latency scales exactly with the configured budget") {
  SimSetup a = basic_setup();
  SimSetup b = basic_setup();
  b.config.latencies.servo_mech_us = 88000;  // 100 ms total instead of 200
  const LatencyReport ra = latency_report(run(a), 1.0, 0.05);
  const LatencyReport rb = latency_report(run(b), 1.0, 0.05);
  REQUIRE(ra.latencies_us.size() == rb.latencies_us.size());
  for (std::size_t i = 0; i < ra.latencies_us.size(); ++i)
    CHECK(ra.latencies_us[i] - rb.latencies_us[i] == 100000);
}

TEST_CASE("events are causally ordered") {
  const Trace trace = run(basic_setup());
  REQUIRE(!trace.events.empty());
  for (const FeedbackEvent& e : trace.events) {
    CHECK(e.decision_us >= e.sample_us);
    CHECK(e.applied_us >= e.decision_us);
  }
}

TEST_CASE("equal config and seed reproduce byte-identical traces") {
  SimSetup setup = basic_setup();
  setup.config.noise.encoder_std_rad = deg_to_rad(0.02);
  setup.config.seed = 42;
  const std::string a = trace_to_csv(run(setup));
  const std::string b = trace_to_csv(run(setup));
  CHECK(a == b);
}

TEST_CASE("seed changes the data but not the schema") {
  SimSetup setup = basic_setup();
  setup.config.noise.encoder_std_rad = deg_to_rad(0.02);
  setup.config.seed = 1;
  const std::string a = trace_to_csv(run(setup));
  setup.config.seed = 2;
  const std::string b = trace_to_csv(run(setup));
  CHECK(a != b);
  CHECK(a.substr(0, a.find('\n', a.find('\n') + 1)) ==
        b.substr(0, b.find('\n', b.find('\n') + 1)));  // comment + header equal
}

TEST_CASE("per-tick oracle recomputation reproduces the trace") {
  // Straight-line re-evaluation of the closed loop without the delay queues;
  // valid only for zero latencies.
  SimSetup setup = zero_latency(basic_setup());
  setup.config.trajectory.kind = TrajectoryKind::Sine;
  setup.config.episode_us = 1500000;
  const Trajectory traj = make_trajectory(setup.config.trajectory, setup.geometry);
  const HandModel model = hand_model_6dof();
  const Trace trace = run_episode(setup, traj, model);

  FeedbackState fb;
  Calibration cal{};
  std::size_t row_idx = 0;
  std::int64_t tick_index = 0;
  for (std::int64_t t = 0; t < setup.config.episode_us; t += setup.config.tick_us, ++tick_index) {
    const JointState truth = traj.pose_at(t);
    const auto enc = encoder_angles_from_state(truth, setup.geometry);
    EncoderFrame frame;
    frame.timestamp_us = t;
    for (int i = 0; i < kEncoderCount; ++i) {
      frame.raw_counts[i] = angle_to_count(enc[i], setup.encoders.counts_per_rev);
      frame.readings[i] = count_to_angle(frame.raw_counts[i], setup.encoders.counts_per_rev);
    }
    const HandSolveResult solved = solve_hand(frame, setup.geometry, cal, setup.limits);
    const HandCommand cmd = retarget(solved.state, model);
    std::array<double, kFingerCount> force{};
    std::array<double, kFingerCount> servo{};
    for (int f = 0; f < kFingerCount; ++f) {
      const double dip = f < kBendFingerCount ? solved.state.dip(f) : solved.state.thumb_ip();
      force[f] = setup.config.contact.stiffness_n_per_rad *
                 std::max(0.0, dip - setup.config.contact.engage_angle_rad);
      ForceSample s;
      s.finger = f;
      s.force_n = force[f];
      s.current_ma = force[f] * setup.policy.current_per_newton;
      s.timestamp_us = t;
      const FingerPose pose = f < kBendFingerCount
                                  ? FingerPose{solved.state.mcp(f), solved.state.pip(f),
                                               solved.state.dip(f)}
                                  : FingerPose{solved.state.thumb_tm_bend(),
                                               solved.state.thumb_mcp(), solved.state.thumb_ip()};
      servo[f] = step_feedback(fb, s, setup.policy, pose, setup.geometry).servo_target;
    }
    if (tick_index % setup.config.record_divider != 0) continue;
    REQUIRE(row_idx < trace.rows.size());
    const TraceRow& row = trace.rows[row_idx++];
    CHECK(row.timestamp_us == t);
    CHECK(row.enc == frame.raw_counts);
    CHECK(row.q == solved.state.q);
    CHECK(row.cmd == cmd.targets);
    CHECK(row.force == force);
    CHECK(row.servo == servo);
  }
  CHECK(row_idx == trace.rows.size());
}

TEST_CASE("repeatability of noise-free cycles is exactly zero") {
  // Record every tick so each cycle is sampled at identical phases.
  SimSetup setup = zero_latency(basic_setup());
  setup.config.record_divider = 1;
  const Trace trace = run(setup);
  const RepeatabilityReport report = repeatability_report(trace, 0, 0.1);
  REQUIRE(report.contact_angles_deg.size() == 3);
  CHECK(report.std_deg == 0.0);
  CHECK(report.mean_deg == Catch::Approx(report.contact_angles_deg[0]).margin(1e-12));
}

TEST_CASE("injected three-cycle trace reproduces the hand statistics") {
  Trace trace;
  trace.hand_dof = 6;
  const double angles[] = {63.0, 63.2, 63.25};
  std::int64_t t = 0;
  for (double a : angles) {
    TraceRow quiet;
    quiet.timestamp_us = t;
    t += 10000;
    trace.rows.push_back(quiet);
    TraceRow contact;
    contact.timestamp_us = t;
    t += 10000;
    contact.force[0] = 0.2;
    contact.q[kIndexDip] = deg_to_rad(a);
    trace.rows.push_back(contact);
  }
  const RepeatabilityReport report = repeatability_report(trace, 0, 0.1);
  REQUIRE(report.contact_angles_deg.size() == 3);
  CHECK(report.mean_deg == Catch::Approx(63.15).margin(1e-9));
  CHECK(report.std_deg == Catch::Approx(std::sqrt(0.0175)).margin(1e-12));
}

TEST_CASE("noisy repeatability matches an independent statistics oracle") {
  SimSetup setup = zero_latency(basic_setup());
  setup.config.noise.encoder_std_rad = deg_to_rad(0.1);
  setup.config.seed = 7;
  const RepeatabilityReport report = repeatability_report(run(setup), 0, 0.1);
  REQUIRE(report.contact_angles_deg.size() >= 3);
  // Welford's algorithm as the oracle.
  double mean = 0.0, m2 = 0.0;
  int n = 0;
  for (double a : report.contact_angles_deg) {
    ++n;
    const double d = a - mean;
    mean += d / n;
    m2 += d * (a - mean);
  }
  CHECK(report.mean_deg == Catch::Approx(mean).margin(1e-9));
  CHECK(report.std_deg == Catch::Approx(std::sqrt(m2 / (n - 1))).margin(1e-9));
  CHECK(report.std_deg > 0.0);
}

TEST_CASE("too few contact events is an error") {
  SimSetup setup = zero_latency(basic_setup());
  setup.config.episode_us = 1000000;  // one cycle only
  CHECK_THROWS_AS(repeatability_report(run(setup), 0, 0.1), SimError);
  SimSetup idle = zero_latency(basic_setup());
  idle.config.trajectory.dip_amp_rad = deg_to_rad(10.0);  // never reaches contact
  CHECK_THROWS_AS(latency_report(run(idle), 1.0, 0.05), SimError);
}

TEST_CASE("csv trajectory shorter than the episode is rejected") {
  std::stringstream src;
  src << "timestamp_us";
  for (int i = 0; i < kChannelCount; ++i) src << ",q";
  src << "\n";
  src << "0";
  for (int i = 0; i < kChannelCount; ++i) src << ",10";
  src << "\n1000000";
  for (int i = 0; i < kChannelCount; ++i) src << ",20";
  src << "\n";
  const Trajectory traj = make_csv_trajectory(src);
  CHECK(traj.duration_us == 1000000);
  SimSetup setup = basic_setup();  // 3 s episode
  CHECK_THROWS_MATCHES(run_episode(setup, traj, hand_model_6dof()), SimError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("shorter than episode")));
}

TEST_CASE("csv trajectory holds poses between rows") {
  std::stringstream src;
  src << "0";
  for (int i = 0; i < kChannelCount; ++i) src << ",0";
  src << "\n100000";
  for (int i = 0; i < kChannelCount; ++i) src << ",30";
  src << "\n";
  const Trajectory traj = make_csv_trajectory(src);
  CHECK(traj.pose_at(0).q[0] == 0.0);
  CHECK(traj.pose_at(50000).q[0] == 0.0);
  CHECK(traj.pose_at(100000).q[0] == Catch::Approx(deg_to_rad(30.0)));
  CHECK(traj.pose_at(999999).q[0] == Catch::Approx(deg_to_rad(30.0)));
}

TEST_CASE("trace csv round-trips rows") {
  SimSetup setup = basic_setup();
  setup.config.noise.encoder_std_rad = deg_to_rad(0.02);
  const Trace trace = run(setup);
  const std::string csv = trace_to_csv(trace);
  CHECK(csv.rfind("# units:", 0) == 0);
  CHECK(csv.find("timestamp_us,enc_00") != std::string::npos);
  std::stringstream ss(csv);
  const Trace back = read_trace_csv(ss);
  REQUIRE(back.rows.size() == trace.rows.size());
  CHECK(back.hand_dof == trace.hand_dof);
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& a = trace.rows[i];
    const TraceRow& b = back.rows[i];
    CHECK(a.timestamp_us == b.timestamp_us);
    CHECK(a.enc == b.enc);
    CHECK(a.mode == b.mode);
    for (int ch = 0; ch < kChannelCount; ++ch)
      CHECK(b.q[ch] == Catch::Approx(a.q[ch]).margin(1e-7));
    for (int f = 0; f < kFingerCount; ++f) {
      CHECK(b.force[f] == Catch::Approx(a.force[f]).margin(1e-7));
      CHECK(b.servo[f] == Catch::Approx(a.servo[f]).margin(1e-7));
    }
  }
}

TEST_CASE("csv-based latency detector agrees with the event log") {
  SimSetup setup = basic_setup();
  const Trace trace = run(setup);
  const LatencyReport from_events = latency_report(trace, 1.0, 0.05);
  std::stringstream ss(trace_to_csv(trace));
  const Trace reread = read_trace_csv(ss);
  CHECK(reread.events.empty());
  const double step = 0.5 * setup.policy.tension_mm / setup.geometry.rs;
  const LatencyReport from_rows = latency_report(reread, 1.0, step);
  REQUIRE(from_rows.latencies_us.size() == from_events.latencies_us.size());
  // Row-based detection quantizes to recorded rows: one recording period.
  const double tol_ms = setup.config.tick_us * setup.config.record_divider / 1000.0;
  CHECK(std::abs(from_rows.mean_ms - from_events.mean_ms) <= tol_ms);
}

TEST_CASE("sim config validation") {
  SimConfig bad;
  bad.tick_us = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigValidationError);
  bad = SimConfig{};
  bad.latencies.sensor_us = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigValidationError);
  bad = SimConfig{};
  bad.record_divider = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigValidationError);
}

TEST_CASE("fnv1a64 known vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("demo config loads and runs") {
  const Config cfg = load_config(std::string(EXOGLOVE_REPO_DIR) + "/configs/demo.ini");
  CHECK(cfg.sim.episode_us == 3000000);
  CHECK(cfg.sim.noise.encoder_std_rad == Catch::Approx(deg_to_rad(0.02)));
  const Trajectory traj = make_trajectory(cfg.sim.trajectory, cfg.geometry);
  const Trace trace = run_episode(cfg.sim_setup(), traj, hand_model_6dof());
  CHECK(trace.rows.size() == 100);
  CHECK(!trace.events.empty());
}
