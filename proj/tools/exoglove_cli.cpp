// Command-line front end for the glove control stack.
//
// Angles are degrees at this boundary unless --radians is given; everything
// is radians internally. File outputs carry a units header comment.
//
// Exit codes: 0 success, 1 internal error, 2 usage, 3 input/parse error,
// 4 validation error, 5 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "exoglove/exoglove.hpp"

namespace {

using namespace exoglove;

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitValidation = 4;
constexpr int kExitIo = 5;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  bool radians = false;

  Config config() const {
    return config_path.empty() ? load_config_text("", overrides)
                               : load_config(config_path, overrides);
  }
  double in_angle(double v) const { return radians ? v : deg_to_rad(v); }
  std::string unit() const { return radians ? "rad" : "deg"; }
  double out_angle(double v) const { return radians ? v : rad_to_deg(v); }
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_radians = true) {
  cmd->add_option("--config", opts.config_path, "Config file (INI sections)")
      ->envname("EXOGLOVE_CONFIG");
  cmd->add_option("--set", opts.overrides, "Config override, section.key=value");
  if (with_radians)
    cmd->add_flag("--radians", opts.radians,
                  "Inline angles in radians (default: degrees)");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

// ---------------------------------------------------------------------------
// CSV helpers (frames, calibration, joint states)
// ---------------------------------------------------------------------------

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_num(const std::string& cell, int line_no) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\r' || *end == '\t')) ++end;
  if (end == begin || *end != '\0')
    throw ConfigParseError("line " + std::to_string(line_no) + ": '" + cell +
                           "' is not a number");
  return v;
}

bool is_data_line(const std::string& line) {
  return !line.empty() && line[0] != '#' &&
         (std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-');
}

std::vector<EncoderFrame> read_frame_csv(const std::string& path, int counts_per_rev) {
  std::istringstream in(read_file(path));
  std::vector<EncoderFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!is_data_line(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 1 + kEncoderCount)
      throw ConfigParseError("line " + std::to_string(line_no) +
                             ": expected timestamp_us plus 16 encoder counts");
    std::array<std::int32_t, kEncoderCount> counts{};
    const auto ts = static_cast<std::int64_t>(parse_num(cells[0], line_no));
    for (int i = 0; i < kEncoderCount; ++i)
      counts[i] = static_cast<std::int32_t>(parse_num(cells[1 + i], line_no));
    frames.push_back(EncoderFrame::from_counts(ts, counts, counts_per_rev));
  }
  if (frames.empty()) throw ConfigParseError("'" + path + "' contains no frame rows");
  return frames;
}

Calibration read_calibration_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!is_data_line(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != kEncoderCount)
      throw ConfigParseError("calibration file must have 16 angle columns");
    Calibration cal;
    for (int i = 0; i < kEncoderCount; ++i)
      cal.offsets[i] = deg_to_rad(parse_num(cells[i], line_no));
    return cal;
  }
  throw ConfigParseError("'" + path + "' contains no calibration row");
}

void write_calibration_csv(std::ostream& out, const Calibration& cal) {
  out << "# units: angles deg\n";
  for (int i = 0; i < kEncoderCount; ++i) out << (i ? "," : "") << "enc_"
                                              << (i < 10 ? "0" : "") << i;
  out << "\n";
  for (int i = 0; i < kEncoderCount; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", rad_to_deg(cal.offsets[i]));
    out << (i ? "," : "") << buf;
  }
  out << "\n";
}

struct StampedState {
  std::int64_t timestamp_us;
  JointState state;
};

std::vector<StampedState> read_state_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<StampedState> states;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!is_data_line(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 1 + kChannelCount)
      throw ConfigParseError("line " + std::to_string(line_no) +
                             ": expected timestamp_us plus 20 angles");
    StampedState s;
    s.timestamp_us = static_cast<std::int64_t>(parse_num(cells[0], line_no));
    for (int i = 0; i < kChannelCount; ++i)
      s.state.q[i] = deg_to_rad(parse_num(cells[1 + i], line_no));
    states.push_back(s);
  }
  if (states.empty()) throw ConfigParseError("'" + path + "' contains no state rows");
  return states;
}

// ---------------------------------------------------------------------------
// solve / calibrate / inverse / follow
// ---------------------------------------------------------------------------

struct SolveOpts {
  CommonOpts common;
  std::string frame_csv;
  std::string calibration_csv;
  std::string out_path;
  std::optional<double> theta_em;
  std::optional<double> theta_ed;
};

int run_solve(const SolveOpts& o) {
  const Config cfg = o.common.config();
  if (o.theta_em || o.theta_ed) {
    if (!o.theta_em || !o.theta_ed)
      throw ConfigParseError("inline solve needs both --theta-em and --theta-ed");
    FingerSolveInput in;
    in.theta_em = o.common.in_angle(*o.theta_em);
    in.theta_ed = o.common.in_angle(*o.theta_ed);
    in.geometry = cfg.geometry;
    const FingerSolveOutput out = solve_finger(in, cfg.limits);
    const std::string u = o.common.unit();
    std::cout << "theta1_" << u << "=" << fmt(o.common.out_angle(out.theta1)) << "\n"
              << "theta2_" << u << "=" << fmt(o.common.out_angle(out.theta2)) << "\n"
              << "theta3_" << u << "=" << fmt(o.common.out_angle(out.theta3)) << "\n";
    if (out.clamped) std::cerr << "warning: solution clamped to joint limits\n";
    return 0;
  }
  if (o.frame_csv.empty())
    throw ConfigParseError("solve needs --frame-csv or --theta-em/--theta-ed");
  const Calibration cal = o.calibration_csv.empty() ? Calibration{}
                                                    : read_calibration_csv(o.calibration_csv);
  const auto frames = read_frame_csv(o.frame_csv, cfg.encoders.counts_per_rev);
  std::ostringstream body;
  body << "# units: angles deg\ntimestamp_us";
  for (int i = 0; i < kChannelCount; ++i) body << ",q_" << (i < 10 ? "0" : "") << i;
  body << "\n";
  int clamped_channels = 0;
  for (const EncoderFrame& frame : frames) {
    const HandSolveResult r = solve_hand(frame, cfg.geometry, cal, cfg.limits, cfg.encoders);
    body << frame.timestamp_us;
    for (int ch = 0; ch < kChannelCount; ++ch) body << ',' << fmt(rad_to_deg(r.state.q[ch]));
    body << "\n";
    for (bool c : r.clamped) clamped_channels += c ? 1 : 0;
  }
  if (o.out_path.empty()) {
    std::cout << body.str();
  } else {
    open_out(o.out_path) << body.str();
  }
  if (clamped_channels > 0)
    std::cerr << "warning: joint limits clamped " << clamped_channels << " channel value(s)\n";
  return 0;
}

int run_calibrate(const CommonOpts& common, const std::string& frame_csv,
                  const std::string& out_path) {
  const Config cfg = common.config();
  const auto frames = read_frame_csv(frame_csv, cfg.encoders.counts_per_rev);
  const Calibration cal = calibrate(frames.front());
  if (out_path.empty()) {
    write_calibration_csv(std::cout, cal);
  } else {
    auto out = open_out(out_path);
    write_calibration_csv(out, cal);
  }
  return 0;
}

int run_inverse(const CommonOpts& common, double theta1, double theta3) {
  const Config cfg = common.config();
  const EncoderPair e =
      encoders_from_angles(common.in_angle(theta1), common.in_angle(theta3), cfg.geometry);
  const std::string u = common.unit();
  std::cout << "theta_em_" << u << "=" << fmt(common.out_angle(e.theta_em)) << "\n"
            << "theta_ed_" << u << "=" << fmt(common.out_angle(e.theta_ed)) << "\n";
  return 0;
}

int run_follow(const CommonOpts& common, double t1, double t2, double t3,
               const std::string& finger_name_str, bool print_points) {
  const Config cfg = common.config();
  int finger = -1;
  for (int f = 0; f < kFingerCount; ++f)
    if (finger_name_str == finger_name(f)) finger = f;
  if (finger < 0) throw ConfigParseError("unknown finger '" + finger_name_str + "'");
  const FingerPose pose{common.in_angle(t1), common.in_angle(t2), common.in_angle(t3)};
  const CablePath path = cable_length(pose, cfg.geometry, static_cast<Finger>(finger));
  const double delta = servo_target_delta(pose, cfg.geometry, static_cast<Finger>(finger));
  std::cout << "la_mm=" << fmt(path.length_mm) << "\n"
            << "theta_s_rad=" << fmt(path.servo_angle) << "\n"
            << "theta_s_delta_rad=" << fmt(delta) << "\n";
  if (print_points)
    for (int i = 0; i < kRoutingPointCount; ++i)
      std::cout << "point_" << i << "_mm=" << fmt(path.global_points[i].x()) << ","
                << fmt(path.global_points[i].y()) << "," << fmt(path.global_points[i].z())
                << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// feedback
// ---------------------------------------------------------------------------

int run_feedback(const CommonOpts& common, std::optional<double> force,
                 std::optional<double> current, const std::string& stream_csv, int finger) {
  const Config cfg = common.config();
  if (!stream_csv.empty()) {
    std::istringstream in(read_file(stream_csv));
    FeedbackState state;
    std::string line;
    int line_no = 0;
    std::cout << "timestamp_us,mode\n";
    while (std::getline(in, line)) {
      ++line_no;
      if (!is_data_line(line)) continue;
      const auto cells = split_csv(line);
      if (cells.size() != 2)
        throw ConfigParseError("line " + std::to_string(line_no) +
                               ": expected timestamp_us,force_n");
      ForceSample s;
      s.finger = finger;
      s.timestamp_us = static_cast<std::int64_t>(parse_num(cells[0], line_no));
      s.force_n = parse_num(cells[1], line_no);
      s.current_ma = s.force_n * cfg.feedback.current_per_newton;
      step_feedback(state, s, cfg.feedback, FingerPose{}, cfg.geometry);
      std::cout << s.timestamp_us << "," << feedback_mode_name(state.mode[finger]) << "\n";
    }
    return 0;
  }
  double f = 0.0;
  if (force) f = *force;
  else if (current) f = current_to_force(*current, cfg.feedback);
  else throw ConfigParseError("feedback needs --force, --current or --stream");
  std::cout << "force_n=" << fmt(f) << "\n"
            << "mode=" << feedback_mode_name(classify_force(f, cfg.feedback)) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// retarget
// ---------------------------------------------------------------------------

HandModel resolve_model(const std::string& spec) {
  if (spec == "6dof") return hand_model_6dof();
  if (spec == "15dof") return hand_model_15dof();
  if (spec == "24dof") return hand_model_24dof();
  return load_hand_model(spec);
}

int run_retarget(const CommonOpts& common, const std::string& model_spec,
                 const std::string& state_csv, const std::string& out_path, bool list,
                 const std::string& dump) {
  (void)common;
  if (list) {
    for (const HandModel& m : builtin_models()) std::cout << m.name << " dof=" << m.dof() << "\n";
    return 0;
  }
  if (!dump.empty()) {
    const std::string text = serialize_hand_model(resolve_model(dump));
    if (out_path.empty()) std::cout << text;
    else open_out(out_path) << text;
    return 0;
  }
  if (model_spec.empty()) throw ConfigParseError("retarget needs --model");
  const HandModel model = resolve_model(model_spec);
  if (state_csv.empty()) throw ConfigParseError("retarget needs --state-csv");
  const auto states = read_state_csv(state_csv);
  std::ostringstream body;
  body << "# units: angles deg; model " << model.name << "\ntimestamp_us";
  for (const HandJoint& j : model.joints) body << "," << j.name;
  body << "\n";
  int clamped = 0;
  for (const StampedState& s : states) {
    const HandCommand cmd = retarget(s.state, model);
    body << s.timestamp_us;
    for (double t : cmd.targets) body << ',' << fmt(rad_to_deg(t));
    body << "\n";
    for (bool c : cmd.clamp_mask) clamped += c ? 1 : 0;
  }
  if (out_path.empty()) std::cout << body.str();
  else open_out(out_path) << body.str();
  if (clamped > 0) std::cerr << "warning: clamped " << clamped << " target value(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bus
// ---------------------------------------------------------------------------

int run_bus_encode(std::uint8_t address, std::uint8_t function, const std::string& payload_hex) {
  bus::BusFrame f;
  f.address = address;
  f.function = function;
  f.payload = bus::from_hex(payload_hex);
  std::cout << bus::to_hex(bus::encode_frame(f)) << "\n";
  return 0;
}

int run_bus_decode(const std::string& hex) {
  const bus::DecodeResult r = bus::decode_frame(bus::from_hex(hex));
  if (r.status != bus::DecodeStatus::Ok)
    throw ConfigParseError(std::string("decode failed: ") + bus::decode_status_name(r.status));
  std::cout << "address=" << static_cast<int>(r.frame.address) << "\n";
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%02x", r.frame.function);
  std::cout << "function=" << buf << "\n";
  std::cout << "payload=" << bus::to_hex(r.frame.payload) << "\n";
  std::snprintf(buf, sizeof buf, "0x%04x", r.frame.crc);
  std::cout << "crc=" << buf << "\n";
  return 0;
}

void serve_lines(bus::DeviceEmulator& dev, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    const std::string hex = [&] {
      std::string s;
      for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
      return s;
    }();
    if (hex.empty()) continue;
    std::vector<std::uint8_t> wire;
    try {
      wire = bus::from_hex(hex);
    } catch (const std::invalid_argument& e) {
      out << "error: " << e.what() << "\n" << std::flush;
      continue;
    }
    const bus::DecodeResult r = bus::decode_frame(wire);
    if (r.status != bus::DecodeStatus::Ok) {
      out << "error: " << bus::decode_status_name(r.status) << "\n" << std::flush;
      continue;
    }
    const auto resp = dev.step(r.frame);
    if (resp)
      out << bus::to_hex(bus::encode_frame(*resp)) << "\n" << std::flush;
    else
      out << "silent\n" << std::flush;
  }
}

int run_bus_serve(const CommonOpts& common, const std::string& counts_csv, int tcp_port) {
  const Config cfg = common.config();
  bus::DeviceEmulator dev(cfg.bus.address);
  if (!counts_csv.empty()) {
    const auto cells = split_csv(counts_csv);
    if (cells.size() != kEncoderCount)
      throw ConfigParseError("--counts needs 16 comma-separated values");
    for (int i = 0; i < kEncoderCount; ++i)
      dev.registers().set_encoder_count(i, static_cast<std::uint16_t>(parse_num(cells[i], 0)));
  }
  if (tcp_port < 0) {
    serve_lines(dev, std::cin, std::cout);
    return 0;
  }
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw ConfigError("socket() failed");
  const int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(tcp_port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(listener);
    throw ConfigError("bind() failed on port " + std::to_string(tcp_port));
  }
  if (::listen(listener, 1) != 0) {
    ::close(listener);
    throw ConfigError("listen() failed");
  }
  std::cerr << "listening on 127.0.0.1:" << tcp_port << "\n" << std::flush;
  const int client = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (client < 0) throw ConfigError("accept() failed");
  std::string buffer;
  char chunk[512];
  for (;;) {
    const ssize_t n = ::read(client, chunk, sizeof chunk);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::istringstream one_line(buffer.substr(0, pos));
      buffer.erase(0, pos + 1);
      std::ostringstream reply;
      serve_lines(dev, one_line, reply);
      const std::string text = reply.str();
      if (!text.empty()) {
        if (::write(client, text.data(), text.size()) < 0) {
          ::close(client);
          return 0;
        }
      }
    }
  }
  ::close(client);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate / report
// ---------------------------------------------------------------------------

void print_latency(const sim::LatencyReport& r) {
  char mean[32], max[32];
  std::snprintf(mean, sizeof mean, "%.3f", r.mean_ms);
  std::snprintf(max, sizeof max, "%.3f", r.max_ms);
  std::cout << "mean_latency_ms=" << mean << " max_latency_ms=" << max
            << " events=" << r.latencies_us.size() << "\n";
}

void print_repeatability(const sim::RepeatabilityReport& r) {
  char mean[32], sd[32];
  std::snprintf(mean, sizeof mean, "%.6f", r.mean_deg);
  std::snprintf(sd, sizeof sd, "%.6f", r.std_deg);
  std::cout << "repeatability_mean_deg=" << mean << " repeatability_std_deg=" << sd
            << " cycles=" << r.contact_angles_deg.size() << "\n";
  std::cout << "contact_angles_deg=";
  for (std::size_t i = 0; i < r.contact_angles_deg.size(); ++i)
    std::cout << (i ? "," : "") << fmt(r.contact_angles_deg[i]);
  std::cout << "\n";
}

int parse_finger(const std::string& name) {
  for (int f = 0; f < kFingerCount; ++f)
    if (name == finger_name(f)) return f;
  throw ConfigParseError("unknown finger '" + name + "'");
}

struct SimulateOpts {
  CommonOpts common;
  std::string out_path = "trace.csv";
  std::string model_spec = "6dof";
  std::optional<std::uint64_t> seed;
  int episodes = 1;
  std::string report = "none";
  std::string finger = "index";
};

int run_simulate(const SimulateOpts& o) {
  Config cfg = o.common.config();
  if (o.seed) cfg.sim.seed = *o.seed;
  const HandModel model = resolve_model(o.model_spec);
  if (o.episodes < 1) throw ConfigParseError("--episodes must be at least 1");

  for (int ep = 0; ep < o.episodes; ++ep) {
    sim::SimSetup setup = cfg.sim_setup();
    setup.config.seed = cfg.sim.seed + static_cast<std::uint64_t>(ep);
    sim::Trajectory traj;
    if (cfg.sim.trajectory.kind == sim::TrajectoryKind::Csv) {
      std::istringstream src(read_file(cfg.sim.trajectory.csv_path));
      traj = sim::make_csv_trajectory(src);
    } else {
      traj = sim::make_trajectory(cfg.sim.trajectory, cfg.geometry);
    }
    const sim::Trace trace = sim::run_episode(setup, traj, model);
    const std::string csv = sim::trace_to_csv(trace);

    std::string path = o.out_path;
    if (o.episodes > 1) {
      const auto dot = path.rfind('.');
      const std::string suffix = "." + std::to_string(ep);
      path = dot == std::string::npos ? path + suffix
                                      : path.substr(0, dot) + suffix + path.substr(dot);
    }
    open_out(path) << csv;
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(sim::fnv1a64(csv)));
    std::cout << "trace=" << path << " rows=" << trace.rows.size()
              << " trace_fnv1a64=" << hash << "\n";

    const int finger = parse_finger(o.finger);
    if (o.report == "latency" || o.report == "all")
      print_latency(sim::latency_report(trace, cfg.feedback.thresholds[2], 0.0));
    if (o.report == "repeatability" || o.report == "all")
      print_repeatability(
          sim::repeatability_report(trace, finger, cfg.feedback.thresholds[0]));
  }
  return 0;
}

int run_report(const CommonOpts& common, const std::string& trace_path, const std::string& kind,
               const std::string& finger_str) {
  const Config cfg = common.config();
  std::istringstream in(read_file(trace_path));
  const sim::Trace trace = sim::read_trace_csv(in);
  if (kind == "latency") {
    const double step = 0.5 * cfg.feedback.tension_mm / cfg.geometry.rs;
    print_latency(sim::latency_report(trace, cfg.feedback.thresholds[2], step));
  } else if (kind == "repeatability") {
    print_repeatability(
        sim::repeatability_report(trace, parse_finger(finger_str), cfg.feedback.thresholds[0]));
  } else {
    throw ConfigParseError("--kind must be latency or repeatability");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Cable-driven force-feedback glove control stack: kinematic solve, cable "
      "following, haptic feedback, retargeting, bus codec and simulator.\n"
      "Angles are degrees at the CLI (use --radians for radians); file outputs "
      "carry a units header."};
  app.require_subcommand(1);

  SolveOpts solve_opts;
  auto* solve_cmd = app.add_subcommand(
      "solve", "Solve joint angles from encoder data (degrees unless --radians)");
  add_common(solve_cmd, solve_opts.common);
  solve_cmd->add_option("--frame-csv", solve_opts.frame_csv,
                        "Frame CSV: timestamp_us plus 16 encoder counts per row");
  solve_cmd->add_option("--calibration", solve_opts.calibration_csv,
                        "Calibration CSV written by 'calibrate'");
  solve_cmd->add_option("--out", solve_opts.out_path, "Output CSV path (default stdout)");
  double em = 0.0, ed = 0.0;
  auto* em_opt = solve_cmd->add_option("--theta-em", em, "Inline MCP-cable encoder angle");
  auto* ed_opt = solve_cmd->add_option("--theta-ed", ed, "Inline DIP-cable encoder angle");

  CommonOpts cal_common;
  std::string cal_frame, cal_out;
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "Capture flat-hand encoder offsets from the first frame of a CSV");
  add_common(cal_cmd, cal_common, false);
  cal_cmd->add_option("--frame-csv", cal_frame, "Flat-hand frame CSV")->required();
  cal_cmd->add_option("--out", cal_out, "Calibration output path (default stdout)");

  CommonOpts inv_common;
  double inv_t1 = 0.0, inv_t3 = 0.0;
  auto* inv_cmd = app.add_subcommand(
      "inverse", "Encoder angles for a finger pose (degrees unless --radians)");
  add_common(inv_cmd, inv_common);
  inv_cmd->add_option("--theta1", inv_t1, "MCP bend angle")->required();
  inv_cmd->add_option("--theta3", inv_t3, "DIP bend angle")->required();

  CommonOpts follow_common;
  double f_t1 = 0.0, f_t2 = 0.0, f_t3 = 0.0;
  std::string follow_finger = "index";
  bool follow_points = false;
  auto* follow_cmd = app.add_subcommand(
      "follow", "Cable length and servo angle for a pose (degrees unless --radians)");
  add_common(follow_cmd, follow_common);
  follow_cmd->add_option("--theta1", f_t1, "MCP bend")->required();
  follow_cmd->add_option("--theta2", f_t2, "PIP bend")->required();
  follow_cmd->add_option("--theta3", f_t3, "DIP bend")->required();
  follow_cmd->add_option("--finger", follow_finger, "Finger (index..pinky, thumb)");
  follow_cmd->add_flag("--points", follow_points, "Also print the global guide points");

  CommonOpts fb_common;
  double fb_force = 0.0, fb_current = 0.0;
  std::string fb_stream;
  std::string fb_finger = "index";
  auto* fb_cmd = app.add_subcommand(
      "feedback", "Classify a force (N) or step a timestamp_us,force_n stream");
  add_common(fb_cmd, fb_common, false);
  auto* fb_force_opt = fb_cmd->add_option("--force", fb_force, "Force in newtons");
  auto* fb_current_opt = fb_cmd->add_option("--current", fb_current, "Motor current in mA");
  fb_cmd->add_option("--stream", fb_stream, "CSV of timestamp_us,force_n rows");
  fb_cmd->add_option("--finger", fb_finger, "Finger for --stream state");

  CommonOpts rt_common;
  std::string rt_model, rt_state, rt_out, rt_dump;
  bool rt_list = false;
  auto* rt_cmd = app.add_subcommand(
      "retarget", "Map solved joint states onto a hand model (CSV in, CSV out)");
  add_common(rt_cmd, rt_common, false);
  rt_cmd->add_option("--model", rt_model, "6dof, 15dof, 24dof or a model file path");
  rt_cmd->add_option("--state-csv", rt_state, "Joint state CSV from 'solve'");
  rt_cmd->add_option("--out", rt_out, "Output CSV path (default stdout)");
  rt_cmd->add_flag("--list-models", rt_list, "List built-in hand models");
  rt_cmd->add_option("--dump-model", rt_dump, "Print a built-in model as a model file");

  auto* bus_cmd = app.add_subcommand("bus", "Modbus-RTU codec and device emulator");
  bus_cmd->require_subcommand(1);
  std::uint8_t enc_addr = 1, enc_func = 3;
  std::string enc_payload;
  auto* bus_enc = bus_cmd->add_subcommand("encode", "Encode a frame to hex");
  bus_enc->add_option("--address", enc_addr, "Device address");
  bus_enc->add_option("--function", enc_func, "Function code");
  bus_enc->add_option("--payload", enc_payload, "Payload bytes as hex");
  std::string dec_hex;
  auto* bus_dec = bus_cmd->add_subcommand("decode", "Decode and CRC-check a hex frame");
  bus_dec->add_option("--hex", dec_hex, "Wire bytes as hex")->required();
  CommonOpts serve_common;
  std::string serve_counts;
  int serve_tcp = -1;
  auto* bus_serve = bus_cmd->add_subcommand(
      "serve", "Answer hex frames line-by-line on stdio or a local TCP port");
  add_common(bus_serve, serve_common, false);
  bus_serve->add_option("--counts", serve_counts, "Preload 16 encoder counts");
  bus_serve->add_option("--tcp", serve_tcp, "Serve one client on 127.0.0.1:PORT");

  SimulateOpts sim_opts;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Run the closed-loop simulator and write a trace CSV");
  add_common(sim_cmd, sim_opts.common, false);
  sim_cmd->add_option("--out", sim_opts.out_path, "Trace output path");
  sim_cmd->add_option("--model", sim_opts.model_spec, "Hand model (6dof/15dof/24dof or path)");
  std::uint64_t sim_seed = 0;
  auto* seed_opt = sim_cmd->add_option("--seed", sim_seed, "Override the config seed");
  sim_cmd->add_option("--episodes", sim_opts.episodes,
                      "Episode count; seeds derive from the base seed");
  sim_cmd->add_option("--report", sim_opts.report, "none, latency, repeatability or all");
  sim_cmd->add_option("--finger", sim_opts.finger, "Finger for the repeatability report");

  CommonOpts rep_common;
  std::string rep_trace, rep_kind = "latency", rep_finger = "index";
  auto* rep_cmd = app.add_subcommand("report", "Run reports over an existing trace CSV");
  add_common(rep_cmd, rep_common, false);
  rep_cmd->add_option("--trace", rep_trace, "Trace CSV path")->required();
  rep_cmd->add_option("--kind", rep_kind, "latency or repeatability");
  rep_cmd->add_option("--finger", rep_finger, "Finger for repeatability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (solve_cmd->parsed()) {
      if (*em_opt) solve_opts.theta_em = em;
      if (*ed_opt) solve_opts.theta_ed = ed;
      return run_solve(solve_opts);
    }
    if (cal_cmd->parsed()) return run_calibrate(cal_common, cal_frame, cal_out);
    if (inv_cmd->parsed()) return run_inverse(inv_common, inv_t1, inv_t3);
    if (follow_cmd->parsed())
      return run_follow(follow_common, f_t1, f_t2, f_t3, follow_finger, follow_points);
    if (fb_cmd->parsed())
      return run_feedback(fb_common,
                          *fb_force_opt ? std::optional<double>(fb_force) : std::nullopt,
                          *fb_current_opt ? std::optional<double>(fb_current) : std::nullopt,
                          fb_stream, parse_finger(fb_finger));
    if (rt_cmd->parsed())
      return run_retarget(rt_common, rt_model, rt_state, rt_out, rt_list, rt_dump);
    if (bus_cmd->parsed()) {
      if (bus_enc->parsed()) return run_bus_encode(enc_addr, enc_func, enc_payload);
      if (bus_dec->parsed()) return run_bus_decode(dec_hex);
      if (bus_serve->parsed()) return run_bus_serve(serve_common, serve_counts, serve_tcp);
    }
    if (sim_cmd->parsed()) {
      if (*seed_opt) sim_opts.seed = sim_seed;
      return run_simulate(sim_opts);
    }
    if (rep_cmd->parsed()) return run_report(rep_common, rep_trace, rep_kind, rep_finger);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const ConfigParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ConfigValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const sim::SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
