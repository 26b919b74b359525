#pragma once

// Configuration loading. One INI-style structured-text format for the main
// config (sections: geometry, encoders, feedback, bus, sim) and for hand
// model files (section per joint). Lengths are millimetres and angles are
// degrees in files; angles convert to radians at load. Unknown keys are
// rejected; omitted keys keep their documented defaults.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "exoglove/bus.hpp"
#include "exoglove/feedback.hpp"
#include "exoglove/model.hpp"
#include "exoglove/retarget.hpp"
#include "exoglove/sim.hpp"

namespace exoglove {

struct Config {
  GloveGeometry geometry = GloveGeometry::defaults();
  EncoderSettings encoders;
  JointLimits limits = JointLimits::defaults();
  FeedbackPolicy feedback;
  bus::BusSettings bus;
  sim::SimConfig sim;

  sim::SimSetup sim_setup() const { return {geometry, encoders, limits, feedback, sim}; }

  void validate() const {
    geometry.validate();
    encoders.validate();
    limits.validate();
    feedback.validate();
    bus.validate();
    sim.validate();
  }
};

namespace config_detail {

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<Entry> parse_ini(const std::string& text) {
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigParseError("line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigParseError("line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigParseError("line " + std::to_string(line_no) + ": expected key = value");
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty())
      throw ConfigParseError("line " + std::to_string(line_no) + ": empty key");
    if (e.section.empty())
      throw ConfigParseError("line " + std::to_string(line_no) + ": key outside any section");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline double parse_double(const Entry& e) {
  const char* begin = e.value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || trim(end).size() != 0)
    throw ConfigParseError(e.section + "." + e.key + ": '" + e.value + "' is not a number");
  return v;
}

inline long long parse_int(const Entry& e) {
  const char* begin = e.value.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 0);
  if (end == begin || trim(end).size() != 0)
    throw ConfigParseError(e.section + "." + e.key + ": '" + e.value + "' is not an integer");
  return v;
}

inline bool parse_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigParseError(e.section + "." + e.key + ": expected true/false");
}

inline std::vector<double> parse_list(const Entry& e, std::size_t count) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    Entry item = e;
    item.value = trim(cell);
    out.push_back(parse_double(item));
  }
  if (out.size() != count)
    throw ConfigParseError(e.section + "." + e.key + ": expected " + std::to_string(count) +
                           " comma-separated values");
  return out;
}

inline std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace config_detail

inline Config load_config_text(const std::string& text,
                               const std::vector<std::string>& overrides = {}) {
  using namespace config_detail;
  std::vector<Entry> entries = parse_ini(text);
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    const auto dot = ov.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigParseError("override '" + ov + "' must look like section.key=value");
    Entry e;
    e.section = trim(ov.substr(0, dot));
    e.key = trim(ov.substr(dot + 1, eq - dot - 1));
    e.value = trim(ov.substr(eq + 1));
    entries.push_back(std::move(e));
  }

  Config cfg;
  // Routing overrides are collected and applied after the scalar pass, since
  // the default table is derived from the final segment lengths.
  std::map<int, std::map<int, RoutingPoint>> routing_overrides;

  for (const Entry& e : entries) {
    const std::string id = e.section + "." + e.key;
    if (e.section == "geometry") {
      if (e.key.rfind("routing.", 0) == 0) {
        const std::string rest = e.key.substr(8);
        const auto dot = rest.find('.');
        if (dot == std::string::npos)
          throw ConfigParseError(id + ": expected routing.<finger>.<index>");
        const std::string fname = rest.substr(0, dot);
        int finger = -1;
        for (int f = 0; f < kFingerCount; ++f)
          if (fname == finger_name(f)) finger = f;
        if (finger < 0) throw ConfigParseError(id + ": unknown finger '" + fname + "'");
        Entry idx = e;
        idx.value = rest.substr(dot + 1);
        const long long point = parse_int(idx);
        if (point < 0 || point >= kRoutingPointCount)
          throw ConfigParseError(id + ": point index must be in 0..6");
        const std::vector<double> v = parse_list(e, 4);
        const double frame_d = v[0];
        if (frame_d != static_cast<int>(frame_d))
          throw ConfigParseError(id + ": frame index must be an integer");
        routing_overrides[finger][static_cast<int>(point)] =
            RoutingPoint{static_cast<int>(frame_d), v[1], v[2], v[3]};
        continue;
      }
      GloveGeometry& g = cfg.geometry;
      if (e.key == "r1") g.r1 = parse_double(e);
      else if (e.key == "r1p") g.r1p = parse_double(e);
      else if (e.key == "r2p") g.r2p = parse_double(e);
      else if (e.key == "r3p") g.r3p = parse_double(e);
      else if (e.key == "rg") g.rg = parse_double(e);
      else if (e.key == "rs") g.rs = parse_double(e);
      else if (e.key == "l0") g.l0 = parse_double(e);
      else if (e.key == "l1") g.l1 = parse_double(e);
      else if (e.key == "l2") g.l2 = parse_double(e);
      else if (e.key == "l3") g.l3 = parse_double(e);
      else if (e.key == "sigma") g.sigma = parse_double(e);
      else if (e.key == "dorsal_offset") g.dorsal_offset = parse_double(e);
      else if (e.key == "pip_coupling_a") g.pip_coupling_a = parse_double(e);
      else if (e.key == "pip_coupling_b") g.pip_coupling_b = parse_double(e);
      else if (e.key == "thumb_r1") g.thumb_r1 = parse_double(e);
      else if (e.key == "thumb_r1p") g.thumb_r1p = parse_double(e);
      else if (e.key == "thumb_r3p") g.thumb_r3p = parse_double(e);
      else throw ConfigParseError("unknown key '" + id + "'");
    } else if (e.section == "encoders") {
      if (e.key == "counts_per_rev") {
        cfg.encoders.counts_per_rev = static_cast<int>(parse_int(e));
      } else if (e.key.rfind("scale_", 0) == 0) {
        Entry idx = e;
        idx.value = e.key.substr(6);
        const long long ch = parse_int(idx);
        if (ch < 0 || ch >= kEncoderCount)
          throw ConfigParseError(id + ": encoder channel must be in 0..15");
        cfg.encoders.channel_scale[ch] = parse_double(e);
      } else if (e.key.rfind("limit_", 0) == 0) {
        const std::string which = e.key.substr(6);
        const std::vector<double> v = parse_list(e, 2);
        const double lo = deg_to_rad(v[0]);
        const double hi = deg_to_rad(v[1]);
        if (which == "mcp_deg")
          for (int f = 0; f < kBendFingerCount; ++f) cfg.limits.set(channel_mcp(f), lo, hi);
        else if (which == "pip_deg")
          for (int f = 0; f < kBendFingerCount; ++f) cfg.limits.set(channel_pip(f), lo, hi);
        else if (which == "dip_deg")
          for (int f = 0; f < kBendFingerCount; ++f) cfg.limits.set(channel_dip(f), lo, hi);
        else if (which == "splay_deg")
          for (int f = 0; f < kBendFingerCount; ++f) cfg.limits.set(channel_splay(f), lo, hi);
        else if (which == "thumb_tm_bend_deg") cfg.limits.set(kThumbTmBend, lo, hi);
        else if (which == "thumb_tm_splay_deg") cfg.limits.set(kThumbTmSplay, lo, hi);
        else if (which == "thumb_mcp_deg") cfg.limits.set(kThumbMcp, lo, hi);
        else if (which == "thumb_ip_deg") cfg.limits.set(kThumbIp, lo, hi);
        else throw ConfigParseError("unknown key '" + id + "'");
      } else {
        throw ConfigParseError("unknown key '" + id + "'");
      }
    } else if (e.section == "feedback") {
      FeedbackPolicy& p = cfg.feedback;
      if (e.key == "t0") p.thresholds[0] = parse_double(e);
      else if (e.key == "t1") p.thresholds[1] = parse_double(e);
      else if (e.key == "t2") p.thresholds[2] = parse_double(e);
      else if (e.key == "hysteresis") p.hysteresis = parse_double(e);
      else if (e.key == "current_per_newton") p.current_per_newton = parse_double(e);
      else if (e.key == "tension_mm") p.tension_mm = parse_double(e);
      else if (e.key == "waveform1_hz") p.waveform1_hz = parse_double(e);
      else if (e.key == "waveform2_hz") p.waveform2_hz = parse_double(e);
      else throw ConfigParseError("unknown key '" + id + "'");
    } else if (e.section == "bus") {
      if (e.key == "address") cfg.bus.address = static_cast<std::uint8_t>(parse_int(e));
      else if (e.key == "bitrate") cfg.bus.bitrate = static_cast<int>(parse_int(e));
      else throw ConfigParseError("unknown key '" + id + "'");
    } else if (e.section == "sim") {
      sim::SimConfig& s = cfg.sim;
      if (e.key == "tick_us") s.tick_us = parse_int(e);
      else if (e.key == "record_divider") s.record_divider = static_cast<int>(parse_int(e));
      else if (e.key == "sensor_ms") s.latencies.sensor_us = std::llround(parse_double(e) * 1000.0);
      else if (e.key == "bus_up_ms") s.latencies.bus_up_us = std::llround(parse_double(e) * 1000.0);
      else if (e.key == "compute_ms") s.latencies.compute_us = std::llround(parse_double(e) * 1000.0);
      else if (e.key == "bus_down_ms") s.latencies.bus_down_us = std::llround(parse_double(e) * 1000.0);
      else if (e.key == "servo_mech_ms") s.latencies.servo_mech_us = std::llround(parse_double(e) * 1000.0);
      else if (e.key == "noise_std_deg") s.noise.encoder_std_rad = deg_to_rad(parse_double(e));
      else if (e.key == "drift_deg_per_s") s.noise.drift_rad_per_s = deg_to_rad(parse_double(e));
      else if (e.key == "contact_stiffness_n_per_rad") s.contact.stiffness_n_per_rad = parse_double(e);
      else if (e.key == "engage_angle_deg") s.contact.engage_angle_rad = deg_to_rad(parse_double(e));
      else if (e.key == "quantize") s.quantize = parse_bool(e);
      else if (e.key == "seed") s.seed = static_cast<std::uint64_t>(parse_int(e));
      else if (e.key == "episode_ms") s.episode_us = std::llround(parse_double(e) * 1000.0);
      else if (e.key == "traj_mcp_deg") s.trajectory.mcp_amp_rad = deg_to_rad(parse_double(e));
      else if (e.key == "traj_dip_deg") s.trajectory.dip_amp_rad = deg_to_rad(parse_double(e));
      else if (e.key == "traj_period_ms") s.trajectory.period_us = std::llround(parse_double(e) * 1000.0);
      else if (e.key == "traj_csv") s.trajectory.csv_path = e.value;
      else if (e.key == "trajectory") {
        if (e.value == "static") s.trajectory.kind = sim::TrajectoryKind::Static;
        else if (e.value == "sine") s.trajectory.kind = sim::TrajectoryKind::Sine;
        else if (e.value == "reach") s.trajectory.kind = sim::TrajectoryKind::Reach;
        else if (e.value == "csv") s.trajectory.kind = sim::TrajectoryKind::Csv;
        else throw ConfigParseError(id + ": expected static|sine|reach|csv");
      }
      else throw ConfigParseError("unknown key '" + id + "'");
    } else {
      throw ConfigParseError("unknown section '" + e.section + "'");
    }
  }

  // Rebuild the default guide-point table from the final lengths, then apply
  // per-finger overrides (which must be complete).
  cfg.geometry.routing.fill(default_routing(cfg.geometry));
  for (const auto& [finger, points] : routing_overrides) {
    if (points.size() != kRoutingPointCount)
      throw ConfigValidationError("geometry.routing." + std::string(finger_name(finger)) +
                                  " must have exactly 7 points");
    for (const auto& [idx, p] : points) cfg.geometry.routing[finger][idx] = p;
  }

  cfg.validate();
  return cfg;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Config load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  return load_config_text(read_file(path), overrides);
}

// Geometry serialization round-trips bit-for-bit through load_config_text.
inline std::string serialize_geometry(const GloveGeometry& g) {
  using config_detail::full_precision;
  std::string out = "# lengths in mm\n[geometry]\n";
  const struct { const char* key; double v; } scalars[] = {
      {"r1", g.r1}, {"r1p", g.r1p}, {"r2p", g.r2p}, {"r3p", g.r3p},
      {"rg", g.rg}, {"rs", g.rs},
      {"l0", g.l0}, {"l1", g.l1}, {"l2", g.l2}, {"l3", g.l3},
      {"sigma", g.sigma}, {"dorsal_offset", g.dorsal_offset},
      {"pip_coupling_a", g.pip_coupling_a}, {"pip_coupling_b", g.pip_coupling_b},
      {"thumb_r1", g.thumb_r1}, {"thumb_r1p", g.thumb_r1p}, {"thumb_r3p", g.thumb_r3p},
  };
  for (const auto& [key, v] : scalars) out += std::string(key) + " = " + full_precision(v) + "\n";
  for (int f = 0; f < kFingerCount; ++f)
    for (int i = 0; i < kRoutingPointCount; ++i) {
      const RoutingPoint& p = g.routing[f][i];
      out += "routing." + std::string(finger_name(f)) + "." + std::to_string(i) + " = " +
             std::to_string(p.frame) + ", " + full_precision(p.x) + ", " + full_precision(p.y) +
             ", " + full_precision(p.z) + "\n";
    }
  return out;
}

// ---------------------------------------------------------------------------
// Hand model files: [model] name = ...; one [joint.<name>] section per joint,
// in command order, with source / limit_deg / scale / offset_deg keys.
// ---------------------------------------------------------------------------

inline HandModel load_hand_model_text(const std::string& text) {
  using namespace config_detail;
  HandModel model;
  std::string current_joint;
  for (const Entry& e : parse_ini(text)) {
    if (e.section == "model") {
      if (e.key == "name") model.name = e.value;
      else throw ConfigParseError("unknown key 'model." + e.key + "'");
      continue;
    }
    if (e.section.rfind("joint.", 0) != 0)
      throw ConfigParseError("unknown section '" + e.section + "'");
    const std::string joint_name = e.section.substr(6);
    if (joint_name != current_joint) {
      HandJoint j;
      j.name = joint_name;
      model.joints.push_back(j);
      current_joint = joint_name;
    }
    HandJoint& j = model.joints.back();
    if (e.key == "source") j.source = channel_from_name(e.value);
    else if (e.key == "limit_deg") {
      const std::vector<double> v = parse_list(e, 2);
      j.lower = deg_to_rad(v[0]);
      j.upper = deg_to_rad(v[1]);
    }
    else if (e.key == "scale") j.scale = parse_double(e);
    else if (e.key == "offset_deg") j.offset = deg_to_rad(parse_double(e));
    else throw ConfigParseError("unknown key '" + e.section + "." + e.key + "'");
  }
  model.validate();
  return model;
}

inline HandModel load_hand_model(const std::string& path) {
  return load_hand_model_text(read_file(path));
}

inline std::string serialize_hand_model(const HandModel& model) {
  using config_detail::full_precision;
  std::string out = "[model]\nname = " + model.name + "\n";
  for (const HandJoint& j : model.joints) {
    out += "\n[joint." + j.name + "]\n";
    out += "source = " + channel_name(j.source) + "\n";
    out += "limit_deg = " + full_precision(rad_to_deg(j.lower)) + ", " +
           full_precision(rad_to_deg(j.upper)) + "\n";
    out += "scale = " + full_precision(j.scale) + "\n";
    out += "offset_deg = " + full_precision(rad_to_deg(j.offset)) + "\n";
  }
  return out;
}

}  // namespace exoglove
