#pragma once

// Domain types and physical constants for a cable-driven exoskeleton glove:
// measurement-cable geometry, encoder frames, the solved 20-DoF hand pose,
// and the haptic feedback command vocabulary. This header depends on nothing
// but the standard library; all other modules build on it.
//
// Units: radians and millimetres internally, integer microseconds for time.
// Degrees appear only at file/CLI boundaries.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace exoglove {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTau = 2.0 * std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
constexpr double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file or unknown key.
class ConfigParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Well-formed file whose values violate an invariant; message names the key.
class ConfigValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class Finger : int { Index = 0, Middle = 1, Ring = 2, Pinky = 3, Thumb = 4 };
inline constexpr int kFingerCount = 5;
inline constexpr int kBendFingerCount = 4;  // fingers with the em/ed cable pair

inline const char* finger_name(int f) {
  static constexpr const char* names[] = {"index", "middle", "ring", "pinky", "thumb"};
  return names[f];
}

// The 20 solved joint channels, in trace/register order.
// Fingers: mcp bend, pip, dip, mcp splay. Thumb: tm bend, tm splay, mcp, ip.
enum Channel : int {
  kIndexMcp = 0, kIndexPip, kIndexDip, kIndexSplay,
  kMiddleMcp, kMiddlePip, kMiddleDip, kMiddleSplay,
  kRingMcp, kRingPip, kRingDip, kRingSplay,
  kPinkyMcp, kPinkyPip, kPinkyDip, kPinkySplay,
  kThumbTmBend, kThumbTmSplay, kThumbMcp, kThumbIp,
};
inline constexpr int kChannelCount = 20;

inline constexpr int channel_mcp(int finger) { return finger * 4 + 0; }
inline constexpr int channel_pip(int finger) { return finger * 4 + 1; }
inline constexpr int channel_dip(int finger) { return finger * 4 + 2; }
inline constexpr int channel_splay(int finger) { return finger * 4 + 3; }

inline std::string channel_name(int ch) {
  static constexpr const char* thumb[] = {"thumb.tm_bend", "thumb.tm_splay",
                                          "thumb.mcp", "thumb.ip"};
  if (ch >= kThumbTmBend) return thumb[ch - kThumbTmBend];
  static constexpr const char* part[] = {"mcp", "pip", "dip", "splay"};
  return std::string(finger_name(ch / 4)) + "." + part[ch % 4];
}

inline int channel_from_name(const std::string& name) {
  for (int ch = 0; ch < kChannelCount; ++ch)
    if (channel_name(ch) == name) return ch;
  throw std::invalid_argument("unknown glove channel '" + name + "'");
}

// The 16 measured encoder channels, in acquisition/register order.
enum EncoderChannel : int {
  kEncIndexEm = 0, kEncIndexEd,
  kEncMiddleEm, kEncMiddleEd,
  kEncRingEm, kEncRingEd,
  kEncPinkyEm, kEncPinkyEd,
  kEncIndexSplay, kEncMiddleSplay, kEncRingSplay, kEncPinkySplay,
  kEncThumbTmBend, kEncThumbTmSplay, kEncThumbMcp, kEncThumbIp,
};
inline constexpr int kEncoderCount = 16;

inline constexpr int enc_em(int finger) { return finger * 2; }
inline constexpr int enc_ed(int finger) { return finger * 2 + 1; }
inline constexpr int enc_splay(int finger) { return 8 + finger; }

// One force-feedback cable guide point, expressed in a local joint frame.
// Frame 0 is the hand base; frames 1..3 rotate with the mcp/pip/dip joints.
struct RoutingPoint {
  int frame = 0;
  double x = 0.0, y = 0.0, z = 0.0;  // mm
};

inline constexpr int kRoutingPointCount = 7;  // O1, A1, A2, B1, B2, C1, C2

// Cable radii, segment lengths and routing geometry of the glove.
// Defaults are the published plant values; rg/rs and the routing point
// table have no published values and are configuration with documented
// defaults.
struct GloveGeometry {
  double r1 = 16.25;   // MCP measurement cable radius at MCP, mm
  double r1p = 23.25;  // DIP measurement cable radius at MCP, mm
  double r2p = 19.31;  // ... at PIP, mm
  double r3p = 17.42;  // ... at DIP, mm
  double rg = 6.0;     // encoder gear radius, mm (config)
  double rs = 10.0;    // servo output flange radius, mm (config)
  double l0 = 35.71;   // base origin O -> A, mm
  double l1 = 44.33;   // A -> B, mm
  double l2 = 24.21;   // B -> C, mm
  double l3 = 23.51;   // C -> D, mm (places the distal guide points)
  double sigma = 2.0;  // cable slack allowance, mm
  double dorsal_offset = 8.0;  // default guide-point height above the joint axes, mm
  double pip_coupling_a = 0.989;  // theta2 = (theta3 + b) / a
  double pip_coupling_b = 0.230;
  // Thumb IP measurement chain (no published values; config).
  double thumb_r1 = 16.25;
  double thumb_r1p = 23.25;
  double thumb_r3p = 17.42;

  // Exactly 7 guide points per finger, O1 through C2 in cable order.
  std::array<std::vector<RoutingPoint>, kFingerCount> routing;

  static GloveGeometry defaults();
  void validate() const;
};

// Default guide points: collinear along the dorsal line at zero pose, two
// points per phalanx at 0.3/0.7 of the segment length, O1 on the base.
inline std::vector<RoutingPoint> default_routing(const GloveGeometry& g) {
  const double h = g.dorsal_offset;
  return {
      {0, 0.0, h, 0.0},
      {1, -0.3 * g.l1, h, 0.0}, {1, -0.7 * g.l1, h, 0.0},
      {2, -0.3 * g.l2, h, 0.0}, {2, -0.7 * g.l2, h, 0.0},
      {3, -0.3 * g.l3, h, 0.0}, {3, -0.7 * g.l3, h, 0.0},
  };
}

inline GloveGeometry GloveGeometry::defaults() {
  GloveGeometry g;
  g.routing.fill(default_routing(g));
  return g;
}

inline void GloveGeometry::validate() const {
  const struct { const char* key; double v; } lengths[] = {
      {"geometry.r1", r1}, {"geometry.r1p", r1p}, {"geometry.r2p", r2p},
      {"geometry.r3p", r3p}, {"geometry.rg", rg}, {"geometry.rs", rs},
      {"geometry.l0", l0}, {"geometry.l1", l1}, {"geometry.l2", l2},
      {"geometry.l3", l3}, {"geometry.thumb_r1", thumb_r1},
      {"geometry.thumb_r1p", thumb_r1p}, {"geometry.thumb_r3p", thumb_r3p},
  };
  for (const auto& [key, v] : lengths)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigValidationError(std::string(key) + " must be strictly positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw ConfigValidationError("geometry.sigma must be non-negative");
  if (!(pip_coupling_a > 0.0))
    throw ConfigValidationError("geometry.pip_coupling_a must be strictly positive");
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& pts = routing[f];
    if (pts.size() != kRoutingPointCount)
      throw ConfigValidationError("geometry.routing." + std::string(finger_name(f)) +
                                  " must have exactly 7 points");
    for (const auto& p : pts)
      if (p.frame < 0 || p.frame > 3)
        throw ConfigValidationError("geometry.routing." + std::string(finger_name(f)) +
                                    " frame index must be in 0..3");
  }
}

// Encoder acquisition settings. `channel_scale` multiplies the calibrated
// reading per channel (unity by default; lets direct channels be re-geared
// in config without code changes).
struct EncoderSettings {
  int counts_per_rev = 4096;
  std::array<double, kEncoderCount> channel_scale = [] {
    std::array<double, kEncoderCount> s{};
    s.fill(1.0);
    return s;
  }();

  void validate() const {
    if (counts_per_rev <= 0)
      throw ConfigValidationError("encoders.counts_per_rev must be strictly positive");
    for (double s : channel_scale)
      if (!std::isfinite(s) || s == 0.0)
        throw ConfigValidationError("encoders.channel_scale entries must be finite and non-zero");
  }
};

// Joint limits applied after solving, radians. Anatomy-conventional
// defaults; the plant publishes none.
struct JointLimits {
  std::array<double, kChannelCount> lo{};
  std::array<double, kChannelCount> hi{};

  static JointLimits defaults() {
    JointLimits lim;
    for (int f = 0; f < kBendFingerCount; ++f) {
      lim.set(channel_mcp(f), 0.0, deg_to_rad(90.0));
      lim.set(channel_pip(f), 0.0, deg_to_rad(110.0));
      lim.set(channel_dip(f), 0.0, deg_to_rad(90.0));
      lim.set(channel_splay(f), deg_to_rad(-20.0), deg_to_rad(20.0));
    }
    lim.set(kThumbTmBend, 0.0, deg_to_rad(90.0));
    lim.set(kThumbTmSplay, deg_to_rad(-20.0), deg_to_rad(20.0));
    lim.set(kThumbMcp, 0.0, deg_to_rad(90.0));
    lim.set(kThumbIp, 0.0, deg_to_rad(90.0));
    return lim;
  }

  void set(int ch, double l, double h) { lo[ch] = l; hi[ch] = h; }

  void validate() const {
    for (int ch = 0; ch < kChannelCount; ++ch)
      if (!(lo[ch] <= hi[ch]))
        throw ConfigValidationError("limit for channel " + channel_name(ch) +
                                    " must be ordered lo <= hi");
  }

  // Returns the clamped value; sets `clamped` when the limit was binding.
  double clamp(int ch, double v, bool& clamped) const {
    if (v < lo[ch]) { clamped = true; return lo[ch]; }
    if (v > hi[ch]) { clamped = true; return hi[ch]; }
    return v;
  }
};

// angle = count * 2pi / counts_per_rev. The measurement gear turns several
// revolutions at full flexion, so counts are signed and multi-turn.
inline double count_to_angle(std::int32_t count, int counts_per_rev) {
  return static_cast<double>(count) * (kTau / counts_per_rev);
}

inline std::int32_t angle_to_count(double angle, int counts_per_rev) {
  return static_cast<std::int32_t>(std::llround(angle * counts_per_rev / kTau));
}

// Single-revolution decode with the documented [0, counts_per_rev) contract.
inline std::array<double, kEncoderCount> decode_counts(
    const std::array<std::int32_t, kEncoderCount>& raw_counts, int counts_per_rev) {
  if (counts_per_rev <= 0)
    throw std::invalid_argument("counts_per_rev must be strictly positive");
  std::array<double, kEncoderCount> angles{};
  for (int i = 0; i < kEncoderCount; ++i) {
    if (raw_counts[i] < 0 || raw_counts[i] >= counts_per_rev)
      throw std::out_of_range("encoder count " + std::to_string(i) + " out of range [0, " +
                              std::to_string(counts_per_rev) + ")");
    angles[i] = count_to_angle(raw_counts[i], counts_per_rev);
  }
  return angles;
}

// One timestamped sample of the 16 encoder angles plus the quantized counts
// they were decoded from (readings[i] == raw_counts[i] * 2pi / N exactly).
struct EncoderFrame {
  std::int64_t timestamp_us = 0;
  std::array<double, kEncoderCount> readings{};
  std::array<std::int32_t, kEncoderCount> raw_counts{};

  static EncoderFrame from_counts(std::int64_t timestamp_us,
                                  const std::array<std::int32_t, kEncoderCount>& counts,
                                  int counts_per_rev) {
    EncoderFrame f;
    f.timestamp_us = timestamp_us;
    f.raw_counts = counts;
    for (int i = 0; i < kEncoderCount; ++i)
      f.readings[i] = count_to_angle(counts[i], counts_per_rev);
    return f;
  }
};

// Per-channel encoder offsets captured at the flat-hand pose.
struct Calibration {
  std::array<double, kEncoderCount> offsets{};
};

inline Calibration calibrate(const EncoderFrame& flat_hand) {
  Calibration c;
  c.offsets = flat_hand.readings;
  return c;
}

// The glove's solved 20-DoF pose, radians, in Channel order.
struct JointState {
  std::array<double, kChannelCount> q{};

  double mcp(int finger) const { return q[channel_mcp(finger)]; }
  double pip(int finger) const { return q[channel_pip(finger)]; }
  double dip(int finger) const { return q[channel_dip(finger)]; }
  double splay(int finger) const { return q[channel_splay(finger)]; }
  double thumb_tm_bend() const { return q[kThumbTmBend]; }
  double thumb_tm_splay() const { return q[kThumbTmSplay]; }
  double thumb_mcp() const { return q[kThumbMcp]; }
  double thumb_ip() const { return q[kThumbIp]; }
};

// One per-finger force/current telemetry sample from the remote hand.
struct ForceSample {
  int finger = 0;
  double current_ma = 0.0;
  double force_n = 0.0;
  std::int64_t timestamp_us = 0;
};

enum class Waveform : int { Off = 0, Waveform1 = 1, Waveform2 = 2 };

// One actuation command for a finger. The vibrotactile and cable-tension
// actions are mutually exclusive: force feedback implies waveform Off.
struct FeedbackCommand {
  int finger = 0;
  Waveform waveform = Waveform::Off;
  double servo_target = 0.0;  // radians, cable-payout delta from the zero pose
  bool force_feedback_active = false;
};

}  // namespace exoglove
