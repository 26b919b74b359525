#pragma once

// Joint-angle solve from encoder readings and its exact inverse.
//
// Measurement model per finger: the MCP cable wraps only the MCP joint,
//   theta1 = rg * theta_em / r1,
// and the DIP cable crosses MCP, PIP and DIP, so its displacement splits as
//   rg * theta_ed = theta1*r1' + theta2*r2' + theta3*r3',
// with the PIP angle passively coupled to DIP, theta2 = (theta3 + b) / a.
// The coupling is affine, so theta3 has the closed form
//   theta3 = (rg*theta_ed - theta1*r1' - (b/a)*r2') / (r2'/a + r3').

#include <cmath>
#include <stdexcept>

#include "exoglove/model.hpp"

namespace exoglove {

// theta2 = (theta3 + b) / a with the empirical coupling constants.
inline double pip_from_dip(double theta3, const GloveGeometry& g = GloveGeometry::defaults()) {
  return (theta3 + g.pip_coupling_b) / g.pip_coupling_a;
}

struct FingerSolveInput {
  double theta_em = 0.0;  // raw MCP-cable encoder angle, radians
  double theta_ed = 0.0;  // raw DIP-cable encoder angle, radians
  GloveGeometry geometry = GloveGeometry::defaults();
  // Zero-pose encoder readings, subtracted before solving.
  double offset_em = 0.0;
  double offset_ed = 0.0;
};

struct FingerSolveOutput {
  double theta1 = 0.0;  // post-clamp, radians
  double theta2 = 0.0;
  double theta3 = 0.0;
  double theta1_raw = 0.0;  // pre-clamp solution
  double theta2_raw = 0.0;
  double theta3_raw = 0.0;
  bool clamped = false;
  // Cable displacements of the pre-clamp solution, mm, for testing:
  // dp3 == dl1p + dl2p + dl3p holds to float precision.
  double dp1 = 0.0;
  double dp3 = 0.0;
  double dl1p = 0.0;
  double dl2p = 0.0;
  double dl3p = 0.0;
};

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

}  // namespace detail

// Solves one finger's mcp/pip/dip angles from its encoder pair.
// Limits index the finger's channels; pass `finger` accordingly.
inline FingerSolveOutput solve_finger(const FingerSolveInput& in,
                                      const JointLimits& limits = JointLimits::defaults(),
                                      int finger = static_cast<int>(Finger::Index)) {
  detail::require_finite(in.theta_em, "theta_em");
  detail::require_finite(in.theta_ed, "theta_ed");
  detail::require_finite(in.offset_em, "offset_em");
  detail::require_finite(in.offset_ed, "offset_ed");
  const GloveGeometry& g = in.geometry;
  const double a = g.pip_coupling_a;
  const double b = g.pip_coupling_b;
  const double em = in.theta_em - in.offset_em;
  const double ed = in.theta_ed - in.offset_ed;

  FingerSolveOutput out;
  out.dp1 = g.rg * em;
  out.theta1_raw = out.dp1 / g.r1;
  out.dl1p = out.theta1_raw * g.r1p;
  out.dp3 = g.rg * ed;
  out.theta3_raw = (out.dp3 - out.dl1p - (b / a) * g.r2p) / (g.r2p / a + g.r3p);
  out.theta2_raw = (out.theta3_raw + b) / a;
  out.dl2p = out.theta2_raw * g.r2p;
  out.dl3p = out.theta3_raw * g.r3p;

  out.theta1 = limits.clamp(channel_mcp(finger), out.theta1_raw, out.clamped);
  out.theta3 = limits.clamp(channel_dip(finger), out.theta3_raw, out.clamped);
  // Keep the coupling exact through the clamp, then honor the pip limit.
  out.theta2 = limits.clamp(channel_pip(finger), pip_from_dip(out.theta3, g), out.clamped);
  return out;
}

// Exact inverse of solve_finger on the pre-clamp model; used by the
// simulator to synthesize encoder readings from a true pose.
struct EncoderPair {
  double theta_em = 0.0;
  double theta_ed = 0.0;
};

inline EncoderPair encoders_from_angles(double theta1, double theta3, const GloveGeometry& g) {
  EncoderPair e;
  e.theta_em = theta1 * g.r1 / g.rg;
  e.theta_ed = (theta1 * g.r1p + pip_from_dip(theta3, g) * g.r2p + theta3 * g.r3p) / g.rg;
  return e;
}

// Thumb IP chain: the IP cable crosses MCP and IP only, no passive coupling.
inline double solve_thumb_ip(double theta_mcp, double theta_e_ip, const GloveGeometry& g) {
  return (g.rg * theta_e_ip - theta_mcp * g.thumb_r1p) / g.thumb_r3p;
}

inline double thumb_ip_encoder(double theta_mcp, double theta_ip, const GloveGeometry& g) {
  return (theta_mcp * g.thumb_r1p + theta_ip * g.thumb_r3p) / g.rg;
}

struct HandSolveResult {
  JointState state;
  std::array<bool, kChannelCount> clamped{};
};

// Full 20-DoF solve: four em/ed finger pairs through solve_finger, splay and
// thumb TM/MCP channels passed through (scaled, calibrated, clamped), thumb
// IP through the two-joint chain.
inline HandSolveResult solve_hand(const EncoderFrame& frame, const GloveGeometry& geometry,
                                  const Calibration& calibration,
                                  const JointLimits& limits = JointLimits::defaults(),
                                  const EncoderSettings& settings = EncoderSettings{}) {
  geometry.validate();
  limits.validate();
  HandSolveResult r;

  auto calibrated = [&](int ch) {
    return settings.channel_scale[ch] * (frame.readings[ch] - calibration.offsets[ch]);
  };

  for (int f = 0; f < kBendFingerCount; ++f) {
    FingerSolveInput in;
    in.theta_em = calibrated(enc_em(f));
    in.theta_ed = calibrated(enc_ed(f));
    in.geometry = geometry;
    FingerSolveOutput out = solve_finger(in, limits, f);
    r.state.q[channel_mcp(f)] = out.theta1;
    r.state.q[channel_pip(f)] = out.theta2;
    r.state.q[channel_dip(f)] = out.theta3;
    r.clamped[channel_mcp(f)] = out.theta1 != out.theta1_raw;
    r.clamped[channel_pip(f)] = out.theta2 != out.theta2_raw;
    r.clamped[channel_dip(f)] = out.theta3 != out.theta3_raw;

    bool clamped = false;
    r.state.q[channel_splay(f)] = limits.clamp(channel_splay(f), calibrated(enc_splay(f)), clamped);
    r.clamped[channel_splay(f)] = clamped;
  }

  const struct { int channel; int enc; } direct[] = {
      {kThumbTmBend, kEncThumbTmBend},
      {kThumbTmSplay, kEncThumbTmSplay},
      {kThumbMcp, kEncThumbMcp},
  };
  for (const auto& [ch, enc] : direct) {
    bool clamped = false;
    r.state.q[ch] = limits.clamp(ch, calibrated(enc), clamped);
    r.clamped[ch] = clamped;
  }

  const double ip_raw = solve_thumb_ip(r.state.q[kThumbMcp], calibrated(kEncThumbIp), geometry);
  bool ip_clamped = false;
  r.state.q[kThumbIp] = limits.clamp(kThumbIp, ip_raw, ip_clamped);
  r.clamped[kThumbIp] = ip_clamped;
  return r;
}

// Inverse of solve_hand for a coupling-consistent state with zero offsets
// and unit scales: produces the 16 true encoder angles.
inline std::array<double, kEncoderCount> encoder_angles_from_state(const JointState& s,
                                                                   const GloveGeometry& g) {
  std::array<double, kEncoderCount> enc{};
  for (int f = 0; f < kBendFingerCount; ++f) {
    EncoderPair p = encoders_from_angles(s.mcp(f), s.dip(f), g);
    enc[enc_em(f)] = p.theta_em;
    enc[enc_ed(f)] = p.theta_ed;
    enc[enc_splay(f)] = s.splay(f);
  }
  enc[kEncThumbTmBend] = s.thumb_tm_bend();
  enc[kEncThumbTmSplay] = s.thumb_tm_splay();
  enc[kEncThumbMcp] = s.thumb_mcp();
  enc[kEncThumbIp] = thumb_ip_encoder(s.thumb_mcp(), s.thumb_ip(), g);
  return enc;
}

}  // namespace exoglove
