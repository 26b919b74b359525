#pragma once

// Haptic feedback policy: measured contact force selects between no
// feedback, two vibrotactile waveforms, and kinesthetic cable tension.
//
//   force < t0          -> none
//   t0 <= force < t1    -> waveform 1
//   t1 <= force <= t2   -> waveform 2
//   force > t2          -> force feedback (cable tension, waveform off)
//
// A mode is entered at its threshold and left at threshold - hysteresis,
// so a noisy force hovering on a boundary cannot chatter. Hysteresis 0
// reproduces the raw table exactly.

#include <array>
#include <cstdint>
#include <stdexcept>

#include "exoglove/cable_follow.hpp"
#include "exoglove/model.hpp"

namespace exoglove {

enum class FeedbackMode : int { None = 0, Waveform1 = 1, Waveform2 = 2, ForceFeedback = 3 };

inline const char* feedback_mode_name(FeedbackMode m) {
  static constexpr const char* names[] = {"none", "waveform1", "waveform2", "force_feedback"};
  return names[static_cast<int>(m)];
}

struct FeedbackPolicy {
  std::array<double, 3> thresholds = {0.1, 0.5, 1.0};  // t0, t1, t2, newtons
  double hysteresis = 0.02;                            // newtons
  double current_per_newton = 65.0;                    // mA per newton
  double tension_mm = 1.5;        // cable retraction applied under force feedback
  double waveform1_hz = 160.0;    // informational; waveforms are opaque IDs
  double waveform2_hz = 240.0;

  void validate() const {
    if (!(0.0 < thresholds[0] && thresholds[0] < thresholds[1] && thresholds[1] < thresholds[2]))
      throw ConfigValidationError("feedback thresholds must satisfy 0 < t0 < t1 < t2");
    if (!(hysteresis >= 0.0 && hysteresis < (thresholds[1] - thresholds[0]) / 2.0))
      throw ConfigValidationError("feedback.hysteresis must be in [0, (t1-t0)/2)");
    if (!(current_per_newton > 0.0))
      throw ConfigValidationError("feedback.current_per_newton must be strictly positive");
    if (!(tension_mm >= 0.0))
      throw ConfigValidationError("feedback.tension_mm must be non-negative");
  }
};

inline double current_to_force(double current_ma, const FeedbackPolicy& policy) {
  if (current_ma < 0.0) throw std::invalid_argument("current must be non-negative");
  return current_ma / policy.current_per_newton;
}

// Raw table row for a force, no hysteresis.
inline FeedbackMode classify_force(double force_n, const FeedbackPolicy& policy) {
  if (force_n > policy.thresholds[2]) return FeedbackMode::ForceFeedback;
  if (force_n >= policy.thresholds[1]) return FeedbackMode::Waveform2;
  if (force_n >= policy.thresholds[0]) return FeedbackMode::Waveform1;
  return FeedbackMode::None;
}

// Per-finger feedback automaton state. Owned by the control loop;
// step_feedback is the only mutator.
struct FeedbackState {
  std::array<FeedbackMode, kFingerCount> mode = {};
  std::array<std::int64_t, kFingerCount> last_transition_us = {};
};

// Advances one finger's automaton on a force sample and emits the actuation
// command. In follow mode the servo tracks the pose's payout delta; under
// force feedback it retracts by the configured tension offset.
inline FeedbackCommand step_feedback(FeedbackState& state, const ForceSample& sample,
                                     const FeedbackPolicy& policy, const FingerPose& pose,
                                     const GloveGeometry& geometry) {
  const int f = sample.finger;
  const FeedbackMode raw = classify_force(sample.force_n, policy);
  const FeedbackMode current = state.mode[f];

  FeedbackMode next = current;
  if (static_cast<int>(raw) > static_cast<int>(current)) {
    next = raw;
  } else if (static_cast<int>(raw) < static_cast<int>(current)) {
    const double entry = policy.thresholds[static_cast<int>(current) - 1];
    if (sample.force_n <= entry - policy.hysteresis) next = raw;
  }
  if (next != current) {
    state.mode[f] = next;
    state.last_transition_us[f] = sample.timestamp_us;
  }

  FeedbackCommand cmd;
  cmd.finger = f;
  cmd.force_feedback_active = next == FeedbackMode::ForceFeedback;
  cmd.waveform = next == FeedbackMode::Waveform1   ? Waveform::Waveform1
                 : next == FeedbackMode::Waveform2 ? Waveform::Waveform2
                                                   : Waveform::Off;
  const double follow = servo_target_delta(pose, geometry, static_cast<Finger>(f));
  cmd.servo_target =
      cmd.force_feedback_active ? follow - policy.tension_mm / geometry.rs : follow;
  return cmd;
}

}  // namespace exoglove
