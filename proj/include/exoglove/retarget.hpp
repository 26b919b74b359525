#pragma once

// Joint-space retargeting from the glove's 20-DoF pose onto an arbitrary
// robot hand model: target_j = clamp(scale_j * source_j + offset_j, limits_j).
// Hand models are declared data (one joint per line in the model file);
// three presets cover the 6-, 15- and 24-DoF hands the stack is used with.

#include <string>
#include <vector>

#include "exoglove/model.hpp"

namespace exoglove {

struct HandJoint {
  std::string name;
  double lower = 0.0;  // radians
  double upper = 0.0;
  int source = 0;  // glove Channel index
  double scale = 1.0;
  double offset = 0.0;  // radians
};

struct HandModel {
  std::string name;
  std::vector<HandJoint> joints;

  int dof() const { return static_cast<int>(joints.size()); }

  void validate() const {
    if (joints.empty()) throw ConfigValidationError("hand model '" + name + "' has no joints");
    for (const auto& j : joints) {
      if (!(j.lower <= j.upper))
        throw ConfigValidationError("joint " + j.name + " limits must be ordered");
      if (j.source < 0 || j.source >= kChannelCount)
        throw ConfigValidationError("joint " + j.name + " references a non-existent glove channel");
    }
  }
};

struct HandCommand {
  std::string model;
  std::vector<double> targets;       // radians, one per model joint
  std::vector<bool> clamp_mask;      // true where the joint limit was binding
};

inline HandCommand retarget(const JointState& state, const HandModel& model) {
  model.validate();
  HandCommand cmd;
  cmd.model = model.name;
  cmd.targets.reserve(model.joints.size());
  cmd.clamp_mask.reserve(model.joints.size());
  for (const auto& j : model.joints) {
    const double raw = j.scale * state.q[j.source] + j.offset;
    double v = raw;
    if (v < j.lower) v = j.lower;
    if (v > j.upper) v = j.upper;
    cmd.targets.push_back(v);
    cmd.clamp_mask.push_back(v != raw);
  }
  return cmd;
}

namespace detail {

inline HandJoint make_joint(const std::string& name, double lo_deg, double hi_deg,
                            const std::string& source, double scale = 1.0) {
  HandJoint j;
  j.name = name;
  j.lower = deg_to_rad(lo_deg);
  j.upper = deg_to_rad(hi_deg);
  j.source = channel_from_name(source);
  j.scale = scale;
  return j;
}

}  // namespace detail

// 6-DoF hand: one flexion drive per finger plus thumb flexion and splay.
inline HandModel hand_model_6dof() {
  using detail::make_joint;
  HandModel m;
  m.name = "hand_6dof";
  for (const char* f : {"index", "middle", "ring", "pinky"})
    m.joints.push_back(make_joint(std::string(f) + "_flex", 0.0, 90.0, std::string(f) + ".dip"));
  m.joints.push_back(make_joint("thumb_flex", 0.0, 90.0, "thumb.ip"));
  m.joints.push_back(make_joint("thumb_splay", -20.0, 20.0, "thumb.tm_splay"));
  m.validate();
  return m;
}

// 15-DoF hand: three bend drives per finger, three thumb drives.
inline HandModel hand_model_15dof() {
  using detail::make_joint;
  HandModel m;
  m.name = "hand_15dof";
  for (const char* f : {"index", "middle", "ring", "pinky"}) {
    const std::string base(f);
    m.joints.push_back(make_joint(base + "_mcp", 0.0, 90.0, base + ".mcp"));
    m.joints.push_back(make_joint(base + "_pip", 0.0, 110.0, base + ".pip"));
    m.joints.push_back(make_joint(base + "_dip", 0.0, 90.0, base + ".dip"));
  }
  m.joints.push_back(make_joint("thumb_tm_bend", 0.0, 90.0, "thumb.tm_bend"));
  m.joints.push_back(make_joint("thumb_tm_splay", -20.0, 20.0, "thumb.tm_splay"));
  m.joints.push_back(make_joint("thumb_ip", 0.0, 90.0, "thumb.ip"));
  m.validate();
  return m;
}

// 24-DoF hand: full four-joint fingers with active PIP and DIP, five thumb
// joints, a little-finger palm joint and a two-axis wrist. The glove has no
// palm/wrist/thumb-roll channels, so those joints are held at zero with a
// zero scale; their source channel is nominal.
inline HandModel hand_model_24dof() {
  using detail::make_joint;
  HandModel m;
  m.name = "hand_24dof";
  for (const char* f : {"index", "middle", "ring", "pinky"}) {
    const std::string base(f);
    m.joints.push_back(make_joint(base + "_mcp_splay", -20.0, 20.0, base + ".splay"));
    m.joints.push_back(make_joint(base + "_mcp", 0.0, 90.0, base + ".mcp"));
    m.joints.push_back(make_joint(base + "_pip", 0.0, 110.0, base + ".pip"));
    m.joints.push_back(make_joint(base + "_dip", 0.0, 90.0, base + ".dip"));
  }
  m.joints.push_back(make_joint("thumb_tm_splay", -20.0, 20.0, "thumb.tm_splay"));
  m.joints.push_back(make_joint("thumb_tm_bend", 0.0, 90.0, "thumb.tm_bend"));
  m.joints.push_back(make_joint("thumb_mcp", 0.0, 90.0, "thumb.mcp"));
  m.joints.push_back(make_joint("thumb_ip", 0.0, 90.0, "thumb.ip"));
  m.joints.push_back(make_joint("thumb_base_roll", -60.0, 60.0, "thumb.tm_splay", 0.0));
  m.joints.push_back(make_joint("pinky_palm_arch", 0.0, 45.0, "pinky.splay", 0.0));
  m.joints.push_back(make_joint("wrist_bend", -40.0, 40.0, "index.mcp", 0.0));
  m.joints.push_back(make_joint("wrist_splay", -28.0, 28.0, "index.splay", 0.0));
  m.validate();
  return m;
}

inline std::vector<HandModel> builtin_models() {
  return {hand_model_6dof(), hand_model_15dof(), hand_model_24dof()};
}

}  // namespace exoglove
