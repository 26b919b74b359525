#pragma once

// Umbrella header for the full glove control stack.

#include "exoglove/bus.hpp"
#include "exoglove/cable_follow.hpp"
#include "exoglove/config.hpp"
#include "exoglove/feedback.hpp"
#include "exoglove/kinematics.hpp"
#include "exoglove/model.hpp"
#include "exoglove/retarget.hpp"
#include "exoglove/sim.hpp"
