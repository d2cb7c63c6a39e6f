// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>

namespace softprune {

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

/// How much of a pruned filter's weight survives each epoch's masking step.
/// alpha = 1 leaves weights untouched, alpha = 0 zeroizes them.
///
/// kinds:
///   constant_zero  - alpha is 0 at every epoch (hard masking).
///   exponential    - alpha0 * (alpha0/epsilon)^(-t/(t_max-1)); hits alpha0
///                    at t=0 and epsilon at t=t_max-1 exactly.
///   linear         - alpha0 * (1 - t/(t_max-1)); reaches 0 at the last epoch.
/// Values below clamp_floor snap to 0 so tails cannot linger forever.
struct DecaySchedule {
    enum class Kind { constant_zero, exponential, linear };
    Kind kind = Kind::exponential;
    double alpha0 = 1.0;
    double epsilon = 1e-5;
    int t_max = 2;
    double clamp_floor = 1e-12;
    void validate() const;
};

double alpha_at(const DecaySchedule& schedule, int t);

/// Per-epoch pruning rate. constant holds target_rate throughout;
/// exponential_approach follows target_rate * (1 - exp(-t/tau)) and snaps to
/// the target once t >= 3*tau. tau <= 0 means "use the default", t_max/8.
struct RateRamp {
    enum class Kind { constant, exponential_approach };
    Kind kind = Kind::constant;
    double target_rate = 0.0;
    double tau = 0.0;
    void validate() const;
};

double rate_at(const RateRamp& ramp, int t, int t_max);

/// "epoch,alpha,rate" rows for every epoch of the schedule.
void write_schedule_csv(std::ostream& out, const DecaySchedule& schedule, const RateRamp& ramp);

}  // namespace softprune
