// Copyright (c) 2026 softprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "softprune/schedule.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "softprune/errors.hpp"

namespace softprune {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void DecaySchedule::validate() const {
    if (t_max < 2) throw ConfigError("decay schedule needs t_max >= 2, got " + std::to_string(t_max));
    if (kind == Kind::constant_zero) return;
    if (!(alpha0 > 0.0 && alpha0 <= 1.0))
        throw ConfigError("alpha0 must lie in (0, 1], got " + std::to_string(alpha0));
    if (kind == Kind::exponential && !(epsilon > 0.0 && epsilon < alpha0))
        throw ConfigError("epsilon must lie in (0, alpha0), got " + std::to_string(epsilon));
    if (!(clamp_floor >= 0.0)) throw ConfigError("clamp_floor must be >= 0");
}

double alpha_at(const DecaySchedule& schedule, int t) {
    schedule.validate();
    if (t < 0 || t >= schedule.t_max)
        throw InputError("epoch " + std::to_string(t) + " outside schedule range [0, " +
                         std::to_string(schedule.t_max) + ")");
    double a = 0.0;
    switch (schedule.kind) {
        case DecaySchedule::Kind::constant_zero:
            return 0.0;
        case DecaySchedule::Kind::exponential:
            // Endpoints are pinned so rounding in pow cannot shift them.
            if (t == 0) return schedule.alpha0;
            if (t == schedule.t_max - 1) {
                a = schedule.epsilon;
                break;
            }
            a = schedule.alpha0 *
                std::pow(schedule.alpha0 / schedule.epsilon,
                         -static_cast<double>(t) / static_cast<double>(schedule.t_max - 1));
            break;
        case DecaySchedule::Kind::linear:
            a = schedule.alpha0 *
                (1.0 - static_cast<double>(t) / static_cast<double>(schedule.t_max - 1));
            break;
    }
    if (a < schedule.clamp_floor) return 0.0;
    return a;
}

void RateRamp::validate() const {
    if (!(target_rate >= 0.0 && target_rate < 1.0))
        throw ConfigError("ramp target rate must lie in [0, 1), got " + std::to_string(target_rate));
}

double rate_at(const RateRamp& ramp, int t, int t_max) {
    ramp.validate();
    if (t_max < 1) throw InputError("t_max must be >= 1");
    if (t < 0 || t >= t_max)
        throw InputError("epoch " + std::to_string(t) + " outside [0, " + std::to_string(t_max) + ")");
    if (ramp.kind == RateRamp::Kind::constant) return ramp.target_rate;
    const double tau = ramp.tau > 0.0 ? ramp.tau : static_cast<double>(t_max) / 8.0;
    if (static_cast<double>(t) >= 3.0 * tau) return ramp.target_rate;
    return ramp.target_rate * (1.0 - std::exp(-static_cast<double>(t) / tau));
}

void write_schedule_csv(std::ostream& out, const DecaySchedule& schedule, const RateRamp& ramp) {
    schedule.validate();
    ramp.validate();
    out << "epoch,alpha,rate\n";
    for (int t = 0; t < schedule.t_max; ++t) {
        out << t << "," << format_double(alpha_at(schedule, t)) << ","
            << format_double(rate_at(ramp, t, schedule.t_max)) << "\n";
    }
}

}  // namespace softprune
