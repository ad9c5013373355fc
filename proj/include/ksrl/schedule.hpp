#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "ksrl/common.hpp"
#include "ksrl/hypers.hpp"

namespace ksrl {

enum class ScheduleKind { Constant, Linear, Pbt };

inline std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Constant: return "constant";
        case ScheduleKind::Linear: return "linear";
        case ScheduleKind::Pbt: return "pbt";
    }
    return "?";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "constant") return ScheduleKind::Constant;
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "pbt") return ScheduleKind::Pbt;
    throw ConfigError("unknown schedule kind: " + s);
}

struct Schedule {
    ScheduleKind kind = ScheduleKind::Constant;
    double constant_value = 1.0;
    double start_value = 1.0;     // linear
    uint64_t end_frame = 1;       // linear: frame where the weight hits 0
    bool per_teacher = false;

    bool operator==(const Schedule&) const = default;

    void validate() const {
        if (kind == ScheduleKind::Constant && constant_value < 0.0)
            throw ConfigError("schedule: constant value must be non-negative");
        if (kind == ScheduleKind::Linear) {
            if (start_value < 0.0) throw ConfigError("schedule: linear start must be non-negative");
            if (end_frame == 0) throw ConfigError("schedule: linear end_frame must be positive");
        }
    }
};

// The distillation weight for one teacher at a frame count. Constant and
// linear rules ignore the hypers; the pbt rule reads the evolved factorised
// weights alpha * rho_i.
inline double lambda_at(const Schedule& sched, uint64_t frames, const HyperParams& hypers,
                        size_t teacher_index) {
    sched.validate();
    if ((sched.per_teacher || sched.kind == ScheduleKind::Pbt) &&
        teacher_index >= hypers.distill_per_teacher.size()) {
        throw ConfigError("schedule: teacher index " + std::to_string(teacher_index) +
                          " has no per-teacher weight");
    }
    double base = 0.0;
    switch (sched.kind) {
        case ScheduleKind::Constant:
            base = sched.constant_value;
            break;
        case ScheduleKind::Linear: {
            const double frac = static_cast<double>(frames) / static_cast<double>(sched.end_frame);
            base = sched.start_value * std::max(0.0, 1.0 - frac);
            break;
        }
        case ScheduleKind::Pbt:
            return hypers.lambda(teacher_index);
    }
    if (sched.per_teacher) base *= hypers.distill_per_teacher[teacher_index];
    return base;
}

}  // namespace ksrl
