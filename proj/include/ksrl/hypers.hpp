#pragma once

#include <string>

#include "ksrl/common.hpp"

namespace ksrl {

// Per-member training hyperparameters. The effective distillation weight for
// teacher i is the product alpha * rho[i], so one knob scales all teachers
// together while each rho moves independently.
struct HyperParams {
    double learning_rate = 1e-3;
    double entropy_cost = 0.01;
    double distill_global = 1.0;
    Vec distill_per_teacher;

    bool operator==(const HyperParams&) const = default;

    double lambda(size_t teacher_index) const {
        return distill_global * distill_per_teacher.at(teacher_index);
    }

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("hypers: learning_rate must be positive");
        if (entropy_cost < 0.0) throw ConfigError("hypers: entropy_cost must be non-negative");
        if (distill_global < 0.0) throw ConfigError("hypers: distill_global must be non-negative");
        for (double r : distill_per_teacher) {
            if (r < 0.0) throw ConfigError("hypers: per-teacher distill scale must be non-negative");
        }
    }
};

}  // namespace ksrl
