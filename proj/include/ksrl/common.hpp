#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksrl {

using Vec = std::vector<double>;

// Bad configuration (file contents, dimensions, mode requirements).
// Exit code 1 territory; everything else that throws is a runtime error (exit 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

// API misuse by calling code (bad action index, stepping a finished episode).
class CallerError : public std::logic_error {
public:
    explicit CallerError(const std::string& what_arg) : std::logic_error(what_arg) {}
};

inline bool all_finite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline Vec softmax(const Vec& logits) {
    double m = logits[0];
    for (double z : logits) m = std::max(m, z);
    Vec p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

inline Vec log_softmax(const Vec& logits) {
    double m = logits[0];
    for (double z : logits) m = std::max(m, z);
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    const double lse = m + std::log(sum);
    Vec out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

}  // namespace ksrl
