#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <string>
#include <vector>

#include "ksrl/common.hpp"
#include "ksrl/rng.hpp"

namespace ksrl {

// Row-major dense matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    Vec a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

struct Layer {
    Matrix w;  // out x in
    Vec b;     // out

    bool operator==(const Layer&) const = default;
};

// One set of parameter-shaped values: the network's weights, a gradient
// buffer, or an optimizer's second-moment accumulators all share this shape.
struct ParamSet {
    std::vector<Layer> hidden;
    Matrix policy_w;  // num_actions x trunk_dim
    Vec value_w;      // trunk_dim

    bool operator==(const ParamSet&) const = default;

    void set_zero() {
        for (auto& l : hidden) {
            std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
        std::fill(policy_w.a.begin(), policy_w.a.end(), 0.0);
        std::fill(value_w.begin(), value_w.end(), 0.0);
    }

    template <typename F>
    void for_each(F f) {
        for (auto& l : hidden) {
            for (double& x : l.w.a) f(x);
            for (double& x : l.b) f(x);
        }
        for (double& x : policy_w.a) f(x);
        for (double& x : value_w) f(x);
    }

    template <typename F>
    void for_each(F f) const {
        for (const auto& l : hidden) {
            for (double x : l.w.a) f(x);
            for (double x : l.b) f(x);
        }
        for (double x : policy_w.a) f(x);
        for (double x : value_w) f(x);
    }

    template <typename F>
    void for_each(const ParamSet& other, F f) {
        for (size_t li = 0; li < hidden.size(); ++li) {
            for (size_t i = 0; i < hidden[li].w.a.size(); ++i) f(hidden[li].w.a[i], other.hidden[li].w.a[i]);
            for (size_t i = 0; i < hidden[li].b.size(); ++i) f(hidden[li].b[i], other.hidden[li].b[i]);
        }
        for (size_t i = 0; i < policy_w.a.size(); ++i) f(policy_w.a[i], other.policy_w.a[i]);
        for (size_t i = 0; i < value_w.size(); ++i) f(value_w[i], other.value_w[i]);
    }

    size_t count() const {
        size_t n = 0;
        for (const auto& l : hidden) n += l.w.a.size() + l.b.size();
        return n + policy_w.a.size() + value_w.size();
    }
};

struct NetSpec {
    std::vector<int> layer_dims;  // input -> hidden... -> trunk
    int num_actions = 0;
};

// Dense feedforward trunk (tanh) with a linear softmax-policy head and a
// linear scalar value head on top.
struct PolicyValueNet {
    std::vector<int> layer_dims;
    int num_actions = 0;
    ParamSet params;

    int input_dim() const { return layer_dims.front(); }
    int trunk_dim() const { return layer_dims.back(); }

    bool operator==(const PolicyValueNet&) const = default;
};

struct GradientBuffer {
    ParamSet grads;

    void set_zero() { grads.set_zero(); }
};

inline ParamSet make_param_set(const NetSpec& spec) {
    ParamSet p;
    for (size_t i = 0; i + 1 < spec.layer_dims.size(); ++i) {
        Layer l;
        l.w = Matrix(spec.layer_dims[i + 1], spec.layer_dims[i]);
        l.b = Vec(spec.layer_dims[i + 1], 0.0);
        p.hidden.push_back(std::move(l));
    }
    p.policy_w = Matrix(spec.num_actions, spec.layer_dims.back());
    p.value_w = Vec(spec.layer_dims.back(), 0.0);
    return p;
}

inline GradientBuffer make_gradient_buffer(const PolicyValueNet& net) {
    GradientBuffer g;
    g.grads = make_param_set({net.layer_dims, net.num_actions});
    return g;
}

// Deterministic scaled-uniform fan-in init: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
// biases zero.
inline PolicyValueNet net_init(const NetSpec& spec, uint64_t seed) {
    if (spec.layer_dims.size() < 2) throw ConfigError("net: layer_dims needs input and trunk");
    for (int d : spec.layer_dims) {
        if (d <= 0) throw ConfigError("net: non-positive layer dim");
    }
    if (spec.num_actions < 2) throw ConfigError("net: num_actions must be >= 2");

    PolicyValueNet net;
    net.layer_dims = spec.layer_dims;
    net.num_actions = spec.num_actions;
    net.params = make_param_set(spec);

    Rng rng(derive_seed(seed, "init"));
    auto fill = [&](Matrix& m) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols));
        for (double& x : m.a) x = rng.uniform(-bound, bound);
    };
    for (auto& l : net.params.hidden) fill(l.w);
    fill(net.params.policy_w);
    const double hb = 1.0 / std::sqrt(static_cast<double>(net.trunk_dim()));
    for (double& x : net.params.value_w) x = rng.uniform(-hb, hb);
    return net;
}

// Post-activation vector per hidden layer; kept for the backward pass.
struct Activations {
    Vec input;
    std::vector<Vec> hidden;  // tanh outputs, one per layer
    Vec logits;
    double value = 0.0;

    const Vec& trunk() const { return hidden.empty() ? input : hidden.back(); }
};

inline void forward_cached(const PolicyValueNet& net, const Vec& observation, Activations& acts) {
    if (static_cast<int>(observation.size()) != net.input_dim())
        throw ConfigError("forward: observation length " + std::to_string(observation.size()) +
                          " != input dim " + std::to_string(net.input_dim()));
    acts.input = observation;
    acts.hidden.resize(net.params.hidden.size());
    const Vec* x = &acts.input;
    for (size_t li = 0; li < net.params.hidden.size(); ++li) {
        const Layer& l = net.params.hidden[li];
        Vec& h = acts.hidden[li];
        h.assign(l.b.begin(), l.b.end());
        for (int i = 0; i < l.w.rows; ++i) {
            double s = h[i];
            const double* wr = &l.w.a[static_cast<size_t>(i) * l.w.cols];
            for (int j = 0; j < l.w.cols; ++j) s += wr[j] * (*x)[j];
            h[i] = std::tanh(s);
        }
        x = &h;
    }
    const Vec& t = *x;
    acts.logits.assign(net.num_actions, 0.0);
    for (int i = 0; i < net.params.policy_w.rows; ++i) {
        double s = 0.0;
        const double* wr = &net.params.policy_w.a[static_cast<size_t>(i) * net.params.policy_w.cols];
        for (size_t j = 0; j < t.size(); ++j) s += wr[j] * t[j];
        acts.logits[i] = s;
    }
    double v = 0.0;
    for (size_t j = 0; j < t.size(); ++j) v += net.params.value_w[j] * t[j];
    acts.value = v;
}

struct ForwardResult {
    Vec policy_logits;
    double value = 0.0;
};

inline ForwardResult forward(const PolicyValueNet& net, const Vec& observation) {
    Activations acts;
    forward_cached(net, observation, acts);
    return {std::move(acts.logits), acts.value};
}

// Accumulates d(logits . d_logits + value * d_value)/d(params) into buf.
// acts must come from forward_cached on the same net and observation.
inline void backward(const PolicyValueNet& net, const Activations& acts, const Vec& d_logits,
                     double d_value, GradientBuffer& buf) {
    if (static_cast<int>(d_logits.size()) != net.num_actions)
        throw ConfigError("backward: upstream logit gradient length mismatch");

    const Vec& t = acts.trunk();
    // heads
    for (int i = 0; i < net.num_actions; ++i) {
        double g = d_logits[i];
        if (g == 0.0) continue;
        double* gr = &buf.grads.policy_w.a[static_cast<size_t>(i) * net.params.policy_w.cols];
        for (size_t j = 0; j < t.size(); ++j) gr[j] += g * t[j];
    }
    Vec d_trunk(t.size(), 0.0);
    for (int i = 0; i < net.num_actions; ++i) {
        const double g = d_logits[i];
        if (g == 0.0) continue;
        const double* wr = &net.params.policy_w.a[static_cast<size_t>(i) * net.params.policy_w.cols];
        for (size_t j = 0; j < t.size(); ++j) d_trunk[j] += g * wr[j];
    }
    if (d_value != 0.0) {
        for (size_t j = 0; j < t.size(); ++j) {
            buf.grads.value_w[j] += d_value * t[j];
            d_trunk[j] += d_value * net.params.value_w[j];
        }
    }

    // hidden layers, last to first; tanh' = 1 - h^2
    Vec d_out = std::move(d_trunk);
    for (int li = static_cast<int>(net.params.hidden.size()) - 1; li >= 0; --li) {
        const Layer& l = net.params.hidden[li];
        const Vec& h = acts.hidden[li];
        const Vec& in = (li == 0) ? acts.input : acts.hidden[li - 1];
        Vec d_pre(h.size());
        for (size_t i = 0; i < h.size(); ++i) d_pre[i] = d_out[i] * (1.0 - h[i] * h[i]);

        Layer& gl = buf.grads.hidden[li];
        for (int i = 0; i < l.w.rows; ++i) {
            const double g = d_pre[i];
            gl.b[i] += g;
            if (g == 0.0) continue;
            double* gr = &gl.w.a[static_cast<size_t>(i) * l.w.cols];
            for (int j = 0; j < l.w.cols; ++j) gr[j] += g * in[j];
        }
        if (li > 0) {
            Vec d_in(l.w.cols, 0.0);
            for (int i = 0; i < l.w.rows; ++i) {
                const double g = d_pre[i];
                if (g == 0.0) continue;
                const double* wr = &l.w.a[static_cast<size_t>(i) * l.w.cols];
                for (int j = 0; j < l.w.cols; ++j) d_in[j] += g * wr[j];
            }
            d_out = std::move(d_in);
        }
    }
}

// RMSProp with per-parameter second-moment accumulators.
struct RmsProp {
    double learning_rate = 1e-3;
    double decay = 0.99;
    double epsilon = 1e-6;
    ParamSet second_moment;

    static RmsProp make(const PolicyValueNet& net, double lr) {
        RmsProp opt;
        opt.learning_rate = lr;
        opt.second_moment = make_param_set({net.layer_dims, net.num_actions});
        return opt;
    }
};

// v <- decay*v + (1-decay)*g^2 ; w <- w - lr*g/(sqrt(v)+eps).
// A non-finite gradient rejects the whole step and reports where it sat.
inline void apply_update(PolicyValueNet& net, const GradientBuffer& buf, RmsProp& opt) {
    const auto& g = buf.grads;
    int layer_index = 0;
    auto check = [&](const Vec& v) {
        if (!all_finite(v))
            throw TrainingError("apply_update: non-finite gradient in layer " + std::to_string(layer_index));
    };
    for (const auto& l : g.hidden) {
        check(l.w.a);
        check(l.b);
        ++layer_index;
    }
    check(g.policy_w.a);
    ++layer_index;
    check(g.value_w);

    const double lr = opt.learning_rate;
    const double d = opt.decay;
    const double eps = opt.epsilon;
    auto step = [&](double& w, double& v, double grad) {
        v = d * v + (1.0 - d) * grad * grad;
        w -= lr * grad / (std::sqrt(v) + eps);
    };
    for (size_t li = 0; li < net.params.hidden.size(); ++li) {
        Layer& l = net.params.hidden[li];
        Layer& vl = opt.second_moment.hidden[li];
        const Layer& gl = g.hidden[li];
        for (size_t i = 0; i < l.w.a.size(); ++i) step(l.w.a[i], vl.w.a[i], gl.w.a[i]);
        for (size_t i = 0; i < l.b.size(); ++i) step(l.b[i], vl.b[i], gl.b[i]);
    }
    for (size_t i = 0; i < net.params.policy_w.a.size(); ++i)
        step(net.params.policy_w.a[i], opt.second_moment.policy_w.a[i], g.policy_w.a[i]);
    for (size_t i = 0; i < net.params.value_w.size(); ++i)
        step(net.params.value_w[i], opt.second_moment.value_w[i], g.value_w[i]);
}

inline uint64_t param_hash(const PolicyValueNet& net) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](double x) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(x));
        std::memcpy(&bits, &x, sizeof(bits));
        h ^= bits;
        h *= 0x100000001b3ULL;
    };
    for (int d : net.layer_dims) mix(static_cast<double>(d));
    mix(static_cast<double>(net.num_actions));
    net.params.for_each([&](double x) { mix(x); });
    return h;
}

}  // namespace ksrl
