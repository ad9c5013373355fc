#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ksrl/common.hpp"
#include "ksrl/net.hpp"
#include "ksrl/trajectory.hpp"

namespace ksrl {

struct LossTerms {
    double policy_gradient_loss = 0.0;
    double value_loss = 0.0;
    double entropy_loss = 0.0;
    Vec distill_loss;  // one entry per teacher; only the routed one is nonzero
    double total = 0.0;
};

struct ScalarLoss {
    double loss = 0.0;
    Vec d_logits;
};

namespace detail {

inline void require_logits(const Vec& v, const char* who) {
    if (v.size() < 2) throw CallerError(std::string(who) + ": need at least 2 logits");
    if (!all_finite(v)) throw TrainingError(std::string(who) + ": non-finite logits");
}

}  // namespace detail

// Cross-entropy from a frozen teacher distribution to the student policy.
// Gradient w.r.t. student logits is softmax(student) - softmax(teacher).
inline ScalarLoss distill_loss(const Vec& teacher_logits, const Vec& student_logits) {
    detail::require_logits(teacher_logits, "distill");
    detail::require_logits(student_logits, "distill");
    if (teacher_logits.size() != student_logits.size())
        throw CallerError("distill: logit length mismatch");

    const Vec pt = softmax(teacher_logits);
    const Vec ls = log_softmax(student_logits);
    const Vec ps = softmax(student_logits);
    ScalarLoss out;
    out.d_logits.resize(ps.size());
    for (size_t a = 0; a < pt.size(); ++a) {
        out.loss -= pt[a] * ls[a];
        out.d_logits[a] = ps[a] - pt[a];
    }
    return out;
}

// Negated entropy: loss = sum_a p_a log p_a, minimised at the uniform policy.
inline ScalarLoss entropy_loss(const Vec& student_logits) {
    detail::require_logits(student_logits, "entropy");
    const Vec p = softmax(student_logits);
    const Vec lp = log_softmax(student_logits);
    ScalarLoss out;
    for (size_t a = 0; a < p.size(); ++a) out.loss += p[a] * lp[a];
    out.d_logits.resize(p.size());
    for (size_t a = 0; a < p.size(); ++a) out.d_logits[a] = p[a] * (lp[a] - out.loss);
    return out;
}

struct VTraceOutput {
    Vec value_targets;  // v_t, length T
    Vec rho;            // clipped importance weights, length T
    Vec advantages;     // length T
};

// Off-policy corrected targets. Terminal steps zero the discount so value
// bootstrapping never crosses an episode boundary inside the unroll.
inline VTraceOutput vtrace(const Trajectory& traj, const Vec& student_values,
                           const std::vector<Vec>& student_logits, double clip_rho, double clip_c,
                           double gamma) {
    traj.validate();
    const size_t T = traj.length();
    if (student_values.size() != T + 1) throw CallerError("vtrace: need T+1 values");
    if (student_logits.size() != T) throw CallerError("vtrace: need T logit rows");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("vtrace: gamma outside [0,1)");

    VTraceOutput out;
    out.value_targets.assign(T, 0.0);
    out.rho.assign(T, 0.0);
    out.advantages.assign(T, 0.0);

    Vec c(T, 0.0);
    for (size_t t = 0; t < T; ++t) {
        detail::require_logits(traj.behaviour_logits[t], "vtrace behaviour");
        detail::require_logits(student_logits[t], "vtrace student");
        const int a = traj.actions[t];
        if (a < 0 || a >= static_cast<int>(student_logits[t].size()))
            throw CallerError("vtrace: action index out of range");
        const double log_ratio =
            log_softmax(student_logits[t])[a] - log_softmax(traj.behaviour_logits[t])[a];
        const double ratio = std::exp(log_ratio);
        out.rho[t] = std::min(clip_rho, ratio);
        c[t] = std::min(clip_c, ratio);
    }

    // backward recursion; v_{T} is the bootstrap V(x_T)
    double v_next = student_values[T];
    for (size_t t = T; t-- > 0;) {
        const double g = traj.terminal[t] ? 0.0 : gamma;
        const double delta =
            out.rho[t] * (traj.rewards[t] + g * student_values[t + 1] - student_values[t]);
        const double v_t =
            student_values[t] + delta + g * c[t] * (v_next - student_values[t + 1]);
        out.value_targets[t] = v_t;
        out.advantages[t] =
            out.rho[t] * (traj.rewards[t] + g * v_next - student_values[t]);
        v_next = v_t;
    }
    return out;
}

struct PolicyLoss {
    double loss = 0.0;
    std::vector<Vec> d_logits;  // per step
};

// Importance-weighted policy gradient; advantages enter as constants.
inline PolicyLoss a3c_policy_loss(const Trajectory& traj, const VTraceOutput& vt,
                                  const std::vector<Vec>& student_logits) {
    const size_t T = traj.length();
    if (vt.advantages.size() != T || vt.rho.size() != T)
        throw CallerError("policy loss: vtrace output length mismatch");
    if (student_logits.size() != T) throw CallerError("policy loss: logits length mismatch");

    PolicyLoss out;
    out.d_logits.resize(T);
    for (size_t t = 0; t < T; ++t) {
        const Vec lp = log_softmax(student_logits[t]);
        const Vec p = softmax(student_logits[t]);
        const int a = traj.actions[t];
        const double w = vt.rho[t] * vt.advantages[t];
        out.loss -= w * lp[a];
        Vec& d = out.d_logits[t];
        d.resize(p.size());
        for (size_t j = 0; j < p.size(); ++j) d[j] = w * p[j];
        d[a] -= w;
    }
    return out;
}

struct ValueLoss {
    double loss = 0.0;
    Vec d_values;
};

// Squared error to gradient-stopped targets.
inline ValueLoss value_loss(const Vec& student_values, const Vec& targets) {
    if (student_values.size() != targets.size()) throw CallerError("value loss: length mismatch");
    ValueLoss out;
    out.d_values.resize(targets.size());
    for (size_t t = 0; t < targets.size(); ++t) {
        const double e = student_values[t] - targets[t];
        out.loss += e * e;
        out.d_values[t] = 2.0 * e;
    }
    return out;
}

enum class LossMode { Full, DistillOnly };

struct KickstartSettings {
    double gamma = 0.98;
    double clip_rho = 1.0;
    double clip_c = 1.0;
    double value_weight = 0.5;
    LossMode mode = LossMode::Full;
};

// The combined objective on one trajectory: RL terms plus the routed
// teacher's distillation term. Accumulates parameter gradients into grads.
// When a lambda is exactly zero its distillation term is skipped entirely,
// which keeps the lambda=0 case bit-identical to the pure RL loss.
inline LossTerms kickstart_loss(const PolicyValueNet& net, const Trajectory& traj,
                                const Vec& lambdas, double beta, const KickstartSettings& st,
                                GradientBuffer& grads) {
    traj.validate();
    for (double l : lambdas) {
        if (l < 0.0) throw ConfigError("kickstart: negative lambda");
    }
    if (traj.teacher_index >= static_cast<int>(lambdas.size()))
        throw ConfigError("kickstart: teacher index outside lambda vector");

    const size_t T = traj.length();
    std::vector<Activations> acts(T + 1);
    std::vector<Vec> logits(T);
    Vec values(T + 1);
    for (size_t t = 0; t <= T; ++t) {
        forward_cached(net, traj.observations[t], acts[t]);
        values[t] = acts[t].value;
        if (t < T) logits[t] = acts[t].logits;
    }

    LossTerms terms;
    terms.distill_loss.assign(lambdas.size(), 0.0);
    std::vector<Vec> d_logits(T);
    for (size_t t = 0; t < T; ++t) d_logits[t].assign(net.num_actions, 0.0);
    Vec d_values(T, 0.0);

    const bool rl = st.mode == LossMode::Full;
    if (rl) {
        const VTraceOutput vt = vtrace(traj, values, logits, st.clip_rho, st.clip_c, st.gamma);
        const PolicyLoss pg = a3c_policy_loss(traj, vt, logits);
        const ValueLoss vl = value_loss(Vec(values.begin(), values.end() - 1), vt.value_targets);
        terms.policy_gradient_loss = pg.loss;
        terms.value_loss = vl.loss;
        for (size_t t = 0; t < T; ++t) {
            for (int j = 0; j < net.num_actions; ++j) d_logits[t][j] += pg.d_logits[t][j];
            d_values[t] = st.value_weight * vl.d_values[t];
        }
        if (beta != 0.0) {
            for (size_t t = 0; t < T; ++t) {
                const ScalarLoss ent = entropy_loss(logits[t]);
                terms.entropy_loss += ent.loss;
                for (int j = 0; j < net.num_actions; ++j) d_logits[t][j] += beta * ent.d_logits[j];
            }
        } else {
            for (size_t t = 0; t < T; ++t) terms.entropy_loss += entropy_loss(logits[t]).loss;
        }
    }

    double lambda = 0.0;
    if (traj.teacher_index >= 0) {
        lambda = lambdas[traj.teacher_index];
        if (lambda > 0.0) {
            double d = 0.0;
            for (size_t t = 0; t < T; ++t) {
                const ScalarLoss dl = distill_loss(traj.teacher_logits[t], logits[t]);
                d += dl.loss;
                for (int j = 0; j < net.num_actions; ++j)
                    d_logits[t][j] += lambda * dl.d_logits[j];
            }
            terms.distill_loss[traj.teacher_index] = d;
        } else if (st.mode == LossMode::DistillOnly) {
            for (size_t t = 0; t < T; ++t)
                terms.distill_loss[traj.teacher_index] += distill_loss(traj.teacher_logits[t], logits[t]).loss;
        }
    } else if (st.mode == LossMode::DistillOnly) {
        throw ConfigError("kickstart: distill-only mode needs a routed teacher");
    }

    terms.total = terms.policy_gradient_loss + st.value_weight * terms.value_loss +
                  beta * terms.entropy_loss;
    for (size_t i = 0; i < lambdas.size(); ++i) terms.total += lambdas[i] * terms.distill_loss[i];
    if (!std::isfinite(terms.total)) throw TrainingError("kickstart: non-finite loss");

    for (size_t t = 0; t < T; ++t) backward(net, acts[t], d_logits[t], d_values[t], grads);
    return terms;
}

}  // namespace ksrl
