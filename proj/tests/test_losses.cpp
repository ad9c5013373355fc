#include "ksrl/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "ksrl/rng.hpp"

using namespace ksrl;

namespace {

Vec random_logits(Rng& rng, int n, double scale = 2.0) {
    Vec v(n);
    for (double& x : v) x = rng.uniform(-scale, scale);
    return v;
}

// A syntactically valid unroll with random contents; teacher logits included.
Trajectory random_trajectory(Rng& rng, int T, int obs_dim, int num_actions, bool with_teacher) {
    Trajectory traj;
    traj.task_id = "synthetic";
    for (int t = 0; t <= T; ++t) traj.observations.push_back(random_logits(rng, obs_dim, 1.0));
    for (int t = 0; t < T; ++t) {
        traj.actions.push_back(rng.uniform_int(num_actions));
        traj.rewards.push_back(rng.uniform(-1.0, 1.0));
        traj.behaviour_logits.push_back(random_logits(rng, num_actions));
        traj.terminal.push_back(rng.bernoulli(0.2) ? 1 : 0);
        if (with_teacher) traj.teacher_logits.push_back(random_logits(rng, num_actions));
    }
    if (with_teacher) traj.teacher_index = 0;
    return traj;
}

Vec logits_for_probs(const Vec& probs) {
    Vec z(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) z[i] = std::log(probs[i]);
    return z;
}

// Loss as a function of parameters with V-trace outputs held constant,
// matching the stop-gradient semantics the analytic gradient implements.
double total_loss_frozen_targets(const PolicyValueNet& net, const Trajectory& traj,
                                 const VTraceOutput& vt, const Vec& lambdas, double beta,
                                 const KickstartSettings& st) {
    const size_t T = traj.length();
    std::vector<Vec> logits(T);
    Vec values(T + 1);
    for (size_t t = 0; t <= T; ++t) {
        const ForwardResult fr = forward(net, traj.observations[t]);
        values[t] = fr.value;
        if (t < T) logits[t] = fr.policy_logits;
    }
    double loss = a3c_policy_loss(traj, vt, logits).loss +
                  st.value_weight * value_loss(Vec(values.begin(), values.end() - 1), vt.value_targets).loss;
    for (size_t t = 0; t < T; ++t) {
        loss += beta * entropy_loss(logits[t]).loss;
        if (traj.teacher_index >= 0)
            loss += lambdas[traj.teacher_index] * distill_loss(traj.teacher_logits[t], logits[t]).loss;
    }
    return loss;
}

}  // namespace

TEST(DistillLoss, OneHotTeacherUniformStudent) {
    const Vec teacher = {50.0, -50.0};
    const Vec student = {0.0, 0.0};
    const ScalarLoss out = distill_loss(teacher, student);
    EXPECT_NEAR(out.loss, std::log(2.0), 1e-9);
}

TEST(DistillLoss, TeacherEqualsStudentGivesEntropyAndZeroGradient) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec z = random_logits(rng, 2 + rng.uniform_int(5));
        const ScalarLoss out = distill_loss(z, z);
        const ScalarLoss ent = entropy_loss(z);
        EXPECT_NEAR(out.loss, -ent.loss, 1e-12);
        for (double g : out.d_logits) EXPECT_EQ(g, 0.0);
    }
}

TEST(DistillLoss, ScalarSummationOracle) {
    const Vec teacher = logits_for_probs({0.7, 0.3});
    const Vec student = logits_for_probs({0.6, 0.4});
    const double oracle = -(0.7 * std::log(0.6) + 0.3 * std::log(0.4));
    const ScalarLoss out = distill_loss(teacher, student);
    EXPECT_NEAR(out.loss, oracle, 1e-9);
    EXPECT_NEAR(out.loss, 0.6324651562, 1e-9);
    EXPECT_NEAR(out.d_logits[0], 0.6 - 0.7, 1e-12);
    EXPECT_NEAR(out.d_logits[1], 0.4 - 0.3, 1e-12);
}

TEST(DistillLoss, GradientMatchesFiniteDifferences) {
    Rng rng(9);
    const Vec teacher = random_logits(rng, 5);
    Vec student = random_logits(rng, 5);
    const ScalarLoss out = distill_loss(teacher, student);
    const double h = 1e-6;
    for (size_t j = 0; j < student.size(); ++j) {
        Vec sp = student, sm = student;
        sp[j] += h;
        sm[j] -= h;
        const double num = (distill_loss(teacher, sp).loss - distill_loss(teacher, sm).loss) / (2 * h);
        EXPECT_NEAR(num, out.d_logits[j], 1e-6);
    }
}

TEST(DistillLoss, GibbsInequality) {
    Rng rng(10);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + rng.uniform_int(6);
        const Vec teacher = random_logits(rng, n, 3.0);
        const Vec student = random_logits(rng, n, 3.0);
        const double cross = distill_loss(teacher, student).loss;
        const double teacher_entropy = -entropy_loss(teacher).loss;
        EXPECT_GE(cross, teacher_entropy - 1e-12);
    }
}

TEST(DistillLoss, RejectsBadInput) {
    EXPECT_THROW(distill_loss({1.0}, {1.0}), CallerError);
    EXPECT_THROW(distill_loss({1.0, 2.0}, {1.0, 2.0, 3.0}), CallerError);
    EXPECT_THROW(distill_loss({1.0, std::nan("")}, {1.0, 2.0}), TrainingError);
}

TEST(EntropyLoss, UniformIsMinimum) {
    const ScalarLoss out = entropy_loss({0.0, 0.0, 0.0, 0.0});
    EXPECT_NEAR(out.loss, -std::log(4.0), 1e-12);
    for (double g : out.d_logits) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(EntropyLoss, NearOneHotApproachesZeroFromBelow) {
    const ScalarLoss out = entropy_loss({40.0, 0.0, 0.0});
    EXPECT_LT(out.loss, 0.0);
    EXPECT_GT(out.loss, -1e-10);
}

TEST(EntropyLoss, ScalarSummationOracle) {
    const ScalarLoss out = entropy_loss(logits_for_probs({0.7, 0.3}));
    const double oracle = 0.7 * std::log(0.7) + 0.3 * std::log(0.3);
    EXPECT_NEAR(out.loss, oracle, 1e-12);
    EXPECT_NEAR(out.loss, -0.610864, 1e-6);
}

TEST(EntropyLoss, KLIdentityAgainstUniform) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + rng.uniform_int(6);
        const Vec z = random_logits(rng, n, 3.0);
        const Vec p = softmax(z);
        double kl = 0.0;
        for (double pa : p) kl += pa * std::log(pa * n);
        EXPECT_NEAR(entropy_loss(z).loss, kl - std::log(static_cast<double>(n)), 1e-12);
    }
}

TEST(EntropyLoss, GradientMatchesFiniteDifferences) {
    Rng rng(12);
    Vec z = random_logits(rng, 6);
    const ScalarLoss out = entropy_loss(z);
    const double h = 1e-6;
    for (size_t j = 0; j < z.size(); ++j) {
        Vec zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        const double num = (entropy_loss(zp).loss - entropy_loss(zm).loss) / (2 * h);
        EXPECT_NEAR(num, out.d_logits[j], 1e-6);
    }
}

TEST(VTrace, TwoStepHandOracle) {
    Trajectory traj;
    traj.task_id = "oracle";
    traj.observations = {{0.0}, {0.0}, {0.0}};
    traj.actions = {0, 0};
    traj.rewards = {1.0, 0.0};
    traj.terminal = {0, 0};
    // behaviour probabilities (0.25, 0.75) then (0.5, 0.5)
    traj.behaviour_logits = {logits_for_probs({0.25, 0.75}), {0.0, 0.0}};
    // student probabilities (0.5, 0.5) then (0.25, 0.75): ratios 2.0 and 0.5
    const std::vector<Vec> student_logits = {{0.0, 0.0}, logits_for_probs({0.25, 0.75})};
    const Vec values = {0.5, 0.2, 0.0};

    const VTraceOutput out = vtrace(traj, values, student_logits, 1.0, 1.0, 0.9);

    // hand recursion: rho = (min(1,2), min(1,0.5)) = (1, 0.5)
    // t=1: delta = 0.5*(0 + 0.9*0 - 0.2) = -0.1; v_1 = 0.2 - 0.1 + 0 = 0.1
    // t=0: delta = 1*(1 + 0.9*0.2 - 0.5) = 0.68; v_0 = 0.5 + 0.68 + 0.9*1*(0.1-0.2) = 1.09
    // adv_0 = 1*(1 + 0.9*0.1 - 0.5) = 0.59; adv_1 = 0.5*(0 + 0 - 0.2) = -0.1
    EXPECT_NEAR(out.rho[0], 1.0, 1e-12);
    EXPECT_NEAR(out.rho[1], 0.5, 1e-12);
    EXPECT_NEAR(out.value_targets[0], 1.09, 1e-12);
    EXPECT_NEAR(out.value_targets[1], 0.1, 1e-12);
    EXPECT_NEAR(out.advantages[0], 0.59, 1e-12);
    EXPECT_NEAR(out.advantages[1], -0.1, 1e-12);
}

TEST(VTrace, OnPolicyReduction) {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int T = 1 + rng.uniform_int(8);
        Trajectory traj = random_trajectory(rng, T, 3, 4, false);
        std::vector<Vec> logits = traj.behaviour_logits;  // student == behaviour
        Vec values(T + 1);
        for (double& v : values) v = rng.uniform(-2.0, 2.0);

        const VTraceOutput out = vtrace(traj, values, logits, 1.0, 1.0, 0.95);

        // on-policy oracle: v_t = r_t + gamma_t * v_{t+1}; adv = v_t - V_t
        Vec v(T + 1);
        v[T] = values[T];
        for (int t = T - 1; t >= 0; --t) {
            const double g = traj.terminal[t] ? 0.0 : 0.95;
            v[t] = traj.rewards[t] + g * v[t + 1];
        }
        for (int t = 0; t < T; ++t) {
            EXPECT_EQ(out.rho[t], 1.0);
            EXPECT_NEAR(out.value_targets[t], v[t], 1e-12);
            EXPECT_NEAR(out.advantages[t], v[t] - values[t], 1e-12);
        }
    }
}

TEST(VTrace, ZeroRewardsZeroValues) {
    Rng rng(14);
    Trajectory traj = random_trajectory(rng, 6, 3, 4, false);
    std::fill(traj.rewards.begin(), traj.rewards.end(), 0.0);
    std::vector<Vec> logits(6);
    for (auto& l : logits) l = random_logits(rng, 4);
    const Vec values(7, 0.0);
    const VTraceOutput out = vtrace(traj, values, logits, 1.0, 1.0, 0.9);
    for (int t = 0; t < 6; ++t) {
        EXPECT_EQ(out.value_targets[t], 0.0);
        EXPECT_EQ(out.advantages[t], 0.0);
    }
}

TEST(VTrace, ClipsImportanceWeights) {
    Rng rng(15);
    Trajectory traj = random_trajectory(rng, 10, 3, 4, false);
    std::vector<Vec> logits(10);
    for (auto& l : logits) l = random_logits(rng, 4, 4.0);
    Vec values(11);
    for (double& v : values) v = rng.uniform(-1.0, 1.0);
    const VTraceOutput out = vtrace(traj, values, logits, 1.0, 1.0, 0.9);
    for (double r : out.rho) {
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0);
    }
}

TEST(VTrace, SingleStepMatchesOneStepForm) {
    Rng rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        Trajectory traj = random_trajectory(rng, 1, 3, 4, false);
        traj.terminal = {0};
        const std::vector<Vec> logits = {random_logits(rng, 4)};
        const Vec values = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const VTraceOutput out = vtrace(traj, values, logits, 1.0, 1.0, 0.9);
        const double ratio = std::exp(log_softmax(logits[0])[traj.actions[0]] -
                                      log_softmax(traj.behaviour_logits[0])[traj.actions[0]]);
        const double rho = std::min(1.0, ratio);
        // with T=1, v_1 = V(x_1): the one-step form rho*(r + gamma*V(x_1) - V(x_0))
        EXPECT_NEAR(out.advantages[0], rho * (traj.rewards[0] + 0.9 * values[1] - values[0]), 1e-12);
    }
}

TEST(VTrace, RejectsBadInput) {
    Rng rng(17);
    Trajectory traj = random_trajectory(rng, 3, 3, 4, false);
    std::vector<Vec> logits(3, random_logits(rng, 4));
    Vec values(4, 0.0);
    EXPECT_THROW(vtrace(traj, Vec(3, 0.0), logits, 1.0, 1.0, 0.9), CallerError);
    EXPECT_THROW(vtrace(traj, values, logits, 1.0, 1.0, 1.0), ConfigError);
    Trajectory missing = traj;
    missing.behaviour_logits.pop_back();
    EXPECT_THROW(vtrace(missing, values, logits, 1.0, 1.0, 0.9), CallerError);
}

TEST(PolicyLoss, ZeroAdvantagesZeroEverything) {
    Rng rng(18);
    Trajectory traj = random_trajectory(rng, 4, 3, 4, false);
    std::vector<Vec> logits(4);
    for (auto& l : logits) l = random_logits(rng, 4);
    VTraceOutput vt;
    vt.value_targets.assign(4, 0.0);
    vt.rho.assign(4, 1.0);
    vt.advantages.assign(4, 0.0);
    const PolicyLoss out = a3c_policy_loss(traj, vt, logits);
    EXPECT_EQ(out.loss, 0.0);
    for (const Vec& d : out.d_logits) {
        for (double g : d) EXPECT_EQ(g, 0.0);
    }
}

TEST(PolicyLoss, UnitAdvantageGradientIsSoftmaxMinusOneHot) {
    Trajectory traj;
    traj.task_id = "t";
    traj.observations = {{0.0}, {0.0}};
    traj.actions = {2};
    traj.rewards = {0.0};
    traj.terminal = {0};
    traj.behaviour_logits = {{0.1, 0.2, 0.3, 0.4}};
    const std::vector<Vec> logits = {{0.1, 0.2, 0.3, 0.4}};
    VTraceOutput vt;
    vt.value_targets = {0.0};
    vt.rho = {1.0};
    vt.advantages = {1.0};
    const PolicyLoss out = a3c_policy_loss(traj, vt, logits);
    const Vec p = softmax(logits[0]);
    for (int j = 0; j < 4; ++j) {
        const double expect = p[j] - (j == 2 ? 1.0 : 0.0);
        EXPECT_NEAR(out.d_logits[0][j], expect, 1e-12);
    }
    EXPECT_NEAR(out.loss, -log_softmax(logits[0])[2], 1e-12);
}

TEST(PolicyLoss, GradientMatchesFiniteDifferences) {
    Rng rng(19);
    const int T = 3;
    Trajectory traj = random_trajectory(rng, T, 3, 5, false);
    std::vector<Vec> logits(T);
    for (auto& l : logits) l = random_logits(rng, 5);
    VTraceOutput vt;
    vt.value_targets.assign(T, 0.0);
    vt.rho.assign(T, 0.0);
    vt.advantages.assign(T, 0.0);
    for (int t = 0; t < T; ++t) {
        vt.rho[t] = rng.uniform(0.1, 1.0);
        vt.advantages[t] = rng.uniform(-2.0, 2.0);
    }
    const PolicyLoss out = a3c_policy_loss(traj, vt, logits);
    const double h = 1e-6;
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < 5; ++j) {
            std::vector<Vec> lp = logits, lm = logits;
            lp[t][j] += h;
            lm[t][j] -= h;
            const double num =
                (a3c_policy_loss(traj, vt, lp).loss - a3c_policy_loss(traj, vt, lm).loss) / (2 * h);
            EXPECT_NEAR(num, out.d_logits[t][j], 1e-6);
        }
    }
}

TEST(ValueLoss, ExactCases) {
    EXPECT_EQ(value_loss({1.0, 2.0}, {1.0, 2.0}).loss, 0.0);
    EXPECT_EQ(value_loss({1.0, 1.0}, {0.0, 0.0}).loss, 2.0);
    EXPECT_THROW(value_loss({1.0}, {1.0, 2.0}), CallerError);
}

TEST(ValueLoss, ScalarOracleLength7) {
    Rng rng(20);
    Vec v(7), tgt(7);
    for (int i = 0; i < 7; ++i) {
        v[i] = rng.uniform(-3.0, 3.0);
        tgt[i] = rng.uniform(-3.0, 3.0);
    }
    double oracle = 0.0;
    for (int i = 0; i < 7; ++i) oracle += (v[i] - tgt[i]) * (v[i] - tgt[i]);
    const ValueLoss out = value_loss(v, tgt);
    EXPECT_NEAR(out.loss, oracle, 1e-12);
    for (int i = 0; i < 7; ++i) EXPECT_NEAR(out.d_values[i], 2.0 * (v[i] - tgt[i]), 1e-12);
}

TEST(Kickstart, LambdaZeroBitIdenticalToPureRL) {
    Rng rng(21);
    NetSpec spec{{4, 8}, 3};
    const PolicyValueNet net = net_init(spec, 55);
    Trajectory with_teacher = random_trajectory(rng, 5, 4, 3, true);
    Trajectory without = with_teacher;
    without.teacher_logits.clear();
    without.teacher_index = -1;

    KickstartSettings st;
    GradientBuffer g1 = make_gradient_buffer(net);
    GradientBuffer g2 = make_gradient_buffer(net);
    const LossTerms t1 = kickstart_loss(net, with_teacher, {0.0}, 0.01, st, g1);
    const LossTerms t2 = kickstart_loss(net, without, {}, 0.01, st, g2);

    EXPECT_EQ(t1.total, t2.total);
    EXPECT_EQ(t1.policy_gradient_loss, t2.policy_gradient_loss);
    EXPECT_EQ(t1.value_loss, t2.value_loss);
    EXPECT_EQ(t1.entropy_loss, t2.entropy_loss);
    EXPECT_EQ(t1.distill_loss, Vec{0.0});
    EXPECT_EQ(g1.grads, g2.grads);
}

TEST(Kickstart, DistillOnlyTeacherEqualsStudentFixedPoint) {
    NetSpec spec{{3, 6}, 4};
    const PolicyValueNet net = net_init(spec, 66);
    Rng rng(22);
    Trajectory traj = random_trajectory(rng, 4, 3, 4, true);
    for (size_t t = 0; t < traj.length(); ++t) {
        traj.teacher_logits[t] = forward(net, traj.observations[t]).policy_logits;
    }
    KickstartSettings st;
    st.mode = LossMode::DistillOnly;
    GradientBuffer g = make_gradient_buffer(net);
    kickstart_loss(net, traj, {1.0}, 0.01, st, g);
    double norm2 = 0.0;
    g.grads.for_each([&](double x) { norm2 += x * x; });
    EXPECT_LT(std::sqrt(norm2), 1e-10);
}

TEST(Kickstart, DistillOnlyZeroesRLTerms) {
    Rng rng(23);
    NetSpec spec{{3, 6}, 4};
    const PolicyValueNet net = net_init(spec, 67);
    Trajectory traj = random_trajectory(rng, 4, 3, 4, true);
    KickstartSettings st;
    st.mode = LossMode::DistillOnly;
    GradientBuffer g = make_gradient_buffer(net);
    const LossTerms terms = kickstart_loss(net, traj, {1.5}, 0.01, st, g);
    EXPECT_EQ(terms.policy_gradient_loss, 0.0);
    EXPECT_EQ(terms.value_loss, 0.0);
    EXPECT_EQ(terms.entropy_loss, 0.0);
    EXPECT_GT(terms.distill_loss[0], 0.0);
    EXPECT_NEAR(terms.total, 1.5 * terms.distill_loss[0], 1e-12);
}

TEST(Kickstart, LambdaOneTermSumOracle) {
    Rng rng(24);
    NetSpec spec{{4, 8}, 3};
    const PolicyValueNet net = net_init(spec, 77);
    Trajectory traj = random_trajectory(rng, 2, 4, 3, true);
    const double beta = 0.02;
    KickstartSettings st;

    GradientBuffer g = make_gradient_buffer(net);
    const LossTerms terms = kickstart_loss(net, traj, {1.0}, beta, st, g);

    // recompute every term with the standalone losses and sum by hand
    const size_t T = traj.length();
    std::vector<Vec> logits(T);
    Vec values(T + 1);
    for (size_t t = 0; t <= T; ++t) {
        const ForwardResult fr = forward(net, traj.observations[t]);
        values[t] = fr.value;
        if (t < T) logits[t] = fr.policy_logits;
    }
    const VTraceOutput vt = vtrace(traj, values, logits, 1.0, 1.0, st.gamma);
    const PolicyLoss pg = a3c_policy_loss(traj, vt, logits);
    const ValueLoss vl = value_loss(Vec(values.begin(), values.end() - 1), vt.value_targets);
    double ent = 0.0, dist = 0.0;
    for (size_t t = 0; t < T; ++t) {
        ent += entropy_loss(logits[t]).loss;
        dist += distill_loss(traj.teacher_logits[t], logits[t]).loss;
    }
    const double oracle = pg.loss + 0.5 * vl.loss + beta * ent + 1.0 * dist;
    EXPECT_NEAR(terms.total, oracle, 1e-12);
    EXPECT_NEAR(terms.policy_gradient_loss, pg.loss, 1e-12);
    EXPECT_NEAR(terms.value_loss, vl.loss, 1e-12);
    EXPECT_NEAR(terms.entropy_loss, ent, 1e-12);
    EXPECT_NEAR(terms.distill_loss[0], dist, 1e-12);
}

TEST(Kickstart, TotalInvariantHoldsForRandomWeights) {
    Rng rng(25);
    NetSpec spec{{3, 6}, 4};
    const PolicyValueNet net = net_init(spec, 88);
    for (int trial = 0; trial < 20; ++trial) {
        Trajectory traj = random_trajectory(rng, 3, 3, 4, true);
        const Vec lambdas = {rng.uniform(0.0, 2.0)};
        const double beta = rng.uniform(0.0, 0.05);
        KickstartSettings st;
        GradientBuffer g = make_gradient_buffer(net);
        const LossTerms terms = kickstart_loss(net, traj, lambdas, beta, st, g);
        double expect = terms.policy_gradient_loss + st.value_weight * terms.value_loss +
                        beta * terms.entropy_loss;
        for (size_t i = 0; i < lambdas.size(); ++i) expect += lambdas[i] * terms.distill_loss[i];
        EXPECT_NEAR(terms.total, expect, 1e-12);
        EXPECT_TRUE(std::isfinite(terms.total));
    }
}

TEST(Kickstart, ParameterGradientMatchesFiniteDifferences) {
    Rng rng(26);
    NetSpec spec{{3, 6}, 4};
    PolicyValueNet net = net_init(spec, 99);
    Trajectory traj = random_trajectory(rng, 3, 3, 4, true);
    const Vec lambdas = {0.7};
    const double beta = 0.03;
    KickstartSettings st;

    GradientBuffer g = make_gradient_buffer(net);
    kickstart_loss(net, traj, lambdas, beta, st, g);

    // freeze the vtrace outputs at the base parameters
    const size_t T = traj.length();
    std::vector<Vec> base_logits(T);
    Vec base_values(T + 1);
    for (size_t t = 0; t <= T; ++t) {
        const ForwardResult fr = forward(net, traj.observations[t]);
        base_values[t] = fr.value;
        if (t < T) base_logits[t] = fr.policy_logits;
    }
    const VTraceOutput vt = vtrace(traj, base_values, base_logits, st.clip_rho, st.clip_c, st.gamma);

    const double h = 1e-5;
    size_t bad = 0, total = 0;
    auto fd_check = [&](double& w, double analytic) {
        const double saved = w;
        w = saved + h;
        const double fp = total_loss_frozen_targets(net, traj, vt, lambdas, beta, st);
        w = saved - h;
        const double fm = total_loss_frozen_targets(net, traj, vt, lambdas, beta, st);
        w = saved;
        const double num = (fp - fm) / (2 * h);
        const double denom = std::max({std::abs(num), std::abs(analytic), 1e-8});
        if (std::abs(num - analytic) / denom >= 1e-4) ++bad;
        ++total;
    };
    for (size_t li = 0; li < net.params.hidden.size(); ++li) {
        for (size_t i = 0; i < net.params.hidden[li].w.a.size(); ++i)
            fd_check(net.params.hidden[li].w.a[i], g.grads.hidden[li].w.a[i]);
        for (size_t i = 0; i < net.params.hidden[li].b.size(); ++i)
            fd_check(net.params.hidden[li].b[i], g.grads.hidden[li].b[i]);
    }
    for (size_t i = 0; i < net.params.policy_w.a.size(); ++i)
        fd_check(net.params.policy_w.a[i], g.grads.policy_w.a[i]);
    for (size_t i = 0; i < net.params.value_w.size(); ++i)
        fd_check(net.params.value_w[i], g.grads.value_w[i]);
    EXPECT_EQ(bad, 0u) << bad << " of " << total << " parameters failed the check";
}

TEST(Kickstart, RejectsNegativeLambda) {
    Rng rng(27);
    NetSpec spec{{3, 6}, 4};
    const PolicyValueNet net = net_init(spec, 111);
    Trajectory traj = random_trajectory(rng, 2, 3, 4, true);
    GradientBuffer g = make_gradient_buffer(net);
    KickstartSettings st;
    EXPECT_THROW(kickstart_loss(net, traj, {-0.5}, 0.01, st, g), ConfigError);
}

TEST(Kickstart, RejectsTeacherIndexOutsideLambdas) {
    Rng rng(28);
    NetSpec spec{{3, 6}, 4};
    const PolicyValueNet net = net_init(spec, 112);
    Trajectory traj = random_trajectory(rng, 2, 3, 4, true);
    traj.teacher_index = 2;
    GradientBuffer g = make_gradient_buffer(net);
    KickstartSettings st;
    EXPECT_THROW(kickstart_loss(net, traj, {1.0}, 0.01, st, g), ConfigError);
}

TEST(Kickstart, DistillOnlyWithoutTeacherRejected) {
    Rng rng(29);
    NetSpec spec{{3, 6}, 4};
    const PolicyValueNet net = net_init(spec, 113);
    Trajectory traj = random_trajectory(rng, 2, 3, 4, false);
    GradientBuffer g = make_gradient_buffer(net);
    KickstartSettings st;
    st.mode = LossMode::DistillOnly;
    EXPECT_THROW(kickstart_loss(net, traj, {}, 0.01, st, g), ConfigError);
}

TEST(Trajectory, ValidateCatchesShapeErrors) {
    Rng rng(30);
    Trajectory good = random_trajectory(rng, 3, 2, 3, true);
    EXPECT_NO_THROW(good.validate());

    Trajectory bad = good;
    bad.observations.pop_back();
    EXPECT_THROW(bad.validate(), CallerError);

    bad = good;
    bad.rewards.pop_back();
    EXPECT_THROW(bad.validate(), CallerError);

    bad = good;
    bad.teacher_logits.clear();
    EXPECT_THROW(bad.validate(), CallerError);  // teacher_index still set

    bad = good;
    bad.actions.clear();
    EXPECT_THROW(bad.validate(), CallerError);
}

TEST(Queue, FifoAndBounded) {
    BoundedQueue<int> q(3);
    EXPECT_TRUE(q.try_push(1));
    EXPECT_TRUE(q.try_push(2));
    EXPECT_TRUE(q.try_push(3));
    EXPECT_FALSE(q.try_push(4));
    EXPECT_EQ(q.size(), 3u);
    EXPECT_EQ(q.try_pop().value(), 1);
    EXPECT_EQ(q.try_pop().value(), 2);
    EXPECT_TRUE(q.try_push(5));
    EXPECT_EQ(q.try_pop().value(), 3);
    EXPECT_EQ(q.try_pop().value(), 5);
    EXPECT_FALSE(q.try_pop().has_value());
}

TEST(Queue, CloseUnblocksAndDrains) {
    BoundedQueue<int> q(2);
    q.try_push(7);
    q.close();
    EXPECT_FALSE(q.try_push(8));
    EXPECT_EQ(q.pop().value(), 7);
    EXPECT_FALSE(q.pop().has_value());
}

TEST(Queue, RejectsZeroCapacity) {
    EXPECT_THROW(BoundedQueue<int>(0), ConfigError);
}
