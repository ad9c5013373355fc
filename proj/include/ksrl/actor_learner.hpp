#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ksrl/checkpoint.hpp"
#include "ksrl/common.hpp"
#include "ksrl/env.hpp"
#include "ksrl/hypers.hpp"
#include "ksrl/losses.hpp"
#include "ksrl/metrics.hpp"
#include "ksrl/net.hpp"
#include "ksrl/rng.hpp"
#include "ksrl/schedule.hpp"
#include "ksrl/teacher.hpp"
#include "ksrl/trajectory.hpp"

namespace ksrl {

struct Snapshot {
    std::shared_ptr<const PolicyValueNet> net;
    uint64_t version = 0;
};

// Published parameter snapshots; the learner is the only writer.
class SnapshotBoard {
public:
    SnapshotBoard(const PolicyValueNet& net, uint64_t version) {
        snap_ = {std::make_shared<const PolicyValueNet>(net), version};
    }

    void publish(const PolicyValueNet& net, uint64_t version) {
        auto fresh = std::make_shared<const PolicyValueNet>(net);
        std::lock_guard lock(mu_);
        if (version <= snap_.version) throw CallerError("snapshot versions must increase");
        snap_ = {std::move(fresh), version};
    }

    Snapshot current() const {
        std::lock_guard lock(mu_);
        return snap_;
    }

private:
    mutable std::mutex mu_;
    Snapshot snap_;
};

inline int sample_action(const Vec& logits, Rng& rng) {
    return rng.categorical(softmax(logits));
}

// One actor's exclusively owned state: an environment plus its RNG streams.
struct ActorContext {
    int actor_id = 0;
    TaskSpec task;
    const Teacher* teacher = nullptr;
    int teacher_index = -1;
    EnvState env;
    Rng action_rng;
    Rng reset_rng;

    static ActorContext make(int actor_id, const TaskSpec& task, uint64_t member_seed,
                             const Teacher* teacher, int teacher_index) {
        ActorContext a;
        a.actor_id = actor_id;
        a.task = task;
        a.teacher = teacher;
        a.teacher_index = teacher ? teacher_index : -1;
        a.action_rng = Rng(derive_seed(member_seed, "act", static_cast<uint64_t>(actor_id)));
        a.reset_rng = Rng(derive_seed(member_seed, "reset", static_cast<uint64_t>(actor_id)));
        a.env = reset_env(task, a.reset_rng.next_u64());
        return a;
    }
};

// Fixed-length unroll from the actor's environment under the snapshot policy.
// Episode boundaries reset in place; the trailing observation bootstraps.
inline Trajectory act_unroll(ActorContext& actor, const Snapshot& snap, int unroll_length) {
    if (unroll_length < 1) throw CallerError("act_unroll: unroll_length must be >= 1");
    const PolicyValueNet& net = *snap.net;
    Trajectory traj;
    traj.task_id = actor.task.task_id;
    traj.teacher_index = actor.teacher ? actor.teacher_index : -1;
    traj.actor_param_version = snap.version;
    traj.actor_id = actor.actor_id;
    traj.observations.reserve(unroll_length + 1);
    traj.actions.reserve(unroll_length);
    traj.rewards.reserve(unroll_length);
    traj.behaviour_logits.reserve(unroll_length);
    traj.terminal.reserve(unroll_length);

    Vec obs = observe(actor.task, actor.env);
    for (int t = 0; t < unroll_length; ++t) {
        ForwardResult out = forward(net, obs);
        const int action = sample_action(out.policy_logits, actor.action_rng);
        if (actor.teacher) traj.teacher_logits.push_back(teacher_logits(*actor.teacher, obs));
        traj.observations.push_back(std::move(obs));
        traj.behaviour_logits.push_back(std::move(out.policy_logits));
        StepResult r = step_env(actor.task, actor.env, action);
        traj.actions.push_back(action);
        traj.rewards.push_back(r.reward);
        traj.terminal.push_back(r.terminal ? 1 : 0);
        if (r.terminal) {
            traj.completed_returns.push_back(actor.env.episode_return);
            actor.env = reset_env(actor.task, actor.reset_rng.next_u64());
            obs = observe(actor.task, actor.env);
        } else {
            obs = std::move(r.observation);
        }
    }
    traj.observations.push_back(std::move(obs));
    traj.validate();
    return traj;
}

struct LearnerState {
    PolicyValueNet net;
    RmsProp opt;
    HyperParams hypers;
    uint64_t frames = 0;
    uint64_t version = 1;
};

inline LearnerState make_learner(const NetSpec& spec, const HyperParams& hypers, uint64_t seed) {
    hypers.validate();
    LearnerState st;
    st.net = net_init(spec, seed);
    st.opt = RmsProp::make(st.net, hypers.learning_rate);
    st.hypers = hypers;
    return st;
}

struct StepSummary {
    LossTerms loss;  // batch mean
    Vec lambdas;     // per-teacher weights used for this step
};

// One optimizer update from the mean of per-trajectory losses; lambda is
// refreshed from the schedule at the pre-step frame count.
inline StepSummary learner_step(LearnerState& st, const std::vector<Trajectory>& batch,
                                const Schedule& schedule, const KickstartSettings& settings,
                                size_t num_teachers) {
    if (batch.empty()) throw CallerError("learner: empty batch");
    StepSummary out;
    out.lambdas.resize(num_teachers);
    for (size_t i = 0; i < num_teachers; ++i)
        out.lambdas[i] = lambda_at(schedule, st.frames, st.hypers, i);

    GradientBuffer grads = make_gradient_buffer(st.net);
    GradientBuffer scratch = make_gradient_buffer(st.net);
    LossTerms& mean = out.loss;
    mean.distill_loss.assign(num_teachers, 0.0);
    uint64_t batch_frames = 0;
    for (const Trajectory& traj : batch) {
        scratch.set_zero();
        const LossTerms lt =
            kickstart_loss(st.net, traj, out.lambdas, st.hypers.entropy_cost, settings, scratch);
        grads.grads.for_each(scratch.grads, [](double& g, const double& s) { g += s; });
        mean.policy_gradient_loss += lt.policy_gradient_loss;
        mean.value_loss += lt.value_loss;
        mean.entropy_loss += lt.entropy_loss;
        for (size_t i = 0; i < num_teachers; ++i) mean.distill_loss[i] += lt.distill_loss[i];
        mean.total += lt.total;
        batch_frames += traj.length();
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    mean.policy_gradient_loss *= inv;
    mean.value_loss *= inv;
    mean.entropy_loss *= inv;
    for (double& d : mean.distill_loss) d *= inv;
    mean.total *= inv;
    if (!std::isfinite(mean.total))
        throw TrainingError("learner: non-finite loss at frames " + std::to_string(st.frames) +
                            " (pg=" + std::to_string(mean.policy_gradient_loss) +
                            ", value=" + std::to_string(mean.value_loss) +
                            ", entropy=" + std::to_string(mean.entropy_loss) + ")");
    grads.grads.for_each([&](double& g) { g *= inv; });
    apply_update(st.net, grads, st.opt);
    st.frames += batch_frames;
    st.version += 1;
    return out;
}

struct RunConfig {
    int unroll_length = 20;
    int batch_size = 8;
    int queue_capacity = 16;
    int actors_per_task = 4;
    uint64_t frame_budget = 0;
    uint64_t metrics_interval = 2000;
    uint64_t checkpoint_interval = 50000;
    uint64_t score_window = 50000;
    bool deterministic = true;
    int member_id = 0;
    uint64_t seed = 1;
    double learner_timeout_seconds = 60.0;
    KickstartSettings kick;
    Schedule schedule;
    std::filesystem::path checkpoint_dir;  // empty: no periodic checkpoints
    std::function<void(const LearnerState&, const std::vector<Trajectory>&)> on_batch;

    void validate() const {
        if (unroll_length < 1) throw ConfigError("run: unroll_length must be >= 1");
        if (batch_size < 1) throw ConfigError("run: batch_size must be >= 1");
        if (queue_capacity < 1) throw ConfigError("run: queue_capacity must be >= 1");
        if (actors_per_task < 1) throw ConfigError("run: actors_per_task must be >= 1");
        if (metrics_interval == 0) throw ConfigError("run: metrics_interval must be positive");
        if (checkpoint_interval == 0) throw ConfigError("run: checkpoint_interval must be positive");
        if (score_window == 0) throw ConfigError("run: score_window must be positive");
        schedule.validate();
    }
};

struct RunInputs {
    std::vector<TaskSpec> suite;
    const std::vector<Teacher>* teachers = nullptr;  // null or empty: pure RL
    TeacherRouter router;
    const ReferenceTable* references = nullptr;  // null: capped scores reported as 0

    size_t num_teachers() const { return teachers ? teachers->size() : 0; }
};

struct RunResult {
    LearnerState state;
    std::vector<MetricRecord> records;
    std::map<std::string, double> final_windowed;  // last known windowed return per task
    std::map<int, uint64_t> trajectories_per_actor;
    uint64_t max_version_lag = 0;
    uint64_t learner_steps = 0;
};

namespace detail {

struct RunContext {
    const RunInputs& in;
    const RunConfig& cfg;
    LearnerState state;
    ScoreWindow window;
    RunResult result;
    LossTerms last_loss;
    uint64_t next_metrics = 0;
    uint64_t next_checkpoint;

    RunContext(LearnerState st, const RunInputs& inputs, const RunConfig& config)
        : in(inputs), cfg(config), state(std::move(st)), window(config.score_window),
          next_checkpoint(config.checkpoint_interval) {}

    void emit_metrics() {
        MetricRecord r;
        r.member_id = cfg.member_id;
        r.frames = state.frames;
        for (const TaskSpec& task : in.suite) {
            const auto v = window.windowed_return(task.task_id, state.frames);
            if (v) r.windowed_return[task.task_id] = *v;
        }
        if (in.references) {
            std::vector<std::string> ids;
            for (const TaskSpec& task : in.suite) ids.push_back(task.task_id);
            r.mean_capped_score = suite_score(window, *in.references, ids, state.frames);
        }
        r.lambda.resize(in.num_teachers());
        for (size_t i = 0; i < r.lambda.size(); ++i)
            r.lambda[i] = lambda_at(cfg.schedule, state.frames, state.hypers, i);
        r.learning_rate = state.hypers.learning_rate;
        r.entropy_cost = state.hypers.entropy_cost;
        r.loss = last_loss;
        result.records.push_back(std::move(r));
        while (next_metrics <= state.frames) next_metrics += cfg.metrics_interval;
    }

    void consume(const std::vector<Trajectory>& batch) {
        for (const Trajectory& traj : batch) {
            result.trajectories_per_actor[traj.actor_id] += 1;
            const uint64_t lag = state.version - traj.actor_param_version;
            result.max_version_lag = std::max(result.max_version_lag, lag);
        }
        if (cfg.on_batch) cfg.on_batch(state, batch);
        const StepSummary s =
            learner_step(state, batch, cfg.schedule, cfg.kick, in.num_teachers());
        last_loss = s.loss;
        result.learner_steps += 1;
        for (const Trajectory& traj : batch) {
            for (double ret : traj.completed_returns)
                window.record(traj.task_id, state.frames, ret);
        }
        if (state.frames >= next_metrics) emit_metrics();
        if (!cfg.checkpoint_dir.empty() && state.frames >= next_checkpoint) {
            save_checkpoint(cfg.checkpoint_dir /
                                ("ckpt_" + std::to_string(state.frames) + ".ksrl"),
                            state.net, state.hypers);
            while (next_checkpoint <= state.frames) next_checkpoint += cfg.checkpoint_interval;
        }
    }

    RunResult finish() {
        if (result.records.empty() || result.records.back().frames != state.frames)
            emit_metrics();
        for (const TaskSpec& task : in.suite) {
            const auto v = window.windowed_return(task.task_id, state.frames);
            if (v) result.final_windowed[task.task_id] = *v;
        }
        result.state = std::move(state);
        return std::move(result);
    }
};

inline std::vector<ActorContext> make_actors(const RunInputs& in, const RunConfig& cfg) {
    std::vector<ActorContext> actors;
    const bool kick = in.teachers && !in.teachers->empty();
    for (size_t j = 0; j < in.suite.size(); ++j) {
        const TaskSpec& task = in.suite[j];
        const Teacher* teacher = nullptr;
        int teacher_index = -1;
        if (kick) {
            teacher_index = static_cast<int>(in.router.route(task.task_id));
            teacher = &(*in.teachers)[teacher_index];
        }
        for (int k = 0; k < cfg.actors_per_task; ++k) {
            const int actor_id = static_cast<int>(j) * cfg.actors_per_task + k;
            actors.push_back(ActorContext::make(actor_id, task, cfg.seed, teacher, teacher_index));
        }
    }
    return actors;
}

inline void check_run_inputs(const LearnerState& st, const RunInputs& in, const RunConfig& cfg) {
    cfg.validate();
    st.hypers.validate();
    if (in.suite.empty()) throw ConfigError("run: empty task suite");
    for (const TaskSpec& task : in.suite) {
        task.validate();
        if (task.obs_size() != st.net.input_dim())
            throw ConfigError("run: task " + task.task_id + " observation size " +
                              std::to_string(task.obs_size()) + " != net input dim " +
                              std::to_string(st.net.input_dim()));
    }
    const bool kick = in.teachers && !in.teachers->empty();
    if (kick) {
        for (const Teacher& t : *in.teachers) {
            if (t.num_actions() != st.net.num_actions)
                throw ConfigError("run: teacher action count mismatch");
            if (t.input_dim() != st.net.input_dim())
                throw ConfigError("run: teacher input dim mismatch");
        }
        for (const TaskSpec& task : in.suite) {
            size_t idx;
            try {
                idx = in.router.route(task.task_id);
            } catch (const CallerError& e) {
                throw ConfigError(e.what());
            }
            if (idx >= in.teachers->size())
                throw ConfigError("run: routed teacher index out of range for " + task.task_id);
        }
        for (size_t i = 0; i < in.teachers->size(); ++i)
            lambda_at(cfg.schedule, 0, st.hypers, i);
    } else if (cfg.kick.mode == LossMode::DistillOnly) {
        throw ConfigError("run: distill-only needs at least one teacher");
    }
}

}  // namespace detail

// Sequential deterministic driver: actors stepped round-robin on one thread;
// bit-reproducible from (config, seed).
inline RunResult run_member_sequential(LearnerState state, const RunInputs& in,
                                       const RunConfig& cfg) {
    detail::check_run_inputs(state, in, cfg);
    detail::RunContext ctx(std::move(state), in, cfg);
    std::vector<ActorContext> actors = detail::make_actors(in, cfg);
    SnapshotBoard board(ctx.state.net, ctx.state.version);
    size_t cursor = 0;
    ctx.emit_metrics();
    while (ctx.state.frames < cfg.frame_budget) {
        const Snapshot snap = board.current();
        std::vector<Trajectory> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            batch.push_back(act_unroll(actors[cursor], snap, cfg.unroll_length));
            cursor = (cursor + 1) % actors.size();
        }
        ctx.consume(batch);
        board.publish(ctx.state.net, ctx.state.version);
    }
    return ctx.finish();
}

// Parallel driver: one thread per actor producing into a bounded queue, the
// calling thread learns. Starvation surfaces as a timeout with queue stats.
inline RunResult run_member_parallel(LearnerState state, const RunInputs& in,
                                     const RunConfig& cfg) {
    detail::check_run_inputs(state, in, cfg);
    detail::RunContext ctx(std::move(state), in, cfg);
    std::vector<ActorContext> actors = detail::make_actors(in, cfg);
    SnapshotBoard board(ctx.state.net, ctx.state.version);
    BoundedQueue<Trajectory> queue(cfg.queue_capacity);
    std::atomic<bool> stop{false};

    std::vector<std::thread> threads;
    threads.reserve(actors.size());
    for (ActorContext& actor : actors) {
        threads.emplace_back([&actor, &board, &queue, &stop, &cfg] {
            while (!stop.load(std::memory_order_relaxed)) {
                Trajectory traj = act_unroll(actor, board.current(), cfg.unroll_length);
                if (!queue.push(std::move(traj))) return;
            }
        });
    }
    auto shutdown = [&] {
        stop.store(true);
        queue.close();
        while (queue.try_pop()) {
        }
        for (std::thread& t : threads) t.join();
    };

    ctx.emit_metrics();
    try {
        while (ctx.state.frames < cfg.frame_budget) {
            std::vector<Trajectory> batch;
            batch.reserve(cfg.batch_size);
            const auto deadline = std::chrono::steady_clock::now() +
                                  std::chrono::duration<double>(cfg.learner_timeout_seconds);
            while (static_cast<int>(batch.size()) < cfg.batch_size) {
                if (auto traj = queue.try_pop()) {
                    batch.push_back(std::move(*traj));
                    continue;
                }
                if (std::chrono::steady_clock::now() > deadline)
                    throw TrainingError("learner: no trajectory within " +
                                        std::to_string(cfg.learner_timeout_seconds) +
                                        "s (queue size " + std::to_string(queue.size()) +
                                        "/" + std::to_string(queue.capacity()) + ", batch " +
                                        std::to_string(batch.size()) + "/" +
                                        std::to_string(cfg.batch_size) + ")");
                std::this_thread::sleep_for(std::chrono::microseconds(200));
            }
            ctx.consume(batch);
            board.publish(ctx.state.net, ctx.state.version);
        }
    } catch (...) {
        shutdown();
        throw;
    }
    shutdown();
    return ctx.finish();
}

inline RunResult run_member(LearnerState state, const RunInputs& in, const RunConfig& cfg) {
    return cfg.deterministic ? run_member_sequential(std::move(state), in, cfg)
                             : run_member_parallel(std::move(state), in, cfg);
}

}  // namespace ksrl
