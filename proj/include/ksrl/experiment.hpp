#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ksrl/actor_learner.hpp"
#include "ksrl/common.hpp"
#include "ksrl/env.hpp"
#include "ksrl/metrics.hpp"
#include "ksrl/pbt.hpp"
#include "ksrl/teacher.hpp"

namespace ksrl {

// Mean return of the softmax policy over a fixed set of evaluation episodes.
inline double evaluate_policy(const PolicyValueNet& net, const TaskSpec& task, int episodes,
                              uint64_t seed) {
    if (episodes < 1) throw CallerError("evaluate: episodes must be >= 1");
    Rng action_rng(derive_seed(seed, "eval-act"));
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        EnvState env = reset_env(task, derive_seed(seed, "eval-env", static_cast<uint64_t>(e)));
        while (!env.terminal) {
            const Vec obs = observe(task, env);
            step_env(task, env, sample_action(forward(net, obs).policy_logits, action_rng));
        }
        total += env.episode_return;
    }
    return total / static_cast<double>(episodes);
}

inline double random_policy_return(const TaskSpec& task, int episodes, uint64_t seed) {
    if (episodes < 1) throw CallerError("evaluate: episodes must be >= 1");
    Rng action_rng(derive_seed(seed, "rand-act"));
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        EnvState env = reset_env(task, derive_seed(seed, "rand-env", static_cast<uint64_t>(e)));
        while (!env.terminal) step_env(task, env, action_rng.uniform_int(kNumActions));
        total += env.episode_return;
    }
    return total / static_cast<double>(episodes);
}

inline NetSpec net_spec_for(const std::vector<TaskSpec>& tasks, const std::vector<int>& hidden) {
    if (tasks.empty()) throw ConfigError("net spec: empty task list");
    std::vector<int> dims = {tasks.front().obs_size()};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    return {std::move(dims), kNumActions};
}

struct ExpertSettings {
    std::vector<int> hidden = {64};
    HyperParams hypers;
    RunConfig run;
    uint64_t config_hash = 0;
};

struct ExpertResult {
    Teacher teacher;
    std::vector<MetricRecord> records;
    std::map<std::string, double> final_windowed;
};

// Pure RL training (no teachers, so no distillation term), frozen at the
// final checkpoint.
inline ExpertResult train_expert(const std::vector<TaskSpec>& tasks, const ExpertSettings& es,
                                 uint64_t seed) {
    RunConfig cfg = es.run;
    cfg.schedule = Schedule{};
    cfg.schedule.constant_value = 0.0;
    cfg.kick.mode = LossMode::Full;
    cfg.seed = derive_seed(seed, "expert-run");
    LearnerState st =
        make_learner(net_spec_for(tasks, es.hidden), es.hypers, derive_seed(seed, "expert-init"));
    RunInputs in;
    in.suite = tasks;
    RunResult r = run_member(std::move(st), in, cfg);
    TeacherProvenance prov;
    for (const TaskSpec& t : tasks) prov.trained_tasks.push_back(t.task_id);
    prov.frames_trained = r.state.frames;
    prov.config_hash = es.config_hash;
    return {Teacher(std::move(r.state.net), std::move(prov)), std::move(r.records),
            std::move(r.final_windowed)};
}

struct CalibrationSettings {
    ExpertSettings expert;
    int random_episodes = 1000;
};

struct CalibrationResult {
    ReferenceTable table;
    std::vector<Teacher> experts;  // one per task, suite order
};

// Anchors the score scale: random_score from a uniform-random policy,
// reference_score from a per-task expert trained from scratch.
inline CalibrationResult calibrate_references(const std::vector<TaskSpec>& suite,
                                              const CalibrationSettings& cs, uint64_t seed) {
    if (suite.empty()) throw ConfigError("calibrate: empty suite");
    if (cs.expert.run.frame_budget == 0)
        throw ConfigError("calibrate: expert frame budget must be positive");
    if (cs.random_episodes < 1) throw ConfigError("calibrate: random_episodes must be >= 1");
    CalibrationResult out;
    for (size_t i = 0; i < suite.size(); ++i) {
        const TaskSpec& task = suite[i];
        const double random_score =
            random_policy_return(task, cs.random_episodes, derive_seed(seed, "cal-random", i));
        ExpertResult er = train_expert({task}, cs.expert, derive_seed(seed, "cal-expert", i));
        const auto it = er.final_windowed.find(task.task_id);
        double reference = it == er.final_windowed.end() ? random_score : it->second;
        if (!(reference > random_score)) {
            out.table.add_warning("expert failed to beat random on " + task.task_id +
                                  " (expert " + std::to_string(reference) + ", random " +
                                  std::to_string(random_score) + "); reference forced to random+1");
            reference = random_score + 1.0;
        }
        out.table.set(task.task_id, random_score, reference);
        out.experts.push_back(std::move(er.teacher));
    }
    return out;
}

struct PbtTrainSettings {
    int population_size = 4;
    uint64_t interval_frames = 10000;  // frames per member between rounds
    uint64_t frame_budget = 0;         // total frames per member
    bool jitter_initial = true;        // diversify hypers at round zero
    std::vector<int> hidden = {64};
    HyperParams base_hypers;
    PbtSettings pbt;
    RunConfig run;  // schedule should be kind Pbt when teachers are used
};

struct PbtTrainResult {
    std::vector<PopulationMember> population;
    std::vector<PbtEvent> events;
    std::vector<std::vector<MetricRecord>> member_records;
    int best_member = 0;
};

// Population training: members advance one interval at a time; between
// intervals every member may exploit a random peer and explore its hypers.
inline PbtTrainResult pbt_train(const RunInputs& in, const PbtTrainSettings& ps, uint64_t seed) {
    if (ps.population_size < 2) throw ConfigError("pbt: population_size must be >= 2");
    if (ps.interval_frames == 0) throw ConfigError("pbt: interval_frames must be positive");
    if (!in.references) throw ConfigError("pbt: a reference table is required for scoring");
    std::vector<std::string> task_ids;
    for (const TaskSpec& t : in.suite) task_ids.push_back(t.task_id);

    Rng pbt_rng(derive_seed(seed, "pbt"));
    PbtTrainResult out;
    out.member_records.resize(ps.population_size);
    const NetSpec spec = net_spec_for(in.suite, ps.hidden);
    for (int k = 0; k < ps.population_size; ++k) {
        PopulationMember m;
        m.id = k;
        m.lineage = k;
        m.hypers = ps.base_hypers;
        if (ps.jitter_initial && k > 0) m.hypers = explore(m.hypers, pbt_rng, ps.pbt);
        m.net = net_init(spec, derive_seed(seed, "member-init", static_cast<uint64_t>(k)));
        m.opt = RmsProp::make(m.net, m.hypers.learning_rate);
        out.population.push_back(std::move(m));
    }

    for (uint64_t round = 1; ps.frame_budget > (round - 1) * ps.interval_frames; ++round) {
        const uint64_t target = std::min(ps.frame_budget, round * ps.interval_frames);
        for (PopulationMember& m : out.population) {
            LearnerState st;
            st.net = std::move(m.net);
            st.opt = std::move(m.opt);
            st.hypers = m.hypers;
            st.frames = m.frames;
            st.version = round;
            RunConfig cfg = ps.run;
            cfg.member_id = m.id;
            cfg.frame_budget = target;
            cfg.seed = derive_seed(derive_seed(seed, "member-run", static_cast<uint64_t>(m.id)),
                                   "round", round);
            RunResult r = run_member(std::move(st), in, cfg);
            m.net = std::move(r.state.net);
            m.opt = std::move(r.state.opt);
            m.advance_frames(r.state.frames);
            if (r.records.empty()) throw TrainingError("pbt: member produced no metric records");
            m.record_score(m.frames, r.records.back().mean_capped_score);
            auto& sink = out.member_records[static_cast<size_t>(m.id)];
            for (MetricRecord& rec : r.records) {
                if (!sink.empty() && rec.frames == sink.back().frames) continue;
                sink.push_back(std::move(rec));
            }
        }
        std::vector<PbtEvent> events = pbt_round(out.population, pbt_rng, ps.pbt, round);
        for (PbtEvent& e : events) out.events.push_back(std::move(e));
    }

    for (int k = 0; k < ps.population_size; ++k) {
        if (out.population[k].latest_score() >
            out.population[out.best_member].latest_score())
            out.best_member = k;
    }
    return out;
}

}  // namespace ksrl
