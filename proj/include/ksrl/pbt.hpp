#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ksrl/common.hpp"
#include "ksrl/hypers.hpp"
#include "ksrl/net.hpp"
#include "ksrl/rng.hpp"

namespace ksrl {

struct PopulationMember {
    int id = 0;
    int lineage = 0;  // id of the member whose weights this net descends from
    PolicyValueNet net;
    RmsProp opt;
    HyperParams hypers;
    uint64_t frames = 0;
    std::vector<std::pair<uint64_t, double>> score_history;  // (frames, windowed score)

    bool has_score() const { return !score_history.empty(); }

    double latest_score() const {
        if (score_history.empty()) throw CallerError("member " + std::to_string(id) + ": no score yet");
        return score_history.back().second;
    }

    void record_score(uint64_t at_frames, double score) {
        if (!score_history.empty() && at_frames < score_history.back().first)
            throw CallerError("member " + std::to_string(id) + ": score frames not monotone");
        score_history.emplace_back(at_frames, score);
    }

    void advance_frames(uint64_t to) {
        if (to < frames) throw CallerError("member " + std::to_string(id) + ": frames not monotone");
        frames = to;
    }
};

struct PbtSettings {
    double exploit_margin = 0.10;  // relative score margin before copying
    double explore_prob = 1.0 / 3.0;
    double factor_up = 1.2;
    double factor_down = 0.8;
    double lr_min = 1e-6, lr_max = 1.0;
    double beta_min = 0.0, beta_max = 0.1;
    double alpha_min = 0.0, alpha_max = 4.0;
    double rho_min = 0.0, rho_max = 4.0;
};

struct PbtEvent {
    uint64_t round = 0;
    int member_id = 0;
    std::string action;  // "copied-from" or "explored"
    int peer_id = -1;
    HyperParams hypers;  // values after the action
};

// Copy everything or nothing: a peer that is better by the relative margin
// donates net, optimizer state, and hypers in one piece.
inline bool exploit(PopulationMember& member, const PopulationMember& peer,
                    const PbtSettings& settings) {
    const double mine = member.latest_score();
    const double theirs = peer.latest_score();
    if (theirs - mine <= settings.exploit_margin * std::abs(mine)) return false;
    member.net = peer.net;
    member.opt = peer.opt;
    member.hypers = peer.hypers;
    member.lineage = peer.lineage;
    return true;
}

// Independent multiplicative jitter per hyperparameter; draw order is fixed
// (lr, beta, alpha, rho_0..rho_n) so runs replay bit-identically.
inline HyperParams explore(const HyperParams& hypers, Rng& rng, const PbtSettings& settings) {
    auto jitter = [&](double value, double lo, double hi) {
        if (rng.bernoulli(settings.explore_prob)) {
            value *= rng.bernoulli(0.5) ? settings.factor_up : settings.factor_down;
        }
        return std::clamp(value, lo, hi);
    };
    HyperParams out = hypers;
    out.learning_rate = jitter(out.learning_rate, settings.lr_min, settings.lr_max);
    out.entropy_cost = jitter(out.entropy_cost, settings.beta_min, settings.beta_max);
    out.distill_global = jitter(out.distill_global, settings.alpha_min, settings.alpha_max);
    for (double& rho : out.distill_per_teacher) rho = jitter(rho, settings.rho_min, settings.rho_max);
    return out;
}

// One synchronisation-point pass: every member, in id order, measures itself
// against one uniformly drawn other member, then always explores.
inline std::vector<PbtEvent> pbt_round(std::vector<PopulationMember>& population, Rng& rng,
                                       const PbtSettings& settings, uint64_t round) {
    if (population.size() < 2) throw ConfigError("pbt: population size must be >= 2");
    std::vector<PbtEvent> events;
    for (size_t i = 0; i < population.size(); ++i) {
        int j = rng.uniform_int(static_cast<int>(population.size()) - 1);
        if (j >= static_cast<int>(i)) ++j;
        if (exploit(population[i], population[j], settings)) {
            events.push_back({round, population[i].id, "copied-from", population[j].id,
                              population[i].hypers});
        }
        population[i].hypers = explore(population[i].hypers, rng, settings);
        population[i].opt.learning_rate = population[i].hypers.learning_rate;
        events.push_back({round, population[i].id, "explored", -1, population[i].hypers});
    }
    return events;
}

}  // namespace ksrl
