#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ksrl/common.hpp"
#include "ksrl/env.hpp"
#include "ksrl/hypers.hpp"
#include "ksrl/schedule.hpp"

namespace ksrl {

enum class ExperimentMode { Scratch, KickstartSingle, KickstartMulti, DistillOnly };

inline std::string to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::Scratch: return "scratch";
        case ExperimentMode::KickstartSingle: return "kickstart-single";
        case ExperimentMode::KickstartMulti: return "kickstart-multi";
        case ExperimentMode::DistillOnly: return "distill-only";
    }
    throw CallerError("unknown experiment mode");
}

inline ExperimentMode parse_experiment_mode(const std::string& s) {
    if (s == "scratch") return ExperimentMode::Scratch;
    if (s == "kickstart-single") return ExperimentMode::KickstartSingle;
    if (s == "kickstart-multi") return ExperimentMode::KickstartMulti;
    if (s == "distill-only") return ExperimentMode::DistillOnly;
    throw ConfigError("unknown mode '" + s + "'");
}

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::Scratch;
    uint64_t seed = 1;
    bool deterministic = true;
    std::string out;
    std::vector<std::string> suite_tasks = {"sparse-goal", "dense-forage", "tag-1", "tag-3"};
    std::vector<int> hidden = {64};
    uint64_t frame_budget = 100000;
    int unroll_length = 20;
    int batch_size = 8;
    int queue_capacity = 16;
    int actors_per_task = 4;
    uint64_t metrics_interval = 2000;
    uint64_t checkpoint_interval = 50000;
    uint64_t score_window = 50000;
    double gamma = 0.98;
    double value_weight = 0.5;
    HyperParams hypers;
    Schedule schedule;
    std::vector<std::string> teacher_paths;
    std::string references_path;
    int population_size = 4;
    uint64_t pbt_interval = 10000;
    bool pbt_jitter_initial = true;
    int random_episodes = 1000;

    bool operator==(const ExperimentConfig&) const = default;

    void validate() const {
        if (suite_tasks.empty()) throw ConfigError("config: suite.tasks must name >= 1 task");
        if (hidden.empty()) throw ConfigError("config: net.hidden must name >= 1 layer width");
        for (int h : hidden) {
            if (h < 1) throw ConfigError("config: net.hidden entries must be positive");
        }
        if (unroll_length < 1) throw ConfigError("config: run.unroll_length must be >= 1");
        if (batch_size < 1) throw ConfigError("config: run.batch_size must be >= 1");
        if (queue_capacity < 1) throw ConfigError("config: run.queue_capacity must be >= 1");
        if (actors_per_task < 1) throw ConfigError("config: run.actors_per_task must be >= 1");
        if (metrics_interval == 0) throw ConfigError("config: run.metrics_interval must be positive");
        if (checkpoint_interval == 0)
            throw ConfigError("config: run.checkpoint_interval must be positive");
        if (score_window == 0) throw ConfigError("config: run.score_window must be positive");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("config: run.gamma must be in [0, 1)");
        if (value_weight < 0.0) throw ConfigError("config: run.value_weight must be non-negative");
        if (population_size < 1) throw ConfigError("config: pbt.population_size must be >= 1");
        if (pbt_interval == 0) throw ConfigError("config: pbt.interval_frames must be positive");
        if (random_episodes < 1)
            throw ConfigError("config: calibrate.random_episodes must be >= 1");
        hypers.validate();
        schedule.validate();
        switch (mode) {
            case ExperimentMode::Scratch:
                if (!teacher_paths.empty())
                    throw ConfigError("config: scratch mode takes no teachers.paths");
                break;
            case ExperimentMode::KickstartSingle:
                if (teacher_paths.size() != 1)
                    throw ConfigError("config: kickstart-single needs exactly one teacher path");
                break;
            case ExperimentMode::KickstartMulti:
                if (teacher_paths.empty())
                    throw ConfigError("config: kickstart-multi needs teacher paths");
                break;
            case ExperimentMode::DistillOnly:
                if (teacher_paths.empty())
                    throw ConfigError("config: distill-only needs teacher paths");
                break;
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

inline uint64_t parse_u64(const std::string& s) {
    size_t pos = 0;
    const uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw ConfigError("trailing characters after integer '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s) {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw ConfigError("trailing characters after integer '" + s + "'");
    return v;
}

inline double parse_double(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("trailing characters after number '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("expected true or false, got '" + s + "'");
}

inline std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"mode", [](ExperimentConfig& c, const std::string& v) { c.mode = parse_experiment_mode(v); }},
        {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = detail::parse_u64(v); }},
        {"deterministic",
         [](ExperimentConfig& c, const std::string& v) { c.deterministic = detail::parse_bool(v); }},
        {"out", [](ExperimentConfig& c, const std::string& v) { c.out = v; }},
        {"suite.tasks",
         [](ExperimentConfig& c, const std::string& v) { c.suite_tasks = detail::split_list(v); }},
        {"net.hidden",
         [](ExperimentConfig& c, const std::string& v) {
             c.hidden.clear();
             for (const std::string& s : detail::split_list(v)) c.hidden.push_back(detail::parse_int(s));
         }},
        {"run.frame_budget",
         [](ExperimentConfig& c, const std::string& v) { c.frame_budget = detail::parse_u64(v); }},
        {"run.unroll_length",
         [](ExperimentConfig& c, const std::string& v) { c.unroll_length = detail::parse_int(v); }},
        {"run.batch_size",
         [](ExperimentConfig& c, const std::string& v) { c.batch_size = detail::parse_int(v); }},
        {"run.queue_capacity",
         [](ExperimentConfig& c, const std::string& v) { c.queue_capacity = detail::parse_int(v); }},
        {"run.actors_per_task",
         [](ExperimentConfig& c, const std::string& v) { c.actors_per_task = detail::parse_int(v); }},
        {"run.metrics_interval",
         [](ExperimentConfig& c, const std::string& v) { c.metrics_interval = detail::parse_u64(v); }},
        {"run.checkpoint_interval",
         [](ExperimentConfig& c, const std::string& v) {
             c.checkpoint_interval = detail::parse_u64(v);
         }},
        {"run.score_window",
         [](ExperimentConfig& c, const std::string& v) { c.score_window = detail::parse_u64(v); }},
        {"run.gamma",
         [](ExperimentConfig& c, const std::string& v) { c.gamma = detail::parse_double(v); }},
        {"run.value_weight",
         [](ExperimentConfig& c, const std::string& v) { c.value_weight = detail::parse_double(v); }},
        {"hypers.learning_rate",
         [](ExperimentConfig& c, const std::string& v) {
             c.hypers.learning_rate = detail::parse_double(v);
         }},
        {"hypers.entropy_cost",
         [](ExperimentConfig& c, const std::string& v) {
             c.hypers.entropy_cost = detail::parse_double(v);
         }},
        {"hypers.distill_global",
         [](ExperimentConfig& c, const std::string& v) {
             c.hypers.distill_global = detail::parse_double(v);
         }},
        {"hypers.distill_per_teacher",
         [](ExperimentConfig& c, const std::string& v) {
             c.hypers.distill_per_teacher.clear();
             for (const std::string& s : detail::split_list(v))
                 c.hypers.distill_per_teacher.push_back(detail::parse_double(s));
         }},
        {"schedule.kind",
         [](ExperimentConfig& c, const std::string& v) { c.schedule.kind = parse_schedule_kind(v); }},
        {"schedule.constant_value",
         [](ExperimentConfig& c, const std::string& v) {
             c.schedule.constant_value = detail::parse_double(v);
         }},
        {"schedule.start_value",
         [](ExperimentConfig& c, const std::string& v) {
             c.schedule.start_value = detail::parse_double(v);
         }},
        {"schedule.end_frame",
         [](ExperimentConfig& c, const std::string& v) {
             c.schedule.end_frame = detail::parse_u64(v);
         }},
        {"schedule.per_teacher",
         [](ExperimentConfig& c, const std::string& v) {
             c.schedule.per_teacher = detail::parse_bool(v);
         }},
        {"teachers.paths",
         [](ExperimentConfig& c, const std::string& v) { c.teacher_paths = detail::split_list(v); }},
        {"references.path",
         [](ExperimentConfig& c, const std::string& v) { c.references_path = v; }},
        {"pbt.population_size",
         [](ExperimentConfig& c, const std::string& v) { c.population_size = detail::parse_int(v); }},
        {"pbt.interval_frames",
         [](ExperimentConfig& c, const std::string& v) { c.pbt_interval = detail::parse_u64(v); }},
        {"pbt.jitter_initial",
         [](ExperimentConfig& c, const std::string& v) {
             c.pbt_jitter_initial = detail::parse_bool(v);
         }},
        {"calibrate.random_episodes",
         [](ExperimentConfig& c, const std::string& v) { c.random_episodes = detail::parse_int(v); }},
    };

    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        const std::string at = "line " + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw ConfigError(at + "expected 'key = value'");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError(at + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(at + "duplicate key '" + key + "'");
        try {
            it->second(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(at + key + ": " + e.what());
        } catch (const std::exception& e) {
            throw ConfigError(at + key + ": invalid value '" + value + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline std::string serialize_experiment_config(const ExperimentConfig& c) {
    using detail::format_double;
    std::ostringstream out;
    out << "mode = " << to_string(c.mode) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
    out << "out = " << c.out << "\n";
    out << "suite.tasks = " << detail::join_list(c.suite_tasks) << "\n";
    {
        std::vector<std::string> h;
        for (int x : c.hidden) h.push_back(std::to_string(x));
        out << "net.hidden = " << detail::join_list(h) << "\n";
    }
    out << "run.frame_budget = " << c.frame_budget << "\n";
    out << "run.unroll_length = " << c.unroll_length << "\n";
    out << "run.batch_size = " << c.batch_size << "\n";
    out << "run.queue_capacity = " << c.queue_capacity << "\n";
    out << "run.actors_per_task = " << c.actors_per_task << "\n";
    out << "run.metrics_interval = " << c.metrics_interval << "\n";
    out << "run.checkpoint_interval = " << c.checkpoint_interval << "\n";
    out << "run.score_window = " << c.score_window << "\n";
    out << "run.gamma = " << format_double(c.gamma) << "\n";
    out << "run.value_weight = " << format_double(c.value_weight) << "\n";
    out << "hypers.learning_rate = " << format_double(c.hypers.learning_rate) << "\n";
    out << "hypers.entropy_cost = " << format_double(c.hypers.entropy_cost) << "\n";
    out << "hypers.distill_global = " << format_double(c.hypers.distill_global) << "\n";
    {
        std::vector<std::string> r;
        for (double x : c.hypers.distill_per_teacher) r.push_back(format_double(x));
        out << "hypers.distill_per_teacher = " << detail::join_list(r) << "\n";
    }
    out << "schedule.kind = " << to_string(c.schedule.kind) << "\n";
    out << "schedule.constant_value = " << format_double(c.schedule.constant_value) << "\n";
    out << "schedule.start_value = " << format_double(c.schedule.start_value) << "\n";
    out << "schedule.end_frame = " << c.schedule.end_frame << "\n";
    out << "schedule.per_teacher = " << (c.schedule.per_teacher ? "true" : "false") << "\n";
    out << "teachers.paths = " << detail::join_list(c.teacher_paths) << "\n";
    out << "references.path = " << c.references_path << "\n";
    out << "pbt.population_size = " << c.population_size << "\n";
    out << "pbt.interval_frames = " << c.pbt_interval << "\n";
    out << "pbt.jitter_initial = " << (c.pbt_jitter_initial ? "true" : "false") << "\n";
    out << "calibrate.random_episodes = " << c.random_episodes << "\n";
    return out.str();
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    try {
        return parse_experiment_config(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& c) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    f << serialize_experiment_config(c);
}

// Resolves task ids against the shipped catalog, preserving request order.
inline std::vector<TaskSpec> suite_from_ids(const std::vector<std::string>& ids) {
    const std::vector<TaskSpec> catalog = default_suite();
    std::vector<TaskSpec> out;
    for (const std::string& id : ids) {
        bool found = false;
        for (const TaskSpec& t : catalog) {
            if (t.task_id == id) {
                out.push_back(t);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("unknown task '" + id + "'");
    }
    return make_suite(std::move(out));
}

}  // namespace ksrl
