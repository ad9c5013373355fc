#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ksrl/actor_learner.hpp"
#include "ksrl/config.hpp"
#include "ksrl/experiment.hpp"
#include "ksrl/report.hpp"

namespace ksrl {

namespace detail {

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline uint64_t config_hash(const ExperimentConfig& c) {
    return detail::fnv1a64(serialize_experiment_config(c));
}

// An existing output directory is only replaced under an explicit overwrite.
inline std::filesystem::path prepare_out_dir(const std::filesystem::path& dir, bool overwrite) {
    namespace fs = std::filesystem;
    if (dir.empty()) throw ConfigError("output directory not set (config 'out' or --out)");
    if (fs::exists(dir)) {
        if (!overwrite)
            throw ConfigError("output directory exists: " + dir.string() +
                              " (pass --overwrite to replace it)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
    return dir;
}

inline RunConfig run_config_from(const ExperimentConfig& c) {
    RunConfig rc;
    rc.unroll_length = c.unroll_length;
    rc.batch_size = c.batch_size;
    rc.queue_capacity = c.queue_capacity;
    rc.actors_per_task = c.actors_per_task;
    rc.frame_budget = c.frame_budget;
    rc.metrics_interval = c.metrics_interval;
    rc.checkpoint_interval = c.checkpoint_interval;
    rc.score_window = c.score_window;
    rc.deterministic = c.deterministic;
    rc.seed = derive_seed(c.seed, "run");
    rc.kick.gamma = c.gamma;
    rc.kick.value_weight = c.value_weight;
    rc.kick.mode =
        c.mode == ExperimentMode::DistillOnly ? LossMode::DistillOnly : LossMode::Full;
    rc.schedule = c.schedule;
    rc.validate();
    return rc;
}

// Owns loaded teachers and references so the pointers in inputs() stay valid.
struct LoadedInputs {
    std::vector<TaskSpec> suite;
    std::vector<Teacher> teachers;
    std::optional<ReferenceTable> references;
    TeacherRouter router;

    RunInputs inputs() const {
        RunInputs in;
        in.suite = suite;
        if (!teachers.empty()) {
            in.teachers = &teachers;
            in.router = router;
        }
        if (references) in.references = &*references;
        return in;
    }
};

inline LoadedInputs load_inputs(const ExperimentConfig& c) {
    LoadedInputs li;
    li.suite = suite_from_ids(c.suite_tasks);
    for (const std::string& p : c.teacher_paths) li.teachers.push_back(load_teacher(p));
    if (!li.teachers.empty()) {
        std::vector<std::string> ids;
        for (const TaskSpec& t : li.suite) ids.push_back(t.task_id);
        li.router = route_by_training(ids, li.teachers);
    }
    if (!c.references_path.empty()) li.references = load_reference_table(c.references_path);
    return li;
}

// Per-teacher weights default to 1 when a per-teacher schedule needs them.
inline HyperParams effective_hypers(const ExperimentConfig& c, size_t num_teachers) {
    HyperParams h = c.hypers;
    const bool per = c.schedule.per_teacher || c.schedule.kind == ScheduleKind::Pbt;
    if (per && num_teachers > 0) {
        if (h.distill_per_teacher.empty()) h.distill_per_teacher.assign(num_teachers, 1.0);
        if (h.distill_per_teacher.size() != num_teachers)
            throw ConfigError("config: hypers.distill_per_teacher has " +
                              std::to_string(h.distill_per_teacher.size()) + " entries for " +
                              std::to_string(num_teachers) + " teachers");
    }
    return h;
}

inline void write_metrics_file(const std::filesystem::path& path,
                               const std::vector<MetricRecord>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    for (const MetricRecord& r : records) f << to_json(r).dump() << "\n";
}

inline constexpr const char* kSummaryHeader = "task,frames,windowed_return,capped_score";

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<TaskSpec>& suite,
                              const std::map<std::string, double>& final_windowed,
                              const ReferenceTable* refs, uint64_t frames) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    f.precision(17);
    f << kSummaryHeader << "\n";
    double sum = 0.0;
    for (const TaskSpec& t : suite) {
        const auto it = final_windowed.find(t.task_id);
        f << t.task_id << "," << frames << ",";
        if (it != final_windowed.end())
            f << it->second;
        else
            f << "-";
        f << ",";
        if (refs) {
            double capped = 0.0;
            if (it != final_windowed.end() && refs->has(t.task_id))
                capped = capped_normalised(it->second, *refs, t.task_id);
            sum += capped;
            f << capped;
        } else {
            f << "-";
        }
        f << "\n";
    }
    if (refs) f << "suite," << frames << ",-," << sum / static_cast<double>(suite.size()) << "\n";
}

// scratch, kickstart, and distill subcommands share this path; the config's
// mode picks the loss and teacher wiring.
inline RunResult cmd_single_run(const ExperimentConfig& cfg, bool overwrite) {
    cfg.validate();
    const std::filesystem::path dir = prepare_out_dir(cfg.out, overwrite);
    const LoadedInputs li = load_inputs(cfg);
    const HyperParams hypers = effective_hypers(cfg, li.teachers.size());
    RunConfig rc = run_config_from(cfg);
    rc.checkpoint_dir = dir;
    LearnerState st =
        make_learner(net_spec_for(li.suite, cfg.hidden), hypers, derive_seed(cfg.seed, "init"));
    RunResult r = run_member(std::move(st), li.inputs(), rc);
    save_experiment_config(dir / "config.cfg", cfg);
    write_metrics_file(dir / "metrics.jsonl", r.records);
    save_checkpoint(dir / "final.ksrl", r.state.net, r.state.hypers);
    write_summary_csv(dir / "summary.csv", li.suite, r.final_windowed,
                      li.references ? &*li.references : nullptr, r.state.frames);
    return r;
}

inline PbtTrainResult cmd_pbt(const ExperimentConfig& cfg, bool overwrite) {
    cfg.validate();
    if (!cfg.teacher_paths.empty() && cfg.schedule.kind != ScheduleKind::Pbt)
        throw ConfigError("pbt: schedule.kind must be 'pbt' so evolved weights take effect");
    if (cfg.references_path.empty())
        throw ConfigError("pbt: references.path is required for population scoring");
    const std::filesystem::path dir = prepare_out_dir(cfg.out, overwrite);
    const LoadedInputs li = load_inputs(cfg);
    PbtTrainSettings ps;
    ps.population_size = cfg.population_size;
    ps.interval_frames = cfg.pbt_interval;
    ps.frame_budget = cfg.frame_budget;
    ps.jitter_initial = cfg.pbt_jitter_initial;
    ps.hidden = cfg.hidden;
    ps.base_hypers = effective_hypers(cfg, li.teachers.size());
    ps.run = run_config_from(cfg);
    PbtTrainResult r = pbt_train(li.inputs(), ps, cfg.seed);

    save_experiment_config(dir / "config.cfg", cfg);
    {
        std::ofstream pf(dir / "population.jsonl", std::ios::trunc);
        if (!pf) throw ConfigError("cannot open for writing: " + (dir / "population.jsonl").string());
        for (const PbtEvent& e : r.events) pf << to_json(e).dump() << "\n";
    }
    for (size_t k = 0; k < r.member_records.size(); ++k)
        write_metrics_file(dir / ("member_" + std::to_string(k) + ".jsonl"), r.member_records[k]);
    const auto& best_records = r.member_records[static_cast<size_t>(r.best_member)];
    write_metrics_file(dir / "metrics.jsonl", best_records);
    const PopulationMember& best = r.population[static_cast<size_t>(r.best_member)];
    save_checkpoint(dir / "best.ksrl", best.net, best.hypers);
    write_summary_csv(dir / "summary.csv", li.suite,
                      best_records.empty() ? std::map<std::string, double>{}
                                           : best_records.back().windowed_return,
                      li.references ? &*li.references : nullptr, best.frames);
    return r;
}

inline ExpertResult cmd_train_expert(const ExperimentConfig& cfg, bool overwrite) {
    cfg.validate();
    if (cfg.mode != ExperimentMode::Scratch)
        throw ConfigError("train-expert: mode must be 'scratch' (experts learn from reward alone)");
    const std::filesystem::path dir = prepare_out_dir(cfg.out, overwrite);
    ExpertSettings es;
    es.hidden = cfg.hidden;
    es.hypers = cfg.hypers;
    es.run = run_config_from(cfg);
    es.config_hash = config_hash(cfg);
    ExpertResult r = train_expert(suite_from_ids(cfg.suite_tasks), es, cfg.seed);
    save_experiment_config(dir / "config.cfg", cfg);
    write_metrics_file(dir / "metrics.jsonl", r.records);
    save_teacher(dir / "expert.kstc", r.teacher);
    return r;
}

inline CalibrationResult cmd_calibrate(const ExperimentConfig& cfg, bool overwrite) {
    cfg.validate();
    if (cfg.mode != ExperimentMode::Scratch)
        throw ConfigError("calibrate: mode must be 'scratch'");
    const std::filesystem::path dir = prepare_out_dir(cfg.out, overwrite);
    const std::vector<TaskSpec> suite = suite_from_ids(cfg.suite_tasks);
    CalibrationSettings cs;
    cs.expert.hidden = cfg.hidden;
    cs.expert.hypers = cfg.hypers;
    cs.expert.run = run_config_from(cfg);
    cs.expert.config_hash = config_hash(cfg);
    cs.random_episodes = cfg.random_episodes;
    CalibrationResult r = calibrate_references(suite, cs, cfg.seed);
    save_experiment_config(dir / "config.cfg", cfg);
    save_reference_table(dir / "references.txt", r.table);
    for (size_t i = 0; i < suite.size(); ++i)
        save_teacher(dir / ("expert_" + suite[i].task_id + ".kstc"), r.experts[i]);
    return r;
}

inline std::string cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                              ReportThresholds thr) {
    if (run_dirs.empty()) throw ConfigError("report: at least one run directory is required");
    std::vector<RunSeries> runs;
    for (const std::filesystem::path& p : run_dirs) runs.push_back(load_run_series(p));
    return render_report(runs, std::move(thr));
}

namespace detail {

inline void check_metric_records(const std::filesystem::path& file,
                                 const std::vector<MetricRecord>& records,
                                 const std::vector<TaskSpec>* suite) {
    uint64_t prev = 0;
    for (size_t i = 0; i < records.size(); ++i) {
        const MetricRecord& r = records[i];
        if (i > 0 && r.frames <= prev)
            throw ConfigError(file.string() + ": frames not strictly increasing");
        prev = r.frames;
        if (!std::isfinite(r.loss.total))
            throw ConfigError(file.string() + ": non-finite loss total");
        if (suite) {
            for (const auto& [task, ret] : r.windowed_return) {
                (void)ret;
                bool known = false;
                for (const TaskSpec& t : *suite) known = known || t.task_id == task;
                if (!known)
                    throw ConfigError(file.string() + ": windowed return for unknown task " + task);
            }
        }
    }
}

}  // namespace detail

// Validates every recognised artifact in a run directory; returns how many
// files were checked.
inline int cmd_selfcheck(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("selfcheck: no such directory: " + dir.string());
    int checked = 0;

    std::optional<ExperimentConfig> cfg;
    std::vector<TaskSpec> suite;
    if (fs::exists(dir / "config.cfg")) {
        cfg = load_experiment_config(dir / "config.cfg");
        suite = suite_from_ids(cfg->suite_tasks);
        ++checked;
    }

    std::vector<fs::path> metric_files;
    std::vector<fs::path> checkpoint_files;
    std::vector<fs::path> teacher_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name == "metrics.jsonl" || (name.rfind("member_", 0) == 0 && name.ends_with(".jsonl")))
            metric_files.push_back(entry.path());
        else if (name.ends_with(".ksrl"))
            checkpoint_files.push_back(entry.path());
        else if (name.ends_with(".kstc"))
            teacher_files.push_back(entry.path());
    }

    for (const fs::path& file : metric_files) {
        detail::check_metric_records(file, load_metrics_file(file), cfg ? &suite : nullptr);
        ++checked;
    }
    for (const fs::path& file : checkpoint_files) {
        const CheckpointData data = load_checkpoint(file);
        data.hypers.validate();
        ++checked;
    }
    for (const fs::path& file : teacher_files) {
        load_teacher(file);
        ++checked;
    }
    if (fs::exists(dir / "references.txt")) {
        load_reference_table(dir / "references.txt");
        ++checked;
    }
    if (fs::exists(dir / "population.jsonl")) {
        const fs::path file = dir / "population.jsonl";
        std::ifstream f(file);
        std::string line;
        size_t line_no = 0;
        while (std::getline(f, line)) {
            ++line_no;
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("round") || !j.contains("member_id") ||
                !j.contains("action") || !j.contains("hypers"))
                throw ConfigError(file.string() + ":" + std::to_string(line_no) +
                                  ": malformed population event");
        }
        ++checked;
    }
    if (fs::exists(dir / "summary.csv")) {
        const fs::path file = dir / "summary.csv";
        std::ifstream f(file);
        std::string line;
        if (!std::getline(f, line) || line != kSummaryHeader)
            throw ConfigError(file.string() + ": bad header");
        size_t line_no = 1;
        while (std::getline(f, line)) {
            ++line_no;
            if (line.empty()) continue;
            const size_t commas = static_cast<size_t>(std::count(line.begin(), line.end(), ','));
            if (commas != 3)
                throw ConfigError(file.string() + ":" + std::to_string(line_no) +
                                  ": expected 4 columns");
        }
        ++checked;
    }

    if (checked == 0) throw ConfigError("selfcheck: no artifacts found in " + dir.string());
    return checked;
}

}  // namespace ksrl
