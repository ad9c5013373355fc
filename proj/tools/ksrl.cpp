#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ksrl/driver.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<uint64_t> seed;
    bool deterministic = false;
    bool overwrite = false;
    std::string out;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config file")->required();
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_flag("--deterministic", flags.deterministic,
                  "force the sequential bit-reproducible run mode");
    cmd->add_flag("--overwrite", flags.overwrite, "replace an existing output directory");
    cmd->add_option("--out", flags.out, "override the output directory");
}

ksrl::ExperimentConfig resolve_config(const CommonFlags& flags) {
    ksrl::ExperimentConfig cfg = ksrl::load_experiment_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.deterministic) cfg.deterministic = true;
    if (!flags.out.empty()) cfg.out = flags.out;
    return cfg;
}

void require_mode(const ksrl::ExperimentConfig& cfg,
                  const std::vector<ksrl::ExperimentMode>& allowed, const std::string& command) {
    for (ksrl::ExperimentMode m : allowed) {
        if (cfg.mode == m) return;
    }
    std::string names;
    for (size_t i = 0; i < allowed.size(); ++i)
        names += (i ? " or " : "") + ksrl::to_string(allowed[i]);
    throw ksrl::ConfigError(command + ": config mode must be " + names + ", got " +
                            ksrl::to_string(cfg.mode));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kickstarting experiments: train, evolve, and report"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    CLI::App* calibrate = app.add_subcommand("calibrate", "train per-task experts and a reference table");
    CLI::App* train_expert = app.add_subcommand("train-expert", "train one teacher and save it");
    CLI::App* scratch = app.add_subcommand("scratch", "train a student from reward alone");
    CLI::App* kickstart = app.add_subcommand("kickstart", "train a student against frozen teachers");
    CLI::App* distill = app.add_subcommand("distill", "match teachers without reward");
    CLI::App* pbt = app.add_subcommand("pbt", "population training with evolved distillation weights");
    for (CLI::App* cmd : {calibrate, train_expert, scratch, kickstart, distill, pbt})
        add_common_flags(cmd, run_flags);

    std::vector<std::string> report_dirs;
    std::vector<uint64_t> report_frames;
    std::vector<double> report_scores;
    std::string report_out;
    CLI::App* report = app.add_subcommand("report", "tabulate scores and crossing frames as CSV");
    report->add_option("dirs", report_dirs, "run directories, baseline first")->required();
    report->add_option("--frames", report_frames, "frame marks for the score table");
    report->add_option("--scores", report_scores, "score marks for the crossing table");
    report->add_option("--out", report_out, "also write report.csv under this directory");

    std::string selfcheck_dir;
    CLI::App* selfcheck = app.add_subcommand("selfcheck", "validate the artifacts in a run directory");
    selfcheck->add_option("dir", selfcheck_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*scratch) {
            const ksrl::ExperimentConfig cfg = resolve_config(run_flags);
            require_mode(cfg, {ksrl::ExperimentMode::Scratch}, "scratch");
            const ksrl::RunResult r = ksrl::cmd_single_run(cfg, run_flags.overwrite);
            std::printf("scratch: %llu frames, %llu learner steps -> %s\n",
                        static_cast<unsigned long long>(r.state.frames),
                        static_cast<unsigned long long>(r.learner_steps), cfg.out.c_str());
        } else if (*kickstart) {
            const ksrl::ExperimentConfig cfg = resolve_config(run_flags);
            require_mode(cfg,
                         {ksrl::ExperimentMode::KickstartSingle, ksrl::ExperimentMode::KickstartMulti},
                         "kickstart");
            const ksrl::RunResult r = ksrl::cmd_single_run(cfg, run_flags.overwrite);
            std::printf("kickstart: %llu frames, %llu learner steps -> %s\n",
                        static_cast<unsigned long long>(r.state.frames),
                        static_cast<unsigned long long>(r.learner_steps), cfg.out.c_str());
        } else if (*distill) {
            const ksrl::ExperimentConfig cfg = resolve_config(run_flags);
            require_mode(cfg, {ksrl::ExperimentMode::DistillOnly}, "distill");
            const ksrl::RunResult r = ksrl::cmd_single_run(cfg, run_flags.overwrite);
            std::printf("distill: %llu frames, %llu learner steps -> %s\n",
                        static_cast<unsigned long long>(r.state.frames),
                        static_cast<unsigned long long>(r.learner_steps), cfg.out.c_str());
        } else if (*pbt) {
            const ksrl::ExperimentConfig cfg = resolve_config(run_flags);
            const ksrl::PbtTrainResult r = ksrl::cmd_pbt(cfg, run_flags.overwrite);
            std::printf("pbt: best member %d, score %.3f -> %s\n", r.best_member,
                        r.population[static_cast<size_t>(r.best_member)].latest_score(),
                        cfg.out.c_str());
        } else if (*train_expert) {
            const ksrl::ExperimentConfig cfg = resolve_config(run_flags);
            const ksrl::ExpertResult r = ksrl::cmd_train_expert(cfg, run_flags.overwrite);
            std::printf("train-expert: %llu frames -> %s\n",
                        static_cast<unsigned long long>(r.teacher.provenance().frames_trained),
                        cfg.out.c_str());
        } else if (*calibrate) {
            const ksrl::ExperimentConfig cfg = resolve_config(run_flags);
            const ksrl::CalibrationResult r = ksrl::cmd_calibrate(cfg, run_flags.overwrite);
            std::printf("calibrate: %zu tasks, %zu warnings -> %s\n", r.table.rows().size(),
                        r.table.warnings().size(), cfg.out.c_str());
        } else if (*report) {
            ksrl::ReportThresholds thr;
            thr.frames = report_frames;
            thr.scores = report_scores;
            std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
            const std::string csv = ksrl::cmd_report(dirs, thr);
            std::fputs(csv.c_str(), stdout);
            if (!report_out.empty()) {
                std::filesystem::create_directories(report_out);
                ksrl::write_file(std::filesystem::path(report_out) / "report.csv", csv);
            }
        } else if (*selfcheck) {
            const int checked = ksrl::cmd_selfcheck(selfcheck_dir);
            std::printf("selfcheck: OK (%d files)\n", checked);
        }
    } catch (const ksrl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
