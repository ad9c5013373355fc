#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ksrl/common.hpp"
#include "ksrl/metrics.hpp"

namespace ksrl {

// One run's learning curve: suite score sampled over frames.
struct RunSeries {
    std::string name;
    std::vector<std::pair<uint64_t, double>> points;  // ordered by frames
};

inline RunSeries series_from_records(std::string name, const std::vector<MetricRecord>& records) {
    RunSeries s;
    s.name = std::move(name);
    uint64_t prev = 0;
    for (size_t i = 0; i < records.size(); ++i) {
        if (i > 0 && records[i].frames < prev)
            throw ConfigError("run " + s.name + ": metric frames not ordered");
        prev = records[i].frames;
        s.points.emplace_back(records[i].frames, records[i].mean_capped_score);
    }
    return s;
}

inline RunSeries load_run_series(const std::filesystem::path& run_dir) {
    const std::filesystem::path file = run_dir / "metrics.jsonl";
    if (!std::filesystem::exists(file))
        throw ConfigError("missing metrics file: " + file.string());
    return series_from_records(run_dir.filename().string(), load_metrics_file(file));
}

inline std::optional<double> score_at_frames(const RunSeries& s, uint64_t frames) {
    std::optional<double> out;
    for (const auto& [f, score] : s.points) {
        if (f > frames) break;
        out = score;
    }
    return out;
}

inline std::optional<uint64_t> frames_to_reach(const RunSeries& s, double score) {
    return frames_to_score(s.points, score);
}

struct ReportThresholds {
    std::vector<uint64_t> frames;
    std::vector<double> scores;
};

namespace detail {

inline std::string format_score(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string improvement_cell(std::optional<double> baseline, std::optional<double> last) {
    if (!baseline || !last) return "-";
    if (*last == *baseline) return "+0.0%";
    if (*baseline == 0.0) return "-";
    const double pct = 100.0 * (*last - *baseline) / std::abs(*baseline);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.1f%%", pct);
    return buf;
}

inline std::string speedup_cell(std::optional<uint64_t> baseline, std::optional<uint64_t> last) {
    if (!baseline || !last) return "-";
    if (*baseline == *last) return "1.00x";
    if (*last == 0) return "-";
    const double ratio = static_cast<double>(*baseline) / static_cast<double>(*last);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2fx", ratio);
    return buf;
}

}  // namespace detail

// Two CSV tables in one text blob: scores sampled at frame marks, then frames
// needed to reach score marks. With two or more runs a derived row compares
// the last run against the first.
inline std::string render_report(const std::vector<RunSeries>& runs, ReportThresholds thr) {
    if (runs.empty()) throw ConfigError("report: no runs");
    const RunSeries& baseline = runs.front();
    if (thr.frames.empty() && !baseline.points.empty())
        thr.frames.push_back(baseline.points.back().first);
    if (thr.scores.empty() && !baseline.points.empty())
        thr.scores.push_back(0.9 * baseline.points.back().second);
    std::ostringstream out;

    out << "# score at frames\nrun";
    for (uint64_t f : thr.frames) out << "," << f;
    out << "\n";
    for (const RunSeries& s : runs) {
        out << s.name;
        for (uint64_t f : thr.frames) {
            const auto v = score_at_frames(s, f);
            out << "," << (v ? detail::format_score(*v) : "-");
        }
        out << "\n";
    }
    if (runs.size() >= 2) {
        out << "improvement";
        for (uint64_t f : thr.frames)
            out << ","
                << detail::improvement_cell(score_at_frames(baseline, f),
                                            score_at_frames(runs.back(), f));
        out << "\n";
    }

    out << "\n# frames to reach score\nrun";
    for (double s : thr.scores) out << "," << detail::format_score(s);
    out << "\n";
    for (const RunSeries& s : runs) {
        out << s.name;
        for (double t : thr.scores) {
            const auto v = frames_to_reach(s, t);
            if (v)
                out << "," << *v;
            else
                out << ",-";
        }
        out << "\n";
    }
    if (runs.size() >= 2) {
        out << "speedup";
        for (double t : thr.scores)
            out << ","
                << detail::speedup_cell(frames_to_reach(baseline, t),
                                        frames_to_reach(runs.back(), t));
        out << "\n";
    }
    return out.str();
}

}  // namespace ksrl
