#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ksrl/common.hpp"
#include "ksrl/hypers.hpp"
#include "ksrl/losses.hpp"
#include "ksrl/pbt.hpp"

namespace ksrl {

// Episode returns stamped at completion frame; queries average the trailing
// window_size frames. A task whose window has emptied falls back to the mean
// of the last window that held any episode.
class ScoreWindow {
public:
    explicit ScoreWindow(uint64_t window_size) : window_(window_size) {
        if (window_size == 0) throw ConfigError("score window size must be positive");
    }

    void record(const std::string& task_id, uint64_t frames, double episode_return) {
        auto& entries = per_task_[task_id];
        if (!entries.empty() && frames < entries.back().frames)
            throw CallerError("score window: frame stamps not monotone for " + task_id);
        entries.push_back({frames, episode_return});
        while (!entries.empty() && entries.front().frames + window_ < frames) entries.pop_front();
    }

    // Mean return over episodes completed in (now - window, now]; falls back
    // to the last non-empty window, and is empty only if no episode ever.
    std::optional<double> windowed_return(const std::string& task_id, uint64_t now) const {
        const auto it = per_task_.find(task_id);
        if (it == per_task_.end() || it->second.empty()) return std::nullopt;
        const auto& entries = it->second;
        double sum = 0.0;
        size_t n = 0;
        for (const auto& e : entries) {
            if (e.frames + window_ >= now && e.frames <= now) {
                sum += e.ret;
                ++n;
            }
        }
        if (n > 0) return sum / static_cast<double>(n);
        // last known window: anchor at the newest recorded episode
        const uint64_t anchor = entries.back().frames;
        for (const auto& e : entries) {
            if (e.frames + window_ >= anchor) {
                sum += e.ret;
                ++n;
            }
        }
        return sum / static_cast<double>(n);
    }

    uint64_t window_size() const { return window_; }

private:
    struct Entry {
        uint64_t frames;
        double ret;
    };
    uint64_t window_;
    std::map<std::string, std::deque<Entry>> per_task_;
};

struct TaskReference {
    double random_score = 0.0;
    double reference_score = 0.0;
};

inline bool operator==(const TaskReference& a, const TaskReference& b) {
    return a.random_score == b.random_score && a.reference_score == b.reference_score;
}

class ReferenceTable {
public:
    void set(const std::string& task_id, double random_score, double reference_score) {
        if (!(reference_score > random_score))
            throw ConfigError("reference table: reference must exceed random for " + task_id);
        rows_[task_id] = {random_score, reference_score};
    }

    const TaskReference& at(const std::string& task_id) const {
        const auto it = rows_.find(task_id);
        if (it == rows_.end())
            throw ConfigError("reference table: no entry for task " + task_id);
        return it->second;
    }

    bool has(const std::string& task_id) const { return rows_.count(task_id) > 0; }
    size_t size() const { return rows_.size(); }
    const std::map<std::string, TaskReference>& rows() const { return rows_; }

    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }
    const std::vector<std::string>& warnings() const { return warnings_; }

    bool operator==(const ReferenceTable& other) const { return rows_ == other.rows_; }

private:
    std::map<std::string, TaskReference> rows_;
    std::vector<std::string> warnings_;
};

inline double capped_normalised(double task_return, const ReferenceTable& refs,
                                const std::string& task_id) {
    const TaskReference& r = refs.at(task_id);
    const double score = 100.0 * (task_return - r.random_score) / (r.reference_score - r.random_score);
    return std::min(score, 100.0);
}

// Unweighted mean of capped per-task scores over the given suite order.
inline double suite_score(const ScoreWindow& window, const ReferenceTable& refs,
                          const std::vector<std::string>& task_ids, uint64_t now) {
    if (task_ids.empty()) throw CallerError("suite score: no tasks");
    double sum = 0.0;
    for (const std::string& id : task_ids) {
        const std::optional<double> ret = window.windowed_return(id, now);
        sum += ret ? capped_normalised(*ret, refs, id) : 0.0;
    }
    return sum / static_cast<double>(task_ids.size());
}

// First frame stamp at which the score reaches the threshold.
inline std::optional<uint64_t> frames_to_score(
    const std::vector<std::pair<uint64_t, double>>& stream, double threshold) {
    uint64_t prev = 0;
    bool first = true;
    for (const auto& [frames, score] : stream) {
        if (!first && frames < prev) throw CallerError("frames_to_score: stream not ordered");
        prev = frames;
        first = false;
        if (score >= threshold) return frames;
    }
    return std::nullopt;
}

// ---- reference table file format (versioned plain text) ----

inline std::string serialize_reference_table(const ReferenceTable& table) {
    std::ostringstream out;
    out << "ksrl-reference-table v1\n";
    for (const std::string& w : table.warnings()) out << "# warning: " << w << "\n";
    out.precision(17);
    for (const auto& [task_id, r] : table.rows()) {
        out << task_id << " " << r.random_score << " " << r.reference_score << "\n";
    }
    return out.str();
}

inline ReferenceTable parse_reference_table(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header) || header != "ksrl-reference-table v1")
        throw ConfigError("reference table: bad header");
    ReferenceTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string prefix = "# warning: ";
            if (line.rfind(prefix, 0) == 0) table.add_warning(line.substr(prefix.size()));
            continue;
        }
        std::istringstream row(line);
        std::string task_id;
        double random_score, reference_score;
        if (!(row >> task_id >> random_score >> reference_score))
            throw ConfigError("reference table: malformed row: " + line);
        table.set(task_id, random_score, reference_score);
    }
    return table;
}

inline void save_reference_table(const std::filesystem::path& path, const ReferenceTable& table) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    f << serialize_reference_table(table);
}

inline ReferenceTable load_reference_table(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_reference_table(buf.str());
}

// ---- JSON-lines metric records ----

struct MetricRecord {
    int member_id = 0;
    uint64_t frames = 0;
    std::map<std::string, double> windowed_return;
    double mean_capped_score = 0.0;
    Vec lambda;
    double learning_rate = 0.0;
    double entropy_cost = 0.0;
    LossTerms loss;
};

inline nlohmann::json to_json(const MetricRecord& r) {
    nlohmann::json j;
    j["member_id"] = r.member_id;
    j["frames"] = r.frames;
    j["windowed_return"] = r.windowed_return;
    j["mean_capped_score"] = r.mean_capped_score;
    j["lambda"] = r.lambda;
    j["learning_rate"] = r.learning_rate;
    j["entropy_cost"] = r.entropy_cost;
    j["loss"] = {{"policy_gradient", r.loss.policy_gradient_loss},
                 {"value", r.loss.value_loss},
                 {"entropy", r.loss.entropy_loss},
                 {"distill", r.loss.distill_loss},
                 {"total", r.loss.total}};
    return j;
}

inline MetricRecord metric_record_from_json(const nlohmann::json& j) {
    try {
        MetricRecord r;
        r.member_id = j.at("member_id").get<int>();
        r.frames = j.at("frames").get<uint64_t>();
        r.windowed_return = j.at("windowed_return").get<std::map<std::string, double>>();
        r.mean_capped_score = j.at("mean_capped_score").get<double>();
        r.lambda = j.at("lambda").get<Vec>();
        r.learning_rate = j.at("learning_rate").get<double>();
        r.entropy_cost = j.at("entropy_cost").get<double>();
        const auto& l = j.at("loss");
        r.loss.policy_gradient_loss = l.at("policy_gradient").get<double>();
        r.loss.value_loss = l.at("value").get<double>();
        r.loss.entropy_loss = l.at("entropy").get<double>();
        r.loss.distill_loss = l.at("distill").get<Vec>();
        r.loss.total = l.at("total").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("metric record: ") + e.what());
    }
}

inline std::vector<MetricRecord> load_metrics_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open: " + path.string());
    std::vector<MetricRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
        out.push_back(metric_record_from_json(j));
    }
    return out;
}

inline nlohmann::json to_json(const PbtEvent& e) {
    nlohmann::json j;
    j["round"] = e.round;
    j["member_id"] = e.member_id;
    j["action"] = e.action;
    if (e.peer_id >= 0) j["peer_id"] = e.peer_id;
    j["hypers"] = {{"learning_rate", e.hypers.learning_rate},
                   {"entropy_cost", e.hypers.entropy_cost},
                   {"distill_global", e.hypers.distill_global},
                   {"distill_per_teacher", e.hypers.distill_per_teacher}};
    return j;
}

}  // namespace ksrl
