#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ksrl/checkpoint.hpp"
#include "ksrl/common.hpp"
#include "ksrl/net.hpp"

namespace ksrl {

struct TeacherProvenance {
    std::vector<std::string> trained_tasks;
    uint64_t frames_trained = 0;
    uint64_t config_hash = 0;

    bool operator==(const TeacherProvenance&) const = default;
};

// Frozen expert policy. Parameters never change after construction; only the
// full logits are exposed since distillation needs the whole distribution.
class Teacher {
public:
    Teacher(PolicyValueNet net, TeacherProvenance provenance)
        : net_(std::move(net)), provenance_(std::move(provenance)) {
        if (provenance_.trained_tasks.empty())
            throw ConfigError("teacher: trained_tasks must be non-empty");
    }

    const PolicyValueNet& net() const { return net_; }
    const TeacherProvenance& provenance() const { return provenance_; }
    int num_actions() const { return net_.num_actions; }
    int input_dim() const { return net_.input_dim(); }

    bool operator==(const Teacher& other) const {
        return net_ == other.net_ && provenance_ == other.provenance_;
    }

private:
    PolicyValueNet net_;
    TeacherProvenance provenance_;
};

inline Vec teacher_logits(const Teacher& teacher, const Vec& observation) {
    if (static_cast<int>(observation.size()) != teacher.input_dim())
        throw ConfigError("teacher: observation length " + std::to_string(observation.size()) +
                          " != input dim " + std::to_string(teacher.input_dim()));
    return forward(teacher.net(), observation).policy_logits;
}

// ---- teacher files: provenance header followed by a net checkpoint ----

constexpr uint32_t kTeacherVersion = 1;
inline constexpr std::array<char, 4> kTeacherMagic{'K', 'S', 'T', 'C'};

inline void serialize_teacher(ByteWriter& w, const Teacher& teacher) {
    w.bytes(kTeacherMagic.data(), kTeacherMagic.size());
    w.u32(kTeacherVersion);
    const TeacherProvenance& p = teacher.provenance();
    w.u32(static_cast<uint32_t>(p.trained_tasks.size()));
    for (const std::string& t : p.trained_tasks) w.str(t);
    w.u64(p.frames_trained);
    w.u64(p.config_hash);
    serialize_checkpoint(w, teacher.net(), HyperParams{});
}

inline Teacher deserialize_teacher(ByteReader& r) {
    const std::string magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kTeacherMagic.begin()))
        throw ConfigError("teacher file: bad magic");
    const uint32_t version = r.u32();
    if (version != kTeacherVersion)
        throw ConfigError("teacher file: unsupported version " + std::to_string(version));
    TeacherProvenance p;
    const uint32_t n_tasks = r.u32();
    p.trained_tasks.reserve(n_tasks);
    for (uint32_t i = 0; i < n_tasks; ++i) p.trained_tasks.push_back(r.str());
    p.frames_trained = r.u64();
    p.config_hash = r.u64();
    CheckpointData ckpt = deserialize_checkpoint(r);
    return Teacher(std::move(ckpt.net), std::move(p));
}

inline void save_teacher(const std::filesystem::path& path, const Teacher& teacher) {
    ByteWriter w;
    serialize_teacher(w, teacher);
    write_file(path, w.data());
}

inline Teacher load_teacher(const std::filesystem::path& path) {
    ByteReader r(read_file(path));
    Teacher t = deserialize_teacher(r);
    if (!r.done()) throw ConfigError("teacher file: trailing bytes in " + path.string());
    return t;
}

// Maps every suite task to the teacher responsible for it. Built and checked
// once at startup so an unmapped task can never surface mid-run.
class TeacherRouter {
public:
    TeacherRouter() = default;

    TeacherRouter(const std::vector<std::string>& suite_tasks,
                  const std::map<std::string, size_t>& mapping, size_t num_teachers) {
        for (const std::string& task : suite_tasks) {
            const auto it = mapping.find(task);
            if (it == mapping.end())
                throw ConfigError("teacher router: no teacher mapped for task " + task);
            if (it->second >= num_teachers)
                throw ConfigError("teacher router: teacher index " + std::to_string(it->second) +
                                  " out of range for task " + task);
            map_[task] = it->second;
        }
    }

    // Single-teacher convenience: every task routes to teacher 0.
    static TeacherRouter all_to_one(const std::vector<std::string>& suite_tasks) {
        TeacherRouter r;
        for (const std::string& task : suite_tasks) r.map_[task] = 0;
        return r;
    }

    size_t route(const std::string& task_id) const {
        const auto it = map_.find(task_id);
        if (it == map_.end()) throw CallerError("teacher router: unrouted task " + task_id);
        return it->second;
    }

    size_t size() const { return map_.size(); }

private:
    std::map<std::string, size_t> map_;
};

// Routes tasks by matching each task against the teachers' trained_tasks.
inline TeacherRouter route_by_training(const std::vector<std::string>& suite_tasks,
                                       const std::vector<Teacher>& teachers) {
    std::map<std::string, size_t> mapping;
    for (const std::string& task : suite_tasks) {
        for (size_t i = 0; i < teachers.size(); ++i) {
            const auto& trained = teachers[i].provenance().trained_tasks;
            if (std::find(trained.begin(), trained.end(), task) != trained.end()) {
                if (mapping.count(task))
                    throw ConfigError("teacher router: task " + task +
                                      " covered by more than one teacher");
                mapping[task] = i;
            }
        }
    }
    return TeacherRouter(suite_tasks, mapping, teachers.size());
}

}  // namespace ksrl
