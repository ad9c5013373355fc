#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "ksrl/common.hpp"
#include "ksrl/rng.hpp"

namespace ksrl {

// Shared action set so one policy head serves every task.
// 0 up, 1 down, 2 left, 3 right, 4 tag/collect.
constexpr int kNumActions = 5;

enum class TaskKind { SparseGoal, DenseForage, Tag1, Tag3 };

inline int targets_for(TaskKind kind) {
    switch (kind) {
        case TaskKind::Tag1: return 1;
        case TaskKind::Tag3: return 3;
        default: return 0;
    }
}

inline std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::SparseGoal: return "sparse-goal";
        case TaskKind::DenseForage: return "dense-forage";
        case TaskKind::Tag1: return "tag-1";
        case TaskKind::Tag3: return "tag-3";
    }
    return "?";
}

inline TaskKind parse_task_kind(const std::string& s) {
    if (s == "sparse-goal") return TaskKind::SparseGoal;
    if (s == "dense-forage") return TaskKind::DenseForage;
    if (s == "tag-1") return TaskKind::Tag1;
    if (s == "tag-3") return TaskKind::Tag3;
    throw ConfigError("unknown task kind: " + s);
}

struct RewardStructure {
    double goal_reward = 10.0;
    double food_reward = 1.0;
    double tag_reward = 1.0;
    double step_penalty = 0.0;

    bool operator==(const RewardStructure&) const = default;

    // Largest possible |reward| in one step, given how many events can fire.
    double step_bound(TaskKind kind) const {
        double event = 0.0;
        switch (kind) {
            case TaskKind::SparseGoal: event = std::abs(goal_reward); break;
            case TaskKind::DenseForage: event = std::abs(food_reward); break;
            case TaskKind::Tag1: event = std::abs(tag_reward); break;
            case TaskKind::Tag3: event = 3.0 * std::abs(tag_reward); break;
        }
        return event + std::abs(step_penalty);
    }
};

struct TaskSpec {
    std::string task_id;
    TaskKind kind = TaskKind::SparseGoal;
    int grid_size = 12;
    int episode_limit = 100;
    RewardStructure rewards;
    int food_count = 0;       // dense-forage only
    double wall_density = 0;  // sparse-goal only
    int spawn_min_dist = 0;   // sparse-goal: minimum agent-goal Manhattan distance

    bool operator==(const TaskSpec&) const = default;

    int obs_size() const { return 3 * grid_size * grid_size; }

    void validate() const {
        if (task_id.empty()) throw ConfigError("task: empty task_id");
        if (grid_size < 3) throw ConfigError("task " + task_id + ": grid_size must be >= 3");
        if (episode_limit <= 0) throw ConfigError("task " + task_id + ": episode_limit must be positive");
        if (kind == TaskKind::DenseForage && food_count < 1)
            throw ConfigError("task " + task_id + ": dense-forage needs food_count >= 1");
        if (wall_density < 0.0 || wall_density > 0.3)
            throw ConfigError("task " + task_id + ": wall_density outside [0, 0.3]");
        if (spawn_min_dist < 0) throw ConfigError("task " + task_id + ": negative spawn_min_dist");
    }
};

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

struct EnvState {
    Cell agent;
    Cell goal;                    // sparse-goal
    std::vector<Cell> items;      // food or targets
    std::vector<uint8_t> walls;   // grid*grid bitmap
    int steps = 0;
    double episode_return = 0.0;
    bool terminal = false;
    Rng rng;
};

struct StepResult {
    Vec observation;
    double reward = 0.0;
    bool terminal = false;
};

namespace detail {

inline int cell_index(const TaskSpec& task, Cell c) { return c.y * task.grid_size + c.x; }

inline bool in_grid(const TaskSpec& task, Cell c) {
    return c.x >= 0 && c.x < task.grid_size && c.y >= 0 && c.y < task.grid_size;
}

inline bool blocked(const TaskSpec& task, const EnvState& s, Cell c) {
    return !in_grid(task, c) || s.walls[cell_index(task, c)] != 0;
}

inline Cell moved(Cell c, int action) {
    switch (action) {
        case 0: return {c.x, c.y - 1};
        case 1: return {c.x, c.y + 1};
        case 2: return {c.x - 1, c.y};
        case 3: return {c.x + 1, c.y};
        default: return c;
    }
}

// Fixed wall pattern per (grid_size, wall_density): candidates in a seeded
// shuffle order, each kept only if the free cells stay connected. Independent
// of the episode seed, so the legal-cell set is a property of the task.
inline std::vector<uint8_t> make_walls(const TaskSpec& task) {
    const int g = task.grid_size;
    const int n = g * g;
    std::vector<uint8_t> walls(n, 0);
    const int want = static_cast<int>(task.wall_density * n + 0.5);
    if (want == 0) return walls;

    Rng rng(derive_seed(0x57414c4cULL, "walls", static_cast<uint64_t>(g)));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

    auto connected = [&](int free_total) {
        int start = -1;
        for (int i = 0; i < n; ++i) {
            if (!walls[i]) {
                start = i;
                break;
            }
        }
        if (start < 0) return false;
        std::vector<uint8_t> seen(n, 0);
        std::deque<int> q{start};
        seen[start] = 1;
        int count = 1;
        while (!q.empty()) {
            const int c = q.front();
            q.pop_front();
            const int x = c % g, y = c / g;
            const int nb[4] = {c - g, c + g, c - 1, c + 1};
            const bool ok[4] = {y > 0, y < g - 1, x > 0, x < g - 1};
            for (int k = 0; k < 4; ++k) {
                if (ok[k] && !walls[nb[k]] && !seen[nb[k]]) {
                    seen[nb[k]] = 1;
                    ++count;
                    q.push_back(nb[k]);
                }
            }
        }
        return count == free_total;
    };

    int placed = 0;
    for (int idx : order) {
        if (placed >= want) break;
        walls[idx] = 1;
        if (connected(n - placed - 1)) {
            ++placed;
        } else {
            walls[idx] = 0;
        }
    }
    return walls;
}

inline std::vector<Cell> legal_cells(const TaskSpec& task, const std::vector<uint8_t>& walls) {
    std::vector<Cell> out;
    for (int y = 0; y < task.grid_size; ++y) {
        for (int x = 0; x < task.grid_size; ++x) {
            if (!walls[y * task.grid_size + x]) out.push_back({x, y});
        }
    }
    return out;
}

}  // namespace detail

inline Vec observe(const TaskSpec& task, const EnvState& s) {
    const int g = task.grid_size;
    const int plane = g * g;
    Vec obs(3 * plane, 0.0);
    obs[detail::cell_index(task, s.agent)] = 1.0;
    if (task.kind == TaskKind::SparseGoal) {
        obs[plane + detail::cell_index(task, s.goal)] = 1.0;
    }
    for (const Cell& c : s.items) obs[plane + detail::cell_index(task, c)] = 1.0;
    for (int i = 0; i < plane; ++i) obs[2 * plane + i] = s.walls[i] ? 1.0 : 0.0;
    return obs;
}

// Layout is a pure function of (task, seed); the same stream drives episode
// dynamics afterwards.
inline EnvState reset_env(const TaskSpec& task, uint64_t seed) {
    task.validate();
    EnvState s;
    s.rng = Rng(derive_seed(seed, "env"));
    s.walls = detail::make_walls(task);
    const std::vector<Cell> legal = detail::legal_cells(task, s.walls);

    switch (task.kind) {
        case TaskKind::SparseGoal: {
            s.goal = legal[s.rng.uniform_int(static_cast<int>(legal.size()))];
            int dmax = 0;
            for (const Cell& c : legal) dmax = std::max(dmax, manhattan(c, s.goal));
            const int need = std::min(task.spawn_min_dist, dmax);
            std::vector<Cell> spawn;
            for (const Cell& c : legal) {
                if (!(c == s.goal) && manhattan(c, s.goal) >= need) spawn.push_back(c);
            }
            s.agent = spawn[s.rng.uniform_int(static_cast<int>(spawn.size()))];
            break;
        }
        case TaskKind::DenseForage:
        case TaskKind::Tag1:
        case TaskKind::Tag3: {
            const int k = task.kind == TaskKind::DenseForage ? task.food_count : targets_for(task.kind);
            if (k + 1 > static_cast<int>(legal.size()))
                throw ConfigError("task " + task.task_id + ": grid too small for item count");
            std::vector<Cell> pool = legal;
            auto draw = [&] {
                const int i = s.rng.uniform_int(static_cast<int>(pool.size()));
                Cell c = pool[i];
                pool[i] = pool.back();
                pool.pop_back();
                return c;
            };
            s.agent = draw();
            s.items.reserve(k);
            for (int i = 0; i < k; ++i) s.items.push_back(draw());
            break;
        }
    }
    return s;
}

inline StepResult step_env(const TaskSpec& task, EnvState& s, int action) {
    if (s.terminal) throw CallerError("step on terminal episode");
    if (action < 0 || action >= kNumActions)
        throw CallerError("action " + std::to_string(action) + " out of range");

    double reward = -task.rewards.step_penalty;

    if (action < 4) {
        const Cell next = detail::moved(s.agent, action);
        if (!detail::blocked(task, s, next)) s.agent = next;
    }

    switch (task.kind) {
        case TaskKind::SparseGoal:
            if (s.agent == s.goal) {
                reward += task.rewards.goal_reward;
                s.terminal = true;
            }
            break;
        case TaskKind::DenseForage: {
            for (size_t i = 0; i < s.items.size(); ++i) {
                if (s.items[i] == s.agent) {
                    reward += task.rewards.food_reward;
                    s.items.erase(s.items.begin() + static_cast<long>(i));
                    break;
                }
            }
            if (s.items.empty()) s.terminal = true;
            break;
        }
        case TaskKind::Tag1:
        case TaskKind::Tag3: {
            if (action == 4) {
                for (size_t i = s.items.size(); i-- > 0;) {
                    if (manhattan(s.items[i], s.agent) <= 1) {
                        reward += task.rewards.tag_reward;
                        s.items.erase(s.items.begin() + static_cast<long>(i));
                    }
                }
                if (s.items.empty()) s.terminal = true;
            }
            if (!s.terminal) {
                for (Cell& t : s.items) {
                    const Cell next = detail::moved(t, s.rng.uniform_int(4));
                    const bool taken = next == s.agent ||
                                       std::any_of(s.items.begin(), s.items.end(),
                                                   [&](const Cell& o) { return o == next; });
                    if (!detail::blocked(task, s, next) && !taken) t = next;
                }
            }
            break;
        }
    }

    ++s.steps;
    if (s.steps >= task.episode_limit) s.terminal = true;
    s.episode_return += reward;

    return {observe(task, s), reward, s.terminal};
}

// Shipped default suite; config files can override any of it.
inline std::vector<TaskSpec> default_suite() {
    TaskSpec sparse;
    sparse.task_id = "sparse-goal";
    sparse.kind = TaskKind::SparseGoal;
    sparse.grid_size = 12;
    sparse.episode_limit = 100;
    sparse.wall_density = 0.12;
    sparse.spawn_min_dist = 18;

    TaskSpec forage;
    forage.task_id = "dense-forage";
    forage.kind = TaskKind::DenseForage;
    forage.grid_size = 10;
    forage.episode_limit = 80;
    forage.food_count = 12;

    TaskSpec tag1;
    tag1.task_id = "tag-1";
    tag1.kind = TaskKind::Tag1;
    tag1.grid_size = 11;
    tag1.episode_limit = 60;

    TaskSpec tag3 = tag1;
    tag3.task_id = "tag-3";
    tag3.kind = TaskKind::Tag3;

    return {sparse, forage, tag1, tag3};
}

inline std::vector<TaskSpec> make_suite(std::vector<TaskSpec> tasks) {
    if (tasks.empty()) throw ConfigError("suite: no tasks");
    for (const TaskSpec& t : tasks) t.validate();
    for (size_t i = 0; i < tasks.size(); ++i) {
        for (size_t j = i + 1; j < tasks.size(); ++j) {
            if (tasks[i].task_id == tasks[j].task_id)
                throw ConfigError("suite: duplicate task_id " + tasks[i].task_id);
        }
    }
    return tasks;
}

}  // namespace ksrl
