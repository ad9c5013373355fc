#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ksrl/common.hpp"

namespace ksrl {

// Fixed-length unroll. Observations carry one extra entry (the bootstrap
// state); behaviour logits are exactly those the actor sampled from.
struct Trajectory {
    std::string task_id;
    std::vector<Vec> observations;      // T+1
    std::vector<int> actions;           // T
    Vec rewards;                        // T
    std::vector<Vec> behaviour_logits;  // T
    std::vector<Vec> teacher_logits;    // T when a teacher is routed, else empty
    std::vector<uint8_t> terminal;      // T
    int teacher_index = -1;
    uint64_t actor_param_version = 0;
    int actor_id = -1;
    Vec completed_returns;  // returns of episodes that finished inside this unroll

    size_t length() const { return actions.size(); }

    void validate() const {
        const size_t t = actions.size();
        if (t == 0) throw CallerError("trajectory: empty unroll");
        if (observations.size() != t + 1) throw CallerError("trajectory: need T+1 observations");
        if (rewards.size() != t) throw CallerError("trajectory: rewards length mismatch");
        if (behaviour_logits.size() != t) throw CallerError("trajectory: missing behaviour logits");
        if (terminal.size() != t) throw CallerError("trajectory: terminal flags length mismatch");
        if (!teacher_logits.empty() && teacher_logits.size() != t)
            throw CallerError("trajectory: teacher logits length mismatch");
        if (teacher_index >= 0 && teacher_logits.empty())
            throw CallerError("trajectory: routed teacher but no teacher logits");
    }
};

// Bounded FIFO hand-off between actors and the learner. Blocking push/pop
// with a close() used for shutdown; closed pops drain what is left.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ConfigError("queue capacity must be positive");
    }

    bool push(T item) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        lock.unlock();
        not_empty_.notify_one();
        return true;
    }

    bool try_push(T item) {
        {
            std::lock_guard lock(mu_);
            if (closed_ || items_.size() >= capacity_) return false;
            items_.push_back(std::move(item));
        }
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        lock.unlock();
        not_full_.notify_one();
        return item;
    }

    std::optional<T> try_pop() {
        std::optional<T> out;
        {
            std::lock_guard lock(mu_);
            if (items_.empty()) return std::nullopt;
            out = std::move(items_.front());
            items_.pop_front();
        }
        not_full_.notify_one();
        return out;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        not_full_.notify_all();
        not_empty_.notify_all();
    }

    size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }

    size_t capacity() const { return capacity_; }

    bool closed() const {
        std::lock_guard lock(mu_);
        return closed_;
    }

private:
    const size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

}  // namespace ksrl
