#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ksrl/common.hpp"
#include "ksrl/hypers.hpp"
#include "ksrl/net.hpp"

namespace ksrl {

// Binary checkpoint, explicitly little-endian so files travel between hosts:
//   "KSRL" | u32 version | u32 dim count | u32 dims... | f64 params... | hypers
// The dims list is layer_dims with num_actions appended as the trailing entry.
// Params serialize in fixed order: per hidden layer weights then biases,
// then policy head weights, then value head weights. Hypers follow as
// f64 lr, f64 entropy_cost, f64 alpha, u32 teacher count, f64 rhos.

constexpr uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 4> kCheckpointMagic{'K', 'S', 'R', 'L'};

class ByteWriter {
public:
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double x) {
        uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        u64(bits);
    }
    void bytes(const char* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string data) : buf_(std::move(data)) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double x;
        std::memcpy(&x, &bits, sizeof(x));
        return x;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string str() { return bytes(u32()); }
    bool done() const { return pos_ == buf_.size(); }
    size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > buf_.size()) throw ConfigError("checkpoint: truncated file");
    }
    std::string buf_;
    size_t pos_ = 0;
};

inline void serialize_hypers(ByteWriter& w, const HyperParams& h) {
    w.f64(h.learning_rate);
    w.f64(h.entropy_cost);
    w.f64(h.distill_global);
    w.u32(static_cast<uint32_t>(h.distill_per_teacher.size()));
    for (double r : h.distill_per_teacher) w.f64(r);
}

inline HyperParams deserialize_hypers(ByteReader& r) {
    HyperParams h;
    h.learning_rate = r.f64();
    h.entropy_cost = r.f64();
    h.distill_global = r.f64();
    const uint32_t n = r.u32();
    h.distill_per_teacher.resize(n);
    for (uint32_t i = 0; i < n; ++i) h.distill_per_teacher[i] = r.f64();
    return h;
}

inline void serialize_checkpoint(ByteWriter& w, const PolicyValueNet& net, const HyperParams& hypers) {
    w.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
    w.u32(kCheckpointVersion);
    w.u32(static_cast<uint32_t>(net.layer_dims.size() + 1));
    for (int d : net.layer_dims) w.u32(static_cast<uint32_t>(d));
    w.u32(static_cast<uint32_t>(net.num_actions));
    net.params.for_each([&](double x) { w.f64(x); });
    serialize_hypers(w, hypers);
}

struct CheckpointData {
    PolicyValueNet net;
    HyperParams hypers;
};

inline CheckpointData deserialize_checkpoint(ByteReader& r) {
    const std::string magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic.begin()))
        throw ConfigError("checkpoint: bad magic");
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t ndims = r.u32();
    if (ndims < 3) throw ConfigError("checkpoint: dims list too short");
    std::vector<int> dims(ndims);
    for (uint32_t i = 0; i < ndims; ++i) dims[i] = static_cast<int>(r.u32());

    NetSpec spec;
    spec.layer_dims.assign(dims.begin(), dims.end() - 1);
    spec.num_actions = dims.back();

    CheckpointData out;
    out.net.layer_dims = spec.layer_dims;
    out.net.num_actions = spec.num_actions;
    out.net.params = make_param_set(spec);
    out.net.params.for_each([&](double& x) { x = r.f64(); });
    out.hypers = deserialize_hypers(r);
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!f) throw ConfigError("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open: " + path.string());
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return data;
}

inline void save_checkpoint(const std::filesystem::path& path, const PolicyValueNet& net,
                            const HyperParams& hypers) {
    ByteWriter w;
    serialize_checkpoint(w, net, hypers);
    write_file(path, w.data());
}

inline CheckpointData load_checkpoint(const std::filesystem::path& path) {
    ByteReader r(read_file(path));
    CheckpointData out = deserialize_checkpoint(r);
    if (!r.done()) throw ConfigError("checkpoint: trailing bytes in " + path.string());
    return out;
}

}  // namespace ksrl
