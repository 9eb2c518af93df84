#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vts/training.hpp"

namespace vts::training {

namespace {

constexpr char kMagic[4] = {'V', 'T', 'S', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    out.append(b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

void put_reals(std::string& out, const std::vector<Real>& v) {
    put_u64(out, v.size());
    out.append(reinterpret_cast<const char*>(v.data()),
               v.size() * sizeof(Real));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (pos + n > buf.size())
            throw ChecksumFailure("checkpoint: truncated payload");
    }
    std::uint32_t u32() {
        need(4);
        const unsigned char* b =
            reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 4;
        return b[0] | (b[1] << 8) | (std::uint32_t(b[2]) << 16) |
               (std::uint32_t(b[3]) << 24);
    }
    std::uint64_t u64() {
        std::uint64_t lo = u32();
        return lo | (static_cast<std::uint64_t>(u32()) << 32);
    }
    std::string str() {
        std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    std::vector<Real> reals() {
        std::uint64_t n = u64();
        need(n * sizeof(Real));
        std::vector<Real> v(n);
        std::memcpy(v.data(), buf.data() + pos, n * sizeof(Real));
        pos += n * sizeof(Real);
        return v;
    }
};

}  // namespace

CheckpointBundle snapshot(models::ModelGraph& g, const Optimizer* opt,
                          long schedule_step, const std::string& rng_state) {
    CheckpointBundle b;
    auto nt = g.named();
    for (auto& [name, t] : nt.params) b.params.emplace_back(name, t.val());
    for (auto& [name, t] : nt.buffers) b.buffers.emplace_back(name, t.val());
    if (opt)
        for (const auto& s : opt->slots)
            b.opt.emplace_back(s.name,
                               CheckpointBundle::OptState{s.m, s.v, s.t});
    b.schedule_step = schedule_step;
    b.rng_state = rng_state;
    return b;
}

void restore(models::ModelGraph& g, const CheckpointBundle& b,
             const std::string& prefix) {
    auto nt = g.named();
    // plan first so a mismatch mutates nothing
    std::vector<std::pair<Tensor*, const std::vector<Real>*>> plan;
    auto match = [&](std::vector<std::pair<std::string, Tensor>>& dst,
                     const std::vector<std::pair<std::string,
                                                 std::vector<Real>>>& src) {
        for (auto& [name, t] : dst) {
            if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
            const std::vector<Real>* found = nullptr;
            for (const auto& [sn, sv] : src)
                if (sn == name) {
                    found = &sv;
                    break;
                }
            if (!found)
                throw IncompatibleCheckpoint("checkpoint: missing " + name);
            if (static_cast<long>(found->size()) != t.size())
                throw IncompatibleCheckpoint("checkpoint: shape mismatch at " +
                                             name);
            plan.emplace_back(&t, found);
        }
    };
    match(nt.params, b.params);
    match(nt.buffers, b.buffers);
    for (auto& [dst, src] : plan) dst->val() = *src;
}

void restore_optimizer(Optimizer& opt, const CheckpointBundle& b,
                       const std::string& prefix) {
    for (auto& s : opt.slots) {
        if (!prefix.empty() && s.name.rfind(prefix, 0) != 0) continue;
        const CheckpointBundle::OptState* found = nullptr;
        for (const auto& [name, st] : b.opt)
            if (name == s.name) {
                found = &st;
                break;
            }
        if (!found)
            throw IncompatibleCheckpoint("checkpoint: no optimizer state for " +
                                         s.name);
        if (static_cast<long>(found->m.size()) != s.p.size())
            throw IncompatibleCheckpoint(
                "checkpoint: optimizer state size mismatch at " + s.name);
        s.m = found->m;
        s.v = found->v;
        s.t = found->t;
    }
}

void checkpoint_save(const CheckpointBundle& b, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, static_cast<std::uint64_t>(b.schedule_step));
    put_string(out, b.rng_state);
    put_u32(out, static_cast<std::uint32_t>(b.params.size()));
    for (const auto& [name, v] : b.params) {
        put_string(out, name);
        put_reals(out, v);
    }
    put_u32(out, static_cast<std::uint32_t>(b.buffers.size()));
    for (const auto& [name, v] : b.buffers) {
        put_string(out, name);
        put_reals(out, v);
    }
    put_u32(out, static_cast<std::uint32_t>(b.opt.size()));
    for (const auto& [name, st] : b.opt) {
        put_string(out, name);
        put_reals(out, st.m);
        put_reals(out, st.v);
        put_u64(out, static_cast<std::uint64_t>(st.t));
    }
    std::uint32_t crc = crc32(
        0, reinterpret_cast<const Bytef*>(out.data()),
        static_cast<uInt>(out.size()));
    put_u32(out, crc);

    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw ParseError("cannot open " + tmp + " for writing");
        f.write(out.data(), static_cast<long>(out.size()));
        if (!f) throw ParseError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ParseError("rename failed: " + path);
}

CheckpointBundle checkpoint_load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open checkpoint " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    std::string buf = ss.str();
    if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw ParseError(path + ": not a checkpoint file");
    std::uint32_t stored;
    {
        const unsigned char* b = reinterpret_cast<const unsigned char*>(
            buf.data() + buf.size() - 4);
        stored = b[0] | (b[1] << 8) | (std::uint32_t(b[2]) << 16) |
                 (std::uint32_t(b[3]) << 24);
    }
    std::uint32_t crc = crc32(
        0, reinterpret_cast<const Bytef*>(buf.data()),
        static_cast<uInt>(buf.size() - 4));
    if (crc != stored) throw ChecksumFailure(path + ": crc mismatch");
    buf.resize(buf.size() - 4);

    Reader r{buf, 4};
    if (r.u32() != kVersion)
        throw IncompatibleCheckpoint(path + ": unknown version");
    CheckpointBundle b;
    b.schedule_step = static_cast<long>(r.u64());
    b.rng_state = r.str();
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        b.params.emplace_back(std::move(name), r.reals());
    }
    n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        b.buffers.emplace_back(std::move(name), r.reals());
    }
    n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        CheckpointBundle::OptState st;
        std::string name = r.str();
        st.m = r.reals();
        st.v = r.reals();
        st.t = static_cast<long>(r.u64());
        b.opt.emplace_back(std::move(name), std::move(st));
    }
    return b;
}

}  // namespace vts::training
