#include "pcflow/sampler.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pcflow/errors.hpp"

namespace pcflow {

std::vector<SampleResult> euler_sample_batch(const FlowModel& model, std::span<const PointCloud> x0s, std::size_t steps,
                                             std::span<const double> cond, bool record,
                                             const NormalizationStats* stats) {
    if (steps < 1) throw ArgumentError("euler_sample: steps must be at least 1");
    std::vector<SampleResult> out(x0s.size());
    if (x0s.empty()) return out;
    const std::size_t b = x0s.size(), n = x0s[0].size();
    FlowBatch fb;
    fb.batch = b;
    fb.points = n;
    fb.x.resize(static_cast<Eigen::Index>(b * n), 3);
    for (std::size_t i = 0; i < b; ++i) {
        if (x0s[i].size() != n) throw ArgumentError("euler_sample: clouds in a batch must share N");
        std::copy_n(x0s[i].data(), 3 * n, fb.x.data() + 3 * n * i);
    }
    if (!cond.empty()) {
        fb.cond.resize(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(cond.size()));
        for (std::size_t i = 0; i < b; ++i) std::copy(cond.begin(), cond.end(), fb.cond.row(static_cast<Eigen::Index>(i)).data());
    }
    auto slice = [&](const RowMat& m, std::size_t i) {
        return PointCloud(std::vector<double>(m.data() + 3 * n * i, m.data() + 3 * n * (i + 1)));
    };
    const double dt = 1.0 / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        fb.t.assign(b, t);
        RowMat v;
        try {
            v = forward_batch(model.cfg, model.weights, fb);
        } catch (const NumericError& e) {
            throw NumericError("euler_sample: step " + std::to_string(k) + ": " + e.what());
        }
        if (record)
            for (std::size_t i = 0; i < b; ++i) {
                out[i].traj.t.push_back(t);
                out[i].traj.x.push_back(slice(fb.x, i));
                out[i].traj.v.push_back(slice(v, i));
            }
        fb.x += dt * v;
        if (!fb.x.allFinite()) throw NumericError("euler_sample: non-finite state after step " + std::to_string(k));
    }
    for (std::size_t i = 0; i < b; ++i) {
        out[i].final = slice(fb.x, i);
        if (stats) out[i].final = denormalize(out[i].final, *stats);
    }
    return out;
}

SampleResult euler_sample(const FlowModel& model, const PointCloud& x0, std::size_t steps,
                          std::span<const double> cond, bool record, const NormalizationStats* stats) {
    return std::move(euler_sample_batch(model, std::span<const PointCloud>(&x0, 1), steps, cond, record, stats)[0]);
}

std::vector<PointCloud> generate_set(const FlowModel& model, std::size_t count, std::size_t n, std::size_t steps,
                                     Rng& rng, std::span<const double> cond, const NormalizationStats* stats) {
    std::vector<PointCloud> starts;
    starts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) starts.push_back(sample_noise(n, rng));
    std::vector<PointCloud> out;
    out.reserve(count);
    constexpr std::size_t chunk = 32;
    for (std::size_t lo = 0; lo < count; lo += chunk) {
        const std::size_t len = std::min(chunk, count - lo);
        auto res = euler_sample_batch(model, std::span<const PointCloud>(starts.data() + lo, len), steps, cond, false,
                                      stats);
        for (auto& r : res) out.push_back(std::move(r.final));
    }
    return out;
}

namespace {

void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
    return v;
}

void put_f32(std::string& b, double d) { put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(d))); }

}  // namespace

void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajs) {
    const std::uint32_t steps = trajs.empty() ? 0 : static_cast<std::uint32_t>(trajs[0].size());
    const std::uint32_t n = steps ? static_cast<std::uint32_t>(trajs[0].x[0].size()) : 0;
    std::string buf("PCFTRAJ1", 8);
    put_u32(buf, static_cast<std::uint32_t>(trajs.size()));
    put_u32(buf, steps);
    put_u32(buf, n);
    for (const auto& tr : trajs) {
        if (tr.size() != steps || (steps && tr.x[0].size() != n))
            throw ArgumentError("write_trajectories: trajectories must share T and N");
        for (double t : tr.t) put_f32(buf, t);
        for (const auto& x : tr.x)
            for (double d : x.coords()) put_f32(buf, d);
        for (const auto& v : tr.v)
            for (double d : v.coords()) put_f32(buf, d);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write trajectory dump " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for trajectory dump " + path.string());
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trajectory dump " + path.string());
    const std::string b(std::istreambuf_iterator<char>(in), {});
    if (b.size() < 20 || std::memcmp(b.data(), "PCFTRAJ1", 8) != 0)
        throw IoError("not a trajectory dump: " + path.string());
    const std::size_t count = get_u32(b, 8), steps = get_u32(b, 12), n = get_u32(b, 16);
    const std::size_t per = 4 * (steps + 2 * steps * n * 3);
    if (b.size() != 20 + count * per) throw IoError("truncated trajectory dump " + path.string());
    std::size_t at = 20;
    auto next = [&] { const float f = std::bit_cast<float>(get_u32(b, at)); at += 4; return static_cast<double>(f); };
    std::vector<Trajectory> out(count);
    for (auto& tr : out) {
        for (std::size_t k = 0; k < steps; ++k) tr.t.push_back(next());
        for (int which = 0; which < 2; ++which)
            for (std::size_t k = 0; k < steps; ++k) {
                std::vector<double> c(3 * n);
                for (double& d : c) d = next();
                (which ? tr.v : tr.x).emplace_back(std::move(c));
            }
    }
    return out;
}

}  // namespace pcflow
