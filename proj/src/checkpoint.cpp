#include "pcflow/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <json.hpp>

#include "pcflow/errors.hpp"

namespace pcflow {

using nlohmann::json;

namespace {

json net_to_json(const NetConfig& c) {
    return {{"hidden_width", c.hidden_width}, {"depth", c.depth},          {"time_embed_dim", c.time_embed_dim},
            {"cond_dim", c.cond_dim},         {"pooling", "mean"},         {"activation", to_string(c.activation)}};
}

NetConfig net_from_json(const json& j) {
    NetConfig c;
    c.hidden_width = j.at("hidden_width").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.time_embed_dim = j.at("time_embed_dim").get<std::size_t>();
    c.cond_dim = j.at("cond_dim").get<std::size_t>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.validate();
    return c;
}

json enc_to_json(const EncoderConfig& c) {
    return {{"hidden_width", c.hidden_width}, {"latent_dim", c.latent_dim}, {"activation", to_string(c.activation)}};
}

EncoderConfig enc_from_json(const json& j) {
    EncoderConfig c;
    c.hidden_width = j.at("hidden_width").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    return c;
}

template <class T>
void append_block(std::string& buf, std::span<const double> v) {
    for (double d : v) {
        using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
        const U u = std::bit_cast<U>(static_cast<T>(d));
        for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
}

template <class T>
std::vector<double> read_block(const std::string& bytes, std::size_t& at, std::size_t count,
                               const std::filesystem::path& path) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    if (bytes.size() < at + count * sizeof(U)) throw IoError("truncated checkpoint " + path.string());
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) {
        U u = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            u |= static_cast<U>(static_cast<unsigned char>(bytes[at + k * sizeof(U) + i])) << (8 * i);
        out[k] = static_cast<double>(std::bit_cast<T>(u));
    }
    at += count * sizeof(U);
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string("cannot open ") + what + " " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

json parse_header_line(const std::string& bytes, std::size_t& at, const std::filesystem::path& path,
                       const char* format) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw IoError("malformed file " + path.string() + ": no header line");
    json h;
    try {
        h = json::parse(bytes.substr(0, nl));
    } catch (const json::exception& e) {
        throw IoError("malformed header in " + path.string() + ": " + e.what());
    }
    if (h.value("format", "") != format) throw IoError("not a " + std::string(format) + " file: " + path.string());
    at = nl + 1;
    return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const VectorFieldParams& net, const EncoderParams* encoder,
                     const CheckpointMeta& meta) {
    json shapes = json::array();
    for (const auto& s : net.shapes) shapes.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
    json blocks = json::array({{{"name", "params"}, {"count", net.values.size()}},
                               {{"name", "ema"}, {"count", net.ema.size()}}});
    if (encoder) {
        blocks.push_back({{"name", "encoder.params"}, {"count", encoder->values.size()}});
        blocks.push_back({{"name", "encoder.ema"}, {"count", encoder->ema.size()}});
    }
    const json h = {{"format", "pcflow-checkpoint"},
                    {"version", 1},
                    {"dtype", "float32-le"},
                    {"net", net_to_json(net.cfg)},
                    {"encoder", encoder ? enc_to_json(encoder->cfg) : json(nullptr)},
                    {"step", net.step},
                    {"seed", meta.seed},
                    {"normalization",
                     {{"global_mean", meta.normalization.global_mean}, {"global_scale", meta.normalization.global_scale}}},
                    {"config_digest", meta.config_digest},
                    {"shapes", shapes},
                    {"blocks", blocks}};
    std::string buf = h.dump() + "\n";
    append_block<float>(buf, net.values);
    append_block<float>(buf, net.ema);
    if (encoder) {
        append_block<float>(buf, encoder->values);
        append_block<float>(buf, encoder->ema);
    }
    write_file(path, buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path, "checkpoint");
    std::size_t at = 0;
    const json h = parse_header_line(bytes, at, path, "pcflow-checkpoint");
    Checkpoint ck;
    try {
        ck.net.cfg = net_from_json(h.at("net"));
        ck.net.shapes = layer_shapes(ck.net.cfg);
        ck.net.step = h.at("step").get<std::uint64_t>();
        ck.meta.seed = h.at("seed").get<std::uint64_t>();
        ck.meta.normalization.global_mean = h.at("normalization").at("global_mean").get<Point3>();
        ck.meta.normalization.global_scale = h.at("normalization").at("global_scale").get<double>();
        ck.meta.config_digest = h.value("config_digest", "");
    } catch (const std::exception& e) {
        throw IoError("malformed checkpoint header in " + path.string() + ": " + e.what());
    }
    const std::size_t np = parameter_count(ck.net.cfg);
    ck.net.values = read_block<float>(bytes, at, np, path);
    ck.net.ema = read_block<float>(bytes, at, np, path);
    if (!h.at("encoder").is_null()) {
        EncoderParams e;
        e.cfg = enc_from_json(h.at("encoder"));
        const std::size_t ne = encoder_parameter_count(e.cfg);
        e.values = read_block<float>(bytes, at, ne, path);
        e.ema = read_block<float>(bytes, at, ne, path);
        ck.encoder = std::move(e);
    }
    if (at != bytes.size()) throw IoError("trailing bytes in checkpoint " + path.string());
    return ck;
}

void save_train_state(const std::filesystem::path& path, const TrainState& s) {
    const json h = {{"format", "pcflow-train-state"},
                    {"version", 1},
                    {"net", net_to_json(s.net.cfg)},
                    {"encoder", s.encoder ? enc_to_json(s.encoder->cfg) : json(nullptr)},
                    {"step", s.net.step},
                    {"rng_seed", s.rng.seed()},
                    {"rng", s.rng.state()}};
    std::string buf = h.dump() + "\n";
    const std::size_t np = s.net.values.size();
    auto moments = [&](const AdamState& a, std::size_t n) {
        append_block<double>(buf, a.m.empty() ? std::vector<double>(n, 0.0) : a.m);
        append_block<double>(buf, a.v.empty() ? std::vector<double>(n, 0.0) : a.v);
    };
    append_block<double>(buf, s.net.values);
    append_block<double>(buf, s.net.ema);
    moments(s.adam_net, np);
    if (s.encoder) {
        append_block<double>(buf, s.encoder->values);
        append_block<double>(buf, s.encoder->ema);
        moments(s.adam_encoder, s.encoder->values.size());
    }
    write_file(path, buf);
}

TrainState load_train_state(const std::filesystem::path& path) {
    const std::string bytes = read_file(path, "training state");
    std::size_t at = 0;
    const json h = parse_header_line(bytes, at, path, "pcflow-train-state");
    TrainState s{{}, std::nullopt, {}, {}, Rng(0)};
    try {
        s.net.cfg = net_from_json(h.at("net"));
        s.net.shapes = layer_shapes(s.net.cfg);
        s.net.step = h.at("step").get<std::uint64_t>();
        s.rng = Rng(h.at("rng_seed").get<std::uint64_t>());
        s.rng.restore(h.at("rng").get<std::string>());
    } catch (const std::exception& e) {
        throw IoError("malformed training state header in " + path.string() + ": " + e.what());
    }
    const std::size_t np = parameter_count(s.net.cfg);
    s.net.values = read_block<double>(bytes, at, np, path);
    s.net.ema = read_block<double>(bytes, at, np, path);
    s.adam_net.m = read_block<double>(bytes, at, np, path);
    s.adam_net.v = read_block<double>(bytes, at, np, path);
    if (!h.at("encoder").is_null()) {
        EncoderParams e;
        e.cfg = enc_from_json(h.at("encoder"));
        const std::size_t ne = encoder_parameter_count(e.cfg);
        e.values = read_block<double>(bytes, at, ne, path);
        e.ema = read_block<double>(bytes, at, ne, path);
        s.adam_encoder.m = read_block<double>(bytes, at, ne, path);
        s.adam_encoder.v = read_block<double>(bytes, at, ne, path);
        s.encoder = std::move(e);
    }
    if (at != bytes.size()) throw IoError("trailing bytes in training state " + path.string());
    return s;
}

}  // namespace pcflow
