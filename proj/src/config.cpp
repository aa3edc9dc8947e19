#include "pcflow/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "pcflow/digest.hpp"
#include "pcflow/errors.hpp"

namespace pcflow {

std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, r.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

namespace {

// Strict view of one TOML table: every key must be consumed.
class Section {
public:
    Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

    template <class T>
    void get(const char* key, T& out) {
        const toml::node* n = find(key);
        if (!n) return;
        out = convert<T>(*n, key);
    }

    template <class T>
    void get_list(const char* key, std::vector<T>& out) {
        const toml::node* n = find(key);
        if (!n) return;
        const toml::array* arr = n->as_array();
        if (!arr) fail(key, "expected an array");
        out.clear();
        for (const auto& e : *arr) out.push_back(convert<T>(e, key));
    }

    Section sub(const char* key) {
        const toml::node* n = find(key);
        if (!n) return Section(nullptr, qualified(key));
        if (!n->is_table()) fail(key, "expected a table");
        return Section(n->as_table(), qualified(key));
    }

    void finish() const {
        if (!t_) return;
        for (const auto& [k, v] : *t_)
            if (!seen_.count(std::string(k.str())))
                throw ConfigError("unknown key '" + qualified(std::string(k.str())) + "'");
    }

private:
    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError("config key '" + qualified(key) + "': " + what);
    }

    const toml::node* find(const char* key) {
        seen_.insert(key);
        return t_ ? t_->get(key) : nullptr;
    }

    template <class T>
    T convert(const toml::node& n, const std::string& key) const {
        if constexpr (std::is_same_v<T, bool>) {
            if (auto v = n.value_exact<bool>()) return *v;
            fail(key, "expected a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = n.value_exact<std::string>()) return *v;
            fail(key, "expected a string");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (auto v = n.value_exact<double>()) return *v;
            if (auto v = n.value_exact<std::int64_t>()) return static_cast<double>(*v);
            fail(key, "expected a number");
        } else {
            const auto v = n.value_exact<std::int64_t>();
            if (!v) fail(key, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (*v < 0) fail(key, "must not be negative");
            }
            return static_cast<T>(*v);
        }
    }

    const toml::table* t_;
    std::string name_;
    std::set<std::string> seen_;
};

template <class T>
std::string list(const std::vector<T>& v) {
    std::ostringstream s;
    s << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s << ", ";
        if constexpr (std::is_same_v<T, std::string>)
            s << '"' << v[i] << '"';
        else if constexpr (std::is_floating_point_v<T>)
            s << format_number(v[i]);
        else
            s << v[i];
    }
    s << ']';
    return s.str();
}

const char* boolean(bool b) { return b ? "true" : "false"; }

void read_sinkhorn(Section& s, SinkhornConfig& c) {
    s.get("epsilon_start", c.epsilon_start);
    s.get("epsilon_end", c.epsilon_end);
    s.get("max_iters", c.max_iters);
    s.get("tol", c.tol);
    s.get("relative_to_diameter", c.relative_to_diameter);
}

void apply(ExperimentSpec& spec, const toml::table& root, const std::filesystem::path& base_dir) {
    Section top(&root, "");
    const bool has_seed = root.contains("seed");
    top.get("seed", spec.seed);
    std::string out;
    top.get("out", out);
    if (!out.empty()) spec.out = base_dir / out;
    top.get("threads", spec.threads);

    Section data = top.sub("data");
    data.get_list("shapes", spec.data.shapes);
    data.get("superset_m", spec.data.superset_m);
    data.get("n_points", spec.data.n_points);
    data.get("ref_per_shape", spec.data.ref_per_shape);
    data.get("normalize", spec.data.normalize);
    data.finish();

    Section cp = top.sub("coupling");
    std::string method = to_string(spec.coupling.precompute.method);
    cp.get("method", method);
    spec.coupling.precompute.method = parse_coupling_method(method);
    cp.get("exact_threshold", spec.coupling.precompute.exact_threshold);
    WgfConfig& w = spec.coupling.precompute.wgf;
    cp.get("wgf_iters", w.iters);
    cp.get("wgf_step", w.step);
    cp.get("wgf_stop_ratio", w.stop_ratio);
    cp.get("wgf_block_size", w.block_size);
    cp.get("wgf_patience", w.patience);
    Section sk = cp.sub("sinkhorn");
    read_sinkhorn(sk, w.sinkhorn);
    sk.finish();
    cp.finish();

    Section model = top.sub("model");
    NetConfig& net = spec.model.net;
    model.get("hidden_width", net.hidden_width);
    model.get("depth", net.depth);
    model.get("time_embed_dim", net.time_embed_dim);
    std::string act = to_string(net.activation);
    model.get("activation", act);
    net.activation = parse_activation(act);
    model.get("encoder_hidden_width", spec.model.encoder.hidden_width);
    model.get("latent_dim", spec.model.encoder.latent_dim);
    spec.model.encoder.activation = net.activation;
    model.finish();

    Section tr = top.sub("train");
    TrainConfig& tc = spec.train.base;
    std::string mode = to_string(tc.coupling);
    tr.get("coupling", mode);
    tc.coupling = parse_coupling_mode(mode);
    tr.get("lr", tc.lr);
    tr.get("lr_decay", tc.lr_decay);
    tr.get("lr_decay_every", tc.lr_decay_every);
    tr.get("adam_beta1", tc.adam_beta1);
    tr.get("adam_beta2", tc.adam_beta2);
    tr.get("adam_eps", tc.adam_eps);
    tr.get("ema_decay", tc.ema_decay);
    tr.get("batch_size", tc.batch_size);
    tr.get("total_steps", tc.total_steps);
    tr.get("ot_group_size", tc.ot_group_size);
    tr.get("conditional", tc.conditional);
    tr.get("max_partial", tc.max_partial);
    tr.get_list("betas", spec.train.betas);
    tr.get_list("seeds", spec.train.seeds);
    tr.get("log_every", spec.train.log_every);
    tr.get("checkpoint_every", spec.train.checkpoint_every);
    tr.get("resume", spec.train.resume);
    tr.finish();

    Section sm = top.sub("sample");
    sm.get_list("runs", spec.sample.runs);
    sm.get("count", spec.sample.count);
    sm.get("steps", spec.sample.steps);
    sm.get("trajectories", spec.sample.trajectories);
    sm.finish();

    Section ev = top.sub("eval");
    ev.get_list("runs", spec.eval.runs);
    ev.get_list("steps", spec.eval.steps);
    ev.get("count", spec.eval.count);
    ev.get("with_emd", spec.eval.with_emd);
    ev.finish();

    Section dg = top.sub("diag");
    dg.get_list("runs", spec.diag.runs);
    dg.get("steps", spec.diag.steps);
    dg.get("trajectories", spec.diag.trajectories);
    dg.get("probes", spec.diag.probes);
    dg.get("fd_step", spec.diag.fd_step);
    dg.finish();

    Section bn = top.sub("bench");
    bn.get_list("batch_sizes", spec.bench.batch_sizes);
    bn.get("n", spec.bench.n);
    bn.get("trials", spec.bench.trials);
    bn.get("superset_m", spec.bench.superset_m);
    bn.get("equivariant_max_points", spec.bench.equivariant_max_points);
    std::vector<std::string> shapes;
    bn.get_list("shapes", shapes);
    if (!shapes.empty()) {
        spec.bench.shapes.clear();
        for (const auto& s : shapes) spec.bench.shapes.push_back(parse_shape_kind(s));
    }
    bn.finish();

    top.finish();
    if (!has_seed) throw ConfigError("config: 'seed' is required (or pass --seed)");
}

}  // namespace

void ExperimentSpec::validate() const {
    if (out.empty()) throw ConfigError("config: 'out' is required (or pass --out)");
    if (threads < 0) throw ConfigError("config: threads must be nonnegative");
    if (data.shapes.empty()) throw ConfigError("data.shapes must name at least one shape");
    for (const auto& s : data.shapes) parse_shape_kind(s);
    if (data.n_points < 1 || data.superset_m < data.n_points)
        throw ConfigError("data: need 1 <= n_points <= superset_m");
    if (data.ref_per_shape < 2) throw ConfigError("data.ref_per_shape must be at least 2");
    try {
        coupling.precompute.wgf.sinkhorn.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("coupling.sinkhorn: ") + e.what());
    }
    if (!(coupling.precompute.wgf.step > 0.0)) throw ConfigError("coupling.wgf_step must be positive");
    if (coupling.precompute.wgf.block_size < 2) throw ConfigError("coupling.wgf_block_size must be at least 2");
    model.net.validate();
    train.base.validate();
    if (train.base.conditional && (model.encoder.hidden_width < 1 || model.encoder.latent_dim < 1))
        throw ConfigError("model: encoder sizes must be at least 1");
    if (train.betas.empty()) throw ConfigError("train.betas must not be empty");
    for (double b : train.betas)
        if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("train.betas entries must lie in [0, 1]");
    if (train.seeds.empty()) throw ConfigError("train.seeds must not be empty");
    if (train.log_every < 1 || train.checkpoint_every < 1)
        throw ConfigError("train.log_every and train.checkpoint_every must be at least 1");
    if (sample.steps < 1 || sample.count < 1) throw ConfigError("sample: steps and count must be at least 1");
    if (sample.trajectories > sample.count) throw ConfigError("sample.trajectories must not exceed sample.count");
    if (eval.steps.empty()) throw ConfigError("eval.steps must not be empty");
    for (auto s : eval.steps)
        if (s < 1) throw ConfigError("eval.steps entries must be at least 1");
    if (diag.steps < 2) throw ConfigError("diag.steps must be at least 2");
    if (diag.trajectories < 1 || diag.probes < 1) throw ConfigError("diag: trajectories and probes must be at least 1");
    if (!(diag.fd_step > 0.0)) throw ConfigError("diag.fd_step must be positive");
    if (bench.batch_sizes.empty() || bench.n < 1 || bench.trials < 1 || bench.superset_m < bench.n)
        throw ConfigError("bench: need batch sizes, n >= 1, trials >= 1 and superset_m >= n");
}

std::string ExperimentSpec::to_toml() const {
    std::ostringstream s;
    const auto& p = coupling.precompute;
    const auto& tc = train.base;
    std::vector<std::string> bench_shapes;
    for (auto k : bench.shapes) bench_shapes.push_back(to_string(k));
    s << "seed = " << seed << "\n"
      << "out = \"" << out.generic_string() << "\"\n"
      << "threads = " << threads << "\n"
      << "\n[data]\n"
      << "shapes = " << list(data.shapes) << "\n"
      << "superset_m = " << data.superset_m << "\n"
      << "n_points = " << data.n_points << "\n"
      << "ref_per_shape = " << data.ref_per_shape << "\n"
      << "normalize = " << boolean(data.normalize) << "\n"
      << "\n[coupling]\n"
      << "method = \"" << to_string(p.method) << "\"\n"
      << "exact_threshold = " << p.exact_threshold << "\n"
      << "wgf_iters = " << p.wgf.iters << "\n"
      << "wgf_step = " << format_number(p.wgf.step) << "\n"
      << "wgf_stop_ratio = " << format_number(p.wgf.stop_ratio) << "\n"
      << "wgf_block_size = " << p.wgf.block_size << "\n"
      << "wgf_patience = " << p.wgf.patience << "\n"
      << "\n[coupling.sinkhorn]\n"
      << "epsilon_start = " << format_number(p.wgf.sinkhorn.epsilon_start) << "\n"
      << "epsilon_end = " << format_number(p.wgf.sinkhorn.epsilon_end) << "\n"
      << "max_iters = " << p.wgf.sinkhorn.max_iters << "\n"
      << "tol = " << format_number(p.wgf.sinkhorn.tol) << "\n"
      << "relative_to_diameter = " << boolean(p.wgf.sinkhorn.relative_to_diameter) << "\n"
      << "\n[model]\n"
      << "hidden_width = " << model.net.hidden_width << "\n"
      << "depth = " << model.net.depth << "\n"
      << "time_embed_dim = " << model.net.time_embed_dim << "\n"
      << "activation = \"" << to_string(model.net.activation) << "\"\n"
      << "encoder_hidden_width = " << model.encoder.hidden_width << "\n"
      << "latent_dim = " << model.encoder.latent_dim << "\n"
      << "\n[train]\n"
      << "coupling = \"" << to_string(tc.coupling) << "\"\n"
      << "lr = " << format_number(tc.lr) << "\n"
      << "lr_decay = " << format_number(tc.lr_decay) << "\n"
      << "lr_decay_every = " << tc.lr_decay_every << "\n"
      << "adam_beta1 = " << format_number(tc.adam_beta1) << "\n"
      << "adam_beta2 = " << format_number(tc.adam_beta2) << "\n"
      << "adam_eps = " << format_number(tc.adam_eps) << "\n"
      << "ema_decay = " << format_number(tc.ema_decay) << "\n"
      << "batch_size = " << tc.batch_size << "\n"
      << "total_steps = " << tc.total_steps << "\n"
      << "ot_group_size = " << tc.ot_group_size << "\n"
      << "conditional = " << boolean(tc.conditional) << "\n"
      << "max_partial = " << tc.max_partial << "\n"
      << "betas = " << list(train.betas) << "\n"
      << "seeds = " << list(train.seeds) << "\n"
      << "log_every = " << train.log_every << "\n"
      << "checkpoint_every = " << train.checkpoint_every << "\n"
      << "resume = " << boolean(train.resume) << "\n"
      << "\n[sample]\n"
      << "runs = " << list(sample.runs) << "\n"
      << "count = " << sample.count << "\n"
      << "steps = " << sample.steps << "\n"
      << "trajectories = " << sample.trajectories << "\n"
      << "\n[eval]\n"
      << "runs = " << list(eval.runs) << "\n"
      << "steps = " << list(eval.steps) << "\n"
      << "count = " << eval.count << "\n"
      << "with_emd = " << boolean(eval.with_emd) << "\n"
      << "\n[diag]\n"
      << "runs = " << list(diag.runs) << "\n"
      << "steps = " << diag.steps << "\n"
      << "trajectories = " << diag.trajectories << "\n"
      << "probes = " << diag.probes << "\n"
      << "fd_step = " << format_number(diag.fd_step) << "\n"
      << "\n[bench]\n"
      << "batch_sizes = " << list(bench.batch_sizes) << "\n"
      << "n = " << bench.n << "\n"
      << "trials = " << bench.trials << "\n"
      << "superset_m = " << bench.superset_m << "\n"
      << "equivariant_max_points = " << bench.equivariant_max_points << "\n"
      << "shapes = " << list(bench_shapes) << "\n";
    return s.str();
}

std::string ExperimentSpec::digest() const {
    // Where the outputs go and how many threads run does not change them.
    std::istringstream in(to_toml());
    std::string kept;
    for (std::string line; std::getline(in, line);)
        if (line.rfind("out = ", 0) != 0 && line.rfind("threads = ", 0) != 0) kept += line + "\n";
    return hex64(fnv1a64(kept));
}

ExperimentSpec parse_spec(const std::string& text, const std::filesystem::path& base_dir,
                          const SpecOverrides& overrides) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config syntax error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }
    ExperimentSpec spec;
    if (overrides.seed && !root.contains("seed")) root.insert("seed", static_cast<std::int64_t>(*overrides.seed));
    apply(spec, root, base_dir);
    if (overrides.seed) spec.seed = *overrides.seed;
    if (overrides.out) spec.out = *overrides.out;
    if (overrides.threads) spec.threads = *overrides.threads;
    if (spec.train.seeds.empty()) spec.train.seeds.push_back(spec.seed);
    spec.validate();
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path, const SpecOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str(), path.parent_path(), overrides);
}

}  // namespace pcflow
