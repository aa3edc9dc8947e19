#include "pcflow/experiment.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "pcflow/digest.hpp"
#include "pcflow/errors.hpp"
#include "pcflow/xyz_io.hpp"

namespace pcflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path data_dir(const ExperimentSpec& spec) { return spec.out / "data"; }

std::vector<std::string> header_comments(const ExperimentSpec& spec, const std::string& command) {
    std::vector<std::string> out;
    std::istringstream in(provenance_header(spec, command));
    for (std::string line; std::getline(in, line);) out.push_back(line.substr(2));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

TrainConfig run_config(const ExperimentSpec& spec, const RunId& run) {
    TrainConfig c = spec.train.base;
    c.beta = run.beta;
    c.seed = run.seed;
    c.n_points = spec.data.n_points;
    return c;
}

}  // namespace

std::vector<double> completion_condition(const Checkpoint& ck, const PointCloud& raw, std::size_t max_partial, Rng& rng,
                                         PointCloud* partial) {
    if (!ck.encoder) throw ArgumentError("completion_condition: checkpoint has no encoder");
    const PointCloud x = normalize(raw, ck.meta.normalization);
    const PartialObservation obs = make_partial(x, random_crop(x, rng), max_partial, rng);
    if (partial) *partial = denormalize(obs.points, ck.meta.normalization);
    return encode_partial(ck.encoder->cfg, ck.encoder->ema, obs);
}

std::string provenance_header(const ExperimentSpec& spec, const std::string& command) {
    std::ostringstream s;
    s << "# pcflow " << command << "\n# digest " << spec.digest() << "\n# seed " << spec.seed << "\n";
    std::istringstream cfg(spec.to_toml());
    for (std::string line; std::getline(cfg, line);)
        if (!line.empty()) s << "# config " << line << "\n";
    return s.str();
}

Dataset generate_dataset(const ExperimentSpec& spec) {
    Dataset d;
    const Rng root(spec.seed);
    for (std::size_t s = 0; s < spec.data.shapes.size(); ++s) {
        const ShapeKind kind = parse_shape_kind(spec.data.shapes[s]);
        d.shape_ids.push_back(spec.data.shapes[s]);
        Rng dense = root.fork(100 + s);
        d.raw.push_back({generate_shape(kind, spec.data.superset_m, dense), SupersetKind::data});
        Rng held_out = root.fork(200 + s);
        for (std::size_t r = 0; r < spec.data.ref_per_shape; ++r)
            d.reference.push_back(generate_shape(kind, spec.data.n_points, held_out));
    }
    if (spec.data.normalize) {
        std::vector<PointCloud> clouds;
        for (const auto& s : d.raw) clouds.push_back(s.points);
        d.stats = compute_normalization(clouds);
    }
    return d;
}

void write_dataset(const ExperimentSpec& spec, const Dataset& data) {
    const fs::path dir = data_dir(spec);
    fs::create_directories(dir);
    auto comments = header_comments(spec, "gen-data");
    for (std::size_t s = 0; s < data.raw.size(); ++s) write_xyz(dir / (data.shape_ids[s] + ".xyz"), data.raw[s].points, comments);

    std::vector<double> stacked;
    for (const auto& c : data.reference) stacked.insert(stacked.end(), c.coords().begin(), c.coords().end());
    auto ref_comments = comments;
    ref_comments.push_back("clouds " + std::to_string(data.reference.size()));
    ref_comments.push_back("points " + std::to_string(spec.data.n_points));
    write_xyz(dir / "reference.xyz", PointCloud(std::move(stacked)), ref_comments);

    const json j = {{"digest", spec.digest()},
                    {"seed", spec.seed},
                    {"global_mean", data.stats.global_mean},
                    {"global_scale", data.stats.global_scale},
                    {"shapes", data.shape_ids}};
    write_text(dir / "normalization.json", j.dump(2) + "\n");
}

Dataset load_dataset(const ExperimentSpec& spec) {
    const fs::path dir = data_dir(spec);
    Dataset d;
    for (const auto& id : spec.data.shapes) {
        const fs::path p = dir / (id + ".xyz");
        if (!fs::exists(p)) throw IoError("missing dataset file " + p.string() + " (run gen-data first)");
        PointCloud c = read_xyz(p);
        if (c.size() != spec.data.superset_m)
            throw IoError(p.string() + " holds " + std::to_string(c.size()) + " points but the config asks for " +
                          std::to_string(spec.data.superset_m) + " (rerun gen-data)");
        d.shape_ids.push_back(id);
        d.raw.push_back({std::move(c), SupersetKind::data});
    }
    const fs::path rp = dir / "reference.xyz";
    if (!fs::exists(rp)) throw IoError("missing dataset file " + rp.string() + " (run gen-data first)");
    const PointCloud ref = read_xyz(rp);
    const std::size_t n = spec.data.n_points;
    if (ref.size() % n != 0 || ref.size() / n != spec.data.ref_per_shape * spec.data.shapes.size())
        throw IoError(rp.string() + " does not match the configured reference set (rerun gen-data)");
    for (std::size_t k = 0; k < ref.size() / n; ++k)
        d.reference.emplace_back(std::vector<double>(ref.coords().begin() + 3 * n * k, ref.coords().begin() + 3 * n * (k + 1)));

    const fs::path np = dir / "normalization.json";
    try {
        const json j = json::parse(read_text(np));
        d.stats.global_mean = j.at("global_mean").get<Point3>();
        d.stats.global_scale = j.at("global_scale").get<double>();
    } catch (const json::exception& e) {
        throw IoError("malformed " + np.string() + ": " + e.what());
    }
    return d;
}

fs::path coupling_path(const ExperimentSpec& spec, const std::string& shape_id) {
    return spec.out / "couplings" / (shape_id + ".pcsc");
}

std::uint64_t coupling_digest(const ExperimentSpec& spec) {
    const std::string all = spec.to_toml();
    const auto lo = all.find("\n[data]\n"), hi = all.find("\n[model]\n");
    return fnv1a64("seed = " + std::to_string(spec.seed) + "\n" + all.substr(lo, hi - lo));
}

std::uint64_t coupling_seed(const ExperimentSpec& spec, std::size_t shape_index) {
    return mix_seed(spec.seed, 300 + shape_index);
}

std::vector<SupersetCoupling> load_couplings(const ExperimentSpec& spec, const Dataset& data) {
    std::vector<SupersetCoupling> out;
    const std::uint64_t digest = coupling_digest(spec);
    for (const auto& id : data.shape_ids) {
        const fs::path p = coupling_path(spec, id);
        SupersetCoupling c = read_coupling_cache(p);
        if (c.digest != digest || c.shape_id != id)
            throw IoError("coupling cache " + p.string() + " was built for a different config (rerun precompute)");
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<RunId> planned_runs(const ExperimentSpec& spec) {
    std::vector<RunId> runs;
    const auto mode = spec.train.base.coupling;
    if (mode == CouplingMode::superset) {
        for (double b : spec.train.betas)
            for (auto s : spec.train.seeds) runs.push_back({"superset_b" + format_number(b) + "_s" + std::to_string(s), b, s});
    } else {
        for (auto s : spec.train.seeds) runs.push_back({to_string(mode) + "_s" + std::to_string(s), 0.0, s});
    }
    return runs;
}

fs::path run_dir(const ExperimentSpec& spec, const std::string& run) { return spec.out / "train" / run; }

std::vector<StepStats> train_run(const ExperimentSpec& spec, const RunId& run, const Dataset& data, std::ostream& log) {
    const TrainConfig cfg = run_config(spec, run);
    TrainingData td;
    for (const auto& s : data.raw) td.shapes.push_back({normalize(s.points, data.stats), SupersetKind::data});
    if (cfg.coupling == CouplingMode::superset) td.couplings = load_couplings(spec, data);

    const fs::path dir = run_dir(spec, run.name);
    const fs::path state_path = dir / "train.state", loss_path = dir / "loss.csv", ckpt_path = dir / "model.ckpt";
    fs::create_directories(dir);

    std::vector<std::string> rows;
    std::optional<TrainState> state;
    if (spec.train.resume && fs::exists(state_path)) {
        state = load_train_state(state_path);
        NetConfig want = spec.model.net;
        if (cfg.conditional) want.cond_dim = spec.model.encoder.latent_dim;
        if (!(state->net.cfg == want) || state->rng.seed() != Rng(cfg.seed).fork(2).seed())
            throw ConfigError("training state " + state_path.string() + " does not match the configured network");
        // Keep logged rows up to the saved step.
        std::istringstream in(fs::exists(loss_path) ? read_text(loss_path) : "");
        for (std::string line; std::getline(in, line);) {
            if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
            if (std::stoull(line.substr(0, line.find(','))) > state->net.step) break;
            rows.push_back(line);
        }
        log << "train " << run.name << ": resuming at step " << state->net.step << "\n";
    } else {
        state = init_train_state(cfg, spec.model.net, spec.model.encoder);
    }

    const CheckpointMeta meta{run.seed, data.stats, spec.digest()};
    auto flush = [&] {
        std::string csv = provenance_header(spec, "train") + "# run " + run.name + "\nstep,loss,lr,grad_norm\n";
        for (const auto& r : rows) csv += r + "\n";
        save_train_state(state_path, *state);
        write_text(loss_path, csv);
        save_checkpoint(ckpt_path, state->net, state->encoder ? &*state->encoder : nullptr, meta);
    };

    std::vector<StepStats> logged;
    if (state->net.step >= cfg.total_steps) {
        log << "train " << run.name << ": already at step " << state->net.step << ", skipped\n";
        if (!fs::exists(ckpt_path)) flush();
        return logged;
    }
    const std::size_t report_every = std::max<std::size_t>(1, cfg.total_steps / 10);
    train(*state, cfg, td, [&](const StepStats& st, const TrainState&) {
        if (st.step % spec.train.log_every == 0 || st.step == cfg.total_steps) {
            rows.push_back(std::to_string(st.step) + "," + g17(st.loss) + "," + g17(st.lr) + "," + g17(st.grad_norm));
            logged.push_back(st);
        }
        if (st.step % report_every == 0) log << "train " << run.name << ": step " << st.step << " loss " << st.loss << "\n";
        if (st.step % spec.train.checkpoint_every == 0 && st.step != cfg.total_steps) flush();
    });
    flush();
    return logged;
}

std::vector<std::string> resolve_runs(const ExperimentSpec& spec, const std::vector<std::string>& selected) {
    if (!selected.empty()) return selected;
    std::vector<std::string> out;
    for (const auto& r : planned_runs(spec)) out.push_back(r.name);
    return out;
}

Checkpoint load_run(const ExperimentSpec& spec, const std::string& run) {
    const fs::path p = run_dir(spec, run) / "model.ckpt";
    if (!fs::exists(p)) throw IoError("missing checkpoint " + p.string() + " (run train first)");
    return load_checkpoint(p);
}

std::vector<EvalReport> evaluate_checkpoint(const ExperimentSpec& spec, const Checkpoint& ck, const Dataset& data) {
    const FlowModel model{ck.net.cfg, ck.net.ema};
    const std::size_t count = spec.eval.count ? spec.eval.count : data.reference.size();
    const std::size_t n = spec.data.n_points;
    std::vector<EvalReport> out;
    for (std::size_t steps : spec.eval.steps) {
        Rng rng(mix_seed(spec.seed, 0xe7a1));
        std::vector<PointCloud> gen;
        if (ck.encoder) {
            // Completion: one sample per reference cloud, conditioned on a crop of it.
            for (std::size_t i = 0; i < count; ++i) {
                const auto cond = completion_condition(ck, data.reference[i % data.reference.size()],
                                                       spec.train.base.max_partial, rng, nullptr);
                gen.push_back(euler_sample(model, sample_noise(n, rng), steps, cond, false, &ck.meta.normalization).final);
            }
        } else {
            gen = generate_set(model, count, n, steps, rng, {}, &ck.meta.normalization);
        }
        out.push_back(evaluate_sets(gen, data.reference, steps, spec.eval.with_emd));
    }
    return out;
}

DiagResult diagnose_checkpoint(const ExperimentSpec& spec, const Checkpoint& ck) {
    if (ck.encoder) throw ConfigError("diag: conditional checkpoints are not supported");
    const FlowModel model{ck.net.cfg, ck.net.ema};
    const std::size_t n = spec.data.n_points, k = spec.diag.trajectories, steps = spec.diag.steps;
    Rng rng(mix_seed(spec.seed, 0xd1a9));
    std::vector<PointCloud> starts;
    for (std::size_t i = 0; i < k; ++i) starts.push_back(sample_noise(n, rng));
    const auto res = euler_sample_batch(model, starts, steps);

    DiagResult d;
    d.t = res[0].traj.t;
    d.curvature.assign(steps - 1, 0.0);
    d.jacobian.assign(steps, 0.0);
    for (const auto& r : res) {
        const CurvatureResult c = trajectory_curvature(r.traj);
        for (std::size_t i = 0; i + 1 < steps; ++i) d.curvature[i] += c.per_step[i] / static_cast<double>(k);
        d.max_curvature.push_back(c.max);
        d.mean_max_curvature += c.max / static_cast<double>(k);
    }
    const VelocityFn field = [&](const PointCloud& x, double t) { return forward(model.cfg, model.weights, x, t); };
    Rng probe(mix_seed(spec.seed, 0x7ac0));
    for (std::size_t s = 0; s < steps; ++s)
        for (const auto& r : res)
            d.jacobian[s] += jacobian_frobenius(field, r.traj.x[s], r.traj.t[s], spec.diag.probes, probe, spec.diag.fd_step) /
                             static_cast<double>(k);
    return d;
}

double mean_over_window(const DiagResult& d, double lo, double hi) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < d.t.size(); ++i)
        if (d.t[i] >= lo - 1e-12 && d.t[i] <= hi + 1e-12) {
            s += d.jacobian[i];
            ++c;
        }
    if (c == 0) return std::numeric_limits<double>::quiet_NaN();
    return s / static_cast<double>(c);
}

}  // namespace pcflow
