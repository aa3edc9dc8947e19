#include "pcflow/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pcflow/errors.hpp"
#include "pcflow/experiment.hpp"
#include "pcflow/kernels.hpp"
#include "pcflow/xyz_io.hpp"

namespace pcflow {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
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

std::vector<std::string> comments(const ExperimentSpec& spec, const std::string& command) {
    std::vector<std::string> out;
    std::istringstream in(provenance_header(spec, command));
    for (std::string line; std::getline(in, line);) out.push_back(line.substr(2));
    return out;
}

bool cache_is_current(const fs::path& path, const ExperimentSpec& spec, const std::string& id, std::uint64_t digest,
                      std::ostream& log) {
    if (!fs::exists(path)) return false;
    const auto h = probe_coupling_cache(path);
    if (!h) {
        log << "warning: coupling cache " << path.string() << " is corrupt, recomputing\n";
        return false;
    }
    if (h->digest != digest || h->shape_id != id || h->m != spec.data.superset_m ||
        h->method != spec.coupling.precompute.method) {
        log << "coupling cache " << path.string() << " is stale, recomputing\n";
        return false;
    }
    try {
        read_coupling_cache(path);
    } catch (const IoError& e) {
        log << "warning: " << e.what() << ", recomputing\n";
        return false;
    }
    return true;
}

}  // namespace

void cmd_gen_data(const ExperimentSpec& spec, std::ostream& log) {
    const Dataset d = generate_dataset(spec);
    write_dataset(spec, d);
    log << "gen-data: " << d.raw.size() << " shapes x " << spec.data.superset_m << " points, " << d.reference.size()
        << " reference clouds -> " << (spec.out / "data").string() << "\n";
}

void cmd_precompute(const ExperimentSpec& spec, std::ostream& log) {
    const PrecomputeConfig& pc = spec.coupling.precompute;
    if (pc.method == CouplingMethod::exact_hungarian && spec.data.superset_m > pc.exact_threshold)
        throw ConfigError("precompute: superset_m = " + std::to_string(spec.data.superset_m) +
                          " exceeds the exact-OT threshold " + std::to_string(pc.exact_threshold) +
                          "; set coupling.method = \"wgf\"");
    const Dataset d = load_dataset(spec);
    const std::uint64_t digest = coupling_digest(spec);
    for (std::size_t s = 0; s < d.shape_ids.size(); ++s) {
        const std::string& id = d.shape_ids[s];
        const fs::path path = coupling_path(spec, id);
        if (cache_is_current(path, spec, id, digest, log)) {
            log << "precompute " << id << ": skipped (cache " << path.string() << " is current)\n";
            continue;
        }
        Rng rng(coupling_seed(spec, s));
        const Superset data{normalize(d.raw[s].points, d.stats), SupersetKind::data};
        const SupersetCoupling c = precompute_superset_coupling(data, pc, rng, id, digest);
        fs::create_directories(path.parent_path());
        write_coupling_cache(path, c);
        log << "precompute " << id << ": " << to_string(pc.method) << " M=" << c.m() << " mean cost "
            << num(flat_cost(c.x0_rows, c.x1_rows) / static_cast<double>(c.m())) << " -> " << path.string() << "\n";
    }
}

void cmd_train(const ExperimentSpec& spec, std::ostream& log) {
    const Dataset d = load_dataset(spec);
    for (const RunId& run : planned_runs(spec)) {
        train_run(spec, run, d, log);
        log << "train " << run.name << ": checkpoint " << (run_dir(spec, run.name) / "model.ckpt").string() << "\n";
    }
}

void cmd_sample(const ExperimentSpec& spec, std::ostream& log) {
    std::optional<Dataset> data;
    for (const std::string& run : resolve_runs(spec, spec.sample.runs)) {
        const Checkpoint ck = load_run(spec, run);
        const FlowModel model{ck.net.cfg, ck.net.ema};
        const fs::path dir = spec.out / "samples" / run;
        fs::create_directories(dir);
        Rng rng(mix_seed(spec.seed, 0x5a3b));
        std::vector<double> cond;
        auto header = comments(spec, "sample");
        header.push_back("run " + run);
        if (ck.encoder) {
            if (!data) data = load_dataset(spec);
            PointCloud partial;
            cond = completion_condition(ck, data->reference.front(), spec.train.base.max_partial, rng, &partial);
            write_xyz(dir / "partial.xyz", partial, header);
        }
        std::vector<PointCloud> starts;
        for (std::size_t i = 0; i < spec.sample.count; ++i) starts.push_back(sample_noise(spec.data.n_points, rng));
        std::vector<Trajectory> trajs;
        for (std::size_t lo = 0; lo < starts.size(); lo += 32) {
            const std::size_t len = std::min<std::size_t>(32, starts.size() - lo);
            const bool record = lo < spec.sample.trajectories;
            auto res = euler_sample_batch(model, std::span<const PointCloud>(starts.data() + lo, len), spec.sample.steps,
                                          cond, record, &ck.meta.normalization);
            for (std::size_t i = 0; i < len; ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "sample_%04zu.xyz", lo + i);
                write_xyz(dir / name, res[i].final, header);
                if (record && lo + i < spec.sample.trajectories) trajs.push_back(std::move(res[i].traj));
            }
        }
        if (!trajs.empty()) write_trajectories(dir / "trajectories.bin", trajs);
        log << "sample " << run << ": " << spec.sample.count << " clouds, T=" << spec.sample.steps << ", "
            << trajs.size() << " trajectories -> " << dir.string() << "\n";
    }
}

void cmd_eval(const ExperimentSpec& spec, std::ostream& log) {
    const Dataset d = load_dataset(spec);
    std::string csv = provenance_header(spec, "eval") +
                      "run,steps,n_gen,n_ref,one_nna_cd,cov_cd,one_nna_emd,cov_emd,emd_approximate\n";
    for (const std::string& run : resolve_runs(spec, spec.eval.runs)) {
        const Checkpoint ck = load_run(spec, run);
        for (const EvalReport& r : evaluate_checkpoint(spec, ck, d)) {
            csv += run + "," + std::to_string(r.steps) + "," + std::to_string(r.n_gen) + "," + std::to_string(r.n_ref) +
                   "," + num(r.one_nna_cd) + "," + num(r.cov_cd) + "," + num(r.one_nna_emd) + "," + num(r.cov_emd) +
                   "," + (r.emd_approximate ? "1" : "0") + "\n";
            log << "eval " << run << " T=" << r.steps << ": 1-NNA-CD " << r.one_nna_cd << " COV-CD " << r.cov_cd << "\n";
        }
    }
    write_csv(spec.out / "eval" / "eval.csv", csv);
}

void cmd_diag(const ExperimentSpec& spec, std::ostream& log) {
    const fs::path dir = spec.out / "diag";
    std::string summary = provenance_header(spec, "diag") +
                          "run,trajectories,steps,mean_max_curvature,jacobian_t0_0.1,jacobian_t0.9_1\n";
    for (const std::string& run : resolve_runs(spec, spec.diag.runs)) {
        const DiagResult r = diagnose_checkpoint(spec, load_run(spec, run));
        std::string curv = provenance_header(spec, "diag") + "# run " + run + "\nstep,t,curvature\n";
        for (std::size_t i = 0; i < r.curvature.size(); ++i)
            curv += std::to_string(i) + "," + num(r.t[i]) + "," + num(r.curvature[i]) + "\n";
        write_csv(dir / (run + "_curvature.csv"), curv);
        std::string jac = provenance_header(spec, "diag") + "# run " + run + "\nstep,t,jacobian_frobenius\n";
        for (std::size_t i = 0; i < r.jacobian.size(); ++i)
            jac += std::to_string(i) + "," + num(r.t[i]) + "," + num(r.jacobian[i]) + "\n";
        write_csv(dir / (run + "_jacobian.csv"), jac);
        const double early = mean_over_window(r, 0.0, 0.1), late = mean_over_window(r, 0.9, 1.0);
        summary += run + "," + std::to_string(spec.diag.trajectories) + "," + std::to_string(spec.diag.steps) + "," +
                   num(r.mean_max_curvature) + "," + num(early) + "," + num(late) + "\n";
        log << "diag " << run << ": mean max curvature " << r.mean_max_curvature << ", jacobian early " << early
            << " late " << late << "\n";
    }
    write_csv(dir / "summary.csv", summary);
}

void cmd_bench_coupling(const ExperimentSpec& spec, std::ostream& log) {
    Rng rng(mix_seed(spec.seed, 0xbe7c));
    const BenchReport r = bench_couplings(spec.bench, rng);
    std::string csv = provenance_header(spec, "bench-coupling");
    csv += "# ordering_held " + std::string(r.ordering_held ? "true" : "false") + " over " +
           std::to_string(r.ordering_batches) + " batches\n";
    csv += "method,B,N,mean_cost,reduction_pct,seconds,note\n";
    for (const BenchRow& row : r.rows) {
        csv += row.method + "," + std::to_string(row.batch) + "," + std::to_string(row.n) + "," + num(row.mean_cost) +
               "," + num(row.reduction_pct) + "," + num(row.seconds) + "," + row.note + "\n";
        log << "bench " << row.method << " B=" << row.batch << ": reduction " << row.reduction_pct << "%"
            << (row.note.empty() ? "" : " (" + row.note + ")") << "\n";
    }
    write_csv(spec.out / "bench" / "coupling.csv", csv);
    if (!r.ordering_held) log << "warning: cost ordering equivariant <= minibatch <= independent was violated\n";
}

void run_command(const std::string& name, const ExperimentSpec& spec, std::ostream& log) {
    kernels::set_num_threads(spec.threads);
    if (name == "gen-data") return cmd_gen_data(spec, log);
    if (name == "precompute") return cmd_precompute(spec, log);
    if (name == "train") return cmd_train(spec, log);
    if (name == "sample") return cmd_sample(spec, log);
    if (name == "eval") return cmd_eval(spec, log);
    if (name == "diag") return cmd_diag(spec, log);
    if (name == "bench-coupling") return cmd_bench_coupling(spec, log);
    throw ConfigError("unknown command '" + name + "'");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) return 2;
    if (dynamic_cast<const NumericError*>(&e)) return 3;
    if (dynamic_cast<const IoError*>(&e)) return 4;
    return 1;
}

}  // namespace pcflow
