#include <benchmark/benchmark.h>

#include <cmath>

#include "pcflow/kernels.hpp"
#include "pcflow/metrics.hpp"
#include "pcflow/shapes.hpp"

using namespace pcflow;

namespace {

struct Clouds {
    PointCloud a, b;
    std::vector<double> g;
};

Clouds make(std::size_t n) {
    Rng rng(1);
    Clouds c{sample_noise(n, rng), generate_shape(ShapeKind::torus, n, rng), std::vector<double>(n)};
    for (double& v : c.g) v = 0.1 * rng.normal();
    return c;
}

template <auto Kernel>
void sq_dist(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const Clouds c = make(n);
    std::vector<double> out(n * n);
    for (auto _ : st) {
        Kernel(c.a.flat(), c.b.flat(), out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n * n));
}

template <auto Kernel>
void softmin(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const Clouds c = make(n);
    std::vector<double> out(n);
    for (auto _ : st) {
        Kernel(c.a.flat(), c.b.flat(), c.g, -std::log(static_cast<double>(n)), 0.05, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n * n));
}

template <auto Kernel>
void barycentric(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const Clouds c = make(n);
    std::vector<double> out(3 * n);
    for (auto _ : st) {
        Kernel(c.a.flat(), c.b.flat(), c.g, 0.05, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n * n));
}

template <auto Kernel>
void nearest(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const Clouds c = make(n);
    std::vector<double> out(n);
    for (auto _ : st) {
        Kernel(c.a.flat(), c.b.flat(), out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n * n));
}

template <auto Kernel>
void chamfer_matrix(benchmark::State& st) {
    const auto k = static_cast<std::size_t>(st.range(0));
    Rng rng(2);
    std::vector<PointCloud> set;
    for (std::size_t i = 0; i < k; ++i) set.push_back(generate_shape(ShapeKind::sphere, 256, rng));
    const kernels::PairDistance d = [](const PointCloud& x, const PointCloud& y) { return chamfer(x, y); };
    std::vector<double> out(k * k);
    for (auto _ : st) {
        Kernel(set, d, out);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(sq_dist<kernels::serial::sq_dist_matrix>)->Name("sq_dist/serial")->Arg(512)->Arg(2048);
BENCHMARK(sq_dist<kernels::omp::sq_dist_matrix>)->Name("sq_dist/omp")->Arg(512)->Arg(2048);
BENCHMARK(softmin<kernels::serial::softmin_rows>)->Name("softmin/serial")->Arg(512)->Arg(2048);
BENCHMARK(softmin<kernels::omp::softmin_rows>)->Name("softmin/omp")->Arg(512)->Arg(2048);
BENCHMARK(barycentric<kernels::serial::barycentric_rows>)->Name("barycentric/serial")->Arg(512)->Arg(2048);
BENCHMARK(barycentric<kernels::omp::barycentric_rows>)->Name("barycentric/omp")->Arg(512)->Arg(2048);
BENCHMARK(nearest<kernels::serial::nearest_sq_dist>)->Name("nearest/serial")->Arg(512)->Arg(4096);
BENCHMARK(nearest<kernels::omp::nearest_sq_dist>)->Name("nearest/omp")->Arg(512)->Arg(4096);
BENCHMARK(chamfer_matrix<kernels::serial::pairwise_cloud_distances>)->Name("chamfer_matrix/serial")->Arg(32);
BENCHMARK(chamfer_matrix<kernels::omp::pairwise_cloud_distances>)->Name("chamfer_matrix/omp")->Arg(32);

BENCHMARK_MAIN();
