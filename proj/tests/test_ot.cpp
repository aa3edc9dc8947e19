#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "pcflow/errors.hpp"
#include "pcflow/ot.hpp"
#include "pcflow/shapes.hpp"

using namespace pcflow;

namespace {

PointCloud random_cloud(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<double> v(3 * n);
    for (double& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
    return PointCloud(std::move(v));
}

}  // namespace

TEST_CASE("cost matrix entries") {
    const PointCloud o(std::vector<double>{0, 0, 0});
    const PointCloud e(std::vector<double>{1, 0, 0});
    CHECK(cost_matrix(o, o).values == std::vector<double>{0.0});
    CHECK(cost_matrix(o, e).values == std::vector<double>{1.0});
    Rng rng(3);
    const PointCloud a = random_cloud(5, rng), b = random_cloud(7, rng);
    const CostMatrix c = cost_matrix(a, b);
    REQUIRE(c.rows == 5);
    REQUIRE(c.cols == 7);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(c(i, j) - oracle::sq(a, i, b, j)) < 1e-12);
}

TEST_CASE("hungarian on structured matrices") {
    const std::size_t n = 6;
    CostMatrix id{n, n, std::vector<double>(n * n, 1.0)};
    for (std::size_t i = 0; i < n; ++i) id(i, i) = 0.0;
    const Assignment a = hungarian(id);
    CHECK(a.total_cost == 0.0);
    for (std::size_t i = 0; i < n; ++i) CHECK(a.perm[i] == i);

    const Assignment ones = hungarian(CostMatrix{3, 3, std::vector<double>(9, 1.0)});
    CHECK(ones.total_cost == 3.0);
    CHECK(ones.perm == std::vector<std::size_t>{0, 1, 2});

    CHECK_THROWS_AS(hungarian(CostMatrix{2, 3, std::vector<double>(6, 0.0)}), ArgumentError);
}

TEST_CASE("hungarian matches exhaustive search on random 7x7") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        CostMatrix c{7, 7, std::vector<double>(49)};
        for (double& v : c.values) v = rng.uniform();
        const Assignment a = hungarian(c);
        CHECK(a.total_cost == doctest::Approx(oracle::brute_force_assignment(c.values, 7)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian beats random permutations and is scale covariant") {
    Rng rng(5);
    const PointCloud a = random_cloud(40, rng), b = random_cloud(40, rng);
    const CostMatrix c = cost_matrix(a, b);
    const Assignment best = hungarian(c);
    std::vector<std::size_t> p(40);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (int r = 0; r < 100; ++r) {
        for (std::size_t i = 39; i > 0; --i) std::swap(p[i], p[rng.uniform_index(i + 1)]);
        CHECK(best.total_cost <= assignment_cost(c, p) + 1e-12);
    }
    std::vector<double> sa(a.coords()), sb(b.coords());
    for (double& v : sa) v *= 3.0;
    for (double& v : sb) v *= 3.0;
    const Assignment scaled = hungarian_points(PointCloud(sa), PointCloud(sb));
    CHECK(scaled.perm == best.perm);
    CHECK(scaled.total_cost == doctest::Approx(9.0 * best.total_cost).epsilon(1e-12));
}

TEST_CASE("hungarian_points agrees with the dense solver") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const PointCloud a = random_cloud(60, rng), b = random_cloud(60, rng);
        CHECK(hungarian_points(a, b).total_cost == doctest::Approx(hungarian(cost_matrix(a, b)).total_cost).epsilon(1e-12));
    }
}

TEST_CASE("exact superset OT") {
    Rng rng(2);
    const Superset one{random_cloud(1, rng), SupersetKind::noise};
    const Superset one_d{random_cloud(1, rng), SupersetKind::data};
    CHECK(exact_superset_ot(one, one_d).perm == std::vector<std::size_t>{0});

    for (int t = 0; t < 20; ++t) {
        const Superset n{random_cloud(6, rng), SupersetKind::noise};
        const Superset d{random_cloud(6, rng), SupersetKind::data};
        CHECK(exact_superset_ot(n, d).total_cost ==
              doctest::Approx(oracle::brute_force_point_assignment(n.points, d.points)).epsilon(1e-12));
    }
    const Superset big{PointCloud::zeros(10001), SupersetKind::noise};
    CHECK_THROWS_WITH_AS(exact_superset_ot(big, big), doctest::Contains("wgf"), ConfigError);
}

TEST_CASE("epsilon schedule halves down to the end value") {
    const auto s = epsilon_schedule(0.5, 0.01);
    CHECK(s.front() == 0.5);
    CHECK(s.back() == 0.01);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) CHECK(s[i] == s[i - 1] / 2);
    CHECK(epsilon_schedule(0.1, 0.1) == std::vector<double>{0.1});
    SinkhornConfig bad;
    bad.epsilon_end = 1.0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("sinkhorn divergence basic properties") {
    Rng rng(4);
    const PointCloud a = random_cloud(30, rng), b = random_cloud(30, rng);
    SinkhornConfig cfg;
    cfg.tol = 1e-11;
    cfg.max_iters = 200000;
    CHECK(std::abs(sinkhorn_divergence(a, a, cfg).value) < 1e-8);
    for (int t = 0; t < 10; ++t) {
        const PointCloud x = random_cloud(25, rng), y = random_cloud(35, rng, 1.5);
        const double sxy = sinkhorn_divergence(x, y, cfg).value;
        CHECK(sxy >= -1e-8);
        CHECK(std::abs(sxy - sinkhorn_divergence(y, x, cfg).value) < 1e-8);
    }
    // A copy under a different point order is the same measure.
    std::vector<double> rev;
    for (std::size_t i = a.size(); i-- > 0;) rev.insert(rev.end(), a[i].begin(), a[i].end());
    CHECK(std::abs(sinkhorn_divergence(a, PointCloud(rev), cfg).value) < 1e-8);
    CHECK(sinkhorn_divergence(a, b, cfg).value > 1e-3);
}

TEST_CASE("sinkhorn divergence gradient matches central differences") {
    Rng rng(12);
    SinkhornConfig cfg;
    cfg.relative_to_diameter = false;
    cfg.epsilon_start = 1.0;
    cfg.epsilon_end = 0.2;
    cfg.tol = 1e-13;
    cfg.max_iters = 100000;
    const double h = 1e-5;
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
        const PointCloud a = random_cloud(10, rng), b = random_cloud(10, rng);
        const SinkhornResult r = sinkhorn_divergence(a, b, cfg);
        CHECK(r.converged);
        for (std::size_t k = 0; k < 30; ++k) {
            std::vector<double> p(a.coords()), m(a.coords());
            p[k] += h;
            m[k] -= h;
            const double fd =
                (sinkhorn_divergence(PointCloud(p), b, cfg).value - sinkhorn_divergence(PointCloud(m), b, cfg).value) /
                (2 * h);
            worst = std::max(worst, oracle::rel_err(fd, r.grad_a[k]));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("wasserstein gradient flow") {
    Rng rng(6);
    const Superset noise = sample_noise_superset(256, rng);
    WgfConfig cfg;
    cfg.iters = 5;
    const WgfResult same = wasserstein_gradient_flow(noise, Superset{noise.points, SupersetKind::data}, cfg);
    for (std::size_t i = 0; i < noise.points.coords().size(); ++i)
        CHECK(std::abs(same.deformed.points.coords()[i] - noise.points.coords()[i]) < 1e-6);

    const Superset target{generate_shape(ShapeKind::sphere, 256, rng), SupersetKind::data};
    cfg.iters = 1;
    const WgfResult one = wasserstein_gradient_flow(noise, target, cfg);
    CHECK(one.history.size() == 2);
    CHECK(one.history[1] < one.history[0]);

    cfg.iters = 60;
    cfg.stop_ratio = 0.0;
    const WgfResult many = wasserstein_gradient_flow(noise, target, cfg);
    for (std::size_t i = 6; i < many.history.size(); ++i) CHECK(many.history[i] <= many.history[i - 1] + 1e-6);

    // Blocked path: every row moves and the result stays aligned with the noise.
    cfg.iters = 10;
    cfg.block_size = 100;
    const WgfResult blocked = wasserstein_gradient_flow(noise, target, cfg);
    CHECK(blocked.history.back() < 0.1 * blocked.history.front());
    CHECK(blocked.deformed.m() == 256);

    CHECK_THROWS_AS(wasserstein_gradient_flow(noise, Superset{sample_noise(10, rng), SupersetKind::data}, cfg),
                    ArgumentError);
}

TEST_CASE("rounded sinkhorn assignment is a bijection bounding the optimum") {
    Rng rng(10);
    const PointCloud a = random_cloud(50, rng), b = random_cloud(50, rng);
    SinkhornConfig cfg;
    cfg.epsilon_end = 1e-3;
    const Assignment r = sinkhorn_rounded_assignment(a, b, cfg);
    std::vector<std::size_t> s(r.perm);
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(s[i] == i);
    const double exact = hungarian_points(a, b).total_cost;
    CHECK(r.total_cost >= exact - 1e-12);
    CHECK(r.total_cost <= 1.5 * exact);
}
