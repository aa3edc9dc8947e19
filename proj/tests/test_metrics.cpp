#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pcflow/errors.hpp"
#include "pcflow/metrics.hpp"
#include "pcflow/shapes.hpp"

using namespace pcflow;

TEST_CASE("chamfer matches the naive double loop") {
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        const PointCloud a = sample_noise(30 + t, rng), b = generate_shape(ShapeKind::torus, 50, rng);
        CHECK(chamfer(a, b) == doctest::Approx(oracle::naive_chamfer(a, b)).epsilon(1e-12));
        CHECK(chamfer(a, b) == doctest::Approx(chamfer(b, a)).epsilon(1e-12));
    }
    const PointCloud a = sample_noise(10, rng);
    CHECK(chamfer(a, a) == 0.0);
    const PointCloud o(std::vector<double>{0, 0, 0}), e(std::vector<double>{3, 4, 0});
    CHECK(chamfer(o, e) == 50.0);
}

TEST_CASE("emd matches brute force and flags approximation") {
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
        const PointCloud a = sample_noise(7, rng), b = sample_noise(7, rng);
        const EmdResult r = emd(a, b);
        CHECK_FALSE(r.approximate);
        CHECK(r.value == doctest::Approx(oracle::brute_force_point_assignment(a, b) / 7.0).epsilon(1e-12));
    }
    const PointCloud a = sample_noise(40, rng), b = sample_noise(40, rng);
    const EmdResult exact = emd(a, b), approx = emd(a, b, 20);
    CHECK(approx.approximate);
    CHECK(approx.value >= exact.value - 1e-12);
    CHECK_THROWS_AS(emd(a, sample_noise(41, rng)), ArgumentError);
}

TEST_CASE("one-nna on hand-built distance matrices") {
    // Two well separated clusters: perfect classification.
    const std::vector<double> gg{0, 1, 1, 0}, rr{0, 1, 1, 0}, far{9, 9, 9, 9};
    CHECK(one_nna_from(gg, rr, far, 2, 2) == 1.0);
    // Cross distances smaller than within-set distances: all wrong.
    const std::vector<double> near{0.1, 0.1, 0.1, 0.1};
    CHECK(one_nna_from(gg, rr, near, 2, 2) == 0.0);
    // Ties count as incorrect.
    const std::vector<double> tie{1, 1, 1, 1};
    CHECK(one_nna_from(gg, rr, tie, 2, 2) == 0.0);
}

TEST_CASE("one-nna null calibration on i.i.d. halves") {
    Rng rng(3);
    std::vector<PointCloud> gen, ref;
    for (int i = 0; i < 60; ++i) {
        gen.push_back(generate_shape(ShapeKind::sphere, 64, rng));
        ref.push_back(generate_shape(ShapeKind::sphere, 64, rng));
    }
    const double acc = one_nna(gen, ref, DistanceKind::cd);
    CHECK(acc >= 0.40);
    CHECK(acc <= 0.60);

    std::vector<PointCloud> other;
    for (int i = 0; i < 60; ++i) other.push_back(generate_shape(ShapeKind::box_frame, 64, rng));
    CHECK(one_nna(other, ref, DistanceKind::cd) > 0.95);
}

TEST_CASE("coverage") {
    Rng rng(4);
    std::vector<PointCloud> ref;
    for (int i = 0; i < 10; ++i) ref.push_back(sample_noise(20, rng));
    CHECK(coverage(ref, ref, DistanceKind::cd) == 1.0);
    CHECK(coverage(std::span<const PointCloud>(ref).first(1), ref, DistanceKind::cd) == 0.1);
    // Ties resolve to the lowest reference index.
    const std::vector<double> gr{1, 1, 1, 1, 1, 1};
    CHECK(coverage_from(gr, 2, 3) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("curvature needs two steps") {
    Trajectory one;
    one.t = {0.0};
    one.x = {PointCloud(std::vector<double>{0, 0, 0})};
    one.v = one.x;
    CHECK_THROWS_AS(trajectory_curvature(one), ArgumentError);
    Trajectory two = one;
    two.t.push_back(0.5);
    two.x.push_back(one.x[0]);
    two.v.push_back(PointCloud(std::vector<double>{1, 2, 2}));
    CHECK(trajectory_curvature(two).per_step == std::vector<double>{9.0});
}

TEST_CASE("hutchinson jacobian norm of a linear field") {
    // v(x) = A x applied per point; |J|_F^2 = N |A|_F^2.
    const double a[3][3] = {{1.0, 2.0, 0.0}, {0.0, -1.0, 0.5}, {3.0, 0.0, 1.0}};
    double af2 = 0.0;
    for (const auto& row : a)
        for (double v : row) af2 += v * v;
    const VelocityFn field = [&](const PointCloud& x, double) {
        std::vector<double> out(x.coords().size());
        for (std::size_t i = 0; i < x.size(); ++i)
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) out[3 * i + r] += a[r][c] * x[i][c];
        return PointCloud(std::move(out));
    };
    Rng rng(5);
    const PointCloud x = sample_noise(100, rng);
    const double est = jacobian_frobenius(field, x, 0.0, 64, rng);
    CHECK(std::abs(est - std::sqrt(100.0 * af2)) < 0.05 * std::sqrt(100.0 * af2));

    // Estimator variance shrinks with more probes.
    auto spread = [&](std::size_t k) {
        std::vector<double> v;
        for (int r = 0; r < 30; ++r) v.push_back(jacobian_frobenius(field, x, 0.0, k, rng));
        double m = 0.0, s = 0.0;
        for (double e : v) m += e / 30.0;
        for (double e : v) s += (e - m) * (e - m) / 29.0;
        return s;
    };
    CHECK(spread(32) < spread(2));
}

TEST_CASE("evaluation report") {
    Rng rng(6);
    std::vector<PointCloud> gen, ref;
    for (int i = 0; i < 8; ++i) {
        gen.push_back(generate_shape(ShapeKind::sphere, 32, rng));
        ref.push_back(generate_shape(ShapeKind::sphere, 32, rng));
    }
    const EvalReport r = evaluate_sets(gen, ref, 10, true);
    CHECK(r.steps == 10);
    CHECK(r.n_gen == 8);
    CHECK_FALSE(r.emd_approximate);
    CHECK(r.one_nna_emd >= 0.0);
    CHECK(std::isnan(evaluate_sets(gen, ref, 10, false).cov_emd));
    const EvalReport same = evaluate_sets(ref, ref, 1, false);
    CHECK(same.cov_cd == 1.0);
    CHECK(same.one_nna_cd == 0.0);
}
