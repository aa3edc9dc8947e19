#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "pcflow/errors.hpp"
#include "pcflow/shapes.hpp"
#include "pcflow/xyz_io.hpp"

using namespace pcflow;

TEST_CASE("point cloud rejects empty and non-finite input") {
    CHECK_THROWS_AS(PointCloud(std::vector<double>{}), ArgumentError);
    CHECK_THROWS_AS(PointCloud(std::vector<double>{1.0, 2.0}), ArgumentError);
    CHECK_THROWS_AS(PointCloud(std::vector<double>{1.0, NAN, 0.0}), ArgumentError);
    CHECK(PointCloud(std::vector<double>{1.0, 2.0, 3.0}).size() == 1);
}

TEST_CASE("sphere samples lie on the unit sphere") {
    for (std::size_t n : {std::size_t{1000}, std::size_t{1}}) {
        Rng rng(n == 1 ? 7 : 1);
        const PointCloud c = generate_shape(ShapeKind::sphere, n, rng);
        REQUIRE(c.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = std::sqrt(c[i][0] * c[i][0] + c[i][1] * c[i][1] + c[i][2] * c[i][2]);
            CHECK(std::abs(r - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("torus samples are centred and on the surface") {
    Rng rng(2);
    const PointCloud c = generate_shape(ShapeKind::torus, 100000, rng);
    double m[3] = {0, 0, 0};
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (int k = 0; k < 3; ++k) m[k] += c[i][k] / 1e5;
        const double rho = std::hypot(c[i][0], c[i][1]);
        worst = std::max(worst, std::abs(std::hypot(rho - 1.0, c[i][2]) - 0.3));
    }
    for (double v : m) CHECK(std::abs(v) < 0.02);
    CHECK(worst < 1e-9);
}

TEST_CASE("torus tube angle follows the area density") {
    // Area element is proportional to R + r cos(theta): the outer half
    // (cos > 0) carries (pi R + 2r) / (2 pi R) of the mass.
    Rng rng(11);
    const PointCloud c = generate_shape(ShapeKind::torus, 200000, rng);
    std::size_t outer = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (std::hypot(c[i][0], c[i][1]) > 1.0) ++outer;
    const double expect = (M_PI * 1.0 + 2.0 * 0.3) / (2.0 * M_PI * 1.0);
    CHECK(std::abs(static_cast<double>(outer) / c.size() - expect) < 0.005);
}

TEST_CASE("box frame points lie on edges, spread by length") {
    Rng rng(5);
    const PointCloud c = generate_shape(ShapeKind::box_frame, 60000, rng);
    const double h[3] = {0.8, 0.5, 0.6};
    std::size_t along[3] = {0, 0, 0};
    for (std::size_t i = 0; i < c.size(); ++i) {
        int on_face = 0, free_axis = -1;
        for (int k = 0; k < 3; ++k) {
            if (std::abs(std::abs(c[i][k]) - h[k]) < 1e-12) ++on_face;
            else free_axis = k;
            CHECK(std::abs(c[i][k]) <= h[k] + 1e-12);
        }
        CHECK(on_face >= 2);
        if (free_axis >= 0) ++along[free_axis];
    }
    const double total = 2 * (h[0] + h[1] + h[2]);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(along[k] / 60000.0 - 2 * h[k] / total) < 0.01);
}

TEST_CASE("unknown shape name is a configuration error") {
    CHECK_THROWS_AS(parse_shape_kind("cube"), ConfigError);
    CHECK(parse_shape_kind("box-frame") == ShapeKind::box_frame);
    CHECK(parse_shape_kind("two-gaussians-3d") == ShapeKind::two_gaussians);
    CHECK(to_string(ShapeKind::torus) == "torus");
}

TEST_CASE("noise superset moments and determinism") {
    Rng a(3), b(3);
    const Superset s = sample_noise_superset(100000, a);
    CHECK(s.kind == SupersetKind::noise);
    for (int k = 0; k < 3; ++k) {
        double m = 0, v = 0;
        for (std::size_t i = 0; i < s.m(); ++i) m += s.points[i][k];
        m /= s.m();
        for (std::size_t i = 0; i < s.m(); ++i) v += (s.points[i][k] - m) * (s.points[i][k] - m);
        v /= s.m();
        CHECK(std::abs(m) < 0.02);
        CHECK(std::abs(v - 1.0) < 0.02);
        std::vector<double> axis(s.m());
        for (std::size_t i = 0; i < s.m(); ++i) axis[i] = s.points[i][k];
        CHECK(oracle::ks_normal(axis) < 0.01);
    }
    CHECK(sample_noise_superset(100000, b).points == s.points);
    Rng c(4);
    CHECK(sample_noise_superset(1, c).points.all_finite());
}

TEST_CASE("subsample draws distinct rows") {
    Rng rng(9);
    const Superset five{sample_noise(5, rng), SupersetKind::noise};
    auto s = subsample(five, 5, rng);
    std::set<std::size_t> idx(s.indices.begin(), s.indices.end());
    CHECK(idx.size() == 5);
    CHECK(*idx.rbegin() == 4);

    const Superset big{sample_noise(2048, rng), SupersetKind::noise};
    auto all = subsample(big, 2048, rng);
    std::multiset<std::vector<double>> rows_a, rows_b;
    for (std::size_t i = 0; i < 2048; ++i) {
        rows_a.insert({big.points[i][0], big.points[i][1], big.points[i][2]});
        rows_b.insert({all.cloud[i][0], all.cloud[i][1], all.cloud[i][2]});
    }
    CHECK(rows_a == rows_b);

    CHECK_THROWS_AS(subsample(five, 6, rng), ArgumentError);
}

TEST_CASE("single-index subsample is uniform (chi-square, alpha = 0.01)") {
    Rng rng(21);
    const PointCloud src = sample_noise(100, rng);
    std::vector<std::size_t> counts(100, 0);
    for (int r = 0; r < 100000; ++r) ++counts[subsample(src, 1, rng).indices[0]];
    CHECK(oracle::chi_square_uniform(counts) < oracle::chi_square_critical(99, 2.326));
}

TEST_CASE("normalization round trip") {
    Rng rng(1);
    const PointCloud c = generate_shape(ShapeKind::torus, 500, rng);
    CHECK(normalize(c, NormalizationStats{}) == c);
    const PointCloud p(std::vector<double>{1, 2, 3});
    const PointCloud z = normalize(p, {{1, 2, 3}, 2.0});
    for (int k = 0; k < 3; ++k) CHECK(z[0][k] == 0.0);

    const NormalizationStats st{{0.3, -1.2, 4.0}, 2.7};
    const PointCloud back = denormalize(normalize(c, st), st);
    for (std::size_t i = 0; i < c.coords().size(); ++i) CHECK(std::abs(back.coords()[i] - c.coords()[i]) < 1e-9);

    CHECK_THROWS_AS(normalize(c, {{0, 0, 0}, 0.0}), ArgumentError);
    CHECK_THROWS_AS(normalize(c, {{NAN, 0, 0}, 1.0}), ArgumentError);
}

TEST_CASE("xyz round trip and errors") {
    const auto dir = std::filesystem::temp_directory_path() / "pcflow_test_xyz";
    std::filesystem::create_directories(dir);
    const PointCloud c(std::vector<double>{0.1, -2.5e-7, 3.0, 1.0 / 3.0, 2.0, -1e10, 0, 0, 0});
    write_xyz(dir / "a.xyz", c, {"three points"});
    CHECK(read_xyz(dir / "a.xyz") == c);

    { std::ofstream(dir / "empty.xyz"); }
    CHECK_THROWS_WITH_AS(read_xyz(dir / "empty.xyz"), doctest::Contains("empty cloud"), IoError);
    { std::ofstream(dir / "bad.xyz") << "1 2\n"; }
    try {
        read_xyz(dir / "bad.xyz");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
    CHECK_THROWS_AS(parse_xyz("# c\n1 2 3\n4 five 6\n"), ParseError);
    CHECK(parse_xyz("# comment\n\n1 2 3\n").size() == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("rng forks and restores") {
    Rng a(42);
    a.normal();
    Rng b(0);
    b.restore(a.state());
    CHECK(a.normal() == b.normal());
    CHECK(a.fork(1).uniform() == a.fork(1).uniform());
    CHECK(a.fork(1).uniform() != a.fork(2).uniform());
}
