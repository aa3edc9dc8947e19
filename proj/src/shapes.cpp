#include "pcflow/shapes.hpp"

#include <cmath>
#include <numbers>

#include "pcflow/errors.hpp"

namespace pcflow {

ShapeKind parse_shape_kind(std::string_view name) {
    if (name == "sphere") return ShapeKind::sphere;
    if (name == "torus") return ShapeKind::torus;
    if (name == "box-frame") return ShapeKind::box_frame;
    if (name == "two-gaussians-3d") return ShapeKind::two_gaussians;
    throw ConfigError("unknown shape kind '" + std::string(name) + "'");
}

std::string to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::sphere: return "sphere";
        case ShapeKind::torus: return "torus";
        case ShapeKind::box_frame: return "box-frame";
        case ShapeKind::two_gaussians: return "two-gaussians-3d";
    }
    return "unknown";
}

namespace {

Point3 sphere_point(Rng& rng) {
    for (;;) {
        const double x = rng.normal(), y = rng.normal(), z = rng.normal();
        const double r = std::sqrt(x * x + y * y + z * z);
        if (r > 1e-12) return {x / r, y / r, z / r};
    }
}

Point3 torus_point(Rng& rng, double R, double r) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double theta = 0.0;
    // Rejection on the area element (R + r cos theta).
    for (;;) {
        theta = two_pi * rng.uniform();
        if (rng.uniform() * (R + r) <= R + r * std::cos(theta)) break;
    }
    const double phi = two_pi * rng.uniform();
    const double ring = R + r * std::cos(theta);
    return {ring * std::cos(phi), ring * std::sin(phi), r * std::sin(theta)};
}

Point3 box_frame_point(Rng& rng, const Point3& h) {
    // Edges parallel to axis a: four of length 2 h[a].
    const double total = 4.0 * 2.0 * (h[0] + h[1] + h[2]);
    double u = rng.uniform() * total;
    int axis = 0;
    for (; axis < 2; ++axis) {
        const double len = 8.0 * h[axis];
        if (u < len) break;
        u -= len;
    }
    const int edge = static_cast<int>(rng.uniform_index(4));
    const double s = -h[axis] + 2.0 * h[axis] * rng.uniform();
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    Point3 p{};
    p[axis] = s;
    p[a1] = (edge & 1) ? h[a1] : -h[a1];
    p[a2] = (edge & 2) ? h[a2] : -h[a2];
    return p;
}

Point3 two_gaussians_point(Rng& rng, double sigma, double offset) {
    const double cx = rng.uniform() < 0.5 ? -offset : offset;
    return {cx + sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()};
}

}  // namespace

PointCloud generate_shape(ShapeKind kind, std::size_t n, Rng& rng, const ShapeParams& params) {
    if (n == 0) throw ArgumentError("generate_shape: n must be at least 1");
    std::vector<Point3> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        switch (kind) {
            case ShapeKind::sphere: pts.push_back(sphere_point(rng)); break;
            case ShapeKind::torus:
                pts.push_back(torus_point(rng, params.torus_major, params.torus_minor));
                break;
            case ShapeKind::box_frame: pts.push_back(box_frame_point(rng, params.box_half_extents)); break;
            case ShapeKind::two_gaussians:
                pts.push_back(two_gaussians_point(rng, params.gaussian_sigma, params.gaussian_offset));
                break;
        }
    }
    return PointCloud(pts);
}

}  // namespace pcflow
