#pragma once

#include <string>
#include <string_view>

#include "pcflow/point_cloud.hpp"

namespace pcflow {

// Synthetic shapes used in place of scanned meshes.
//
//   sphere          unit sphere, uniform by area.
//   torus           ring radius R, tube radius r (default 1, 0.3) around the
//                   z axis, uniform by area: tube angle drawn with density
//                   proportional to R + r cos(theta).
//   box-frame       the 12 edges of an axis-aligned box with half extents
//                   (0.8, 0.5, 0.6), uniform by length.
//   two-gaussians-3d  equal mixture of N((-1,0,0), 0.3^2 I) and N((1,0,0), 0.3^2 I).
enum class ShapeKind { sphere, torus, box_frame, two_gaussians };

struct ShapeParams {
    double torus_major = 1.0;
    double torus_minor = 0.3;
    Point3 box_half_extents{0.8, 0.5, 0.6};
    double gaussian_sigma = 0.3;
    double gaussian_offset = 1.0;
};

/// Throws ConfigError for unknown names.
ShapeKind parse_shape_kind(std::string_view name);
std::string to_string(ShapeKind kind);

PointCloud generate_shape(ShapeKind kind, std::size_t n, Rng& rng, const ShapeParams& params = {});

}  // namespace pcflow
