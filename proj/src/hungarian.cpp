#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "pcflow/errors.hpp"
#include "pcflow/kernels.hpp"
#include "pcflow/ot.hpp"

namespace pcflow {

CostMatrix cost_matrix(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw ArgumentError("cost_matrix: empty cloud");
    CostMatrix c{a.size(), b.size(), std::vector<double>(a.size() * b.size())};
    kernels::omp::sq_dist_matrix(a.flat(), b.flat(), c.values);
    return c;
}

namespace {

// Shortest augmenting path assignment (Kuhn-Munkres with row/column
// potentials). Rows are inserted one at a time; each insertion runs a
// Dijkstra-like sweep over columns until a free column is reached.
//
// minv holds reduced path lengths offset by a running `off`, which replaces
// the O(n) "subtract delta from every unused column" step. Used columns are
// masked with +inf through `blocked` so the sweep stays branch-free.
template <class RowFn>
std::vector<std::size_t> solve_square(std::size_t n, RowFn&& row_of) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n, 0.0), v(n, 0.0), minv(n), blocked(n);
    std::vector<std::ptrdiff_t> col_row(n, -1), way(n, -1);
    std::vector<std::size_t> used;
    used.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(blocked.begin(), blocked.end(), 0.0);
        used.clear();
        std::size_t i0 = i;
        std::ptrdiff_t jprev = -1;
        std::size_t jfree = 0;
        double off = 0.0;
        for (;;) {
            const double* c = row_of(i0);
            const double ui = u[i0];
            double* mv = minv.data();
            std::ptrdiff_t* wy = way.data();
            const double* vv = v.data();
            const double* bl = blocked.data();
            for (std::size_t j = 0; j < n; ++j) {
                const double cur = c[j] - ui - vv[j] + bl[j] + off;
                const bool lt = cur < mv[j];
                mv[j] = lt ? cur : mv[j];
                wy[j] = lt ? jprev : wy[j];
            }
            double best = inf;
            std::size_t j1 = n;
            for (std::size_t j = 0; j < n; ++j)
                if (mv[j] < best) {
                    best = mv[j];
                    j1 = j;
                }
            if (j1 == n) throw NumericError("hungarian: no augmenting column (non-finite costs?)");
            const double delta = best - off;
            u[i] += delta;
            for (std::size_t jc : used) {
                u[static_cast<std::size_t>(col_row[jc])] += delta;
                v[jc] -= delta;
            }
            off += delta;
            used.push_back(j1);
            blocked[j1] = inf;
            minv[j1] = inf;
            if (col_row[j1] < 0) {
                jfree = j1;
                break;
            }
            jprev = static_cast<std::ptrdiff_t>(j1);
            i0 = static_cast<std::size_t>(col_row[j1]);
        }
        // Flip the alternating path back to the root row.
        std::size_t j = jfree;
        for (;;) {
            const std::ptrdiff_t jp = way[j];
            if (jp < 0) {
                col_row[j] = static_cast<std::ptrdiff_t>(i);
                break;
            }
            col_row[j] = col_row[static_cast<std::size_t>(jp)];
            j = static_cast<std::size_t>(jp);
        }
    }

    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < n; ++j) perm[static_cast<std::size_t>(col_row[j])] = j;
    return perm;
}

}  // namespace

double assignment_cost(const CostMatrix& cost, const std::vector<std::size_t>& perm) {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += cost(i, perm[i]);
    return total;
}

double assignment_cost(const PointCloud& rows, const PointCloud& cols, const std::vector<std::size_t>& perm) {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += squared_distance(rows[i], cols[perm[i]]);
    return total;
}

Assignment hungarian(const CostMatrix& cost) {
    if (cost.rows != cost.cols)
        throw ArgumentError("hungarian: cost matrix is " + std::to_string(cost.rows) + "x" +
                            std::to_string(cost.cols) + ", expected square");
    if (cost.values.size() != cost.rows * cost.cols) throw ArgumentError("hungarian: malformed cost matrix");
    for (double c : cost.values)
        if (!std::isfinite(c)) throw ArgumentError("hungarian: non-finite cost");
    const std::size_t n = cost.rows;
    Assignment a;
    a.perm = solve_square(n, [&](std::size_t i) { return cost.values.data() + i * n; });
    a.total_cost = assignment_cost(cost, a.perm);
    return a;
}

Assignment hungarian_points(const PointCloud& rows, const PointCloud& cols) {
    if (rows.size() != cols.size())
        throw ArgumentError("hungarian_points: clouds differ in size (" + std::to_string(rows.size()) +
                            " vs " + std::to_string(cols.size()) + ")");
    const std::size_t n = rows.size();
    Eigen::ArrayXd cx(n), cy(n), cz(n), buf(n);
    for (std::size_t j = 0; j < n; ++j) {
        cx[j] = cols[j][0];
        cy[j] = cols[j][1];
        cz[j] = cols[j][2];
    }
    Assignment a;
    a.perm = solve_square(n, [&](std::size_t i) {
        const auto p = rows[i];
        buf = (cx - p[0]).square() + (cy - p[1]).square() + (cz - p[2]).square();
        return static_cast<const double*>(buf.data());
    });
    a.total_cost = assignment_cost(rows, cols, a.perm);
    return a;
}

Assignment exact_superset_ot(const Superset& noise, const Superset& data, std::size_t threshold) {
    if (noise.m() != data.m())
        throw ArgumentError("exact_superset_ot: superset sizes differ (" + std::to_string(noise.m()) + " vs " +
                            std::to_string(data.m()) + ")");
    if (noise.m() > threshold)
        throw ConfigError("superset size " + std::to_string(noise.m()) + " exceeds the exact-OT threshold " +
                          std::to_string(threshold) + "; use method = \"wgf\"");
    return hungarian_points(noise.points, data.points);
}

}  // namespace pcflow
