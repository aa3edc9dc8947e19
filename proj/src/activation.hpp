#pragma once

#include <cmath>

#include "pcflow/flow_net.hpp"

namespace pcflow::detail {

inline void activate(Activation kind, const RowMat& a, RowMat& out) {
    switch (kind) {
        case Activation::silu:
            out = a.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
            break;
        case Activation::tanh:
            out = a.array().tanh().matrix();
            break;
        case Activation::softplus:
            out = a.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
            break;
    }
}

// Multiplies d by act'(a) in place.
inline void activate_backward(Activation kind, const RowMat& a, RowMat& d) {
    switch (kind) {
        case Activation::silu:
            d.array() *= a.unaryExpr([](double v) {
                              const double s = 1.0 / (1.0 + std::exp(-v));
                              return s * (1.0 + v * (1.0 - s));
                          }).array();
            break;
        case Activation::tanh:
            d.array() *= 1.0 - a.array().tanh().square();
            break;
        case Activation::softplus:
            d.array() *= a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }).array();
            break;
    }
}

}  // namespace pcflow::detail
