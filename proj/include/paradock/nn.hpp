#pragma once

// Activations and dense layers shared by the network and its heads,
// templated over double, float and ad::Var.

#include "paradock/autodiff.hpp"

#include <Eigen/Core>

#include <cmath>
#include <type_traits>

namespace paradock::nn {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
inline constexpr bool is_tape_v = std::is_same_v<S, ad::Var>;

inline double sigmoid_value(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus_value(double x) {
    // log(1 + e^x) without overflow
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename S>
S sigmoid(const S& x) {
    if constexpr (is_tape_v<S>) {
        const double s = sigmoid_value(x.value());
        return ad::Var::unary(s, x, s * (1.0 - s));
    } else {
        return static_cast<S>(sigmoid_value(x));
    }
}

template <typename S>
S silu(const S& x) {
    if constexpr (is_tape_v<S>) {
        const double v = x.value();
        const double s = sigmoid_value(v);
        return ad::Var::unary(v * s, x, s * (1.0 + v * (1.0 - s)));
    } else {
        return static_cast<S>(x * sigmoid_value(x));
    }
}

template <typename S>
S softplus(const S& x) {
    if constexpr (is_tape_v<S>) {
        return ad::Var::unary(softplus_value(x.value()), x, sigmoid_value(x.value()));
    } else {
        return static_cast<S>(softplus_value(x));
    }
}

// Y = X W^T + 1 b^T; W is (out x in), b is (1 x out) or empty.
template <typename S>
MatX<S> linear(const MatX<S>& X, const MatX<S>& W, const MatX<S>& b) {
    if constexpr (is_tape_v<S>) {
        MatX<S> out(X.rows(), W.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            for (Eigen::Index o = 0; o < W.rows(); ++o) {
                ad::NodeBuilder nb;
                double acc = 0.0;
                for (Eigen::Index k = 0; k < X.cols(); ++k) {
                    const ad::Var& x = X(i, k);
                    const ad::Var& w = W(o, k);
                    acc += x.value() * w.value();
                    nb.add(x, w.value());
                    nb.add(w, x.value());
                }
                if (b.size() > 0) {
                    acc += b(0, o).value();
                    nb.add(b(0, o), 1.0);
                }
                out(i, o) = nb.finish(acc);
            }
        }
        return out;
    } else {
        MatX<S> out = X * W.transpose();
        if (b.size() > 0) out.rowwise() += b.row(0);
        return out;
    }
}

template <typename S>
MatX<S> silu(const MatX<S>& X) {
    return X.unaryExpr([](const S& x) { return silu(x); });
}

// Linear -> SiLU -> Linear
template <typename S>
MatX<S> fc(const MatX<S>& X, const MatX<S>& W1, const MatX<S>& b1, const MatX<S>& W2, const MatX<S>& b2) {
    return linear<S>(silu<S>(linear<S>(X, W1, b1)), W2, b2);
}

// Sum over rows as one tape node per column.
template <typename S>
MatX<S> column_sum(const MatX<S>& X) {
    if constexpr (is_tape_v<S>) {
        MatX<S> out(1, X.cols());
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            ad::NodeBuilder nb;
            double acc = 0.0;
            for (Eigen::Index r = 0; r < X.rows(); ++r) {
                acc += X(r, c).value();
                nb.add(X(r, c), 1.0);
            }
            out(0, c) = nb.finish(acc);
        }
        return out;
    } else {
        return X.colwise().sum();
    }
}

template <typename S>
MatX<S> column_mean(const MatX<S>& X) {
    MatX<S> sum = column_sum<S>(X);
    const S inv = static_cast<S>(1.0 / static_cast<double>(X.rows()));
    for (Eigen::Index c = 0; c < sum.cols(); ++c) sum(0, c) = sum(0, c) * inv;
    return sum;
}

}  // namespace paradock::nn
