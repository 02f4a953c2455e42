#include "paradock/autodiff.hpp"

#include <stdexcept>

namespace paradock::ad {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape* active_tape() noexcept { return g_active; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

std::vector<double> Tape::adjoints(std::int32_t output) const {
    std::vector<double> adj(size(), 0.0);
    if (output < 0) return adj;
    adj[output] = 1.0;
    for (std::int64_t node = output; node >= 0; --node) {
        const double a = adj[node];
        if (a == 0.0) continue;
        for (std::size_t e = offsets_[node]; e < offsets_[node + 1]; ++e) {
            adj[edges_[e].parent] += a * edges_[e].weight;
        }
    }
    return adj;
}

Var Var::leaf(double v) {
    Tape* tape = active_tape();
    if (tape == nullptr) throw std::logic_error("Var::leaf requires an active tape");
    Var out(v);
    out.id_ = tape->new_leaf();
    return out;
}

Var Var::unary(double value, const Var& a, double da) {
    NodeBuilder b;
    b.add(a, da);
    return b.finish(value);
}

Var Var::binary(double value, const Var& a, double da, const Var& b, double db) {
    NodeBuilder nb;
    nb.add(a, da);
    nb.add(b, db);
    return nb.finish(value);
}

Var& Var::operator+=(const Var& o) { return *this = *this + o; }
Var& Var::operator-=(const Var& o) { return *this = *this - o; }
Var& Var::operator*=(const Var& o) { return *this = *this * o; }
Var& Var::operator/=(const Var& o) { return *this = *this / o; }

Var operator+(const Var& a, const Var& b) {
    return Var::binary(a.value() + b.value(), a, 1.0, b, 1.0);
}
Var operator-(const Var& a, const Var& b) {
    return Var::binary(a.value() - b.value(), a, 1.0, b, -1.0);
}
Var operator*(const Var& a, const Var& b) {
    return Var::binary(a.value() * b.value(), a, b.value(), b, a.value());
}
Var operator/(const Var& a, const Var& b) {
    const double q = a.value() / b.value();
    return Var::binary(q, a, 1.0 / b.value(), b, -q / b.value());
}
Var operator-(const Var& a) { return Var::unary(-a.value(), a, -1.0); }

Var sqrt(const Var& x) {
    const double s = std::sqrt(x.value());
    return Var::unary(s, x, s > 0.0 ? 0.5 / s : 0.0);
}
Var exp(const Var& x) {
    const double e = std::exp(x.value());
    return Var::unary(e, x, e);
}
Var log(const Var& x) { return Var::unary(std::log(x.value()), x, 1.0 / x.value()); }
Var log1p(const Var& x) { return Var::unary(std::log1p(x.value()), x, 1.0 / (1.0 + x.value())); }
Var sin(const Var& x) { return Var::unary(std::sin(x.value()), x, std::cos(x.value())); }
Var cos(const Var& x) { return Var::unary(std::cos(x.value()), x, -std::sin(x.value())); }
Var abs(const Var& x) {
    const double v = x.value();
    return Var::unary(std::abs(v), x, v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
}
Var tanh(const Var& x) {
    const double t = std::tanh(x.value());
    return Var::unary(t, x, 1.0 - t * t);
}

MatrixV matmul(const MatrixV& a, const MatrixV& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    MatrixV out(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            NodeBuilder nb;
            double acc = 0.0;
            for (Eigen::Index k = 0; k < a.cols(); ++k) {
                const Var& x = a(i, k);
                const Var& y = b(k, j);
                acc += x.value() * y.value();
                nb.add(x, y.value());
                nb.add(y, x.value());
            }
            out(i, j) = nb.finish(acc);
        }
    }
    return out;
}

MatrixV matmul_nt(const MatrixV& a, const MatrixV& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    MatrixV out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            NodeBuilder nb;
            double acc = 0.0;
            for (Eigen::Index k = 0; k < a.cols(); ++k) {
                const Var& x = a(i, k);
                const Var& y = b(j, k);
                acc += x.value() * y.value();
                nb.add(x, y.value());
                nb.add(y, x.value());
            }
            out(i, j) = nb.finish(acc);
        }
    }
    return out;
}

}  // namespace paradock::ad
