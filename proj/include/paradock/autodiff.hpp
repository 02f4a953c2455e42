#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Var is a double plus an index into the thread's active Tape. Vars built
// without an active tape (or from plain doubles) are constants and never
// record anything, so templated numeric code runs unchanged for double and
// Var. Gradients come from a single reverse sweep over the tape.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace paradock::ad {

struct Edge {
    std::int32_t parent;
    double weight;
};

class Tape {
public:
    Tape() { offsets_.push_back(0); }

    std::int32_t new_leaf() { return finish_node(); }

    void add_edge(std::int32_t parent, double weight) { edges_.push_back({parent, weight}); }

    std::int32_t finish_node() {
        offsets_.push_back(edges_.size());
        return static_cast<std::int32_t>(offsets_.size() - 2);
    }

    std::size_t size() const { return offsets_.size() - 1; }
    std::size_t edge_count() const { return edges_.size(); }

    // d(output)/d(node) for every node on the tape.
    std::vector<double> adjoints(std::int32_t output) const;

    void clear() {
        offsets_.assign(1, 0);
        edges_.clear();
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<Edge> edges_;
};

Tape* active_tape() noexcept;

// Installs a tape as the active one for the current thread.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

class Var {
public:
    Var() = default;
    Var(double v) : value_(v) {}  // NOLINT: implicit constant
    Var(int v) : value_(v) {}     // NOLINT

    // Independent variable on the active tape.
    static Var leaf(double v);

    double value() const { return value_; }
    std::int32_t id() const { return id_; }
    bool is_constant() const { return id_ < 0; }

    Var& operator+=(const Var& o);
    Var& operator-=(const Var& o);
    Var& operator*=(const Var& o);
    Var& operator/=(const Var& o);

    // Builds a node from (parent, partial) pairs; constants are dropped.
    static Var unary(double value, const Var& a, double da);
    static Var binary(double value, const Var& a, double da, const Var& b, double db);

private:
    double value_ = 0.0;
    std::int32_t id_ = -1;
    friend class NodeBuilder;
};

// Accumulates parents for a node with many inputs (dot products, custom
// Jacobians) without intermediate nodes.
class NodeBuilder {
public:
    NodeBuilder() : tape_(active_tape()) {}
    void add(const Var& parent, double weight) {
        if (!parent.is_constant() && tape_ != nullptr && weight != 0.0) {
            tape_->add_edge(parent.id(), weight);
            ++count_;
        }
    }
    Var finish(double value) {
        Var out(value);
        if (count_ > 0) out.id_ = tape_->finish_node();
        return out;
    }

private:
    Tape* tape_;
    int count_ = 0;
};

inline double value(double x) { return x; }
inline double value(float x) { return x; }
inline double value(const Var& x) { return x.value(); }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var operator+(const Var& a) { return a; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

Var sqrt(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var log1p(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var abs(const Var& x);
Var tanh(const Var& x);
inline Var abs2(const Var& x) { return x * x; }
inline bool isfinite(const Var& x) { return std::isfinite(x.value()); }
inline bool isnan(const Var& x) { return std::isnan(x.value()); }
inline bool isinf(const Var& x) { return std::isinf(x.value()); }
inline const Var& conj(const Var& x) { return x; }
inline const Var& real(const Var& x) { return x; }
inline Var imag(const Var&) { return Var(0.0); }

using MatrixV = Eigen::Matrix<Var, Eigen::Dynamic, Eigen::Dynamic>;

// a * b with one tape node per output entry.
MatrixV matmul(const MatrixV& a, const MatrixV& b);

// a * b^T with one tape node per output entry.
MatrixV matmul_nt(const MatrixV& a, const MatrixV& b);

}  // namespace paradock::ad

namespace Eigen {

template <>
struct NumTraits<paradock::ad::Var> : NumTraits<double> {
    using Real = paradock::ad::Var;
    using NonInteger = paradock::ad::Var;
    using Nested = paradock::ad::Var;
    using Literal = paradock::ad::Var;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 1,
        AddCost = 3,
        MulCost = 3
    };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<paradock::ad::Var, double, BinaryOp> {
    using ReturnType = paradock::ad::Var;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, paradock::ad::Var, BinaryOp> {
    using ReturnType = paradock::ad::Var;
};

}  // namespace Eigen
