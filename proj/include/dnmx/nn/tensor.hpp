#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dnmx::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

/// Storage aligned to Eigen's widest packet. Vectorized reductions peel a
/// scalar head up to the first aligned element, so their summation order
/// (and last-bit results) would otherwise depend on where the allocator put
/// the buffer.
using DVec = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major 2-D array of doubles. Vectors are 1×n.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    DVec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    std::size_t size() const { return data.size(); }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    MapMat map() { return MapMat(data.data(), static_cast<long>(rows), static_cast<long>(cols)); }
    CMapMat map() const { return CMapMat(data.data(), static_cast<long>(rows), static_cast<long>(cols)); }
    bool operator==(const Matrix&) const = default;
};

/// A trainable tensor: value plus accumulated gradient.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;

    Param() = default;
    Param(std::string n, std::size_t rows, std::size_t cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

class Tape;

struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    double* v = nullptr;
    double* g = nullptr;
    DVec own_v;
    DVec own_g;
    bool needs_grad = false;
    std::function<void()> backward;
};

/// Handle to a recorded value. Cheap to copy; valid while its tape lives.
class Var {
public:
    Var() = default;
    Var(Node* n, Tape* t) : n_(n), t_(t) {}

    std::size_t rows() const { return n_->rows; }
    std::size_t cols() const { return n_->cols; }
    std::size_t size() const { return n_->rows * n_->cols; }
    bool needs_grad() const { return n_->needs_grad; }
    bool valid() const { return n_ != nullptr; }

    double* data() const { return n_->v; }
    double* grad() const { return n_->g; }
    double item() const { return n_->v[0]; }
    double at(std::size_t r, std::size_t c) const { return n_->v[r * n_->cols + c]; }
    MapMat val() const { return MapMat(n_->v, static_cast<long>(n_->rows), static_cast<long>(n_->cols)); }
    MapMat gmat() const { return MapMat(n_->g, static_cast<long>(n_->rows), static_cast<long>(n_->cols)); }
    Matrix to_matrix() const;

    Node* node() const { return n_; }
    Tape& tape() const { return *t_; }

private:
    Node* n_ = nullptr;
    Tape* t_ = nullptr;
};

/// Records the computation of one forward pass. backward() walks the nodes
/// in reverse creation order; parameter gradients accumulate into Param::grad.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Var constant(const Matrix& m);
    Var constant(std::size_t rows, std::size_t cols, std::vector<double> data);
    /// Leaf bound to the parameter's storage (no copy).
    Var param(Param& p);
    /// Fresh node; needs_grad is true when any listed parent needs it.
    Var make(std::size_t rows, std::size_t cols, std::initializer_list<Var> parents);
    Var make(std::size_t rows, std::size_t cols, const std::vector<Var>& parents);

    /// loss must be 1×1.
    void backward(Var loss);
    std::size_t size() const { return nodes_.size(); }

private:
    bool grad_enabled_;
    std::deque<Node> nodes_;
};

} // namespace dnmx::nn
