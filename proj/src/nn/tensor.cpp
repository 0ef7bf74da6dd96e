#include "dnmx/nn/tensor.hpp"

#include "dnmx/core/error.hpp"

namespace dnmx::nn {

Matrix Var::to_matrix() const {
    Matrix m(rows(), cols());
    std::copy(n_->v, n_->v + size(), m.data.begin());
    return m;
}

Var Tape::constant(const Matrix& m) { return constant(m.rows, m.cols, std::vector<double>(m.data.begin(), m.data.end())); }

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols) throw ShapeError("constant", "data size does not match shape");
    auto& n = nodes_.emplace_back();
    n.rows = rows;
    n.cols = cols;
    n.own_v.assign(data.begin(), data.end());
    n.v = n.own_v.data();
    return Var(&n, this);
}

Var Tape::param(Param& p) {
    if (p.grad.size() != p.value.size()) p.grad = Matrix(p.value.rows, p.value.cols);
    auto& n = nodes_.emplace_back();
    n.rows = p.value.rows;
    n.cols = p.value.cols;
    n.v = p.value.data.data();
    n.g = p.grad.data.data();
    n.needs_grad = grad_enabled_;
    return Var(&n, this);
}

Var Tape::make(std::size_t rows, std::size_t cols, std::initializer_list<Var> parents) {
    bool need = false;
    for (const auto& p : parents) need = need || p.needs_grad();
    auto& n = nodes_.emplace_back();
    n.rows = rows;
    n.cols = cols;
    n.own_v.assign(rows * cols, 0.0);
    n.v = n.own_v.data();
    n.needs_grad = need && grad_enabled_;
    return Var(&n, this);
}

Var Tape::make(std::size_t rows, std::size_t cols, const std::vector<Var>& parents) {
    bool need = false;
    for (const auto& p : parents) need = need || p.needs_grad();
    auto& n = nodes_.emplace_back();
    n.rows = rows;
    n.cols = cols;
    n.own_v.assign(rows * cols, 0.0);
    n.v = n.own_v.data();
    n.needs_grad = need && grad_enabled_;
    return Var(&n, this);
}

void Tape::backward(Var loss) {
    if (loss.size() != 1) throw ShapeError("backward", "loss must be 1x1");
    if (!loss.needs_grad()) return;
    for (auto& n : nodes_) {
        if (n.needs_grad && n.g == nullptr) {
            n.own_g.assign(n.rows * n.cols, 0.0);
            n.g = n.own_g.data();
        }
    }
    loss.node()->g[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->needs_grad && it->backward) it->backward();
    }
}

} // namespace dnmx::nn
