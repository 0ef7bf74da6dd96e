#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dnmx/nn/gradcheck.hpp"
#include "dnmx/nn/layers.hpp"

namespace dnmx::testing {

struct GradCase {
    std::string name;
    /// Builds a random small instance from the seed and returns its check.
    std::function<nn::GradCheckResult(std::uint64_t seed)> run;
};

inline nn::Param random_param(const std::string& name, std::size_t r, std::size_t c, Rng& rng, double s = 1.0) {
    nn::Param p(name, r, c);
    for (auto& v : p.value.data) v = s * rng.uniform(-1.0, 1.0);
    return p;
}

inline nn::Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    nn::Matrix m(r, c);
    for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

/// Reduces any output to a scalar with fixed random weights so every entry
/// of the output gradient differs.
inline nn::Var weighted_sum(nn::Var y, const nn::Matrix& w) {
    auto& t = y.tape();
    return nn::sum(nn::mul(y, t.constant(w)));
}

inline std::size_t dim(Rng& rng, std::size_t hi = 8) { return 1 + rng.below(hi); }

/// One case per differentiable primitive, shapes ≤ 8 per dimension.
std::vector<GradCase> primitive_grad_cases();

/// Full-model losses on tiny random instances (≤ 6 text tokens, width 4).
std::vector<GradCase> model_grad_cases();

} // namespace dnmx::testing
