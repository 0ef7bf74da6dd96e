#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dnmx/nn/tensor.hpp"

namespace dnmx::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Denominator floor for the relative error |a − n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-5;

/// Compares the tape gradient of the scalar `f` against central differences
/// (f(θ+ε) − f(θ−ε)) / 2ε for every entry of every parameter. f must be
/// deterministic. Non-finite values raise DataError naming the entry.
GradCheckResult grad_check(const std::function<Var(Tape&)>& f, const std::vector<Param*>& params,
                           double eps = 1e-5);

} // namespace dnmx::nn
