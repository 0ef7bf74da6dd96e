#include "dnmx/nn/optim.hpp"

#include <cmath>

namespace dnmx::nn {

Adam::Adam(std::vector<ParamGroup> groups, AdamConfig config) : groups_(std::move(groups)), config_(config) {
    for (const auto& g : groups_) {
        auto& s = state_.emplace_back();
        for (const Param* p : g.params) s.push_back({std::vector<double>(p->value.size()), std::vector<double>(p->value.size())});
    }
}

void Adam::step(double lr_scale) {
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
        const double lr = groups_[gi].lr * lr_scale;
        for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
            Param& p = *groups_[gi].params[pi];
            auto& st = state_[gi][pi];
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double g = p.grad.data[k];
                st.m[k] = b1 * st.m[k] + (1.0 - b1) * g;
                st.v[k] = b2 * st.v[k] + (1.0 - b2) * g * g;
                const double mh = st.m[k] / c1, vh = st.v[k] / c2;
                p.value.data[k] -= lr * mh / (std::sqrt(vh) + config_.eps);
            }
        }
    }
}

void Adam::zero_grad() {
    for (auto& g : groups_) {
        for (Param* p : g.params) p->zero_grad();
    }
}

double warmup_factor(std::size_t step, std::size_t total, double ratio) {
    const auto warm = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(total)));
    if (warm == 0 || step >= warm) return 1.0;
    return static_cast<double>(step) / static_cast<double>(warm);
}

double grad_norm(const std::vector<Param*>& params) {
    double s = 0.0;
    for (const Param* p : params) {
        for (double g : p->grad.data) s += g * g;
    }
    return std::sqrt(s);
}

} // namespace dnmx::nn
