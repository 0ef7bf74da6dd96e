#pragma once

#include <string>
#include <vector>

#include "dnmx/nn/tensor.hpp"

namespace dnmx::nn {

struct ParamGroup {
    std::string name;
    std::vector<Param*> params;
    double lr = 1e-3;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over named parameter groups, each with its own rate.
class Adam {
public:
    Adam(std::vector<ParamGroup> groups, AdamConfig config = {});

    /// One update from the accumulated gradients; each group's rate is
    /// multiplied by lr_scale.
    void step(double lr_scale = 1.0);
    void zero_grad();
    std::size_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<ParamGroup>& groups() const { return groups_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<ParamGroup> groups_;
    AdamConfig config_;
    std::vector<std::vector<Moments>> state_;
    std::size_t t_ = 0;
};

/// Linear warmup over ceil(ratio·total) steps, then constant 1. step is 1-based.
double warmup_factor(std::size_t step, std::size_t total, double ratio);

/// Sum of squared gradient entries, then sqrt.
double grad_norm(const std::vector<Param*>& params);

} // namespace dnmx::nn
