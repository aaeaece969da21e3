#pragma once

#include <cstdint>
#include <vector>

#include "mixpro/tensor.hpp"

namespace mixpro {

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay: the decay term multiplies the parameter
// directly and never enters the moment estimates.
class Adam {
public:
    explicit Adam(AdamConfig config) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    std::int64_t step_count() const { return t_; }

    // One update over all parameters. params and grads must stay aligned and
    // keep their shapes across calls; moments are allocated lazily on the
    // first step.
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

private:
    AdamConfig config_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

double global_norm(const std::vector<Tensor>& grads);

// Scales all gradients by max_norm / norm when the global norm exceeds
// max_norm. Norms below 1e-12 are left untouched to avoid amplifying noise.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace mixpro
