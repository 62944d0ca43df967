#pragma once

#include "recap/transformer.hpp"

namespace recap::nn {

struct AdamWConfig {
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real eps = Real(1e-8);
    Real weight_decay = Real(0);
};

// First and second moments, parallel to the parameter list they were
// first used with.
struct AdamWState {
    size_t step = 0;
    std::vector<Tensor> m, v;
};

// One decoupled-weight-decay Adam update over every parameter. A missing
// gradient counts as zero; a non-finite gradient is an error naming the
// parameter. Gradients are left untouched (callers zero them).
void adamw_step(ParamList& params, AdamWState& state, Real lr,
                const AdamWConfig& cfg = AdamWConfig{});

void zero_grads(ParamList& params);

// base_lr * (1 - step/total_steps); no warmup, decays to zero
Real linear_lr(size_t step, size_t total_steps, Real base_lr);

}  // namespace recap::nn
