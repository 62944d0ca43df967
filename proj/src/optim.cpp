#include "recap/optim.hpp"

#include <cmath>

namespace recap::nn {

void adamw_step(ParamList& params, AdamWState& state, Real lr, const AdamWConfig& cfg) {
    if (state.m.empty()) {
        for (const auto& [name, p] : params) {
            state.m.push_back(Tensor::zeros(p->value.shape));
            state.v.push_back(Tensor::zeros(p->value.shape));
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adamw_step: state does not match parameter list");

    state.step += 1;
    const Real bc1 = Real(1) - std::pow(cfg.beta1, static_cast<Real>(state.step));
    const Real bc2 = Real(1) - std::pow(cfg.beta2, static_cast<Real>(state.step));

    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& [name, p] = params[pi];
        const bool has_grad = !p->grad.data.empty();
        if (has_grad && p->grad.data.size() != p->value.data.size())
            throw std::invalid_argument("adamw_step: grad shape mismatch for " + name);
        Tensor& m = state.m[pi];
        Tensor& v = state.v[pi];
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            const Real g = has_grad ? p->grad.data[i] : Real(0);
            if (!std::isfinite(static_cast<double>(g)))
                throw std::runtime_error("adamw_step: non-finite gradient in parameter " + name);
            m.data[i] = cfg.beta1 * m.data[i] + (Real(1) - cfg.beta1) * g;
            v.data[i] = cfg.beta2 * v.data[i] + (Real(1) - cfg.beta2) * g * g;
            const Real mhat = m.data[i] / bc1;
            const Real vhat = v.data[i] / bc2;
            p->value.data[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps)) +
                                lr * cfg.weight_decay * p->value.data[i];
        }
    }
}

void zero_grads(ParamList& params) {
    for (auto& [name, p] : params) p->zero_grad();
}

Real linear_lr(size_t step, size_t total_steps, Real base_lr) {
    if (total_steps == 0) throw std::invalid_argument("linear_lr: total_steps must be > 0");
    if (step > total_steps) throw std::invalid_argument("linear_lr: step exceeds total_steps");
    return base_lr * (Real(1) - static_cast<Real>(step) / static_cast<Real>(total_steps));
}

}  // namespace recap::nn
