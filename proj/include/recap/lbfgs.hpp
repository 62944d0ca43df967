#pragma once

#include <functional>
#include <vector>

namespace recap::evalsuite {

// value and gradient at x; returns f(x), fills grad (same size as x)
using ObjectiveFn = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct LbfgsOptions {
    size_t memory = 10;
    double gtol = 1e-6;  // max-abs gradient
    size_t max_iters = 1000;
    double c1 = 1e-4, c2 = 0.9;  // strong Wolfe
};

struct LbfgsResult {
    std::vector<double> x;
    double fx = 0.0;
    size_t iterations = 0;
    bool converged = false;
};

LbfgsResult lbfgs_minimize(const ObjectiveFn& fg, std::vector<double> x0,
                           const LbfgsOptions& opts = LbfgsOptions{});

}  // namespace recap::evalsuite
