#include "recap/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace recap::nn {

namespace {

std::vector<double> softmax_probs(const std::vector<Real>& logits) {
    if (logits.empty()) throw std::invalid_argument("nucleus_sample: empty logits");
    double mx = -std::numeric_limits<double>::infinity();
    for (Real l : logits) {
        if (!std::isfinite(static_cast<double>(l)))
            throw std::invalid_argument("nucleus_sample: non-finite logit");
        mx = std::max(mx, static_cast<double>(l));
    }
    std::vector<double> p(logits.size());
    double z = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - mx);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

}  // namespace

std::vector<int> nucleus_support(const std::vector<Real>& logits, double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("nucleus_sample: p must be in (0,1]");
    const std::vector<double> probs = softmax_probs(logits);
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    });
    std::vector<int> support;
    double cum = 0;
    for (int idx : order) {
        support.push_back(idx);
        cum += probs[idx];
        if (cum + 1e-12 >= p) break;
    }
    return support;
}

int nucleus_sample(const std::vector<Real>& logits, double p, Rng& rng) {
    const std::vector<double> probs = softmax_probs(logits);
    const std::vector<int> support = nucleus_support(logits, p);
    double mass = 0;
    for (int idx : support) mass += probs[idx];
    const double u = rng.uniform() * mass;
    double cum = 0;
    for (int idx : support) {
        cum += probs[idx];
        if (u < cum) return idx;
    }
    return support.back();
}

int nucleus_sample(const std::vector<Real>& logits, double p, uint64_t seed) {
    Rng rng(seed);
    return nucleus_sample(logits, p, rng);
}

}  // namespace recap::nn
