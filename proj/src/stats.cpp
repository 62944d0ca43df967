#include "recap/stats.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "recap/common.hpp"

namespace recap::evalsuite {

double t_two_sided_p(double t, double dof) {
    boost::math::students_t_distribution<double> dist(dof);
    return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b, size_t n_subsets,
                          size_t subset_size, uint64_t seed) {
    if (scores_a.size() != scores_b.size())
        throw std::invalid_argument("paired_t_test: score lists differ in length");
    if (scores_a.empty()) throw std::invalid_argument("paired_t_test: empty score lists");
    if (subset_size == 0 || subset_size > scores_a.size())
        throw std::invalid_argument("paired_t_test: subset_size must be in [1, n]");
    if (n_subsets < 2) throw std::invalid_argument("paired_t_test: need at least 2 subsets");

    TTestResult res;
    res.n_subsets = n_subsets;

    if (scores_a == scores_b) {
        res.p_value = 1.0;
        res.flagged = true;
        res.flag_reason = "identical score lists";
        return res;
    }

    Rng rng(seed);
    std::vector<size_t> indices(scores_a.size());
    std::iota(indices.begin(), indices.end(), 0);

    std::vector<double> diffs(n_subsets);
    for (size_t s = 0; s < n_subsets; ++s) {
        // partial Fisher-Yates: first subset_size entries become the draw
        for (size_t i = 0; i < subset_size; ++i) {
            const size_t j = i + rng.uniform_int(indices.size() - i);
            std::swap(indices[i], indices[j]);
        }
        double mean_a = 0, mean_b = 0;
        for (size_t i = 0; i < subset_size; ++i) {
            mean_a += scores_a[indices[i]];
            mean_b += scores_b[indices[i]];
        }
        diffs[s] = (mean_a - mean_b) / static_cast<double>(subset_size);
    }

    double mean_d = 0;
    for (double d : diffs) mean_d += d;
    mean_d /= static_cast<double>(n_subsets);
    double var = 0;
    for (double d : diffs) var += (d - mean_d) * (d - mean_d);
    var /= static_cast<double>(n_subsets - 1);

    // Zero variance up to float rounding: a constant shift between the
    // lists leaves subset-mean differences equal to machine precision.
    const double scale = std::max(std::abs(mean_d), 1e-300);
    if (var <= 1e-18 * scale * scale) {
        res.flagged = true;
        if (std::abs(mean_d) <= 1e-15) {
            res.p_value = 1.0;
            res.flag_reason = "zero variance, zero mean difference";
        } else {
            res.p_value = 0.0;
            res.flag_reason = "zero variance, nonzero mean difference";
        }
        return res;
    }

    res.t_stat = mean_d / std::sqrt(var / static_cast<double>(n_subsets));
    res.p_value = t_two_sided_p(res.t_stat, static_cast<double>(n_subsets - 1));
    return res;
}

}  // namespace recap::evalsuite
