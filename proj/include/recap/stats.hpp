#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace recap::evalsuite {

struct TTestResult {
    double p_value = 1.0;
    double t_stat = 0.0;
    size_t n_subsets = 0;
    bool flagged = false;
    std::string flag_reason;
};

// Subset-resampled paired t-test: draw n_subsets index subsets (without
// replacement within a subset, independently across subsets), compare the
// per-subset means of the two score lists with a paired t statistic on
// n_subsets - 1 dof, two-sided. Degenerate cases: identical inputs give
// a flagged p = 1, zero-variance nonzero-mean differences a flagged p = 0.
TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b, size_t n_subsets,
                          size_t subset_size, uint64_t seed);

// two-sided p for a t statistic (regularized incomplete beta via boost)
double t_two_sided_p(double t, double dof);

}  // namespace recap::evalsuite
