#pragma once

#include <vector>

#include "recap/common.hpp"

namespace recap::nn {

// Indices of the nucleus: the smallest probability-sorted set whose
// cumulative mass reaches p, in descending-probability order (ties broken
// by lower index).
std::vector<int> nucleus_support(const std::vector<Real>& logits, double p);

// Sample one token id from the renormalized nucleus.
int nucleus_sample(const std::vector<Real>& logits, double p, Rng& rng);
int nucleus_sample(const std::vector<Real>& logits, double p, uint64_t seed);

}  // namespace recap::nn
