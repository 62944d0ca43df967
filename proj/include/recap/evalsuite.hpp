#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "recap/corpus.hpp"
#include "recap/style_features.hpp"
#include "recap/tensor.hpp"

namespace recap::evalsuite {

std::vector<std::string> tokenize_ws_lower(const std::string& text);

struct Flagged {
    double value = 0.0;
    bool flagged = false;
};

// clipped modified n-gram precision, geometric mean over orders 1..n,
// brevity penalty exp(1 - r/c) when c < r; empty candidate flags 0
Flagged bleu(const std::string& candidate, const std::string& reference, int n);

// LCS-based F1; empty input flags 0
Flagged rouge_l(const std::string& candidate, const std::string& reference);

// Exact unigram alignment (max matches, then greedy longest-common-run
// chunks), F_mean = 10PR/(R+9P), penalty 0.5*(chunks/matches)^3.
// No stemming or synonymy; reported under its own name deliberately.
double meteor_lite(const std::string& candidate, const std::string& reference);

double style_similarity(const Tensor& a, const Tensor& b);  // plain cosine

struct StyleConsistency {
    double punctuation = 0.0;
    double contraction = 0.0;
    double casing = 0.0;
    std::vector<double> punct_per_example, contraction_per_example, casing_per_example;
};

// fraction of pairs whose predicate classes agree, per aspect
StyleConsistency style_consistency(const std::vector<std::string>& generated,
                                   const std::vector<std::string>& ground_truth);

struct GeneratedResponse {
    std::string text;
    std::string user_id;
    std::string domain_tag;
};

struct CavTriplet {
    std::string anchor, positive, negative;
    std::string anchor_author, negative_author;
    std::string anchor_domain, positive_domain;
};

// Domain-controlled triplets: positive = same author, different domain;
// negative = different author, same domain. Anchors without any valid
// positive/negative are skipped and counted.
std::vector<CavTriplet> build_cav_triplets(const std::vector<GeneratedResponse>& generated,
                                           const std::vector<corpus::Sample>& ground_truth,
                                           uint64_t seed, size_t* skipped = nullptr);

using EmbedFn = std::function<Tensor(const std::string&)>;

// fraction of triplets with cos(anchor, positive) > cos(anchor, negative)
double cav_accuracy(const std::vector<CavTriplet>& triplets, const EmbedFn& style_embed);

struct MetricReport {
    std::map<std::string, std::string> metadata;
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<double>> per_example;

    std::string to_json() const;
    static MetricReport from_json(const std::string& text);
    void save(const std::string& path) const;
    static MetricReport load(const std::string& path);
};

}  // namespace recap::evalsuite
