#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace recap::evalsuite {

// Lowercased word n-grams (n in [ngram_min, ngram_max]) weighted by
// tf * (ln((1+D)/(1+df)) + 1), rows L2-normalized. The vocabulary keeps
// the top max_features n-grams by total corpus count, ties broken
// lexicographically.
struct TfidfSpec {
    std::vector<std::string> vocabulary;  // index -> term
    std::unordered_map<std::string, size_t> term_index;
    std::vector<double> idf;
    int ngram_min = 1, ngram_max = 3;
};

struct SparseRow {
    std::vector<std::pair<size_t, double>> entries;  // (feature, value), sorted
};

struct SparseMatrix {
    size_t n_cols = 0;
    std::vector<SparseRow> rows;
};

TfidfSpec tfidf_fit(const std::vector<std::string>& texts, size_t max_features = 40000,
                    int ngram_min = 1, int ngram_max = 3);

SparseMatrix tfidf_transform(const TfidfSpec& spec, const std::vector<std::string>& texts);

}  // namespace recap::evalsuite
