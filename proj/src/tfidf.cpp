#include "recap/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "recap/evalsuite.hpp"

namespace recap::evalsuite {

namespace {

std::vector<std::string> doc_ngrams(const std::string& text, int nmin, int nmax) {
    const std::vector<std::string> tokens = tokenize_ws_lower(text);
    std::vector<std::string> grams;
    for (int n = nmin; n <= nmax; ++n) {
        if (tokens.size() < static_cast<size_t>(n)) break;
        for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
            std::string g = tokens[i];
            for (int k = 1; k < n; ++k) {
                g += ' ';
                g += tokens[i + static_cast<size_t>(k)];
            }
            grams.push_back(std::move(g));
        }
    }
    return grams;
}

}  // namespace

TfidfSpec tfidf_fit(const std::vector<std::string>& texts, size_t max_features, int ngram_min,
                    int ngram_max) {
    if (texts.empty()) throw std::invalid_argument("tfidf_fit: empty corpus");
    bool any = false;
    for (const auto& t : texts)
        if (!tokenize_ws_lower(t).empty()) any = true;
    if (!any) throw std::invalid_argument("tfidf_fit: no non-empty text");

    std::map<std::string, size_t> total_count, doc_freq;
    for (const auto& text : texts) {
        const auto grams = doc_ngrams(text, ngram_min, ngram_max);
        std::set<std::string> seen;
        for (const auto& g : grams) {
            ++total_count[g];
            seen.insert(g);
        }
        for (const auto& g : seen) ++doc_freq[g];
    }

    std::vector<std::pair<std::string, size_t>> terms(total_count.begin(), total_count.end());
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (terms.size() > max_features) terms.resize(max_features);

    TfidfSpec spec;
    spec.ngram_min = ngram_min;
    spec.ngram_max = ngram_max;
    const double d_docs = static_cast<double>(texts.size());
    std::sort(terms.begin(), terms.end());  // stable feature order by term
    for (const auto& [term, count] : terms) {
        spec.term_index.emplace(term, spec.vocabulary.size());
        spec.vocabulary.push_back(term);
        const double df = static_cast<double>(doc_freq[term]);
        spec.idf.push_back(std::log((1.0 + d_docs) / (1.0 + df)) + 1.0);
    }
    return spec;
}

SparseMatrix tfidf_transform(const TfidfSpec& spec, const std::vector<std::string>& texts) {
    SparseMatrix m;
    m.n_cols = spec.vocabulary.size();
    for (const auto& text : texts) {
        std::map<size_t, double> tf;
        for (const auto& g : doc_ngrams(text, spec.ngram_min, spec.ngram_max)) {
            auto it = spec.term_index.find(g);
            if (it != spec.term_index.end()) tf[it->second] += 1.0;
        }
        SparseRow row;
        double norm_sq = 0.0;
        for (const auto& [idx, count] : tf) {
            const double v = count * spec.idf[idx];
            row.entries.emplace_back(idx, v);
            norm_sq += v * v;
        }
        if (norm_sq > 0.0) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (auto& [idx, v] : row.entries) v *= inv;
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace recap::evalsuite
