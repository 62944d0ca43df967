#include "recap/evalsuite.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace recap::evalsuite {

std::vector<std::string> tokenize_ws_lower(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

namespace {

using Tokens = std::vector<std::string>;

std::map<std::vector<std::string>, size_t> ngram_counts(const Tokens& tokens, size_t n) {
    std::map<std::vector<std::string>, size_t> counts;
    if (tokens.size() < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::vector<size_t>> dp(a.size() + 1, std::vector<size_t>(b.size() + 1, 0));
    for (size_t i = 1; i <= a.size(); ++i)
        for (size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                            : std::max(dp[i - 1][j], dp[i][j - 1]);
    return dp[a.size()][b.size()];
}

}  // namespace

Flagged bleu(const std::string& candidate, const std::string& reference, int n) {
    if (n < 1 || n > 2) throw std::invalid_argument("bleu: order must be 1 or 2");
    const Tokens cand = tokenize_ws_lower(candidate);
    const Tokens ref = tokenize_ws_lower(reference);
    if (cand.empty()) return {0.0, true};

    double log_prec_sum = 0.0;
    for (int order = 1; order <= n; ++order) {
        const auto cc = ngram_counts(cand, static_cast<size_t>(order));
        const auto rc = ngram_counts(ref, static_cast<size_t>(order));
        size_t clipped = 0, total = 0;
        for (const auto& [gram, count] : cc) {
            total += count;
            auto it = rc.find(gram);
            clipped += std::min(count, it == rc.end() ? size_t(0) : it->second);
        }
        if (total == 0 || clipped == 0) return {0.0, false};  // no smoothing
        log_prec_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    double score = std::exp(log_prec_sum / n);
    if (cand.size() < ref.size())
        score *= std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()));
    return {score, false};
}

Flagged rouge_l(const std::string& candidate, const std::string& reference) {
    const Tokens cand = tokenize_ws_lower(candidate);
    const Tokens ref = tokenize_ws_lower(reference);
    if (cand.empty() || ref.empty()) return {0.0, true};
    const size_t lcs = lcs_length(cand, ref);
    if (lcs == 0) return {0.0, false};
    const double p = static_cast<double>(lcs) / static_cast<double>(cand.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
    return {2.0 * p * r / (p + r), false};
}

namespace {

// Longest common token run over still-unmatched positions; ties resolve
// to the earliest candidate, then earliest reference start.
struct Run {
    size_t ci = 0, ri = 0, len = 0;
};

Run longest_common_run(const Tokens& cand, const Tokens& ref, const std::vector<bool>& cand_used,
                       const std::vector<bool>& ref_used) {
    Run best;
    for (size_t ci = 0; ci < cand.size(); ++ci) {
        for (size_t ri = 0; ri < ref.size(); ++ri) {
            size_t len = 0;
            while (ci + len < cand.size() && ri + len < ref.size() && !cand_used[ci + len] &&
                   !ref_used[ri + len] && cand[ci + len] == ref[ri + len])
                ++len;
            if (len > best.len) best = {ci, ri, len};
        }
    }
    return best;
}

}  // namespace

double meteor_lite(const std::string& candidate, const std::string& reference) {
    const Tokens cand = tokenize_ws_lower(candidate);
    const Tokens ref = tokenize_ws_lower(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    std::vector<bool> cand_used(cand.size(), false), ref_used(ref.size(), false);
    size_t matches = 0, chunks = 0;
    // repeatedly extract the longest common run; each run is one chunk
    while (true) {
        const Run run = longest_common_run(cand, ref, cand_used, ref_used);
        if (run.len == 0) break;
        for (size_t i = 0; i < run.len; ++i) {
            cand_used[run.ci + i] = true;
            ref_used[run.ri + i] = true;
        }
        matches += run.len;
        ++chunks;
    }
    if (matches == 0) return 0.0;

    const double p = static_cast<double>(matches) / static_cast<double>(cand.size());
    const double r = static_cast<double>(matches) / static_cast<double>(ref.size());
    const double f_mean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
    const double penalty = 0.5 * frag * frag * frag;
    return f_mean * (1.0 - penalty);
}

double style_similarity(const Tensor& a, const Tensor& b) {
    if (a.data.size() != b.data.size())
        throw std::invalid_argument("style_similarity: dimension mismatch");
    const Real na = l2_norm(a.data), nb = l2_norm(b.data);
    if (na == Real(0) || nb == Real(0))
        throw std::invalid_argument("style_similarity: zero vector");
    return static_cast<double>(dot(a.data.data(), b.data.data(), a.data.size())) /
           (static_cast<double>(na) * static_cast<double>(nb));
}

StyleConsistency style_consistency(const std::vector<std::string>& generated,
                                   const std::vector<std::string>& ground_truth) {
    if (generated.size() != ground_truth.size())
        throw std::invalid_argument("style_consistency: list length mismatch");
    if (generated.empty()) throw std::invalid_argument("style_consistency: empty lists");
    StyleConsistency out;
    for (size_t i = 0; i < generated.size(); ++i) {
        const double punct =
            ends_with_punctuation(generated[i]) == ends_with_punctuation(ground_truth[i]) ? 1.0
                                                                                          : 0.0;
        const double cont =
            contraction_class(generated[i]) == contraction_class(ground_truth[i]) ? 1.0 : 0.0;
        const double casing =
            is_all_lowercase(generated[i]) == is_all_lowercase(ground_truth[i]) ? 1.0 : 0.0;
        out.punct_per_example.push_back(punct);
        out.contraction_per_example.push_back(cont);
        out.casing_per_example.push_back(casing);
        out.punctuation += punct;
        out.contraction += cont;
        out.casing += casing;
    }
    const double n = static_cast<double>(generated.size());
    out.punctuation /= n;
    out.contraction /= n;
    out.casing /= n;
    return out;
}

std::vector<CavTriplet> build_cav_triplets(const std::vector<GeneratedResponse>& generated,
                                           const std::vector<corpus::Sample>& ground_truth,
                                           uint64_t seed, size_t* skipped) {
    Rng rng(seed);
    size_t n_skipped = 0;
    std::vector<CavTriplet> triplets;
    for (const auto& g : generated) {
        std::vector<const corpus::Sample*> positives, negatives;
        for (const auto& s : ground_truth) {
            if (s.user_id == g.user_id && s.domain_tag != g.domain_tag)
                positives.push_back(&s);
            else if (s.user_id != g.user_id && s.domain_tag == g.domain_tag)
                negatives.push_back(&s);
        }
        if (positives.empty() || negatives.empty()) {
            ++n_skipped;
            continue;
        }
        const corpus::Sample* pos = positives[rng.uniform_int(positives.size())];
        const corpus::Sample* neg = negatives[rng.uniform_int(negatives.size())];
        CavTriplet t;
        t.anchor = g.text;
        t.positive = pos->response;
        t.negative = neg->response;
        t.anchor_author = g.user_id;
        t.negative_author = neg->user_id;
        t.anchor_domain = g.domain_tag;
        t.positive_domain = pos->domain_tag;
        triplets.push_back(std::move(t));
    }
    if (skipped) *skipped = n_skipped;
    if (triplets.empty())
        throw std::runtime_error("build_cav_triplets: no valid triplets could be formed");
    return triplets;
}

double cav_accuracy(const std::vector<CavTriplet>& triplets, const EmbedFn& style_embed) {
    if (triplets.empty()) throw std::invalid_argument("cav_accuracy: no triplets");
    size_t correct = 0;
    for (const auto& t : triplets) {
        const Tensor a = style_embed(t.anchor);
        const Tensor p = style_embed(t.positive);
        const Tensor n = style_embed(t.negative);
        if (style_similarity(a, p) > style_similarity(a, n)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["metadata"] = metadata;
    j["scalars"] = scalars;
    j["per_example"] = per_example;
    return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MetricReport r;
    if (j.contains("metadata"))
        r.metadata = j["metadata"].get<std::map<std::string, std::string>>();
    if (j.contains("scalars")) r.scalars = j["scalars"].get<std::map<std::string, double>>();
    if (j.contains("per_example"))
        r.per_example = j["per_example"].get<std::map<std::string, std::vector<double>>>();
    return r;
}

void MetricReport::save(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("MetricReport: cannot open for writing: " + path);
    f << to_json() << "\n";
}

MetricReport MetricReport::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("MetricReport: cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

}  // namespace recap::evalsuite
