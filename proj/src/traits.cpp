#include "recap/traits.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recap/lbfgs.hpp"

namespace recap::evalsuite {

const char* trait_task_name(TraitTask t) {
    switch (t) {
        case TraitTask::age: return "age";
        case TraitTask::gender: return "gender";
        case TraitTask::mbti_ie: return "mbti_ie";
        case TraitTask::mbti_sn: return "mbti_sn";
        case TraitTask::mbti_tf: return "mbti_tf";
        case TraitTask::mbti_jp: return "mbti_jp";
    }
    return "?";
}

TraitTask trait_task_from_name(const std::string& name) {
    for (TraitTask t : {TraitTask::age, TraitTask::gender, TraitTask::mbti_ie, TraitTask::mbti_sn,
                        TraitTask::mbti_tf, TraitTask::mbti_jp})
        if (name == trait_task_name(t)) return t;
    throw std::invalid_argument("unknown trait task: " + name);
}

bool trait_task_is_regression(TraitTask t) { return t == TraitTask::age; }

double trait_task_c(TraitTask t) {
    switch (t) {
        case TraitTask::age: return 1.0;  // unused
        case TraitTask::gender: return 10.0;
        case TraitTask::mbti_ie: return 1.0;
        case TraitTask::mbti_sn: return 10.0;
        case TraitTask::mbti_tf: return 50.0;
        case TraitTask::mbti_jp: return 0.1;
    }
    return 1.0;
}

namespace {

constexpr double kRidge = 1e-6;

// second MBTI-axis letter is the positive class: E, N, F, P
std::optional<double> trait_label(const corpus::TraitRecord& r, TraitTask task) {
    switch (task) {
        case TraitTask::age:
            if (r.age) return *r.age;
            return std::nullopt;
        case TraitTask::gender:
            if (r.gender) return static_cast<double>(*r.gender);
            return std::nullopt;
        case TraitTask::mbti_ie:
        case TraitTask::mbti_sn:
        case TraitTask::mbti_tf:
        case TraitTask::mbti_jp: {
            if (!r.mbti) return std::nullopt;
            static const char* pos = "ENFP";
            const size_t axis = static_cast<size_t>(task) - static_cast<size_t>(TraitTask::mbti_ie);
            return (*r.mbti)[axis] == pos[axis] ? 1.0 : 0.0;
        }
    }
    return std::nullopt;
}

std::string user_document(const corpus::TraitRecord& r) {
    std::string doc;
    for (const auto& resp : r.responses) {
        if (!doc.empty()) doc += ' ';
        doc += resp;
    }
    return doc;
}

void gather(const std::vector<corpus::TraitRecord>& records, TraitTask task,
            std::vector<std::string>& docs, std::vector<double>& labels) {
    for (const auto& r : records) {
        const auto label = trait_label(r, task);
        if (!label) continue;
        docs.push_back(user_document(r));
        labels.push_back(*label);
    }
}

// sparse rows with trailing implicit bias column
double row_dot(const SparseRow& row, const std::vector<double>& w) {
    double s = w.back();  // bias
    for (const auto& [idx, v] : row.entries) s += v * w[idx];
    return s;
}

// Conjugate gradient on (X^T X + ridge I) w = X^T y; deterministic.
std::vector<double> ridge_least_squares(const SparseMatrix& x, const std::vector<double>& y) {
    const size_t n_feat = x.n_cols + 1;  // + bias
    auto matvec = [&](const std::vector<double>& w) {
        std::vector<double> xw(x.rows.size());
        for (size_t i = 0; i < x.rows.size(); ++i) xw[i] = row_dot(x.rows[i], w);
        std::vector<double> out(n_feat, 0.0);
        for (size_t i = 0; i < x.rows.size(); ++i) {
            for (const auto& [idx, v] : x.rows[i].entries) out[idx] += v * xw[i];
            out[n_feat - 1] += xw[i];
        }
        for (size_t j = 0; j < n_feat; ++j) out[j] += kRidge * w[j];
        return out;
    };
    std::vector<double> b(n_feat, 0.0);
    for (size_t i = 0; i < x.rows.size(); ++i) {
        for (const auto& [idx, v] : x.rows[i].entries) b[idx] += v * y[i];
        b[n_feat - 1] += y[i];
    }

    std::vector<double> w(n_feat, 0.0), r = b, p = b;
    double rs = 0;
    for (double v : r) rs += v * v;
    for (size_t it = 0; it < 2000 && rs > 1e-20; ++it) {
        const std::vector<double> ap = matvec(p);
        double pap = 0;
        for (size_t j = 0; j < n_feat; ++j) pap += p[j] * ap[j];
        if (pap <= 0) break;
        const double alpha = rs / pap;
        for (size_t j = 0; j < n_feat; ++j) {
            w[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        double rs_new = 0;
        for (double v : r) rs_new += v * v;
        const double beta = rs_new / rs;
        rs = rs_new;
        for (size_t j = 0; j < n_feat; ++j) p[j] = r[j] + beta * p[j];
    }
    return w;
}

// 0.5 ||w||^2 + C sum log(1 + exp(-y z)), bias unregularized
std::vector<double> fit_logistic(const SparseMatrix& x, const std::vector<double>& labels,
                                 double c) {
    const size_t n_feat = x.n_cols + 1;
    std::vector<double> signs(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) signs[i] = labels[i] > 0.5 ? 1.0 : -1.0;

    auto objective = [&](const std::vector<double>& w, std::vector<double>& grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double f = 0.0;
        for (size_t j = 0; j + 1 < n_feat; ++j) {
            f += 0.5 * w[j] * w[j];
            grad[j] = w[j];
        }
        for (size_t i = 0; i < x.rows.size(); ++i) {
            const double z = row_dot(x.rows[i], w);
            const double t = -signs[i] * z;
            f += c * (std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))));
            const double sig = 1.0 / (1.0 + std::exp(-t));  // sigma(-y z)
            const double gi = -c * signs[i] * sig;
            for (const auto& [idx, v] : x.rows[i].entries) grad[idx] += gi * v;
            grad[n_feat - 1] += gi;
        }
        return f;
    };

    LbfgsOptions opts;  // memory 10, strong Wolfe, gtol 1e-6, 1000 iters
    const LbfgsResult res = lbfgs_minimize(objective, std::vector<double>(n_feat, 0.0), opts);
    return res.x;
}

}  // namespace

TraitModel fit_traits(const std::vector<corpus::TraitRecord>& records, TraitTask task,
                      size_t max_features) {
    std::vector<std::string> docs;
    std::vector<double> labels;
    gather(records, task, docs, labels);
    if (docs.empty())
        throw std::invalid_argument(std::string("fit_traits: no records carry the ") +
                                    trait_task_name(task) + " label");

    TraitModel model;
    model.task = task;
    model.c = trait_task_c(task);
    model.features = tfidf_fit(docs, max_features, 1, 3);
    const SparseMatrix x = tfidf_transform(model.features, docs);

    std::vector<double> w;
    if (trait_task_is_regression(task)) {
        w = ridge_least_squares(x, labels);
    } else {
        const bool has_pos = std::any_of(labels.begin(), labels.end(),
                                         [](double l) { return l > 0.5; });
        const bool has_neg = std::any_of(labels.begin(), labels.end(),
                                         [](double l) { return l <= 0.5; });
        if (!has_pos || !has_neg)
            throw std::invalid_argument("fit_traits: training labels contain a single class");
        w = fit_logistic(x, labels, model.c);
    }
    model.bias = w.back();
    w.pop_back();
    model.weights = std::move(w);
    return model;
}

std::vector<double> trait_predict(const TraitModel& model, const std::vector<std::string>& docs) {
    const SparseMatrix x = tfidf_transform(model.features, docs);
    std::vector<double> out;
    out.reserve(docs.size());
    for (const auto& row : x.rows) {
        double z = model.bias;
        for (const auto& [idx, v] : row.entries) z += v * model.weights[idx];
        if (trait_task_is_regression(model.task))
            out.push_back(z);
        else
            out.push_back(1.0 / (1.0 + std::exp(-z)));
    }
    return out;
}

TraitEval eval_traits(const TraitModel& model, const std::vector<corpus::TraitRecord>& records) {
    std::vector<std::string> docs;
    std::vector<double> labels;
    gather(records, model.task, docs, labels);
    if (docs.empty())
        throw std::invalid_argument("eval_traits: no records carry the task label");
    const std::vector<double> pred = trait_predict(model, docs);

    if (trait_task_is_regression(model.task)) return pearson(pred, labels);

    std::vector<int> pred_cls, true_cls;
    for (size_t i = 0; i < pred.size(); ++i) {
        pred_cls.push_back(pred[i] >= 0.5 ? 1 : 0);
        true_cls.push_back(labels[i] > 0.5 ? 1 : 0);
    }
    return {binary_f1(pred_cls, true_cls), false};
}

TraitEval pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("pearson: length mismatch or empty");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return {0.0, true};  // constant side: defined as 0
    return {cov / std::sqrt(va * vb), false};
}

double binary_f1(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("binary_f1: length mismatch");
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == 1 && truth[i] == 1) ++tp;
        if (predicted[i] == 1 && truth[i] == 0) ++fp;
        if (predicted[i] == 0 && truth[i] == 1) ++fn;
    }
    if (tp == 0) return 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * p * r / (p + r);
}

}  // namespace recap::evalsuite
