#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recap/corpus.hpp"
#include "recap/tfidf.hpp"

namespace recap::evalsuite {

enum class TraitTask { age, gender, mbti_ie, mbti_sn, mbti_tf, mbti_jp };

const char* trait_task_name(TraitTask t);
TraitTask trait_task_from_name(const std::string& name);
bool trait_task_is_regression(TraitTask t);

// sklearn-style inverse regularization strengths from the evaluation
// protocol: gender 10, I/E 1, S/N 10, T/F 50, J/P 0.1
double trait_task_c(TraitTask t);

struct TraitModel {
    TraitTask task = TraitTask::age;
    TfidfSpec features;
    std::vector<double> weights;  // feature weights
    double bias = 0.0;
    double c = 1.0;  // classification only
};

struct TraitEval {
    double score = 0.0;  // Pearson r (age) or binary F1 (classification)
    bool flagged = false;  // constant-prediction Pearson defined as 0
};

// Users' responses concatenate into one document each; age fits a ridge
// (1e-6) least-squares regression, the binary tasks an L2 logistic
// regression minimized by L-BFGS.
TraitModel fit_traits(const std::vector<corpus::TraitRecord>& records, TraitTask task,
                      size_t max_features = 40000);

TraitEval eval_traits(const TraitModel& model, const std::vector<corpus::TraitRecord>& records);

// predictions for arbitrary documents (age: real value; classification:
// probability of the positive class)
std::vector<double> trait_predict(const TraitModel& model, const std::vector<std::string>& docs);

// Pearson correlation; constant input on either side flags and returns 0
TraitEval pearson(const std::vector<double>& a, const std::vector<double>& b);

double binary_f1(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace recap::evalsuite
