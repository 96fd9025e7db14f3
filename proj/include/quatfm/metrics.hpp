#pragma once

#include <span>
#include <string>
#include <vector>

#include "quatfm/training.hpp"

namespace quatfm {

struct EvalReport {
    double auc = 0.0;
    double le = 0.0;    // mean log loss
    double rmse = 0.0;  // of sigmoid probabilities vs binary labels
    std::size_t instance_count = 0;

    // One-line key=value form for CLI output.
    std::string to_line() const;
};

// Mann-Whitney AUC: P(score of a positive > score of a negative), ties
// counted 1/2 via midranks. Requires both classes present; throws
// std::domain_error otherwise.
double auc(std::span<const double> scores, std::span<const int> labels);

// sqrt(mean (p - y)^2) over probabilities and binary labels.
double rmse(std::span<const double> probs, std::span<const int> labels);

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels);

template <class P>
EvalReport evaluate(const P& params, const Dataset& ds, const VariantConfig& variant) {
    const std::vector<double> scores = eval_scores(params, ds, variant);
    std::vector<int> labels;
    labels.reserve(ds.size());
    for (const auto& inst : ds.instances) labels.push_back(inst.label);
    return evaluate_scores(scores, labels);
}

}  // namespace quatfm
