#include "quatfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace quatfm {

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_same_size(scores.size(), labels.size(), "auc");
    if (scores.empty()) throw std::invalid_argument("auc: empty input");

    std::size_t pos = 0;
    for (const int y : labels) pos += y ? 1 : 0;
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0)
        throw std::domain_error("auc: undefined on single-class labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

    // Midranks over tie groups; rank sum of positives gives the U statistic.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) pos_rank_sum += midrank;
        }
        i = j + 1;
    }
    const double u = pos_rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double rmse(std::span<const double> probs, std::span<const int> labels) {
    check_same_size(probs.size(), labels.size(), "rmse");
    if (probs.empty()) throw std::invalid_argument("rmse: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double diff = probs[i] - static_cast<double>(labels[i]);
        total += diff * diff;
    }
    return std::sqrt(total / static_cast<double>(probs.size()));
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
    EvalReport report;
    report.instance_count = scores.size();
    report.auc = auc(scores, labels);
    report.le = log_loss_mean(scores, labels);
    std::vector<double> probs(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) probs[i] = sigmoid(scores[i]);
    report.rmse = rmse(probs, labels);
    return report;
}

std::string EvalReport::to_line() const {
    std::ostringstream out;
    out << "auc=" << format_double(auc) << " le=" << format_double(le)
        << " rmse=" << format_double(rmse) << " count=" << instance_count;
    return out.str();
}

}  // namespace quatfm
