#include "tsrank/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace tsrank {

static int sgn(double x) { return (x > 0) - (x < 0); }

static void check_lengths(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("score vectors differ in length");
    if (a.size() < 2) throw std::invalid_argument("need at least two models");
}

double kendall_tau(const std::vector<double>& predicted, const std::vector<double>& truth) {
    check_lengths(predicted, truth);
    const int k = static_cast<int>(truth.size());
    double s = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            s += sgn(truth[i] - truth[j]) * sgn(predicted[i] - predicted[j]);
    return 2.0 * s / (static_cast<double>(k) * (k - 1));
}

std::vector<double> descending_average_ranks(const std::vector<double>& scores) {
    const int k = static_cast<int>(scores.size());
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(k, 0.0);
    int i = 0;
    while (i < k) {
        int j = i;
        while (j + 1 < k && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * (i + j);  // zero-based
        for (int t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double weighted_kendall_tau(const std::vector<double>& predicted, const std::vector<double>& truth,
                            WeightRanks weight_by) {
    check_lengths(predicted, truth);
    const int k = static_cast<int>(truth.size());
    const std::vector<double> rho =
        descending_average_ranks(weight_by == WeightRanks::ground_truth ? truth : predicted);
    double num = 0, den = 0;
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double w = 1.0 / (rho[i] + 1.0) + 1.0 / (rho[j] + 1.0);
            den += w;
            num += w * sgn(truth[i] - truth[j]) * sgn(predicted[i] - predicted[j]);
        }
    }
    return num / den;
}

std::vector<int> ranking_from_scores(const std::vector<double>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    return order;
}

double pr_top_k(const std::vector<std::vector<int>>& predicted_rankings,
                const std::vector<std::vector<double>>& truth_scores, int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (predicted_rankings.empty() || predicted_rankings.size() != truth_scores.size())
        throw std::invalid_argument("empty or mismatched case lists");
    int hits = 0;
    for (std::size_t c = 0; c < truth_scores.size(); ++c) {
        const auto& truth = truth_scores[c];
        const auto& ranking = predicted_rankings[c];
        const int best = static_cast<int>(
            std::max_element(truth.begin(), truth.end()) - truth.begin());
        const int kk = std::min<int>(k, static_cast<int>(ranking.size()));
        for (int i = 0; i < kk; ++i) {
            if (ranking[i] == best) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(truth_scores.size());
}

}  // namespace tsrank
