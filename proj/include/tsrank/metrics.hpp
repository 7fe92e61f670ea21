#pragma once

#include <vector>

namespace tsrank {

// Kendall's tau over all pairs: tau = 2/(K(K-1)) * sum_{i<j} sgn(r_i - r_j) sgn(rhat_i - rhat_j).
// Ties contribute 0 via sgn(0) = 0.
double kendall_tau(const std::vector<double>& predicted, const std::vector<double>& truth);

enum class WeightRanks { ground_truth, predicted };

// Weighted tau with additive hyperbolic weights w_ij = 1/(rho_i+1) + 1/(rho_j+1),
// rho being zero-based descending ranks (averaged over ties) of the weighting
// vector — ground-truth scores by default.
double weighted_kendall_tau(const std::vector<double>& predicted, const std::vector<double>& truth,
                            WeightRanks weight_by = WeightRanks::ground_truth);

// Fraction of cases where the truly best model is among the top-k predicted. k > K clamps to K.
double pr_top_k(const std::vector<std::vector<int>>& predicted_rankings,
                const std::vector<std::vector<double>>& truth_scores, int k);

// Descending-score order (stable: ties keep index order).
std::vector<int> ranking_from_scores(const std::vector<double>& scores);

// Zero-based descending ranks with ties averaged.
std::vector<double> descending_average_ranks(const std::vector<double>& scores);

}  // namespace tsrank
