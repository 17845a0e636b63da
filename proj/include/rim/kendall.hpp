#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rim/errors.hpp"

namespace rim {

/// Real-valued scores (RIMs) whose order defines controller ranks at one
/// noise level; ties only at exactly equal values.
struct RankVector {
    std::vector<double> values;
    double sigma = 0.0;
};

/// Integer bin labels per controller, coarsened with the discrepancy
/// parameter alpha: nearby scores share an ordinal.
struct BinnedRankVector {
    std::vector<int> ordinals;
    double alpha = 0.0;
};

struct TauResult {
    double tau = 0.0;
    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    std::int64_t ties_i = 0; // pairs tied on the binned side
    std::int64_t ties_j = 0; // pairs tied on the raw side
    double p_value = 1.0;
};

/// Greedy coarsening of scores into ordinal bins. Controllers are sorted
/// by score ascending; a new bin opens whenever the current score exceeds
/// the first score of the open bin by more than alpha * (max - min).
/// alpha = 0 keeps raw ranks (ties only at exact equality); alpha = 1
/// collapses everything into one bin. Ordinals are returned in the
/// original controller order.
BinnedRankVector bin_ranks(std::span<const double> scores, double alpha);

/// Tie-corrected tau between the binned side i and the raw side j:
/// tau = (C - D) / sqrt((K - t_i)(K - t_j)) with K = k(k-1)/2 and
/// t = sum over tie groups of t_l (t_l - 1) / 2. Only side i is binned.
/// The two-sided p-value uses the normal approximation with the
/// tie-corrected variance of C - D.
TauResult tau_b(const BinnedRankVector& binned_i, const RankVector& raw_j);

/// One tau per grid column: side i is the binned rank order at
/// base_sigma, side j the raw order at each sigma_j. rim_values is
/// row-major L x |sigma_grid| (controller-major).
std::vector<TauResult> tau_curve(std::span<const double> rim_values,
                                 int n_controllers,
                                 std::span<const double> sigma_grid,
                                 double alpha, double base_sigma);

} // namespace rim
