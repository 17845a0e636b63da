#include "rim/kendall.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace rim {

namespace {

int sign_of(double d) { return (d > 0.0) - (d < 0.0); }

// Sum of g(g-1)/2 over tie-group sizes, plus the higher tie moments the
// variance correction needs.
struct TieMoments {
    std::int64_t pairs = 0;    // sum g(g-1)/2
    double m1 = 0.0;           // sum g(g-1)
    double m2 = 0.0;           // sum g(g-1)(g-2)
    double m3 = 0.0;           // sum g(g-1)(2g+5)
};

template <typename T>
TieMoments tie_moments(const std::vector<T>& values) {
    std::map<T, std::int64_t> groups;
    for (const T& v : values) ++groups[v];
    TieMoments tm;
    for (const auto& [value, g] : groups) {
        (void)value;
        const double gd = static_cast<double>(g);
        tm.pairs += g * (g - 1) / 2;
        tm.m1 += gd * (gd - 1.0);
        tm.m2 += gd * (gd - 1.0) * (gd - 2.0);
        tm.m3 += gd * (gd - 1.0) * (2.0 * gd + 5.0);
    }
    return tm;
}

// Two-sided p-value for C - D under the null, normal approximation with
// tie-corrected variance (Kendall 1970 form, as used by common stats
// packages).
double tau_p_value(std::int64_t c_minus_d, std::int64_t n,
                   const TieMoments& ti, const TieMoments& tj) {
    const double nd = static_cast<double>(n);
    const double v0 = nd * (nd - 1.0) * (2.0 * nd + 5.0);
    double var = (v0 - ti.m3 - tj.m3) / 18.0;
    var += ti.m1 * tj.m1 / (2.0 * nd * (nd - 1.0));
    if (n > 2) {
        var += ti.m2 * tj.m2 / (9.0 * nd * (nd - 1.0) * (nd - 2.0));
    }
    if (var <= 0.0) return 1.0;
    const double z = static_cast<double>(c_minus_d) / std::sqrt(var);
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

} // namespace

BinnedRankVector bin_ranks(std::span<const double> scores, double alpha) {
    if (scores.size() < 2) {
        throw ValidationError("binning needs at least 2 controllers");
    }
    if (!(alpha >= 0.0) || !(alpha <= 1.0)) {
        throw ValidationError("discrepancy parameter alpha must be in [0, 1]");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw ValidationError("scores must be finite");
        }
    }
    const auto k = scores.size();
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
    const double width = alpha * (*mx - *mn);

    BinnedRankVector out;
    out.alpha = alpha;
    out.ordinals.resize(k);
    int bin = 1;
    double bin_first = scores[idx[0]];
    for (std::size_t r = 0; r < k; ++r) {
        const double v = scores[idx[r]];
        if (v - bin_first > width) {
            ++bin;
            bin_first = v;
        }
        out.ordinals[idx[r]] = bin;
    }
    return out;
}

TauResult tau_b(const BinnedRankVector& binned_i, const RankVector& raw_j) {
    const auto k = binned_i.ordinals.size();
    if (k < 2) {
        throw ValidationError("tau needs at least 2 controllers");
    }
    if (raw_j.values.size() != k) {
        throw ValidationError("tau sides must have equal length");
    }

    TauResult res;
    for (std::size_t l = 0; l + 1 < k; ++l) {
        for (std::size_t m = l + 1; m < k; ++m) {
            const int si = sign_of(static_cast<double>(binned_i.ordinals[l] -
                                                       binned_i.ordinals[m]));
            const int sj = sign_of(raw_j.values[l] - raw_j.values[m]);
            const int prod = si * sj;
            if (prod > 0) ++res.concordant;
            else if (prod < 0) ++res.discordant;
        }
    }
    const TieMoments ti = tie_moments(binned_i.ordinals);
    const TieMoments tj = tie_moments(raw_j.values);
    res.ties_i = ti.pairs;
    res.ties_j = tj.pairs;

    const std::int64_t kk = static_cast<std::int64_t>(k);
    const std::int64_t pairs = kk * (kk - 1) / 2;
    const std::int64_t den_i = pairs - res.ties_i;
    const std::int64_t den_j = pairs - res.ties_j;
    if (den_i <= 0 || den_j <= 0) {
        throw DegenerateRankError(
            "tau undefined: one side is entirely tied");
    }
    res.tau = static_cast<double>(res.concordant - res.discordant) /
              std::sqrt(static_cast<double>(den_i) *
                        static_cast<double>(den_j));
    res.p_value = tau_p_value(res.concordant - res.discordant, kk, ti, tj);
    return res;
}

std::vector<TauResult> tau_curve(std::span<const double> rim_values,
                                 int n_controllers,
                                 std::span<const double> sigma_grid,
                                 double alpha, double base_sigma) {
    if (n_controllers < 2) {
        throw ValidationError("tau curve needs at least 2 controllers");
    }
    const auto n_sigma = sigma_grid.size();
    if (rim_values.size() !=
        static_cast<std::size_t>(n_controllers) * n_sigma) {
        throw ValidationError("rim grid shape does not match sigma grid");
    }
    const auto base_it =
        std::find(sigma_grid.begin(), sigma_grid.end(), base_sigma);
    if (base_it == sigma_grid.end()) {
        throw ValidationError("base sigma not present in the grid");
    }
    const auto base = static_cast<std::size_t>(base_it - sigma_grid.begin());

    auto column = [&](std::size_t j) {
        std::vector<double> col(n_controllers);
        for (int i = 0; i < n_controllers; ++i) {
            col[i] = rim_values[static_cast<std::size_t>(i) * n_sigma + j];
        }
        return col;
    };

    const BinnedRankVector side_i = bin_ranks(column(base), alpha);
    std::vector<TauResult> curve;
    curve.reserve(n_sigma);
    for (std::size_t j = 0; j < n_sigma; ++j) {
        RankVector side_j;
        side_j.values = column(j);
        side_j.sigma = sigma_grid[j];
        curve.push_back(tau_b(side_i, side_j));
    }
    return curve;
}

} // namespace rim
