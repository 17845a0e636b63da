#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "rim/errors.hpp"
#include "rim/rng.hpp"

namespace rim {

/// Where a sample set came from; carried along so persisted statistics
/// stay recomputable.
struct SampleProvenance {
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::int64_t controller_id = -1;
};

/// n fidelity draws in [0, 1] from one controller under one noise level.
class FidelitySampleSet {
public:
    explicit FidelitySampleSet(std::vector<double> samples,
                               SampleProvenance provenance = {});

    int size() const { return static_cast<int>(samples_.size()); }
    const std::vector<double>& values() const { return samples_; }
    const SampleProvenance& provenance() const { return provenance_; }

private:
    std::vector<double> samples_;
    SampleProvenance provenance_;
};

/// RIM_p point estimate: p-th root of the p-th raw moment of the
/// infidelity samples.
struct RimEstimate {
    double order = 1.0;
    double value = 0.0;
    int n = 0;
};

/// Mean RIM over the controllers an algorithm produced.
struct ArimEstimate {
    double value = 0.0;
    std::vector<double> per_controller;
};

/// Empirical CDF with a distribution-free confidence envelope.
struct EcdfBand {
    std::vector<double> grid;   // sorted sample values
    std::vector<double> ecdf;   // step heights i/n
    std::vector<double> lower;  // clipped to [0, 1]
    std::vector<double> upper;
    double confidence = 0.95;
};

struct OrderRelationReport {
    double rim_low = 0.0;        // RIM_p
    double rim_high = 0.0;       // RIM_p'
    double estimator_bound = 0.0; // n^(1/p - 1/p') RIM_p
    bool monotone_ok = false;     // RIM_p <= RIM_p'
    bool bound_ok = false;        // RIM_p' <= estimator_bound
};

struct SpearmanResult {
    double rho = 0.0;
    double p_value = 1.0;
};

/// RIM_p = ((1/n) sum (1 - f_i)^p)^(1/p), p >= 1. Degenerate (all-equal)
/// sample sets return exactly 1 - f for every order.
RimEstimate rim(const FidelitySampleSet& samples, double p);

/// Same measure through the quantile-function route: the empirical
/// quantile function is piecewise constant, so the integral
/// (int_0^1 |Q(z) - 1|^p dz)^(1/p) reduces to equal-width steps over the
/// order statistics. Agrees with rim() to 1e-12.
RimEstimate rim_via_quantile(const FidelitySampleSet& samples, double p);

/// Returns (RIM_2^2, Var(f) + RIM_1^2); the two are equal to 1e-12 when
/// the variance uses the population (1/n) normalization.
std::pair<double, double> rim2_identity(const FidelitySampleSet& samples);

/// Checks RIM_p <= RIM_p' and RIM_p' <= n^(1/p - 1/p') RIM_p for p < p'.
OrderRelationReport rim_order_relations(const FidelitySampleSet& samples,
                                        double p_low, double p_high);

/// PAC error bound on the estimated RIM_p:
/// (1/(p+1)) (log(4/delta) / (2n))^(1/(2p)).
double rim_error_bound(double p, int n, double delta);

/// Mean of the RIM values; all inputs must share the order p.
ArimEstimate arim(const std::vector<RimEstimate>& rims);

/// Fraction of samples strictly above the fidelity threshold.
double yield(const FidelitySampleSet& samples, double threshold);

/// ECDF with the Dvoretzky-Kiefer-Wolfowitz band of half-width
/// sqrt(log(2/alpha) / (2n)), alpha = 1 - confidence.
EcdfBand ecdf_with_dkw(const FidelitySampleSet& samples, double confidence);

/// Percentile bootstrap interval for a statistic of a data vector.
/// Deterministic for a fixed stream.
std::pair<double, double> bootstrap_ci(
    std::span<const double> data,
    const std::function<double(std::span<const double>)>& statistic,
    int resamples, double confidence, RngStream rng);

/// Spearman rank correlation with average-rank ties; two-sided p-value
/// from the t approximation with n - 2 degrees of freedom.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

/// Ranks 1..n with ties averaged (midranks).
std::vector<double> average_ranks(std::span<const double> values);

/// Linear-interpolation empirical quantile of a sorted vector, q in [0,1].
double sorted_quantile(std::span<const double> sorted, double q);

} // namespace rim
