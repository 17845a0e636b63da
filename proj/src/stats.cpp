#include "rim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rim {

namespace {

bool all_equal(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [&](double x) { return x == v.front(); });
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
}

// Regularized incomplete beta I_x(a, b) via the continued fraction of
// Lentz's method; used for the Student-t tail in spearman().
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 200;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                            std::lgamma(b) + a * std::log(x) +
                            b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// Two-sided tail probability of Student's t with nu degrees of freedom.
double t_two_sided(double t, double nu) {
    const double x = nu / (nu + t * t);
    return incomplete_beta(nu / 2.0, 0.5, x);
}

} // namespace

FidelitySampleSet::FidelitySampleSet(std::vector<double> samples,
                                     SampleProvenance provenance)
    : samples_(std::move(samples)), provenance_(provenance) {
    if (samples_.empty()) {
        throw ValidationError("fidelity sample set must be non-empty");
    }
    for (double f : samples_) {
        if (!std::isfinite(f) || f < 0.0 || f > 1.0) {
            throw ValidationError("fidelity sample outside [0, 1]");
        }
    }
}

RimEstimate rim(const FidelitySampleSet& samples, double p) {
    if (!(p >= 1.0)) {
        throw ValidationError("RIM order must satisfy p >= 1");
    }
    const auto& f = samples.values();
    RimEstimate est;
    est.order = p;
    est.n = samples.size();
    if (all_equal(f)) {
        // Degenerate distribution: RIM_p = 1 - f exactly, any order.
        est.value = 1.0 - f.front();
        return est;
    }
    double acc = 0.0;
    for (double fi : f) acc += std::pow(1.0 - fi, p);
    acc /= static_cast<double>(f.size());
    est.value = std::pow(acc, 1.0 / p);
    return est;
}

RimEstimate rim_via_quantile(const FidelitySampleSet& samples, double p) {
    if (!(p >= 1.0)) {
        throw ValidationError("RIM order must satisfy p >= 1");
    }
    std::vector<double> sorted = samples.values();
    std::sort(sorted.begin(), sorted.end());
    RimEstimate est;
    est.order = p;
    est.n = samples.size();
    if (sorted.front() == sorted.back()) {
        est.value = 1.0 - sorted.front();
        return est;
    }
    // Empirical quantile is constant on each interval ((i-1)/n, i/n], so
    // the integral of |Q(z) - 1|^p is an equal-width Riemann sum over the
    // order statistics.
    const double w = 1.0 / static_cast<double>(sorted.size());
    double acc = 0.0;
    for (double fi : sorted) acc += w * std::pow(1.0 - fi, p);
    est.value = std::pow(acc, 1.0 / p);
    return est;
}

std::pair<double, double> rim2_identity(const FidelitySampleSet& samples) {
    const double r2 = rim(samples, 2.0).value;
    const double r1 = rim(samples, 1.0).value;
    const auto& f = samples.values();
    const double mu = mean_of(f);
    double var = 0.0;
    for (double fi : f) var += (fi - mu) * (fi - mu);
    var /= static_cast<double>(f.size()); // population normalization
    return {r2 * r2, var + r1 * r1};
}

OrderRelationReport rim_order_relations(const FidelitySampleSet& samples,
                                        double p_low, double p_high) {
    if (!(p_low >= 1.0) || !(p_high > p_low)) {
        throw ValidationError("order relations need 1 <= p < p'");
    }
    OrderRelationReport rep;
    rep.rim_low = rim(samples, p_low).value;
    rep.rim_high = rim(samples, p_high).value;
    const double n = static_cast<double>(samples.size());
    rep.estimator_bound =
        std::pow(n, 1.0 / p_low - 1.0 / p_high) * rep.rim_low;
    constexpr double kSlack = 1e-12;
    rep.monotone_ok = rep.rim_low <= rep.rim_high + kSlack;
    rep.bound_ok = rep.rim_high <= rep.estimator_bound + kSlack;
    return rep;
}

double rim_error_bound(double p, int n, double delta) {
    if (!(p >= 1.0)) {
        throw ValidationError("RIM order must satisfy p >= 1");
    }
    if (n < 1) {
        throw ValidationError("error bound needs n >= 1");
    }
    if (!(delta > 0.0) || !(delta < 1.0)) {
        throw ValidationError("confidence parameter delta must be in (0, 1)");
    }
    return (1.0 / (p + 1.0)) *
           std::pow(std::log(4.0 / delta) / (2.0 * n), 1.0 / (2.0 * p));
}

ArimEstimate arim(const std::vector<RimEstimate>& rims) {
    if (rims.empty()) {
        throw ValidationError("ARIM needs at least one RIM estimate");
    }
    const double p = rims.front().order;
    ArimEstimate est;
    est.per_controller.reserve(rims.size());
    double acc = 0.0;
    for (const auto& r : rims) {
        if (r.order != p) {
            throw ValidationError("ARIM inputs must share the RIM order");
        }
        est.per_controller.push_back(r.value);
        acc += r.value;
    }
    est.value = acc / static_cast<double>(rims.size());
    return est;
}

double yield(const FidelitySampleSet& samples, double threshold) {
    if (!(threshold >= 0.0) || !(threshold <= 1.0)) {
        throw ValidationError("yield threshold must be in [0, 1]");
    }
    const auto& f = samples.values();
    const auto hits = std::count_if(f.begin(), f.end(),
                                    [&](double fi) { return fi > threshold; });
    return static_cast<double>(hits) / static_cast<double>(f.size());
}

EcdfBand ecdf_with_dkw(const FidelitySampleSet& samples, double confidence) {
    if (!(confidence > 0.0) || !(confidence < 1.0)) {
        throw ValidationError("confidence must be in (0, 1)");
    }
    EcdfBand band;
    band.confidence = confidence;
    band.grid = samples.values();
    std::sort(band.grid.begin(), band.grid.end());
    const int n = samples.size();
    const double alpha = 1.0 - confidence;
    const double eps = std::sqrt(std::log(2.0 / alpha) / (2.0 * n));
    band.ecdf.resize(n);
    band.lower.resize(n);
    band.upper.resize(n);
    for (int i = 0; i < n; ++i) {
        const double h = static_cast<double>(i + 1) / n;
        band.ecdf[i] = h;
        band.lower[i] = std::max(0.0, h - eps);
        band.upper[i] = std::min(1.0, h + eps);
    }
    return band;
}

double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw ValidationError("quantile of empty vector");
    }
    if (!(q >= 0.0) || !(q <= 1.0)) {
        throw ValidationError("quantile level must be in [0, 1]");
    }
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> bootstrap_ci(
    std::span<const double> data,
    const std::function<double(std::span<const double>)>& statistic,
    int resamples, double confidence, RngStream rng) {
    if (data.empty()) {
        throw ValidationError("bootstrap needs data");
    }
    if (resamples < 1) {
        throw ValidationError("bootstrap needs resamples >= 1");
    }
    if (!(confidence > 0.0) || !(confidence < 1.0)) {
        throw ValidationError("confidence must be in (0, 1)");
    }
    const auto n = data.size();
    std::vector<double> stats(resamples);
    std::vector<double> resample(n);
    for (int b = 0; b < resamples; ++b) {
        RngStream draw = rng.child(static_cast<std::uint64_t>(b));
        for (std::size_t i = 0; i < n; ++i) {
            resample[i] = data[draw.next_below(n)];
        }
        stats[b] = statistic(resample);
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = 1.0 - confidence;
    return {sorted_quantile(stats, alpha / 2.0),
            sorted_quantile(stats, 1.0 - alpha / 2.0)};
}

std::vector<double> average_ranks(std::span<const double> values) {
    const auto n = values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return values[a] < values[b];
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        // Midrank of the tied block [i, j] (ranks are 1-based).
        const double r = 0.5 * (static_cast<double>(i + 1) +
                                static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ValidationError("spearman inputs must have equal length");
    }
    if (x.size() < 3) {
        throw ValidationError("spearman needs at least 3 pairs");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = mean_of(rx);
    const double my = mean_of(ry);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateRankError("spearman undefined for constant ranks");
    }
    SpearmanResult res;
    res.rho = sxy / std::sqrt(sxx * syy);
    const double nu = n - 2.0;
    const double r2 = std::min(res.rho * res.rho, 1.0 - 1e-15);
    const double t = res.rho * std::sqrt(nu / (1.0 - r2));
    res.p_value = t_two_sided(t, nu);
    return res;
}

} // namespace rim
