#include "rim/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "rim/io.hpp"

namespace rim {

namespace {

// Top-level substream namespaces under the campaign seed.
constexpr std::uint64_t kSearchNs = 0;
constexpr std::uint64_t kGridSampleNs = 1;
constexpr std::uint64_t kGridBootNs = 2;
constexpr std::uint64_t kArimBootNs = 3;
constexpr std::uint64_t kObjectiveNs = 4;
constexpr std::uint64_t kYieldNs = 5;

void require(bool ok, const char* message) {
    if (!ok) throw ValidationError(message);
}

} // namespace

void CampaignConfig::validate() const {
    chain.validate();
    bounds.validate();
    require(!sigma_sim_grid.empty(), "sigma grid must be non-empty");
    for (std::size_t j = 0; j < sigma_sim_grid.size(); ++j) {
        require(std::isfinite(sigma_sim_grid[j]) && sigma_sim_grid[j] >= 0.0,
                "sigma grid values must be >= 0");
        if (j > 0) {
            require(sigma_sim_grid[j] > sigma_sim_grid[j - 1],
                    "sigma grid must be strictly ascending");
        }
    }
    require(std::find(sigma_sim_grid.begin(), sigma_sim_grid.end(),
                      tau_base_sigma) != sigma_sim_grid.end(),
            "tau base sigma must be a grid value");
    require(n_samples >= 1, "n_samples must be >= 1");
    require(n_controllers >= 1, "controller count must be >= 1");
    require(rim_order >= 1.0, "RIM order must satisfy p >= 1");
    require(budget >= 1, "budget must be >= 1");
    require(bootstrap.resamples >= 1, "bootstrap resamples must be >= 1");
    require(bootstrap.confidence > 0.0 && bootstrap.confidence < 1.0,
            "bootstrap confidence must be in (0, 1)");
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
    require(std::isfinite(sigma_train) && sigma_train >= 0.0,
            "training noise level must be >= 0");
    require(ensemble_size >= 1, "ensemble size must be >= 1");
    require(std::isfinite(yield_sigma) && yield_sigma >= 0.0,
            "yield sigma must be >= 0");
    require(!yield_thresholds.empty(), "yield thresholds must be non-empty");
    for (double th : yield_thresholds) {
        require(th >= 0.0 && th <= 1.0, "yield thresholds must be in [0, 1]");
    }
    require(checkpoint_every >= 0, "checkpoint interval must be >= 0");
}

namespace {

ObjectiveKind objective_kind_from_string(const std::string& s) {
    if (s == "noiseless") return ObjectiveKind::Noiseless;
    if (s == "stochastic") return ObjectiveKind::Stochastic;
    if (s == "fixed_ensemble_rim") return ObjectiveKind::FixedEnsembleRim;
    throw ValidationError("unknown objective kind: " + s);
}

std::string objective_kind_to_string(ObjectiveKind kind) {
    switch (kind) {
    case ObjectiveKind::Noiseless: return "noiseless";
    case ObjectiveKind::Stochastic: return "stochastic";
    case ObjectiveKind::FixedEnsembleRim: return "fixed_ensemble_rim";
    }
    throw ValidationError("unknown objective kind");
}

void reject_unknown(const nlohmann::json& j,
                    std::initializer_list<const char*> known,
                    const char* where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(known.begin(), known.end(), [&](const char* k) {
                return key == k;
            }) == known.end()) {
            throw ValidationError(std::string("unknown key '") + key +
                                  "' in " + where);
        }
    }
}

} // namespace

CampaignConfig campaign_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ValidationError("campaign config must be a JSON object");
    }
    reject_unknown(j,
                   {"chain", "bounds", "algorithm", "objective",
                    "sigma_sim_grid", "n_samples", "controllers", "rim_order",
                    "budget", "seed", "bootstrap", "alpha", "tau_base_sigma",
                    "yield_sigma", "yield_thresholds", "checkpoint_every"},
                   "campaign config");
    CampaignConfig c;
    try {
        if (j.contains("chain")) {
            const auto& jc = j.at("chain");
            reject_unknown(jc, {"M", "J", "source", "target"}, "chain");
            c.chain.length = jc.value("M", c.chain.length);
            c.chain.coupling = jc.value("J", c.chain.coupling);
            c.chain.source = jc.value("source", c.chain.source);
            c.chain.target = jc.value("target", c.chain.target);
        }
        if (j.contains("bounds")) {
            const auto& jb = j.at("bounds");
            reject_unknown(jb, {"delta_min", "delta_max", "t_min", "t_max"},
                           "bounds");
            c.bounds.delta_min = jb.value("delta_min", c.bounds.delta_min);
            c.bounds.delta_max = jb.value("delta_max", c.bounds.delta_max);
            c.bounds.t_min = jb.value("t_min", c.bounds.t_min);
            c.bounds.t_max = jb.value("t_max", c.bounds.t_max);
        }
        if (j.contains("algorithm")) {
            const auto& ja = j.at("algorithm");
            reject_unknown(ja, {"name", "options"}, "algorithm");
            c.algorithm = ja.value("name", c.algorithm);
            if (ja.contains("options")) c.algorithm_options = ja.at("options");
        }
        if (j.contains("objective")) {
            const auto& jo = j.at("objective");
            reject_unknown(jo, {"kind", "sigma_train", "ensemble_size"},
                           "objective");
            c.objective_kind = objective_kind_from_string(
                jo.value("kind", objective_kind_to_string(c.objective_kind)));
            c.sigma_train = jo.value("sigma_train", c.sigma_train);
            c.ensemble_size = jo.value("ensemble_size", c.ensemble_size);
        }
        if (j.contains("sigma_sim_grid")) {
            c.sigma_sim_grid =
                j.at("sigma_sim_grid").get<std::vector<double>>();
        }
        c.n_samples = j.value("n_samples", c.n_samples);
        c.n_controllers = j.value("controllers", c.n_controllers);
        c.rim_order = j.value("rim_order", c.rim_order);
        c.budget = j.value("budget", c.budget);
        c.seed = j.value("seed", c.seed);
        if (j.contains("bootstrap")) {
            const auto& jb = j.at("bootstrap");
            reject_unknown(jb, {"resamples", "confidence"}, "bootstrap");
            c.bootstrap.resamples =
                jb.value("resamples", c.bootstrap.resamples);
            c.bootstrap.confidence =
                jb.value("confidence", c.bootstrap.confidence);
        }
        c.alpha = j.value("alpha", c.alpha);
        c.tau_base_sigma = j.value("tau_base_sigma", c.tau_base_sigma);
        c.yield_sigma = j.value("yield_sigma", c.yield_sigma);
        if (j.contains("yield_thresholds")) {
            c.yield_thresholds =
                j.at("yield_thresholds").get<std::vector<double>>();
        }
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed campaign config: ") +
                              e.what());
    }
    c.validate();
    return c;
}

nlohmann::json campaign_config_to_json(const CampaignConfig& c) {
    nlohmann::json j;
    j["chain"] = {{"M", c.chain.length},
                  {"J", c.chain.coupling},
                  {"source", c.chain.source},
                  {"target", c.chain.target}};
    j["bounds"] = {{"delta_min", c.bounds.delta_min},
                   {"delta_max", c.bounds.delta_max},
                   {"t_min", c.bounds.t_min},
                   {"t_max", c.bounds.t_max}};
    j["algorithm"] = {{"name", c.algorithm}, {"options", c.algorithm_options}};
    j["objective"] = {{"kind", objective_kind_to_string(c.objective_kind)},
                      {"sigma_train", c.sigma_train},
                      {"ensemble_size", c.ensemble_size}};
    j["sigma_sim_grid"] = c.sigma_sim_grid;
    j["n_samples"] = c.n_samples;
    j["controllers"] = c.n_controllers;
    j["rim_order"] = c.rim_order;
    j["budget"] = c.budget;
    j["seed"] = c.seed;
    j["bootstrap"] = {{"resamples", c.bootstrap.resamples},
                      {"confidence", c.bootstrap.confidence}};
    j["alpha"] = c.alpha;
    j["tau_base_sigma"] = c.tau_base_sigma;
    j["yield_sigma"] = c.yield_sigma;
    j["yield_thresholds"] = c.yield_thresholds;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

std::uint64_t config_hash(const CampaignConfig& config) {
    // nlohmann objects iterate in sorted key order, so dump() is a
    // canonical form.
    return fnv1a64(campaign_config_to_json(config).dump());
}

namespace {

RimCell compute_cell(const ChainSpec& chain, const Controller& ctrl,
                     double sigma, int n_samples, double p,
                     const BootstrapConfig& bootstrap, RngStream sample_rng,
                     RngStream boot_rng) {
    const FidelitySampleSet samples =
        sample_fidelities(chain, ctrl, NoiseModel{sigma}, n_samples,
                          sample_rng);
    RimCell cell;
    cell.value = rim(samples, p).value;
    auto stat = [p](std::span<const double> data) {
        return rim(FidelitySampleSet(std::vector<double>(data.begin(),
                                                         data.end())),
                   p)
            .value;
    };
    std::tie(cell.ci_lo, cell.ci_hi) =
        bootstrap_ci(samples.values(), stat, bootstrap.resamples,
                     bootstrap.confidence, boot_rng);
    return cell;
}

std::vector<RimCell> rim_grid_impl(const ChainSpec& chain,
                                   std::span<const Controller> controllers,
                                   std::span<const double> sigma_grid,
                                   int n_samples, double p,
                                   const BootstrapConfig& bootstrap,
                                   RngStream rng, bool parallel) {
    if (controllers.empty() || sigma_grid.empty()) {
        throw ValidationError("rim grid needs controllers and noise levels");
    }
    const auto n_ctrl = static_cast<int>(controllers.size());
    const auto n_sigma = static_cast<int>(sigma_grid.size());
    std::vector<RimCell> grid(static_cast<std::size_t>(n_ctrl) * n_sigma);
    std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(static) if (parallel)
    for (int cell = 0; cell < n_ctrl * n_sigma; ++cell) {
        try {
            const int i = cell / n_sigma;
            const int j = cell % n_sigma;
            const auto iu = static_cast<std::uint64_t>(i);
            const auto ju = static_cast<std::uint64_t>(j);
            grid[cell] = compute_cell(
                chain, controllers[i], sigma_grid[j], n_samples, p, bootstrap,
                rng.child(kGridSampleNs).child(iu).child(ju),
                rng.child(kGridBootNs).child(iu).child(ju));
        } catch (...) {
#pragma omp critical
            {
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return grid;
}

} // namespace

std::vector<RimCell> rim_grid(const ChainSpec& chain,
                              std::span<const Controller> controllers,
                              std::span<const double> sigma_grid,
                              int n_samples, double p,
                              const BootstrapConfig& bootstrap,
                              RngStream rng) {
    return rim_grid_impl(chain, controllers, sigma_grid, n_samples, p,
                         bootstrap, rng, true);
}

std::vector<RimCell> rim_grid_serial(const ChainSpec& chain,
                                     std::span<const Controller> controllers,
                                     std::span<const double> sigma_grid,
                                     int n_samples, double p,
                                     const BootstrapConfig& bootstrap,
                                     RngStream rng) {
    return rim_grid_impl(chain, controllers, sigma_grid, n_samples, p,
                         bootstrap, rng, false);
}

std::pair<int, int> rank_average_selection(std::span<const RimCell> grid,
                                           int n_controllers) {
    if (n_controllers < 1) {
        throw ValidationError("selection needs at least one controller");
    }
    if (grid.empty() || grid.size() % static_cast<std::size_t>(
                                          n_controllers) != 0) {
        throw ValidationError("grid shape does not match controller count");
    }
    const auto n_sigma = static_cast<int>(
        grid.size() / static_cast<std::size_t>(n_controllers));

    std::vector<double> rank_sum(n_controllers, 0.0);
    std::vector<double> column(n_controllers);
    for (int j = 0; j < n_sigma; ++j) {
        for (int i = 0; i < n_controllers; ++i) {
            column[i] = grid[static_cast<std::size_t>(i) * n_sigma + j].value;
        }
        const std::vector<double> ranks = average_ranks(column);
        for (int i = 0; i < n_controllers; ++i) rank_sum[i] += ranks[i];
    }

    // Order controllers by (rank sum, first-column RIM, index).
    std::vector<int> order(n_controllers);
    std::iota(order.begin(), order.end(), 0);
    auto first_col = [&](int i) {
        return grid[static_cast<std::size_t>(i) * n_sigma].value;
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (rank_sum[a] != rank_sum[b]) return rank_sum[a] < rank_sum[b];
        if (first_col(a) != first_col(b)) return first_col(a) < first_col(b);
        return a < b;
    });
    return {order.front(), order[(n_controllers - 1) / 2]};
}

std::vector<OptimRun> campaign_search_stage(const CampaignConfig& config) {
    config.validate();
    nlohmann::json opt_options = config.algorithm_options;
    if (config.checkpoint_every > 0) {
        opt_options["checkpoint_every"] = config.checkpoint_every;
    }
    const auto optimizer = make_optimizer(config.algorithm, opt_options);

    ObjectiveSpec ospec;
    ospec.kind = config.objective_kind;
    ospec.chain = config.chain;
    ospec.bounds = config.bounds;
    ospec.sigma_train = config.sigma_train;
    ospec.ensemble_size = config.ensemble_size;

    const RngStream root(config.seed);
    const Objective prototype(ospec, root.child(kObjectiveNs));
    return run_campaign_search(prototype, *optimizer, config.n_controllers,
                               config.budget, root.child(kSearchNs));
}

std::vector<RimCell> campaign_grid_stage(
    const CampaignConfig& config, std::span<const Controller> controllers) {
    config.validate();
    return rim_grid(config.chain, controllers, config.sigma_sim_grid,
                    config.n_samples, config.rim_order, config.bootstrap,
                    RngStream(config.seed));
}

ArimCurve campaign_arim_stage(const CampaignConfig& config,
                              std::span<const RimCell> grid,
                              int n_controllers) {
    const auto n_sigma = static_cast<int>(config.sigma_sim_grid.size());
    if (n_controllers < 1 ||
        grid.size() != static_cast<std::size_t>(n_controllers) * n_sigma) {
        throw ValidationError("grid shape does not match controller count");
    }
    const RngStream root(config.seed);
    ArimCurve curve;
    std::vector<double> column(n_controllers);
    for (int j = 0; j < n_sigma; ++j) {
        std::vector<RimEstimate> rims(n_controllers);
        for (int i = 0; i < n_controllers; ++i) {
            column[i] = grid[static_cast<std::size_t>(i) * n_sigma + j].value;
            rims[i] = {config.rim_order, column[i], config.n_samples};
        }
        curve.value.push_back(arim(rims).value);
        auto mean_stat = [](std::span<const double> data) {
            double acc = 0.0;
            for (double v : data) acc += v;
            return acc / static_cast<double>(data.size());
        };
        const auto [lo, hi] = bootstrap_ci(
            column, mean_stat, config.bootstrap.resamples,
            config.bootstrap.confidence,
            root.child(kArimBootNs).child(static_cast<std::uint64_t>(j)));
        curve.lo.push_back(lo);
        curve.hi.push_back(hi);
    }
    return curve;
}

std::vector<std::vector<double>> campaign_yield_stage(
    const CampaignConfig& config, std::span<const Controller> controllers) {
    config.validate();
    const RngStream root(config.seed);
    std::vector<std::vector<double>> yields(controllers.size());
    for (std::size_t i = 0; i < controllers.size(); ++i) {
        const FidelitySampleSet samples = sample_fidelities(
            config.chain, controllers[i], NoiseModel{config.yield_sigma},
            config.n_samples, root.child(kYieldNs).child(i));
        for (double th : config.yield_thresholds) {
            yields[i].push_back(yield(samples, th));
        }
    }
    return yields;
}

CampaignResult run_campaign(const CampaignConfig& config) {
    config.validate();
    CampaignResult result;
    result.config = config;
    result.hash = config_hash(config);

    result.runs = campaign_search_stage(config);
    result.budget_exhausted =
        static_cast<int>(result.runs.size()) < config.n_controllers;
    if (result.runs.empty()) {
        return result; // nothing to evaluate; caller flags the exhaustion
    }

    std::vector<Controller> controllers;
    controllers.reserve(result.runs.size());
    for (const OptimRun& run : result.runs) controllers.push_back(run.best);

    result.grid = campaign_grid_stage(config, controllers);

    const auto n_ctrl = static_cast<int>(controllers.size());
    ArimCurve curve = campaign_arim_stage(config, result.grid, n_ctrl);
    result.arim = std::move(curve.value);
    result.arim_lo = std::move(curve.lo);
    result.arim_hi = std::move(curve.hi);

    // Rank-consistency row; degenerate rank vectors (e.g. every
    // controller ties) are reported as an empty row, not an error.
    if (n_ctrl >= 2) {
        std::vector<double> values(result.grid.size());
        for (std::size_t k = 0; k < result.grid.size(); ++k) {
            values[k] = result.grid[k].value;
        }
        try {
            result.tau_row =
                tau_curve(values, n_ctrl, config.sigma_sim_grid,
                          config.alpha, config.tau_base_sigma);
        } catch (const DegenerateRankError&) {
            result.tau_degenerate = true;
        }
    } else {
        result.tau_degenerate = true;
    }

    result.yields = campaign_yield_stage(config, controllers);
    std::tie(result.best_controller, result.median_controller) =
        rank_average_selection(result.grid, n_ctrl);
    return result;
}

} // namespace rim
