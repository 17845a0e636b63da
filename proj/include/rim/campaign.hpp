#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rim/kendall.hpp"
#include "rim/optimize.hpp"
#include "rim/stats.hpp"

namespace rim {

/// Version of the persisted artifact schema; bumped on layout changes.
/// Loaders reject files written under a different version.
inline constexpr int kSchemaVersion = 1;

struct BootstrapConfig {
    int resamples = 100;
    double confidence = 0.95;
};

/// Declarative description of one full experiment: search, RIM grid,
/// ARIM curve, rank-consistency row, yields. Parsed from a JSON file;
/// every field has a default so a config may specify only deviations.
struct CampaignConfig {
    ChainSpec chain;
    ControlBounds bounds;
    std::string algorithm = "nelder_mead";
    nlohmann::json algorithm_options = nlohmann::json::object();
    ObjectiveKind objective_kind = ObjectiveKind::Noiseless;
    double sigma_train = 0.0;
    int ensemble_size = 100;
    std::vector<double> sigma_sim_grid = {0.0,  0.01, 0.02, 0.03, 0.04, 0.05,
                                          0.06, 0.07, 0.08, 0.09, 0.1};
    int n_samples = 100;
    int n_controllers = 100;
    double rim_order = 1.0;
    std::int64_t budget = 1000000;
    std::uint64_t seed = 1;
    BootstrapConfig bootstrap;
    double alpha = 0.05;
    double tau_base_sigma = 0.0;
    double yield_sigma = 0.02;
    std::vector<double> yield_thresholds = {0.95, 0.98};
    std::int64_t checkpoint_every = 0; // 0 = each restart budget / 10

    void validate() const;
};

CampaignConfig campaign_config_from_json(const nlohmann::json& j);
nlohmann::json campaign_config_to_json(const CampaignConfig& config);

/// FNV-1a hash of the canonical (sorted-key) serialization; stored with
/// every artifact so results can be matched to their exact config.
std::uint64_t config_hash(const CampaignConfig& config);

/// One RIM grid entry with its bootstrap interval.
struct RimCell {
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

/// RIM_p of every controller at every noise level, row-major
/// controllers x sigma grid. Cell (i, j) draws its samples from
/// rng.child(1).child(i).child(j) and its bootstrap resamples from
/// rng.child(2).child(i).child(j), so any cell is recomputable in
/// isolation and the result is independent of thread count.
std::vector<RimCell> rim_grid(const ChainSpec& chain,
                              std::span<const Controller> controllers,
                              std::span<const double> sigma_grid,
                              int n_samples, double p,
                              const BootstrapConfig& bootstrap,
                              RngStream rng);

/// Single-threaded reference implementation of rim_grid.
std::vector<RimCell> rim_grid_serial(const ChainSpec& chain,
                                     std::span<const Controller> controllers,
                                     std::span<const double> sigma_grid,
                                     int n_samples, double p,
                                     const BootstrapConfig& bootstrap,
                                     RngStream rng);

/// Rank controllers per grid column (average ranks, ascending RIM), sum
/// ranks per controller, and return (best, median): best = smallest rank
/// sum, median = middle rank sum. Ties break by the first-column RIM,
/// then by index.
std::pair<int, int> rank_average_selection(std::span<const RimCell> grid,
                                           int n_controllers);

struct CampaignResult {
    CampaignConfig config;
    std::uint64_t hash = 0;
    std::vector<OptimRun> runs;     // ranked ascending by objective
    std::vector<RimCell> grid;      // row-major runs.size() x sigma grid
    std::vector<double> arim;       // per sigma column
    std::vector<double> arim_lo;
    std::vector<double> arim_hi;
    std::vector<TauResult> tau_row; // empty when degenerate
    bool tau_degenerate = false;
    std::vector<std::vector<double>> yields; // [controller][threshold]
    int best_controller = -1;
    int median_controller = -1;
    bool budget_exhausted = false; // completed restarts < requested
};

struct ArimCurve {
    std::vector<double> value;
    std::vector<double> lo;
    std::vector<double> hi;
};

/// Pipeline stages, each deterministic in (config, seed) alone so CLI
/// subcommands can reproduce any piece of a campaign in isolation.
std::vector<OptimRun> campaign_search_stage(const CampaignConfig& config);
std::vector<RimCell> campaign_grid_stage(
    const CampaignConfig& config, std::span<const Controller> controllers);
ArimCurve campaign_arim_stage(const CampaignConfig& config,
                              std::span<const RimCell> grid,
                              int n_controllers);
std::vector<std::vector<double>> campaign_yield_stage(
    const CampaignConfig& config, std::span<const Controller> controllers);

/// Full pipeline: multi-start search, RIM grid with intervals, ARIM
/// curve with bootstrap intervals, tau row against the base noise level,
/// yield table, and rank-average selection. Deterministic in
/// (config, seed) regardless of thread count.
CampaignResult run_campaign(const CampaignConfig& config);

/// Emit a result as plot-ready files into out_dir. Format "csv" writes
/// rim_grid.csv, arim_curve.csv, tau.csv, yield.csv, trajectory.csv,
/// controllers.json and summary.json; format "json" writes the two JSON
/// files only. Unknown formats are validation errors; an empty grid is
/// rejected before any file is created. Floats are written with 17
/// significant digits so artifacts replay byte-identically.
void report(const CampaignResult& result, const std::string& out_dir,
            const std::string& format = "csv");

/// Reload a persisted result (summary.json + CSVs) for re-reporting.
/// Rejects artifacts written under a different schema version.
CampaignResult load_campaign_result(const std::string& dir);

/// Individual artifact emitters; report() is their composition. Each
/// only touches the result fields it writes, so partially filled results
/// (e.g. a grid without a search trajectory) can still be persisted by
/// the matching CLI subcommand.
void write_rim_grid_csv(const CampaignResult& result, const std::string& path);
void write_arim_curve_csv(const CampaignResult& result,
                          const std::string& path);
void write_tau_csv(const CampaignResult& result, const std::string& path);
void write_yield_csv(const CampaignResult& result, const std::string& path);
void write_trajectory_csv(const CampaignResult& result,
                          const std::string& path);
void write_controllers_json(const CampaignResult& result,
                            const std::string& path);

/// Controller records as written by write_controllers_json; the chain in
/// every record must match `chain`.
std::vector<OptimRun> load_controllers_json(const ChainSpec& chain,
                                            const std::string& path);

} // namespace rim
