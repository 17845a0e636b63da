#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "rim/campaign.hpp"
#include "rim/io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace rim;

constexpr int kExitValidation = 2;
constexpr int kExitBudget = 3;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int threads = 0;
    std::int64_t checkpoint_every = 0;
    std::string controllers_path;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_controllers) {
    cmd->add_option("--config", args.config_path, "campaign config (JSON)")
        ->required();
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--threads", args.threads, "worker threads (0 = default)");
    cmd->add_option("--checkpoint-every", args.checkpoint_every,
                    "trajectory checkpoint interval in calls (0 = auto)");
    if (needs_controllers) {
        cmd->add_option("--controllers", args.controllers_path,
                        "controllers.json produced by 'optimize'")
            ->required();
    }
}

CampaignConfig load_config(const CommonArgs& args) {
    std::ifstream in(args.config_path);
    if (!in) {
        throw IoError("cannot open config " + args.config_path);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed config JSON in " + args.config_path +
                              ": " + e.what());
    }
    CampaignConfig config = campaign_config_from_json(j);
    if (args.seed) config.seed = *args.seed;
    if (args.checkpoint_every > 0) {
        config.checkpoint_every = args.checkpoint_every;
    }
    if (args.threads > 0) omp_set_num_threads(args.threads);
    return config;
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw IoError("cannot create output directory " + out + ": " +
                      ec.message());
    }
}

std::vector<Controller> best_controllers(const std::vector<OptimRun>& runs) {
    std::vector<Controller> out;
    out.reserve(runs.size());
    for (const OptimRun& run : runs) out.push_back(run.best);
    return out;
}

// Search stage only: controllers.json + trajectory.csv.
int cmd_optimize(const CommonArgs& args) {
    const CampaignConfig config = load_config(args);
    CampaignResult result;
    result.config = config;
    result.hash = config_hash(config);
    result.runs = campaign_search_stage(config);
    if (result.runs.empty()) {
        std::cerr << "optimize: no restart completed within the budget\n";
        return kExitBudget;
    }
    ensure_out_dir(args.out);
    write_controllers_json(result,
                           (fs::path(args.out) / "controllers.json").string());
    write_trajectory_csv(result,
                         (fs::path(args.out) / "trajectory.csv").string());
    std::cout << "optimize: " << result.runs.size() << "/"
              << config.n_controllers << " restarts, best objective "
              << format_double(result.runs.front().best_objective) << "\n";
    return static_cast<int>(result.runs.size()) < config.n_controllers
               ? kExitBudget
               : 0;
}

// RIM grid for an existing controller set.
int cmd_rim(const CommonArgs& args) {
    const CampaignConfig config = load_config(args);
    CampaignResult result;
    result.config = config;
    result.hash = config_hash(config);
    result.runs = load_controllers_json(config.chain, args.controllers_path);
    result.grid = campaign_grid_stage(config, best_controllers(result.runs));
    ensure_out_dir(args.out);
    write_rim_grid_csv(result, (fs::path(args.out) / "rim_grid.csv").string());
    std::cout << "rim: " << result.runs.size() << " controllers x "
              << config.sigma_sim_grid.size() << " noise levels\n";
    return 0;
}

int cmd_arim(const CommonArgs& args) {
    const CampaignConfig config = load_config(args);
    CampaignResult result;
    result.config = config;
    result.hash = config_hash(config);
    result.runs = load_controllers_json(config.chain, args.controllers_path);
    result.grid = campaign_grid_stage(config, best_controllers(result.runs));
    ArimCurve curve = campaign_arim_stage(
        config, result.grid, static_cast<int>(result.runs.size()));
    result.arim = std::move(curve.value);
    result.arim_lo = std::move(curve.lo);
    result.arim_hi = std::move(curve.hi);
    ensure_out_dir(args.out);
    write_arim_curve_csv(result,
                         (fs::path(args.out) / "arim_curve.csv").string());
    std::cout << "arim: curve over " << config.sigma_sim_grid.size()
              << " noise levels\n";
    return 0;
}

int cmd_tau(const CommonArgs& args) {
    const CampaignConfig config = load_config(args);
    CampaignResult result;
    result.config = config;
    result.hash = config_hash(config);
    result.runs = load_controllers_json(config.chain, args.controllers_path);
    result.grid = campaign_grid_stage(config, best_controllers(result.runs));
    std::vector<double> values(result.grid.size());
    for (std::size_t k = 0; k < result.grid.size(); ++k) {
        values[k] = result.grid[k].value;
    }
    result.tau_row = tau_curve(values, static_cast<int>(result.runs.size()),
                               config.sigma_sim_grid, config.alpha,
                               config.tau_base_sigma);
    ensure_out_dir(args.out);
    write_tau_csv(result, (fs::path(args.out) / "tau.csv").string());
    std::cout << "tau: row against sigma_base="
              << format_double(config.tau_base_sigma) << "\n";
    return 0;
}

int cmd_yield(const CommonArgs& args) {
    const CampaignConfig config = load_config(args);
    CampaignResult result;
    result.config = config;
    result.hash = config_hash(config);
    result.runs = load_controllers_json(config.chain, args.controllers_path);
    result.yields =
        campaign_yield_stage(config, best_controllers(result.runs));
    ensure_out_dir(args.out);
    write_yield_csv(result, (fs::path(args.out) / "yield.csv").string());
    std::cout << "yield: " << result.runs.size() << " controllers at sigma="
              << format_double(config.yield_sigma) << "\n";
    return 0;
}

int cmd_campaign(const CommonArgs& args) {
    const CampaignConfig config = load_config(args);
    const CampaignResult result = run_campaign(config);
    if (result.runs.empty()) {
        std::cerr << "campaign: no restart completed within the budget\n";
        return kExitBudget;
    }
    report(result, args.out, "csv");
    std::cout << "campaign: " << result.runs.size() << "/"
              << config.n_controllers << " controllers, ARIM("
              << format_double(config.sigma_sim_grid.front())
              << ")=" << format_double(result.arim.front())
              << ", artifacts in " << args.out << "\n";
    return result.budget_exhausted ? kExitBudget : 0;
}

int cmd_report(const std::string& in_dir, const std::string& out,
               const std::string& format) {
    const CampaignResult result = load_campaign_result(in_dir);
    report(result, out, format);
    std::cout << "report: " << format << " artifacts in " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Statistical robustness characterization of spin-chain "
        "state-transfer controllers"};
    app.require_subcommand(1);

    CommonArgs optimize_args;
    add_common(app.add_subcommand("optimize",
                                  "multi-start controller search"),
               optimize_args, false);
    CommonArgs rim_args;
    add_common(app.add_subcommand("rim", "RIM grid for stored controllers"),
               rim_args, true);
    CommonArgs arim_args;
    add_common(app.add_subcommand("arim", "ARIM curve with bootstrap bands"),
               arim_args, true);
    CommonArgs tau_args;
    add_common(app.add_subcommand("tau", "rank-consistency row"), tau_args,
               true);
    CommonArgs yield_args;
    add_common(app.add_subcommand("yield", "yield table"), yield_args, true);
    CommonArgs campaign_args;
    add_common(app.add_subcommand("campaign", "full pipeline"), campaign_args,
               false);

    auto* report_cmd =
        app.add_subcommand("report", "re-emit artifacts from a result dir");
    std::string report_in;
    std::string report_out = "out";
    std::string report_format = "csv";
    report_cmd->add_option("--in", report_in, "directory with summary.json")
        ->required();
    report_cmd->add_option("--out", report_out, "output directory");
    report_cmd->add_option("--format", report_format, "csv or json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("optimize")) return cmd_optimize(optimize_args);
        if (app.got_subcommand("rim")) return cmd_rim(rim_args);
        if (app.got_subcommand("arim")) return cmd_arim(arim_args);
        if (app.got_subcommand("tau")) return cmd_tau(tau_args);
        if (app.got_subcommand("yield")) return cmd_yield(yield_args);
        if (app.got_subcommand("campaign")) return cmd_campaign(campaign_args);
        if (app.got_subcommand("report")) {
            return cmd_report(report_in, report_out, report_format);
        }
    } catch (const BudgetExhausted& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBudget;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DegenerateRankError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
