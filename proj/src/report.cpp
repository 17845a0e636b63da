#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rim/campaign.hpp"
#include "rim/io.hpp"

namespace rim {

namespace {

namespace fs = std::filesystem;

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& header)
        : path_(path.string()), out_(path) {
        if (!out_) {
            throw IoError("cannot open " + path_ + " for writing");
        }
        out_ << header << '\n';
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i > 0) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) {
            throw IoError("failed to write " + path_);
        }
    }

private:
    std::string path_;
    std::ofstream out_;
};

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    out.close();
    if (!out) {
        throw IoError("failed to write " + path.string());
    }
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                               const std::string& header) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw ValidationError("unexpected header in " + path.string());
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        rows.push_back(std::move(fields));
    }
    return rows;
}

double parse_double(const std::string& s, const fs::path& path) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        throw ValidationError("malformed number '" + s + "' in " +
                              path.string());
    }
    return v;
}

std::int64_t parse_int(const std::string& s, const fs::path& path) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        throw ValidationError("malformed integer '" + s + "' in " +
                              path.string());
    }
    return v;
}

const std::string kRimHeader = "controller,sigma,p,rim,n,ci_lo,ci_hi";
const std::string kArimHeader = "sigma,arim,ci_lo,ci_hi,n_controllers";
const std::string kTauHeader =
    "sigma_base,sigma_j,alpha,tau,p_value,concordant,discordant,ties_i,"
    "ties_j";
const std::string kYieldHeader = "controller,sigma,threshold,yield";
const std::string kTrajectoryHeader = "restart,calls_used,objective";

void write_summary_json(const CampaignResult& r, const fs::path& path) {
    nlohmann::json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["created_at"] = iso8601_utc_now();
    summary["config"] = campaign_config_to_json(r.config);
    summary["config_hash"] = hash_to_hex(r.hash);
    summary["n_controllers_requested"] = r.config.n_controllers;
    summary["n_controllers_completed"] = r.runs.size();
    summary["budget_exhausted"] = r.budget_exhausted;
    summary["tau_degenerate"] = r.tau_degenerate;
    summary["best_controller"] = r.best_controller;
    summary["median_controller"] = r.median_controller;
    write_json_file(path, summary);
}

} // namespace

void write_rim_grid_csv(const CampaignResult& r, const std::string& path) {
    const auto& grid_sigmas = r.config.sigma_sim_grid;
    const auto n_sigma = grid_sigmas.size();
    if (r.grid.size() != r.runs.size() * n_sigma) {
        throw ValidationError("grid shape does not match controller count");
    }
    CsvWriter csv(path, kRimHeader);
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
        for (std::size_t j = 0; j < n_sigma; ++j) {
            const RimCell& cell = r.grid[i * n_sigma + j];
            csv.row({std::to_string(i), format_double(grid_sigmas[j]),
                     format_double(r.config.rim_order),
                     format_double(cell.value),
                     std::to_string(r.config.n_samples),
                     format_double(cell.ci_lo), format_double(cell.ci_hi)});
        }
    }
    csv.close();
}

void write_arim_curve_csv(const CampaignResult& r, const std::string& path) {
    const auto& grid_sigmas = r.config.sigma_sim_grid;
    if (r.arim.size() != grid_sigmas.size()) {
        throw ValidationError("curve length does not match the sigma grid");
    }
    CsvWriter csv(path, kArimHeader);
    for (std::size_t j = 0; j < grid_sigmas.size(); ++j) {
        csv.row({format_double(grid_sigmas[j]), format_double(r.arim[j]),
                 format_double(r.arim_lo[j]), format_double(r.arim_hi[j]),
                 std::to_string(r.runs.size())});
    }
    csv.close();
}

void write_tau_csv(const CampaignResult& r, const std::string& path) {
    CsvWriter csv(path, kTauHeader);
    for (std::size_t j = 0; j < r.tau_row.size(); ++j) {
        const TauResult& t = r.tau_row[j];
        csv.row({format_double(r.config.tau_base_sigma),
                 format_double(r.config.sigma_sim_grid[j]),
                 format_double(r.config.alpha), format_double(t.tau),
                 format_double(t.p_value), std::to_string(t.concordant),
                 std::to_string(t.discordant), std::to_string(t.ties_i),
                 std::to_string(t.ties_j)});
    }
    csv.close();
}

void write_yield_csv(const CampaignResult& r, const std::string& path) {
    CsvWriter csv(path, kYieldHeader);
    for (std::size_t i = 0; i < r.yields.size(); ++i) {
        for (std::size_t k = 0; k < r.config.yield_thresholds.size(); ++k) {
            csv.row({std::to_string(i), format_double(r.config.yield_sigma),
                     format_double(r.config.yield_thresholds[k]),
                     format_double(r.yields[i][k])});
        }
    }
    csv.close();
}

void write_trajectory_csv(const CampaignResult& r, const std::string& path) {
    CsvWriter csv(path, kTrajectoryHeader);
    for (const OptimRun& run : r.runs) {
        for (const TrajectoryPoint& pt : run.trajectory) {
            csv.row({std::to_string(run.restart),
                     std::to_string(pt.calls_used),
                     format_double(pt.objective)});
        }
    }
    csv.close();
}

void write_controllers_json(const CampaignResult& r, const std::string& path) {
    nlohmann::json controllers = nlohmann::json::array();
    for (const OptimRun& run : r.runs) {
        nlohmann::json rec = controller_to_json(r.config.chain, run.best);
        rec["objective"] = run.best_objective;
        rec["restart"] = run.restart;
        rec["seed"] = run.seed;
        rec["calls_used"] = run.calls_used;
        controllers.push_back(std::move(rec));
    }
    write_json_file(path, controllers);
}

std::vector<OptimRun> load_controllers_json(const ChainSpec& chain,
                                            const std::string& path) {
    const nlohmann::json controllers = read_json_file(path);
    if (!controllers.is_array() || controllers.empty()) {
        throw ValidationError(path +
                              " must hold a non-empty controller array");
    }
    std::vector<OptimRun> runs;
    runs.reserve(controllers.size());
    for (const auto& rec : controllers) {
        OptimRun run;
        auto [rec_chain, ctrl] = controller_from_json(rec);
        if (rec_chain.length != chain.length ||
            rec_chain.coupling != chain.coupling ||
            rec_chain.source != chain.source ||
            rec_chain.target != chain.target) {
            throw ValidationError(
                "controller record does not match the campaign chain");
        }
        run.best = std::move(ctrl);
        try {
            run.best_objective = rec.value("objective", 0.0);
            run.restart = rec.value("restart", 0);
            run.seed = rec.value("seed", std::uint64_t{0});
            run.calls_used = rec.value("calls_used", std::int64_t{0});
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(
                std::string("malformed controller record: ") + e.what());
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

std::uint64_t hash_from_hex(const std::string& text) {
    if (text.size() != 18 || text.compare(0, 2, "0x") != 0) {
        throw ValidationError("malformed config hash: " + text);
    }
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str() + 2, &end, 16);
    if (*end != '\0' || errno == ERANGE) {
        throw ValidationError("malformed config hash: " + text);
    }
    return v;
}

void report(const CampaignResult& result, const std::string& out_dir,
            const std::string& format) {
    if (format != "csv" && format != "json") {
        throw ValidationError("unknown report format: " + format);
    }
    if (result.grid.empty() || result.runs.empty()) {
        throw ValidationError("refusing to report an empty result");
    }
    const auto n_sigma = result.config.sigma_sim_grid.size();
    if (result.grid.size() != result.runs.size() * n_sigma ||
        result.arim.size() != n_sigma) {
        throw ValidationError("result shape is internally inconsistent");
    }
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + out_dir + ": " +
                      ec.message());
    }
    if (format == "csv") {
        write_rim_grid_csv(result, (dir / "rim_grid.csv").string());
        write_arim_curve_csv(result, (dir / "arim_curve.csv").string());
        write_tau_csv(result, (dir / "tau.csv").string());
        write_yield_csv(result, (dir / "yield.csv").string());
        write_trajectory_csv(result, (dir / "trajectory.csv").string());
    }
    write_controllers_json(result, (dir / "controllers.json").string());
    write_summary_json(result, dir / "summary.json");
}

CampaignResult load_campaign_result(const std::string& in_dir) {
    const fs::path dir(in_dir);
    const nlohmann::json summary = read_json_file(dir / "summary.json");
    CampaignResult r;
    try {
        const int version = summary.at("schema_version").get<int>();
        if (version != kSchemaVersion) {
            throw ValidationError(
                "artifact schema version " + std::to_string(version) +
                " is not readable by this build (expected " +
                std::to_string(kSchemaVersion) + ")");
        }
        r.config = campaign_config_from_json(summary.at("config"));
        r.hash = hash_from_hex(summary.at("config_hash").get<std::string>());
        r.budget_exhausted = summary.at("budget_exhausted").get<bool>();
        r.tau_degenerate = summary.at("tau_degenerate").get<bool>();
        r.best_controller = summary.at("best_controller").get<int>();
        r.median_controller = summary.at("median_controller").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed summary.json: ") +
                              e.what());
    }

    r.runs = load_controllers_json(r.config.chain,
                                   (dir / "controllers.json").string());

    const auto n_sigma = r.config.sigma_sim_grid.size();
    const fs::path rim_path = dir / "rim_grid.csv";
    const auto rim_rows = read_csv(rim_path, kRimHeader);
    if (rim_rows.size() != r.runs.size() * n_sigma) {
        throw ValidationError("rim_grid.csv row count does not match shape");
    }
    r.grid.resize(rim_rows.size());
    for (std::size_t k = 0; k < rim_rows.size(); ++k) {
        const auto& row = rim_rows[k];
        if (row.size() != 7) {
            throw ValidationError("malformed row in rim_grid.csv");
        }
        r.grid[k].value = parse_double(row[3], rim_path);
        r.grid[k].ci_lo = parse_double(row[5], rim_path);
        r.grid[k].ci_hi = parse_double(row[6], rim_path);
    }

    const fs::path arim_path = dir / "arim_curve.csv";
    for (const auto& row : read_csv(arim_path, kArimHeader)) {
        if (row.size() != 5) {
            throw ValidationError("malformed row in arim_curve.csv");
        }
        r.arim.push_back(parse_double(row[1], arim_path));
        r.arim_lo.push_back(parse_double(row[2], arim_path));
        r.arim_hi.push_back(parse_double(row[3], arim_path));
    }
    if (r.arim.size() != n_sigma) {
        throw ValidationError("arim_curve.csv row count does not match grid");
    }

    const fs::path tau_path = dir / "tau.csv";
    for (const auto& row : read_csv(tau_path, kTauHeader)) {
        if (row.size() != 9) {
            throw ValidationError("malformed row in tau.csv");
        }
        TauResult t;
        t.tau = parse_double(row[3], tau_path);
        t.p_value = parse_double(row[4], tau_path);
        t.concordant = parse_int(row[5], tau_path);
        t.discordant = parse_int(row[6], tau_path);
        t.ties_i = parse_int(row[7], tau_path);
        t.ties_j = parse_int(row[8], tau_path);
        r.tau_row.push_back(t);
    }

    const fs::path yield_path = dir / "yield.csv";
    const auto n_thresholds = r.config.yield_thresholds.size();
    r.yields.assign(r.runs.size(), {});
    for (const auto& row : read_csv(yield_path, kYieldHeader)) {
        if (row.size() != 4) {
            throw ValidationError("malformed row in yield.csv");
        }
        const auto i = static_cast<std::size_t>(parse_int(row[0], yield_path));
        if (i >= r.yields.size()) {
            throw ValidationError("yield.csv controller index out of range");
        }
        r.yields[i].push_back(parse_double(row[3], yield_path));
    }
    for (const auto& per_controller : r.yields) {
        if (per_controller.size() != n_thresholds) {
            throw ValidationError("yield.csv rows do not cover thresholds");
        }
    }

    const fs::path traj_path = dir / "trajectory.csv";
    std::size_t max_restart = 0;
    for (const OptimRun& run : r.runs) {
        max_restart = std::max(max_restart,
                               static_cast<std::size_t>(run.restart));
    }
    std::vector<std::ptrdiff_t> restart_to_index(max_restart + 1, -1);
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
        restart_to_index[static_cast<std::size_t>(r.runs[i].restart)] =
            static_cast<std::ptrdiff_t>(i);
    }
    for (const auto& row : read_csv(traj_path, kTrajectoryHeader)) {
        if (row.size() != 3) {
            throw ValidationError("malformed row in trajectory.csv");
        }
        const auto restart =
            static_cast<std::size_t>(parse_int(row[0], traj_path));
        if (restart >= restart_to_index.size() ||
            restart_to_index[restart] < 0) {
            throw ValidationError("trajectory.csv references unknown restart");
        }
        TrajectoryPoint pt;
        pt.calls_used = parse_int(row[1], traj_path);
        pt.objective = parse_double(row[2], traj_path);
        r.runs[static_cast<std::size_t>(restart_to_index[restart])]
            .trajectory.push_back(pt);
    }
    return r;
}

} // namespace rim
