// Timing comparison of the OpenMP kernels against their single-threaded
// reference implementations. Both paths must produce identical numbers;
// the speedup column is informational and machine-dependent.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "rim/campaign.hpp"

using namespace rim;

namespace {

struct BenchResult {
    std::string name;
    double serial_s = 0.0;
    double parallel_s = 0.0;
    bool identical = false;
};

void print_row(const BenchResult& r) {
    std::printf("%-18s %10.3f s %10.3f s %8.2fx   %s\n", r.name.c_str(),
                r.serial_s, r.parallel_s,
                r.parallel_s > 0.0 ? r.serial_s / r.parallel_s : 0.0,
                r.identical ? "identical" : "MISMATCH");
}

BenchResult bench_rim_grid(const ChainSpec& chain,
                           const std::vector<Controller>& controllers,
                           const std::vector<double>& sigmas, int n_samples) {
    const BootstrapConfig bootstrap;
    const RngStream root(42);
    BenchResult r;
    r.name = "rim_grid";

    double t0 = omp_get_wtime();
    const auto serial = rim_grid_serial(chain, controllers, sigmas, n_samples,
                                        1.0, bootstrap, root);
    r.serial_s = omp_get_wtime() - t0;

    t0 = omp_get_wtime();
    const auto parallel =
        rim_grid(chain, controllers, sigmas, n_samples, 1.0, bootstrap, root);
    r.parallel_s = omp_get_wtime() - t0;

    r.identical = serial.size() == parallel.size();
    for (std::size_t i = 0; r.identical && i < serial.size(); ++i) {
        r.identical = serial[i].value == parallel[i].value &&
                      serial[i].ci_lo == parallel[i].ci_lo &&
                      serial[i].ci_hi == parallel[i].ci_hi;
    }
    return r;
}

BenchResult bench_search(const ObjectiveSpec& ospec, int restarts,
                         std::int64_t budget) {
    const RngStream root(42);
    const Objective prototype(ospec, root.child(1));
    const auto optimizer =
        make_optimizer("nelder_mead", nlohmann::json::object());
    BenchResult r;
    r.name = "multistart_search";

    double t0 = omp_get_wtime();
    const auto serial = run_campaign_search_serial(prototype, *optimizer,
                                                   restarts, budget,
                                                   root.child(2));
    r.serial_s = omp_get_wtime() - t0;

    t0 = omp_get_wtime();
    const auto parallel = run_campaign_search(prototype, *optimizer, restarts,
                                              budget, root.child(2));
    r.parallel_s = omp_get_wtime() - t0;

    r.identical = serial.size() == parallel.size();
    for (std::size_t i = 0; r.identical && i < serial.size(); ++i) {
        r.identical = serial[i].restart == parallel[i].restart &&
                      serial[i].best_objective == parallel[i].best_objective &&
                      serial[i].best.time == parallel[i].best.time &&
                      serial[i].best.biases == parallel[i].best.biases;
    }
    return r;
}

} // namespace

int main() {
    ChainSpec chain;
    chain.length = 5;
    chain.source = 1;
    chain.target = 3;

    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-18s %12s %12s %9s   %s\n", "kernel", "serial", "parallel",
                "speedup", "check");

    ControlBounds bounds;
    RngStream start_rng(7);
    const std::vector<Controller> controllers =
        latin_hypercube_init(bounds, chain.length, 24, start_rng);
    const std::vector<double> sigmas = {0.0,  0.01, 0.02, 0.03, 0.04, 0.05,
                                        0.06, 0.07, 0.08, 0.09, 0.1};
    print_row(bench_rim_grid(chain, controllers, sigmas, 200));

    ObjectiveSpec ospec;
    ospec.chain = chain;
    ospec.bounds = bounds;
    print_row(bench_search(ospec, 16, 16000));
    return 0;
}
