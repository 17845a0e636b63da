#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rim/noise.hpp"
#include "rim/rng.hpp"
#include "rim/spin_chain.hpp"

namespace rim {

enum class ObjectiveKind {
    Noiseless,        // 1 - F, cost 1 per call
    Stochastic,       // 1 - F under one fresh perturbation per call, cost 1
    FixedEnsembleRim, // RIM_1 over k frozen perturbations, cost k
};

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::Noiseless;
    ChainSpec chain;
    ControlBounds bounds;
    double sigma_train = 0.0;
    int ensemble_size = 100; // k, used by FixedEnsembleRim only

    void validate() const;
    int dim() const { return chain.length + 1; } // biases + time
};

/// Weighted evaluation budget. Every objective call debits its cost;
/// overdraw throws BudgetExhausted before any work is done.
class Budget {
public:
    explicit Budget(std::int64_t max_calls);

    std::int64_t max_calls() const { return max_calls_; }
    std::int64_t used_calls() const { return used_; }
    std::int64_t remaining() const { return max_calls_ - used_; }
    bool can_afford(std::int64_t cost) const { return cost <= remaining(); }
    void debit(std::int64_t cost);

private:
    std::int64_t max_calls_;
    std::int64_t used_ = 0;
};

/// Minimization objective over controllers with exact budget accounting.
/// FixedEnsembleRim samples its k perturbations once at construction and
/// keeps them frozen; Stochastic derives one fresh perturbation per call
/// from a counter-keyed substream, so the value sequence is reproducible.
class Objective {
public:
    Objective(ObjectiveSpec spec, RngStream rng);

    /// Copy sharing the frozen ensemble but drawing stochastic
    /// perturbations from `rng`; used to hand each restart its own stream.
    Objective with_call_stream(RngStream rng) const;

    double evaluate(const Controller& ctrl, Budget& budget);

    /// Value plus analytic gradient; Noiseless objectives only.
    double evaluate_with_gradient(const Controller& ctrl, Budget& budget,
                                  RealVector& grad_biases, double& grad_time);

    std::int64_t call_cost() const;
    const ObjectiveSpec& spec() const { return spec_; }

private:
    ObjectiveSpec spec_;
    RngStream rng_;
    std::uint64_t calls_ = 0;
    std::vector<NoiseDraw> ensemble_;
};

struct TrajectoryPoint {
    std::int64_t calls_used = 0;
    double objective = 0.0;
};

struct OptimRun {
    Controller best;
    double best_objective = 0.0;
    std::vector<TrajectoryPoint> trajectory;
    std::uint64_t seed = 0;
    int restart = 0;
    std::int64_t calls_used = 0;
};

/// Box constraints on a generic coordinate vector.
struct BoxBounds {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

/// Generic minimization callables; evaluations debit the budget
/// themselves so the per-call cost stays with the objective.
using BoxObjective = std::function<double(const Eigen::VectorXd&, Budget&)>;
using BoxGradient =
    std::function<double(const Eigen::VectorXd&, Budget&, Eigen::VectorXd&)>;

/// Result of one core run in coordinate space; the controller-facing
/// wrappers translate this into an OptimRun.
struct CoreRun {
    Eigen::VectorXd best;
    double best_objective = 0.0;
    bool evaluated = false; // false when the budget forbade any call
    std::vector<TrajectoryPoint> trajectory;
    std::int64_t calls_used = 0;
};

/// Latin hypercube start points over the (M biases, time) box: each of
/// the M+1 coordinates places exactly one point per stratum.
std::vector<Controller> latin_hypercube_init(const ControlBounds& bounds,
                                             int length, int count,
                                             RngStream& rng);

struct NelderMeadOptions {
    double step_fraction = 0.05;  // initial simplex edge, fraction of range
    double diameter_tol = 1e-8;
    std::int64_t checkpoint_every = 0; // 0 = budget/10
};

struct LbfgsOptions {
    enum class Gradient { Analytic, ForwardDiff };
    Gradient gradient = Gradient::Analytic;
    double fd_step = 1e-7;
    int memory = 10;
    double armijo_c1 = 1e-4;
    double grad_tol = 1e-8;
    int max_line_steps = 40;
    std::int64_t checkpoint_every = 0; // 0 = budget/10
};

/// Downhill simplex with standard coefficients (reflect 1, expand 2,
/// contract 0.5, shrink 0.5); candidates clipped to the box. Stops on
/// budget exhaustion or simplex diameter below diameter_tol.
CoreRun nelder_mead_core(const BoxObjective& f, const Eigen::VectorXd& start,
                         const BoxBounds& box, Budget& budget,
                         const NelderMeadOptions& options = {});

/// Two-loop L-BFGS with Armijo backtracking and projection onto the box.
/// Analytic mode requires fg; forward-difference mode derives gradients
/// from f at dim+1 budget units per gradient.
CoreRun lbfgs_core(const BoxObjective& f, const BoxGradient& fg,
                   const Eigen::VectorXd& start, const BoxBounds& box,
                   Budget& budget, const LbfgsOptions& options = {});

/// Controller-facing wrappers over the cores.
OptimRun nelder_mead(Objective& obj, const Controller& start, Budget& budget,
                     const NelderMeadOptions& options = {});

/// Analytic gradients are valid only for the Noiseless objective.
OptimRun lbfgs(Objective& obj, const Controller& start, Budget& budget,
               const LbfgsOptions& options = {});

/// Pluggable search algorithm: one restart from one start point.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual std::string name() const = 0;
    virtual OptimRun run(Objective& obj, const Controller& start,
                         Budget& budget) const = 0;
};

/// Factory over {"nelder_mead", "lbfgs"} with a JSON options record
/// (gradient mode, tolerances, checkpoint interval). Unknown names or
/// option keys are validation errors.
std::unique_ptr<Optimizer> make_optimizer(const std::string& name,
                                          const nlohmann::json& options);

/// Multi-start search: L Latin-hypercube restarts, each owning an even
/// share of the total budget and the derived stream rng.child(restart).
/// Returns completed runs ranked ascending by (best objective, restart).
/// Restarts whose budget share cannot afford a single evaluation are
/// dropped. Parallel over restarts; bit-identical to the serial variant.
std::vector<OptimRun> run_campaign_search(const Objective& prototype,
                                          const Optimizer& optimizer,
                                          int n_controllers,
                                          std::int64_t budget_total,
                                          RngStream rng);

/// Single-threaded reference implementation of run_campaign_search.
std::vector<OptimRun> run_campaign_search_serial(const Objective& prototype,
                                                 const Optimizer& optimizer,
                                                 int n_controllers,
                                                 std::int64_t budget_total,
                                                 RngStream rng);

} // namespace rim
