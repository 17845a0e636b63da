#include "rim/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>
#include <omp.h>

namespace rim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Substream namespaces inside an Objective's stream.
constexpr std::uint64_t kEnsembleNs = 1;
constexpr std::uint64_t kCallNs = 2;

// Substream namespaces inside a campaign-search stream.
constexpr std::uint64_t kStartsNs = 0;

Eigen::VectorXd pack(const Controller& ctrl) {
    Eigen::VectorXd x(ctrl.biases.size() + 1);
    x.head(ctrl.biases.size()) = ctrl.biases;
    x(ctrl.biases.size()) = ctrl.time;
    return x;
}

Controller unpack(const Eigen::VectorXd& x) {
    Controller ctrl;
    ctrl.biases = x.head(x.size() - 1);
    ctrl.time = x(x.size() - 1);
    return ctrl;
}

Eigen::VectorXd clip_to_box(Eigen::VectorXd x, const BoxBounds& box) {
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        x(d) = std::clamp(x(d), box.lo(d), box.hi(d));
    }
    return x;
}

BoxBounds box_from_controls(const ControlBounds& b, int length) {
    BoxBounds box;
    box.lo.resize(length + 1);
    box.hi.resize(length + 1);
    box.lo.head(length).setConstant(b.delta_min);
    box.hi.head(length).setConstant(b.delta_max);
    box.lo(length) = b.t_min;
    box.hi(length) = b.t_max;
    return box;
}

void validate_box(const BoxBounds& box, const Eigen::VectorXd& start) {
    if (box.lo.size() != box.hi.size() || box.lo.size() != start.size() ||
        start.size() < 1) {
        throw ValidationError("box bounds do not match the start point");
    }
    for (Eigen::Index d = 0; d < start.size(); ++d) {
        if (!(box.lo(d) < box.hi(d))) {
            throw ValidationError("box bounds must satisfy lo < hi");
        }
        if (start(d) < box.lo(d) || start(d) > box.hi(d)) {
            throw ValidationError("start point violates the bounds");
        }
    }
}

// Shared bookkeeping for a single optimizer run: best-so-far tracking and
// trajectory checkpoints at fixed spent-budget marks.
class RunRecorder {
public:
    RunRecorder(Budget& budget, std::int64_t checkpoint_every)
        : budget_(budget),
          every_(checkpoint_every > 0 ? checkpoint_every
                                      : std::max<std::int64_t>(
                                            1, budget.max_calls() / 10)),
          next_mark_(every_) {}

    void observe(const Eigen::VectorXd& x, double value) {
        if (!run_.evaluated || value < run_.best_objective) {
            run_.evaluated = true;
            run_.best_objective = value;
            run_.best = x;
        }
        while (budget_.used_calls() >= next_mark_) {
            run_.trajectory.push_back(
                {budget_.used_calls(), run_.best_objective});
            next_mark_ += every_;
        }
    }

    CoreRun finish(const Eigen::VectorXd& fallback) {
        run_.calls_used = budget_.used_calls();
        if (!run_.evaluated) {
            run_.best = fallback;
            run_.best_objective = kInf;
        }
        if (run_.trajectory.empty() ||
            run_.trajectory.back().calls_used != run_.calls_used ||
            run_.trajectory.back().objective != run_.best_objective) {
            run_.trajectory.push_back({run_.calls_used, run_.best_objective});
        }
        return std::move(run_);
    }

private:
    Budget& budget_;
    std::int64_t every_;
    std::int64_t next_mark_;
    CoreRun run_;
};

OptimRun to_optim_run(CoreRun core, const Controller& fallback) {
    OptimRun run;
    run.best = core.evaluated ? unpack(core.best) : fallback;
    run.best_objective = core.evaluated
                             ? core.best_objective
                             : std::numeric_limits<double>::infinity();
    run.trajectory = std::move(core.trajectory);
    run.calls_used = core.calls_used;
    return run;
}

} // namespace

void ObjectiveSpec::validate() const {
    chain.validate();
    bounds.validate();
    if (!std::isfinite(sigma_train) || sigma_train < 0.0) {
        throw ValidationError("training noise level must be >= 0");
    }
    if (kind == ObjectiveKind::FixedEnsembleRim && ensemble_size < 1) {
        throw ValidationError("ensemble size must be >= 1");
    }
}

Budget::Budget(std::int64_t max_calls) : max_calls_(max_calls) {
    if (max_calls < 0) {
        throw ValidationError("budget must be >= 0");
    }
}

void Budget::debit(std::int64_t cost) {
    if (cost < 0) {
        throw ValidationError("budget debit must be >= 0");
    }
    if (!can_afford(cost)) {
        throw BudgetExhausted("evaluation budget exhausted");
    }
    used_ += cost;
}

Objective::Objective(ObjectiveSpec spec, RngStream rng)
    : spec_(std::move(spec)), rng_(rng) {
    spec_.validate();
    if (spec_.kind == ObjectiveKind::FixedEnsembleRim) {
        const NoiseModel model{spec_.sigma_train};
        RngStream ens = rng_.child(kEnsembleNs);
        ensemble_.reserve(spec_.ensemble_size);
        for (int s = 0; s < spec_.ensemble_size; ++s) {
            RngStream draw_rng = ens.child(static_cast<std::uint64_t>(s));
            ensemble_.push_back(
                sample_noise(model, spec_.chain.length, draw_rng));
        }
    }
}

Objective Objective::with_call_stream(RngStream rng) const {
    Objective copy(*this);
    copy.rng_ = rng;
    copy.calls_ = 0;
    return copy;
}

std::int64_t Objective::call_cost() const {
    return spec_.kind == ObjectiveKind::FixedEnsembleRim ? spec_.ensemble_size
                                                         : 1;
}

double Objective::evaluate(const Controller& ctrl, Budget& budget) {
    budget.debit(call_cost());
    switch (spec_.kind) {
    case ObjectiveKind::Noiseless:
        return 1.0 - controller_fidelity(spec_.chain, ctrl);
    case ObjectiveKind::Stochastic: {
        RngStream draw_rng = rng_.child(kCallNs).child(calls_++);
        const NoiseDraw draw = sample_noise(NoiseModel{spec_.sigma_train},
                                            spec_.chain.length, draw_rng);
        return 1.0 - perturbed_fidelity(spec_.chain, ctrl, draw);
    }
    case ObjectiveKind::FixedEnsembleRim: {
        if (spec_.sigma_train == 0.0) {
            // Degenerate ensemble: every draw is the identity, so the
            // RIM collapses to the plain infidelity exactly.
            return 1.0 - controller_fidelity(spec_.chain, ctrl);
        }
        double acc = 0.0;
        for (const NoiseDraw& draw : ensemble_) {
            acc += 1.0 - perturbed_fidelity(spec_.chain, ctrl, draw);
        }
        return std::clamp(acc / static_cast<double>(ensemble_.size()), 0.0,
                          1.0);
    }
    }
    throw ValidationError("unknown objective kind");
}

double Objective::evaluate_with_gradient(const Controller& ctrl,
                                         Budget& budget,
                                         RealVector& grad_biases,
                                         double& grad_time) {
    if (spec_.kind != ObjectiveKind::Noiseless) {
        throw ValidationError(
            "analytic gradients are defined for the noiseless objective only");
    }
    budget.debit(1);
    Controller zero_bias;
    zero_bias.biases = RealVector::Zero(spec_.chain.length);
    zero_bias.time = 0.0;
    const HermitianOperator h_base =
        build_hamiltonian(spec_.chain, zero_bias);
    const FidelityGradient g =
        fidelity_gradient(h_base, ctrl.biases, ctrl.time, spec_.chain.source,
                          spec_.chain.target);
    // Objective is 1 - F, so the gradient flips sign.
    grad_biases = -g.d_bias;
    grad_time = -g.d_time;
    return 1.0 - controller_fidelity(spec_.chain, ctrl);
}

std::vector<Controller> latin_hypercube_init(const ControlBounds& bounds,
                                             int length, int count,
                                             RngStream& rng) {
    bounds.validate();
    if (length < 2) {
        throw ValidationError("chain length must be at least 2");
    }
    if (count < 1) {
        throw ValidationError("start count must be >= 1");
    }
    const int dims = length + 1;
    std::vector<Controller> starts(count);
    for (auto& c : starts) c.biases = RealVector::Zero(length);

    std::vector<int> perm(count);
    for (int d = 0; d < dims; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = count - 1; i > 0; --i) {
            const auto j = static_cast<int>(
                rng.next_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(perm[i], perm[j]);
        }
        const double lo = d < length ? bounds.delta_min : bounds.t_min;
        const double hi = d < length ? bounds.delta_max : bounds.t_max;
        for (int i = 0; i < count; ++i) {
            const double z =
                (perm[i] + rng.next_double()) / static_cast<double>(count);
            const double v = lo + z * (hi - lo);
            if (d < length) {
                starts[i].biases(d) = v;
            } else {
                starts[i].time = v;
            }
        }
    }
    return starts;
}

CoreRun nelder_mead_core(const BoxObjective& f, const Eigen::VectorXd& start,
                         const BoxBounds& box, Budget& budget,
                         const NelderMeadOptions& options) {
    validate_box(box, start);
    if (!(options.step_fraction > 0.0) || !(options.step_fraction <= 0.5)) {
        throw ValidationError("step_fraction must be in (0, 0.5]");
    }
    const Eigen::Index dim = start.size();
    RunRecorder rec(budget, options.checkpoint_every);

    auto eval = [&](const Eigen::VectorXd& x) {
        const double v = f(x, budget);
        rec.observe(x, v);
        return v;
    };

    struct Vertex {
        Eigen::VectorXd x;
        double f;
    };
    std::vector<Vertex> simplex;
    simplex.reserve(dim + 1);

    try {
        simplex.push_back({start, eval(start)});
        for (Eigen::Index d = 0; d < dim; ++d) {
            const double step =
                options.step_fraction * (box.hi(d) - box.lo(d));
            Eigen::VectorXd xd = start;
            xd(d) = xd(d) + step <= box.hi(d) ? xd(d) + step : xd(d) - step;
            simplex.push_back({xd, eval(xd)});
        }

        auto by_value = [](const Vertex& a, const Vertex& b) {
            return a.f < b.f;
        };
        while (true) {
            std::stable_sort(simplex.begin(), simplex.end(), by_value);
            double diameter = 0.0;
            for (Eigen::Index i = 1; i <= dim; ++i) {
                diameter = std::max(
                    diameter, (simplex[i].x - simplex[0].x)
                                  .lpNorm<Eigen::Infinity>());
            }
            if (diameter < options.diameter_tol) break;

            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
            for (Eigen::Index i = 0; i < dim; ++i) centroid += simplex[i].x;
            centroid /= static_cast<double>(dim);
            Vertex& worst = simplex[dim];

            const Eigen::VectorXd xr =
                clip_to_box(centroid + (centroid - worst.x), box);
            const double fr = eval(xr);
            if (fr < simplex[0].f) {
                const Eigen::VectorXd xe = clip_to_box(
                    centroid + 2.0 * (centroid - worst.x), box);
                const double fe = eval(xe);
                worst = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
                continue;
            }
            if (fr < simplex[dim - 1].f) {
                worst = {xr, fr};
                continue;
            }
            if (fr < worst.f) { // outside contraction
                const Eigen::VectorXd xc =
                    clip_to_box(centroid + 0.5 * (xr - centroid), box);
                const double fc = eval(xc);
                if (fc <= fr) {
                    worst = {xc, fc};
                    continue;
                }
            } else { // inside contraction
                const Eigen::VectorXd xc =
                    clip_to_box(centroid + 0.5 * (worst.x - centroid), box);
                const double fc = eval(xc);
                if (fc < worst.f) {
                    worst = {xc, fc};
                    continue;
                }
            }
            for (Eigen::Index i = 1; i <= dim; ++i) { // shrink
                simplex[i].x =
                    simplex[0].x + 0.5 * (simplex[i].x - simplex[0].x);
                simplex[i].f = eval(simplex[i].x);
            }
        }
    } catch (const BudgetExhausted&) {
        // Return the best point seen; the budget invariant still holds.
    }
    return rec.finish(start);
}

CoreRun lbfgs_core(const BoxObjective& f, const BoxGradient& fg,
                   const Eigen::VectorXd& start, const BoxBounds& box,
                   Budget& budget, const LbfgsOptions& options) {
    validate_box(box, start);
    if (options.gradient == LbfgsOptions::Gradient::Analytic && !fg) {
        throw ValidationError(
            "analytic gradient mode requires a gradient callable");
    }
    if (!(options.fd_step > 0.0) || options.memory < 1 ||
        options.max_line_steps < 1) {
        throw ValidationError("invalid lbfgs options");
    }
    const Eigen::Index dim = start.size();
    RunRecorder rec(budget, options.checkpoint_every);

    auto eval = [&](const Eigen::VectorXd& x) {
        const double v = f(x, budget);
        rec.observe(x, v);
        return v;
    };
    // Value and gradient; forward differences debit dim extra units, and
    // flip to backward steps at an active upper bound.
    auto eval_fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        if (options.gradient == LbfgsOptions::Gradient::Analytic) {
            const double v = fg(x, budget, g);
            rec.observe(x, v);
            return v;
        }
        const double f0 = eval(x);
        g.resize(dim);
        const double h = options.fd_step;
        for (Eigen::Index d = 0; d < dim; ++d) {
            Eigen::VectorXd xh = x;
            if (x(d) + h <= box.hi(d)) {
                xh(d) += h;
                g(d) = (eval(xh) - f0) / h;
            } else {
                xh(d) -= h;
                g(d) = (f0 - eval(xh)) / h;
            }
        }
        return f0;
    };

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs; // (s, y)
    try {
        Eigen::VectorXd x = start;
        Eigen::VectorXd g(dim);
        double fx = eval_fg(x, g);
        bool prev_was_descent_restart = false;

        for (int iter = 0; iter < 100000; ++iter) {
            if (g.lpNorm<Eigen::Infinity>() < options.grad_tol) break;

            // Two-loop recursion for d = -H g.
            Eigen::VectorXd q = g;
            std::vector<double> alpha(pairs.size());
            for (auto i = static_cast<std::ptrdiff_t>(pairs.size()) - 1;
                 i >= 0; --i) {
                const auto& [s, y] = pairs[i];
                alpha[i] = s.dot(q) / y.dot(s);
                q -= alpha[i] * y;
            }
            if (!pairs.empty()) {
                const auto& [s, y] = pairs.back();
                q *= y.dot(s) / y.dot(y);
            }
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const auto& [s, y] = pairs[i];
                q += (alpha[i] - y.dot(q) / y.dot(s)) * s;
            }
            Eigen::VectorXd d = -q;
            if (g.dot(d) >= 0.0) {
                d = -g;
                pairs.clear();
            }

            // Armijo backtracking with projection onto the box.
            double step = 1.0;
            bool accepted = false;
            Eigen::VectorXd trial;
            for (int ls = 0; ls < options.max_line_steps; ++ls) {
                trial = clip_to_box(x + step * d, box);
                if ((trial - x).lpNorm<Eigen::Infinity>() == 0.0) break;
                const double ft = eval(trial);
                if (ft <= fx + options.armijo_c1 * g.dot(trial - x)) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                if (prev_was_descent_restart) break;
                pairs.clear();
                prev_was_descent_restart = true;
                continue; // next iteration searches along -g
            }
            prev_was_descent_restart = false;

            Eigen::VectorXd g_new(dim);
            const double f_new = eval_fg(trial, g_new);
            const Eigen::VectorXd s = trial - x;
            const Eigen::VectorXd y = g_new - g;
            if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
                pairs.emplace_back(s, y);
                if (static_cast<int>(pairs.size()) > options.memory) {
                    pairs.pop_front();
                }
            }
            x = trial;
            fx = f_new;
            g = g_new;
        }
    } catch (const BudgetExhausted&) {
        // Return the best point seen; the budget invariant still holds.
    }
    return rec.finish(start);
}

namespace {

BoxObjective wrap_objective(Objective& obj) {
    return [&obj](const Eigen::VectorXd& x, Budget& budget) {
        return obj.evaluate(unpack(x), budget);
    };
}

} // namespace

OptimRun nelder_mead(Objective& obj, const Controller& start, Budget& budget,
                     const NelderMeadOptions& options) {
    if (!obj.spec().bounds.contains(start)) {
        throw ValidationError("start point violates the control bounds");
    }
    const BoxBounds box =
        box_from_controls(obj.spec().bounds, obj.spec().chain.length);
    CoreRun core =
        nelder_mead_core(wrap_objective(obj), pack(start), box, budget,
                         options);
    return to_optim_run(std::move(core), start);
}

OptimRun lbfgs(Objective& obj, const Controller& start, Budget& budget,
               const LbfgsOptions& options) {
    if (!obj.spec().bounds.contains(start)) {
        throw ValidationError("start point violates the control bounds");
    }
    if (options.gradient == LbfgsOptions::Gradient::Analytic &&
        obj.spec().kind != ObjectiveKind::Noiseless) {
        throw ValidationError(
            "analytic gradients are defined for the noiseless objective only");
    }
    const BoxBounds box =
        box_from_controls(obj.spec().bounds, obj.spec().chain.length);
    const BoxGradient fg = [&obj](const Eigen::VectorXd& x, Budget& budget,
                                  Eigen::VectorXd& g) {
        RealVector grad_biases;
        double grad_time = 0.0;
        const double v = obj.evaluate_with_gradient(unpack(x), budget,
                                                    grad_biases, grad_time);
        g.resize(x.size());
        g.head(x.size() - 1) = grad_biases;
        g(x.size() - 1) = grad_time;
        return v;
    };
    CoreRun core = lbfgs_core(wrap_objective(obj), fg, pack(start), box,
                              budget, options);
    return to_optim_run(std::move(core), start);
}

namespace {

class NelderMeadOptimizer final : public Optimizer {
public:
    explicit NelderMeadOptimizer(NelderMeadOptions options)
        : options_(options) {}
    std::string name() const override { return "nelder_mead"; }
    OptimRun run(Objective& obj, const Controller& start,
                 Budget& budget) const override {
        return nelder_mead(obj, start, budget, options_);
    }

private:
    NelderMeadOptions options_;
};

class LbfgsOptimizer final : public Optimizer {
public:
    explicit LbfgsOptimizer(LbfgsOptions options) : options_(options) {}
    std::string name() const override { return "lbfgs"; }
    OptimRun run(Objective& obj, const Controller& start,
                 Budget& budget) const override {
        return lbfgs(obj, start, budget, options_);
    }

private:
    LbfgsOptions options_;
};

void reject_unknown_keys(const nlohmann::json& options,
                         std::initializer_list<const char*> known) {
    for (const auto& [key, value] : options.items()) {
        (void)value;
        if (std::find_if(known.begin(), known.end(), [&](const char* k) {
                return key == k;
            }) == known.end()) {
            throw ValidationError("unknown optimizer option: " + key);
        }
    }
}

} // namespace

std::unique_ptr<Optimizer> make_optimizer(const std::string& name,
                                          const nlohmann::json& options) {
    if (!options.is_object() && !options.is_null()) {
        throw ValidationError("optimizer options must be a JSON object");
    }
    const nlohmann::json opts =
        options.is_null() ? nlohmann::json::object() : options;
    if (name == "nelder_mead") {
        reject_unknown_keys(
            opts, {"step_fraction", "diameter_tol", "checkpoint_every"});
        NelderMeadOptions o;
        o.step_fraction = opts.value("step_fraction", o.step_fraction);
        o.diameter_tol = opts.value("diameter_tol", o.diameter_tol);
        o.checkpoint_every =
            opts.value("checkpoint_every", o.checkpoint_every);
        if (!(o.step_fraction > 0.0) || !(o.step_fraction <= 0.5)) {
            throw ValidationError("step_fraction must be in (0, 0.5]");
        }
        return std::make_unique<NelderMeadOptimizer>(o);
    }
    if (name == "lbfgs") {
        reject_unknown_keys(opts,
                            {"gradient", "fd_step", "memory", "armijo_c1",
                             "grad_tol", "max_line_steps",
                             "checkpoint_every"});
        LbfgsOptions o;
        const std::string mode = opts.value("gradient", "analytic");
        if (mode == "analytic") {
            o.gradient = LbfgsOptions::Gradient::Analytic;
        } else if (mode == "forward_diff") {
            o.gradient = LbfgsOptions::Gradient::ForwardDiff;
        } else {
            throw ValidationError(
                "gradient mode must be 'analytic' or 'forward_diff'");
        }
        o.fd_step = opts.value("fd_step", o.fd_step);
        o.memory = opts.value("memory", o.memory);
        o.armijo_c1 = opts.value("armijo_c1", o.armijo_c1);
        o.grad_tol = opts.value("grad_tol", o.grad_tol);
        o.max_line_steps = opts.value("max_line_steps", o.max_line_steps);
        o.checkpoint_every =
            opts.value("checkpoint_every", o.checkpoint_every);
        if (!(o.fd_step > 0.0) || o.memory < 1 || o.max_line_steps < 1) {
            throw ValidationError("invalid lbfgs options");
        }
        return std::make_unique<LbfgsOptimizer>(o);
    }
    throw ValidationError("unknown optimizer: " + name);
}

namespace {

std::vector<OptimRun> collect_ranked(std::vector<OptimRun> runs) {
    std::erase_if(runs, [](const OptimRun& r) {
        return !std::isfinite(r.best_objective);
    });
    std::stable_sort(runs.begin(), runs.end(),
                     [](const OptimRun& a, const OptimRun& b) {
                         if (a.best_objective != b.best_objective) {
                             return a.best_objective < b.best_objective;
                         }
                         return a.restart < b.restart;
                     });
    return runs;
}

std::vector<OptimRun> campaign_search_impl(const Objective& prototype,
                                           const Optimizer& optimizer,
                                           int n_controllers,
                                           std::int64_t budget_total,
                                           RngStream rng, bool parallel) {
    if (n_controllers < 1) {
        throw ValidationError("campaign search needs L >= 1");
    }
    if (budget_total < 1) {
        throw ValidationError("campaign search needs a positive budget");
    }
    const std::int64_t per_restart = budget_total / n_controllers;

    RngStream starts_rng = rng.child(kStartsNs);
    const std::vector<Controller> starts = latin_hypercube_init(
        prototype.spec().bounds, prototype.spec().chain.length,
        n_controllers, starts_rng);

    std::vector<OptimRun> runs(n_controllers);
    std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(static) if (parallel)
    for (int r = 0; r < n_controllers; ++r) {
        try {
            Objective obj = prototype.with_call_stream(
                rng.child(static_cast<std::uint64_t>(r) + 1));
            Budget budget(per_restart);
            OptimRun run = optimizer.run(obj, starts[r], budget);
            run.restart = r;
            run.seed = rng.seed();
            runs[r] = std::move(run);
        } catch (...) {
#pragma omp critical
            {
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return collect_ranked(std::move(runs));
}

} // namespace

std::vector<OptimRun> run_campaign_search(const Objective& prototype,
                                          const Optimizer& optimizer,
                                          int n_controllers,
                                          std::int64_t budget_total,
                                          RngStream rng) {
    return campaign_search_impl(prototype, optimizer, n_controllers,
                                budget_total, rng, true);
}

std::vector<OptimRun> run_campaign_search_serial(const Objective& prototype,
                                                 const Optimizer& optimizer,
                                                 int n_controllers,
                                                 std::int64_t budget_total,
                                                 RngStream rng) {
    return campaign_search_impl(prototype, optimizer, n_controllers,
                                budget_total, rng, false);
}

} // namespace rim
