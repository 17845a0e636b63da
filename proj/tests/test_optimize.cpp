#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "rim/optimize.hpp"

using namespace rim;

namespace {

ObjectiveSpec noiseless_spec(int length = 2) {
    ObjectiveSpec spec;
    spec.kind = ObjectiveKind::Noiseless;
    spec.chain.length = length;
    spec.chain.source = 1;
    spec.chain.target = length;
    return spec;
}

Controller centered_start(int length, double t) {
    Controller c;
    c.biases = RealVector::Zero(length);
    c.time = t;
    return c;
}

BoxBounds cube(int dim, double lo, double hi) {
    BoxBounds box;
    box.lo = Eigen::VectorXd::Constant(dim, lo);
    box.hi = Eigen::VectorXd::Constant(dim, hi);
    return box;
}

// Unit-cost sphere objective centered at c.
BoxObjective sphere(const Eigen::VectorXd& c) {
    return [c](const Eigen::VectorXd& x, Budget& budget) {
        budget.debit(1);
        return (x - c).squaredNorm();
    };
}

} // namespace

TEST_CASE("budget accounting is exact and fails before work") {
    Budget budget(10);
    CHECK(budget.remaining() == 10);
    CHECK(budget.can_afford(10));
    CHECK_FALSE(budget.can_afford(11));
    budget.debit(4);
    CHECK(budget.used_calls() == 4);
    CHECK(budget.remaining() == 6);
    CHECK_THROWS_AS(budget.debit(7), BudgetExhausted);
    CHECK(budget.used_calls() == 4); // failed debit left no trace
    budget.debit(6);
    CHECK(budget.remaining() == 0);
    CHECK_THROWS_AS(budget.debit(1), BudgetExhausted);
    CHECK_THROWS_AS(Budget{-1}, ValidationError);
    CHECK_THROWS_AS(budget.debit(-1), ValidationError);
}

TEST_CASE("simplex search solves a 3-d sphere inside the box") {
    Eigen::VectorXd center(3);
    center << 0.5, -1.0, 2.0;
    Budget budget(4000);
    const Eigen::VectorXd start = Eigen::VectorXd::Zero(3);
    const CoreRun run =
        nelder_mead_core(sphere(center), start, cube(3, -5.0, 5.0), budget);
    CHECK(run.evaluated);
    CHECK(run.best_objective < 1e-10);
    CHECK((run.best - center).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK(run.calls_used <= 4000);
    CHECK_FALSE(run.trajectory.empty());
    CHECK(run.trajectory.back().objective == run.best_objective);
}

TEST_CASE("simplex candidates are clipped to the box") {
    // Optimum outside the box: the run must stay feasible and end on the
    // boundary.
    Eigen::VectorXd center(2);
    center << 7.0, 0.0;
    Budget budget(2000);
    const CoreRun run = nelder_mead_core(
        sphere(center), Eigen::VectorXd::Zero(2), cube(2, -1.0, 1.0), budget);
    CHECK(run.evaluated);
    CHECK(run.best(0) <= 1.0);
    CHECK(run.best(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("a budget of 10 stops after exactly 10 evaluations") {
    std::int64_t evals = 0;
    const BoxObjective counting = [&evals](const Eigen::VectorXd& x,
                                           Budget& budget) {
        budget.debit(1);
        ++evals;
        return x.squaredNorm();
    };
    Budget budget(10);
    const CoreRun run = nelder_mead_core(
        counting, Eigen::VectorXd::Constant(4, 2.0), cube(4, -5.0, 5.0),
        budget);
    CHECK(evals == 10);
    CHECK(run.calls_used == 10);
    CHECK(run.evaluated);
    CHECK(budget.remaining() == 0);
}

TEST_CASE("an unaffordable budget yields an unevaluated run") {
    Budget budget(0);
    const CoreRun run = nelder_mead_core(
        sphere(Eigen::VectorXd::Zero(2)), Eigen::VectorXd::Zero(2),
        cube(2, -1.0, 1.0), budget);
    CHECK_FALSE(run.evaluated);
    CHECK(run.calls_used == 0);
    CHECK(std::isinf(run.best_objective));
}

TEST_CASE("core rejects inconsistent geometry") {
    Budget budget(100);
    BoxBounds box = cube(3, -1.0, 1.0);
    CHECK_THROWS_AS(nelder_mead_core(sphere(Eigen::VectorXd::Zero(3)),
                                     Eigen::VectorXd::Zero(2), box, budget),
                    ValidationError);
    CHECK_THROWS_AS(
        nelder_mead_core(sphere(Eigen::VectorXd::Zero(3)),
                         Eigen::VectorXd::Constant(3, 2.0), box, budget),
        ValidationError);
    BoxBounds inverted = cube(3, 1.0, -1.0);
    CHECK_THROWS_AS(
        nelder_mead_core(sphere(Eigen::VectorXd::Zero(3)),
                         Eigen::VectorXd::Zero(3), inverted, budget),
        ValidationError);
}

TEST_CASE("quasi-newton search drives a convex quadratic to the optimum") {
    // f(x) = 0.5 x^T A x - b^T x with SPD A; unique minimum at A^{-1} b.
    const int dim = 6;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        a(i, i) = 2.0 + i;
        if (i + 1 < dim) {
            a(i, i + 1) = 0.5;
            a(i + 1, i) = 0.5;
        }
    }
    Eigen::VectorXd b(dim);
    b << 1.0, -2.0, 0.5, 3.0, -1.0, 2.0;
    const Eigen::VectorXd opt = a.ldlt().solve(b);

    const BoxObjective f = [&](const Eigen::VectorXd& x, Budget& budget) {
        budget.debit(1);
        return 0.5 * x.dot(a * x) - b.dot(x);
    };
    const BoxGradient fg = [&](const Eigen::VectorXd& x, Budget& budget,
                               Eigen::VectorXd& g) {
        budget.debit(1);
        g = a * x - b;
        return 0.5 * x.dot(a * x) - b.dot(x);
    };

    Budget budget(2000);
    LbfgsOptions options;
    options.gradient = LbfgsOptions::Gradient::Analytic;
    const CoreRun run = lbfgs_core(f, fg, Eigen::VectorXd::Zero(dim),
                                   cube(dim, -5.0, 5.0), budget, options);
    CHECK(run.evaluated);
    CHECK((run.best - opt).lpNorm<Eigen::Infinity>() < 1e-6);
    // Quadratic + analytic gradients: far fewer calls than the simplex
    // would need.
    CHECK(run.calls_used < 200);

    // The gradient at the returned point is tiny.
    CHECK((a * run.best - b).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("finite-difference gradients cost dim + 1 calls each") {
    const int dim = 4;
    std::int64_t evals = 0;
    const BoxObjective f = [&evals](const Eigen::VectorXd& x, Budget& budget) {
        budget.debit(1);
        ++evals;
        return x.squaredNorm();
    };
    LbfgsOptions options;
    options.gradient = LbfgsOptions::Gradient::ForwardDiff;
    // Enough for exactly one gradient (5 calls), then the line search
    // begins and the budget dies.
    Budget budget(dim + 1);
    const CoreRun run = lbfgs_core(f, nullptr, Eigen::VectorXd::Constant(dim, 1.0),
                                   cube(dim, -5.0, 5.0), budget, options);
    CHECK(evals == dim + 1);
    CHECK(run.calls_used == dim + 1);
    CHECK(run.evaluated);
}

TEST_CASE("forward differences solve the sphere without a gradient") {
    Eigen::VectorXd center(3);
    center << -0.3, 1.2, 0.4;
    LbfgsOptions options;
    options.gradient = LbfgsOptions::Gradient::ForwardDiff;
    Budget budget(3000);
    const CoreRun run = lbfgs_core(sphere(center), nullptr,
                                   Eigen::VectorXd::Zero(3),
                                   cube(3, -5.0, 5.0), budget, options);
    CHECK(run.evaluated);
    CHECK(run.best_objective < 1e-8);
}

TEST_CASE("analytic mode requires a gradient callable") {
    LbfgsOptions options;
    options.gradient = LbfgsOptions::Gradient::Analytic;
    Budget budget(100);
    CHECK_THROWS_AS(lbfgs_core(sphere(Eigen::VectorXd::Zero(2)), nullptr,
                               Eigen::VectorXd::Zero(2), cube(2, -1.0, 1.0),
                               budget, options),
                    ValidationError);
}

TEST_CASE("latin hypercube starts occupy every stratum once") {
    ControlBounds bounds;
    const int length = 3;
    const int count = 16;
    RngStream rng(61, 0);
    const std::vector<Controller> starts =
        latin_hypercube_init(bounds, length, count, rng);
    REQUIRE(starts.size() == count);

    for (int d = 0; d < length + 1; ++d) {
        const double lo = d < length ? bounds.delta_min : bounds.t_min;
        const double hi = d < length ? bounds.delta_max : bounds.t_max;
        std::set<int> strata;
        for (const Controller& c : starts) {
            const double v = d < length ? c.biases(d) : c.time;
            CHECK(v >= lo);
            CHECK(v <= hi);
            strata.insert(
                static_cast<int>((v - lo) / (hi - lo) * count));
        }
        CHECK(strata.size() == count); // one point per stratum
    }
}

TEST_CASE("latin hypercube is deterministic in its stream") {
    ControlBounds bounds;
    RngStream a(62, 0);
    RngStream b(62, 0);
    const auto s1 = latin_hypercube_init(bounds, 4, 8, a);
    const auto s2 = latin_hypercube_init(bounds, 4, 8, b);
    for (int i = 0; i < 8; ++i) {
        CHECK(s1[i].time == s2[i].time);
        CHECK((s1[i].biases - s2[i].biases).lpNorm<Eigen::Infinity>() == 0.0);
    }
    CHECK_THROWS_AS(latin_hypercube_init(bounds, 4, 0, a), ValidationError);
}

TEST_CASE("latin hypercube spreads better than iid uniform sampling") {
    // Compare centered L2 discrepancies over repeated draws; the
    // stratified design wins on average by a clear margin.
    ControlBounds bounds;
    const int length = 2; // 3 total dims
    const int count = 20;
    RngStream rng(63, 0);
    int lhs_wins = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        RngStream lhs_rng = rng.child(2 * t);
        RngStream iid_rng = rng.child(2 * t + 1);
        const auto starts =
            latin_hypercube_init(bounds, length, count, lhs_rng);
        std::vector<std::vector<double>> lhs_pts;
        std::vector<std::vector<double>> iid_pts;
        for (const Controller& c : starts) {
            lhs_pts.push_back({(c.biases(0) + 10.0) / 20.0,
                               (c.biases(1) + 10.0) / 20.0, c.time / 70.0});
        }
        for (int i = 0; i < count; ++i) {
            iid_pts.push_back({iid_rng.next_double(), iid_rng.next_double(),
                               iid_rng.next_double()});
        }
        if (oracle::centered_l2_discrepancy(lhs_pts) <
            oracle::centered_l2_discrepancy(iid_pts)) {
            ++lhs_wins;
        }
    }
    CHECK(lhs_wins >= 40);
}

TEST_CASE("objective kinds and their per-call costs") {
    ObjectiveSpec spec = noiseless_spec(3);

    SUBCASE("noiseless costs one per call") {
        Objective obj(spec, RngStream(1, 0));
        CHECK(obj.call_cost() == 1);
        Budget budget(2);
        const Controller c = centered_start(3, 1.0);
        obj.evaluate(c, budget);
        obj.evaluate(c, budget);
        CHECK(budget.remaining() == 0);
        CHECK_THROWS_AS(obj.evaluate(c, budget), BudgetExhausted);
    }

    SUBCASE("frozen ensemble costs its size per call") {
        spec.kind = ObjectiveKind::FixedEnsembleRim;
        spec.sigma_train = 0.05;
        spec.ensemble_size = 7;
        Objective obj(spec, RngStream(1, 0));
        CHECK(obj.call_cost() == 7);
        Budget budget(20);
        const Controller c = centered_start(3, 1.0);
        obj.evaluate(c, budget);
        obj.evaluate(c, budget);
        CHECK(budget.used_calls() == 14);
        // Third call cannot be afforded; nothing is consumed.
        CHECK_THROWS_AS(obj.evaluate(c, budget), BudgetExhausted);
        CHECK(budget.used_calls() == 14);
    }
}

TEST_CASE("noiseless objective equals one minus the fidelity") {
    const ObjectiveSpec spec = noiseless_spec(2);
    Objective obj(spec, RngStream(2, 0));
    Budget budget(10);
    const Controller c = centered_start(2, 1.5707963267948966);
    // sin^2(pi/2) = 1, so the infidelity vanishes.
    CHECK(obj.evaluate(c, budget) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("frozen ensembles are stable across repeated evaluation") {
    ObjectiveSpec spec = noiseless_spec(3);
    spec.kind = ObjectiveKind::FixedEnsembleRim;
    spec.sigma_train = 0.08;
    spec.ensemble_size = 16;
    Objective obj(spec, RngStream(3, 0));
    Budget budget(1000);
    const Controller c = centered_start(3, 2.0);
    const double v1 = obj.evaluate(c, budget);
    const double v2 = obj.evaluate(c, budget);
    CHECK(v1 == v2); // same frozen draws, bit-identical value
    CHECK(v1 > 0.0);
    CHECK(v1 < 1.0);
}

TEST_CASE("stochastic objective is fresh per call but replays by stream") {
    ObjectiveSpec spec = noiseless_spec(3);
    spec.kind = ObjectiveKind::Stochastic;
    spec.sigma_train = 0.05;
    const Objective prototype(spec, RngStream(4, 0));

    Objective a = prototype.with_call_stream(RngStream(9, 3));
    Objective b = prototype.with_call_stream(RngStream(9, 3));
    Objective other = prototype.with_call_stream(RngStream(9, 4));
    Budget budget(100);
    const Controller c = centered_start(3, 2.0);

    std::vector<double> seq_a;
    std::vector<double> seq_b;
    std::vector<double> seq_other;
    for (int i = 0; i < 5; ++i) seq_a.push_back(a.evaluate(c, budget));
    for (int i = 0; i < 5; ++i) seq_b.push_back(b.evaluate(c, budget));
    for (int i = 0; i < 5; ++i)
        seq_other.push_back(other.evaluate(c, budget));

    CHECK(seq_a == seq_b);      // identical streams replay bit-identically
    CHECK(seq_a != seq_other);  // distinct streams differ
    // Fresh draw per call: consecutive values differ.
    CHECK(seq_a[0] != seq_a[1]);
}

TEST_CASE("zero training noise collapses every kind to the same value") {
    const Controller c = centered_start(3, 2.3);
    ObjectiveSpec spec = noiseless_spec(3);
    Budget budget(1000);

    Objective noiseless(spec, RngStream(5, 0));
    const double base = noiseless.evaluate(c, budget);

    spec.kind = ObjectiveKind::Stochastic;
    spec.sigma_train = 0.0;
    Objective stochastic(spec, RngStream(5, 0));
    CHECK(stochastic.evaluate(c, budget) == base);

    spec.kind = ObjectiveKind::FixedEnsembleRim;
    spec.ensemble_size = 50;
    Objective ensemble(spec, RngStream(5, 0));
    // Exact equality: the degenerate ensemble short-circuits rather than
    // averaging 50 identical floating-point values.
    CHECK(ensemble.evaluate(c, budget) == base);
}

TEST_CASE("gradient evaluation matches the plain value and its cost") {
    const ObjectiveSpec spec = noiseless_spec(2);
    Objective obj(spec, RngStream(6, 0));
    Budget budget(10);
    const Controller c = centered_start(2, 0.9);
    RealVector gb;
    double gt = 0.0;
    const double v = obj.evaluate_with_gradient(c, budget, gb, gt);
    CHECK(budget.used_calls() == 1);
    CHECK(v == obj.evaluate(c, budget));
    CHECK(gb.size() == 2);
    // d(1-F)/dt = -2 sin t cos t on the two-site chain.
    CHECK(gt == doctest::Approx(-2.0 * std::sin(0.9) * std::cos(0.9))
                    .epsilon(1e-10));

    ObjectiveSpec bad = spec;
    bad.kind = ObjectiveKind::Stochastic;
    Objective stochastic(bad, RngStream(6, 0));
    CHECK_THROWS_AS(stochastic.evaluate_with_gradient(c, budget, gb, gt),
                    ValidationError);
}

TEST_CASE("two-site transfer reaches machine-level infidelity") {
    const ObjectiveSpec spec = noiseless_spec(2);
    Objective obj(spec, RngStream(7, 0));
    Budget budget(4000);
    const OptimRun run = nelder_mead(obj, centered_start(2, 1.0), budget);
    CHECK(run.best_objective < 1e-8);
    CHECK(run.best.time > 0.0);
    CHECK(run.best.time <= 70.0);
}

TEST_CASE("gradient search also solves the two-site chain") {
    const ObjectiveSpec spec = noiseless_spec(2);
    Objective obj(spec, RngStream(8, 0));
    Budget budget(2000);
    LbfgsOptions options; // analytic by default
    const OptimRun run = lbfgs(obj, centered_start(2, 1.0), budget, options);
    CHECK(run.best_objective < 1e-8);
}

TEST_CASE("wrappers validate starts and gradient modes") {
    const ObjectiveSpec spec = noiseless_spec(2);
    Objective obj(spec, RngStream(9, 0));
    Budget budget(100);
    Controller outside = centered_start(2, 1.0);
    outside.biases(0) = 11.0;
    CHECK_THROWS_AS(nelder_mead(obj, outside, budget), ValidationError);

    ObjectiveSpec stoch = spec;
    stoch.kind = ObjectiveKind::Stochastic;
    stoch.sigma_train = 0.02;
    Objective sobj(stoch, RngStream(9, 1));
    LbfgsOptions analytic;
    CHECK_THROWS_AS(lbfgs(sobj, centered_start(2, 1.0), budget, analytic),
                    ValidationError);
    // Forward differences are fine for stochastic objectives.
    LbfgsOptions fd;
    fd.gradient = LbfgsOptions::Gradient::ForwardDiff;
    CHECK_NOTHROW(lbfgs(sobj, centered_start(2, 1.0), budget, fd));
}

TEST_CASE("optimizer factory builds both algorithms and rejects junk") {
    const auto nm = make_optimizer("nelder_mead", nlohmann::json::object());
    CHECK(nm->name() == "nelder_mead");
    const auto lb = make_optimizer(
        "lbfgs", nlohmann::json{{"gradient", "forward_diff"}, {"memory", 5}});
    CHECK(lb->name() == "lbfgs");

    CHECK_THROWS_AS(make_optimizer("gradient_descent", nullptr),
                    ValidationError);
    CHECK_THROWS_AS(
        make_optimizer("nelder_mead", nlohmann::json{{"stepfrac", 0.1}}),
        ValidationError);
    CHECK_THROWS_AS(
        make_optimizer("lbfgs", nlohmann::json{{"gradient", "exact"}}),
        ValidationError);
    CHECK_THROWS_AS(
        make_optimizer("nelder_mead", nlohmann::json{{"step_fraction", 0.9}}),
        ValidationError);
}

TEST_CASE("multistart search returns ranked completed runs") {
    const ObjectiveSpec spec = noiseless_spec(2);
    const Objective prototype(spec, RngStream(70, 0));
    const auto optimizer =
        make_optimizer("nelder_mead", nlohmann::json::object());

    const std::vector<OptimRun> runs = run_campaign_search(
        prototype, *optimizer, 6, 12000, RngStream(70, 0));
    REQUIRE(runs.size() == 6);
    for (std::size_t i = 1; i < runs.size(); ++i) {
        CHECK(runs[i - 1].best_objective <= runs[i].best_objective);
    }
    // Every restart completed and is present exactly once.
    std::set<int> seen;
    for (const OptimRun& r : runs) seen.insert(r.restart);
    CHECK(seen.size() == 6);
    // Even split: no restart exceeded its share.
    for (const OptimRun& r : runs) CHECK(r.calls_used <= 2000);
    // The best restart solves the two-site problem.
    CHECK(runs.front().best_objective < 1e-8);
}

TEST_CASE("serial and parallel multistart agree bitwise") {
    ObjectiveSpec spec = noiseless_spec(3);
    spec.kind = ObjectiveKind::FixedEnsembleRim;
    spec.sigma_train = 0.05;
    spec.ensemble_size = 5;
    const Objective prototype(spec, RngStream(71, 0));
    const auto optimizer =
        make_optimizer("nelder_mead", nlohmann::json::object());

    const auto par = run_campaign_search(prototype, *optimizer, 5, 25000,
                                         RngStream(71, 0));
    const auto ser = run_campaign_search_serial(prototype, *optimizer, 5,
                                                25000, RngStream(71, 0));
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
        CHECK(par[i].best_objective == ser[i].best_objective);
        CHECK(par[i].restart == ser[i].restart);
        CHECK(par[i].calls_used == ser[i].calls_used);
        CHECK(par[i].best.time == ser[i].best.time);
        CHECK((par[i].best.biases - ser[i].best.biases)
                  .lpNorm<Eigen::Infinity>() == 0.0);
        REQUIRE(par[i].trajectory.size() == ser[i].trajectory.size());
        for (std::size_t t = 0; t < par[i].trajectory.size(); ++t) {
            CHECK(par[i].trajectory[t].objective ==
                  ser[i].trajectory[t].objective);
        }
    }
}

TEST_CASE("restarts that cannot afford one call are dropped") {
    ObjectiveSpec spec = noiseless_spec(2);
    spec.kind = ObjectiveKind::FixedEnsembleRim;
    spec.sigma_train = 0.05;
    spec.ensemble_size = 30;
    const Objective prototype(spec, RngStream(72, 0));
    const auto optimizer =
        make_optimizer("nelder_mead", nlohmann::json::object());
    // 100 / 4 = 25 per restart, below the per-call cost of 30.
    const auto runs = run_campaign_search(prototype, *optimizer, 4, 100,
                                          RngStream(72, 0));
    CHECK(runs.empty());
}

TEST_CASE("five-site end-to-middle search finds a working controller") {
    ObjectiveSpec spec = noiseless_spec(5);
    spec.chain.target = 3;
    const Objective prototype(spec, RngStream(73, 0));
    const auto optimizer =
        make_optimizer("nelder_mead", nlohmann::json::object());
    const auto runs = run_campaign_search(prototype, *optimizer, 8, 40000,
                                          RngStream(73, 0));
    REQUIRE_FALSE(runs.empty());
    CHECK(runs.front().best_objective < 0.05);
}
