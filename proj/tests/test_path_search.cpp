#include <texforge/errors.hpp>
#include <texforge/path_search.hpp>

#include "test_support.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>

using namespace texforge;

namespace {

constexpr int kToy = ProcessMode::kCount;

// Objective row f: P carries f in the C11 column, so F(P^T a) = f.a.
PropertyMatrix toy_property(const Eigen::VectorXd& f) {
    PropertyMatrix p = PropertyMatrix::Zero(f.size(), kStiffnessEntries);
    p.col(0) = f;
    return p;
}

ObjectiveWeights c11_only() {
    ObjectiveWeights w;
    w.diagonal << 1, 0, 0, 0, 0, 0;
    w.off_diagonal = 0;
    return w;
}

// Mode k adds one unit to component k.
class CountingOracle : public StepOracle {
  public:
    std::vector<Odf> expand(const Odf& a) const override {
        std::vector<Odf> out;
        for (const ProcessMode m : ProcessMode::all()) out.push_back(step(a, m));
        return out;
    }
    Odf step(const Odf& a, ProcessMode mode) const override {
        Odf b = a;
        b(mode.id() - 1) += 1;
        return b;
    }
    std::string name() const override { return "counting"; }
};

class IdentityOracle : public StepOracle {
  public:
    std::vector<Odf> expand(const Odf& a) const override { return std::vector<Odf>(kToy, a); }
    Odf step(const Odf& a, ProcessMode) const override { return a; }
    std::string name() const override { return "identity"; }
};

// Fails once mode `poison` has been applied.
class PoisonedOracle : public CountingOracle {
  public:
    explicit PoisonedOracle(int poison) : poison_(poison) {}
    std::vector<Odf> expand(const Odf& a) const override {
        if (a(poison_ - 1) > 0) throw ConvergenceError("poisoned state", 1.0);
        return CountingOracle::expand(a);
    }

  private:
    int poison_;
};

class AlwaysFailing : public CountingOracle {
  public:
    std::vector<Odf> expand(const Odf&) const override { throw NumericalBlowup("always", 3); }
};

Eigen::VectorXd toy_gains(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Eigen::VectorXd f(kToy);
    for (int k = 0; k < kToy; ++k) f(k) = u(rng);
    return f;
}

}  // namespace

TEST_CASE("softmax_base examples") {
    const auto two = softmax_base(Eigen::Vector2d(1, 0), 5.0);
    REQUIRE(two);
    CHECK(std::abs((*two)(0) - 5.0 / 6) < 1e-15);
    CHECK(std::abs((*two)(1) - 1.0 / 6) < 1e-15);

    const auto flat = softmax_base(Eigen::VectorXd::Constant(31, 2.5), 5.0);
    REQUIRE(flat);
    CHECK(((*flat).array() - 1.0 / 31).abs().maxCoeff() < 1e-15);

    CHECK_FALSE(softmax_base(Eigen::Vector3d(0, -1, -2), 5.0));
    CHECK_FALSE(softmax_base(Eigen::Vector3d(0, 0, 0), 5.0));

    const auto sharp = softmax_base(Eigen::Vector3d(1, 0.9, -1), 1e12);
    REQUIRE(sharp);
    CHECK((*sharp)(0) > 0.9);

    const auto expo = softmax_base(Eigen::Vector2d(1, 0), 2.0, SoftmaxForm::exponential);
    REQUIRE(expo);
    CHECK(std::abs((*expo)(0) - std::exp(2.0) / (std::exp(2.0) + 1)) < 1e-15);

    const auto mixed = softmax_base(toy_gains(1) - Eigen::VectorXd::Constant(kToy, 0.5), 5.0);
    REQUIRE(mixed);
    CHECK(std::abs(mixed->sum() - 1) < 1e-12);
    CHECK((mixed->array() > 0).all());

    CHECK_THROWS_AS(softmax_base(Eigen::Vector2d(1, 0), 1.0), InvalidArgument);
    CHECK_THROWS_AS(softmax_base(Eigen::Vector2d(NAN, 0), 5.0), InvalidArgument);
}

TEST_CASE("objective differences") {
    const Eigen::VectorXd f = toy_gains(2);
    const Odf a = Odf::Constant(kToy, 0.1);
    const Eigen::VectorXd zero = objective_diffs(IdentityOracle{}, a, c11_only(), toy_property(f));
    CHECK(zero.size() == 31);
    CHECK(zero.isZero(0));
    const Eigen::VectorXd deltas = objective_diffs(CountingOracle{}, a, c11_only(), toy_property(f));
    CHECK((deltas - f).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("objective differences match quadrature through the simulator") {
    const FundamentalMesh& m = test::mesh(2);
    const StiffnessMatrix c0 = copper_stiffness();
    const PropertyMatrix p = assemble_property_matrix(m, c0);
    const SimulatorOracle sim(m, ProcessStepConfig{}, fcc_slip_systems(), 1);
    const Odf a = test::random_odf(m, 3);
    const ObjectiveWeights w;
    const Eigen::VectorXd deltas = objective_diffs(sim, a, w, p);
    const auto outcomes = sim.expand(a);
    const double base = objective(homogenize(m, c0, a), w);
    for (int k = 0; k < 31; ++k) {
        CHECK(std::abs(deltas(k) - (objective(homogenize(m, c0, outcomes[k]), w) - base)) < 1e-10);
        CHECK(outcomes[k] == sim.step(a, ProcessMode::from_id(k + 1)));
    }
}

TEST_CASE("search configuration") {
    SearchConfig cfg;
    CHECK(cfg.restarts == 1000);
    CHECK(cfg.steps == 10);
    CHECK(cfg.beta == 5.0);
    cfg.restarts = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.beta = 1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg.greedy = true;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("zero steps return the initial texture") {
    const Eigen::VectorXd f = toy_gains(3);
    const Odf a0 = Odf::Constant(kToy, 0.2);
    SearchConfig cfg;
    cfg.steps = 0;
    cfg.restarts = 4;
    const PathResult r = search(CountingOracle{}, a0, cfg, c11_only(), toy_property(f));
    CHECK(r.best_modes.empty());
    CHECK(r.best_objective == f.dot(a0));
    CHECK(r.best_trajectory.odfs.size() == 1);
}

TEST_CASE("greedy search repeats the argmax with lowest-id ties") {
    Eigen::VectorXd f = toy_gains(4);
    f(2) = f(6) = 2.0;
    SearchConfig cfg;
    cfg.greedy = true;
    cfg.restarts = 1;
    const PathResult r = search(CountingOracle{}, Odf::Zero(kToy), cfg, c11_only(), toy_property(f));
    REQUIRE(r.best_modes.size() == 10);
    for (const ProcessMode m : r.best_modes) CHECK(m.id() == 3);
    CHECK(std::abs(r.best_objective - 20.0) < 1e-12);
}

TEST_CASE("search breaks when nothing improves") {
    const Eigen::VectorXd f = -toy_gains(5);
    SearchConfig cfg;
    cfg.restarts = 3;
    const Odf a0 = Odf::Constant(kToy, 1.0);
    const PathResult r = search(CountingOracle{}, a0, cfg, c11_only(), toy_property(f));
    CHECK(r.best_modes.empty());
    CHECK(r.best_objective == f.dot(a0));
    for (const auto& s : r.restarts) {
        REQUIRE(s.break_step);
        CHECK(*s.break_step == 0);
    }

    // Break only once the improving modes are used up.
    Eigen::VectorXd g = Eigen::VectorXd::Constant(kToy, -1.0);
    g(4) = 1.0;
    class OnceOracle : public CountingOracle {
      public:
        Odf step(const Odf& a, ProcessMode mode) const override {
            Odf b = CountingOracle::step(a, mode);
            if (b(4) > 1) b(4) = 1;
            return b;
        }
        std::vector<Odf> expand(const Odf& a) const override {
            std::vector<Odf> out;
            for (const ProcessMode m : ProcessMode::all()) out.push_back(step(a, m));
            return out;
        }
    };
    cfg.greedy = true;
    const PathResult once = search(OnceOracle{}, Odf::Zero(kToy), cfg, c11_only(), toy_property(g));
    REQUIRE(once.best_modes.size() == 1);
    CHECK(once.best_modes[0].id() == 5);
    REQUIRE(once.restarts[0].break_step);
    CHECK(*once.restarts[0].break_step == 1);
}

TEST_CASE("search is deterministic, replayable and monotone in restarts") {
    const Eigen::VectorXd f = toy_gains(6) - Eigen::VectorXd::Constant(kToy, 0.45);
    const PropertyMatrix p = toy_property(f);
    SearchConfig cfg;
    cfg.seed = 11;
    cfg.restarts = 25;
    const Odf a0 = Odf::Zero(kToy);
    const PathResult r = search(CountingOracle{}, a0, cfg, c11_only(), p);
    const PathResult again = search(CountingOracle{}, a0, cfg, c11_only(), p);
    CHECK(r.best_modes == again.best_modes);
    CHECK(r.best_objective == again.best_objective);
    CHECK(r.best_trajectory.objectives.back() == r.best_objective);
    CHECK(r.best_trajectory.modes == r.best_modes);
    double best = -1e300;
    for (const auto& s : r.restarts) best = std::max(best, s.final_objective);
    CHECK(r.best_objective == best);

    double previous = -1e300;
    for (int n = 1; n <= 25; ++n) {
        cfg.restarts = n;
        const double value = search(CountingOracle{}, a0, cfg, c11_only(), p).best_objective;
        CHECK(value >= previous);
        previous = value;
    }
    CHECK(previous == r.best_objective);
}

TEST_CASE("failed restarts are tallied") {
    Eigen::VectorXd f = toy_gains(7);
    f(0) = 1.0;
    SearchConfig cfg;
    cfg.beta = 50;
    cfg.restarts = 40;
    cfg.steps = 3;
    cfg.seed = 2;
    const PathResult r = search(PoisonedOracle(1), Odf::Zero(kToy), cfg, c11_only(), toy_property(f));
    int errors = 0;
    for (const auto& s : r.restarts) errors += s.error.has_value();
    CHECK(r.failed_restarts == errors);
    CHECK(r.failed_restarts > 0);
    CHECK(r.failed_restarts < cfg.restarts);

    CHECK_THROWS_AS(search(AlwaysFailing{}, Odf::Zero(kToy), cfg, c11_only(), toy_property(f)),
                    NumericalBlowup);
}

TEST_CASE("simulator search keeps every texture feasible") {
    const FundamentalMesh& m = test::mesh(2);
    const PropertyMatrix p = assemble_property_matrix(m, copper_stiffness());
    const SimulatorOracle sim(m, ProcessStepConfig{}, fcc_slip_systems(), 2);
    SearchConfig cfg;
    cfg.restarts = 3;
    cfg.steps = 3;
    cfg.seed = 1;
    const PathResult r = search(sim, test::random_odf(m, 8), cfg, {}, p);
    CHECK(r.failed_restarts == 0);
    for (const Odf& a : r.best_trajectory.odfs) {
        CHECK(std::abs(m.node_weights.dot(a) - 1) < 1e-8);
        CHECK((a.array() >= 0).all());
    }
    CHECK(r.best_trajectory.objectives.back() == r.best_objective);
    CHECK(time_expansion(sim, m.uniform_odf(), 1) > 0);
    CHECK_THROWS_AS(time_expansion(sim, m.uniform_odf(), 0), InvalidArgument);
}

TEST_CASE("surrogate oracle wraps the model suite") {
    const FundamentalMesh& m = test::mesh(2);
    std::vector<MlpModel> models;
    for (const ProcessMode mode : ProcessMode::all())
        models.push_back(initialize_model(mode, m.node_weights, mode.id(), 8));
    const SurrogateOracle oracle(models);
    const Odf a = test::random_odf(m, 2);
    const auto out = oracle.expand(a);
    REQUIRE(out.size() == 31);
    for (const ProcessMode mode : ProcessMode::all())
        CHECK(out[mode.id() - 1] == oracle.step(a, mode));
    models.pop_back();
    CHECK_THROWS_AS(SurrogateOracle{models}, ConfigurationError);
}
