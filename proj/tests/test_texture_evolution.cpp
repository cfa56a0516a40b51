#include <texforge/errors.hpp>
#include <texforge/homogenization.hpp>
#include <texforge/texture_evolution.hpp>

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace texforge;

namespace {

const SlipSystemSet& slips() {
    static const SlipSystemSet s = fcc_slip_systems();
    return s;
}

void check_feasible(const FundamentalMesh& m, const Odf& a) {
    CHECK(std::abs(m.node_weights.dot(a) - 1) < 1e-8);
    CHECK((a.array() >= 0).all());
}

}  // namespace

TEST_CASE("process step configuration") {
    ProcessStepConfig cfg;
    CHECK(cfg.dt_total == 0.1);
    CHECK(cfg.substeps == 10);
    CHECK(cfg.clip_negative);
    cfg.substeps = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg.substeps = 1;
    cfg.dt_total = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("zero velocity leaves the ODF unchanged") {
    const FundamentalMesh& m = test::mesh(3);
    const Odf a = test::random_odf(m, 3);
    const Odf out = evolve(m, a, VelocityGradient{}, ProcessStepConfig{}, slips());
    CHECK((out - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a single step from the uniform ODF stays feasible and moves") {
    const FundamentalMesh& m = test::mesh(3);
    const Odf uniform = m.uniform_odf();
    for (const ProcessMode mode : ProcessMode::all()) {
        CAPTURE(mode.mask());
        const Odf out = apply_process(m, uniform, mode, ProcessStepConfig{}, slips());
        check_feasible(m, out);
        CHECK((out - uniform).cwiseAbs().maxCoeff() > 0);
    }
}

TEST_CASE("substep refinement converges at first order") {
    const FundamentalMesh& m = test::mesh(3);
    const Odf a = test::random_odf(m, 42);
    const VelocityGradient l = build_velocity_gradient(ProcessMode::from_mask("10000"));
    const Eigen::Matrix3Xd v = reorientation_velocity(m, l, slips());
    auto run = [&](int substeps) {
        ProcessStepConfig cfg;
        cfg.substeps = substeps;
        return advect(m, a, v, cfg);
    };
    const Odf reference = run(10000);
    const double coarse = (run(10) - reference).norm();
    const double fine = (run(100) - reference).norm();
    CHECK(coarse > 0);
    CHECK(coarse / fine >= 5);
}

TEST_CASE("drift before renormalization stays small") {
    const FundamentalMesh& m = test::mesh(3);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Odf a = test::random_odf(m, seed);
        for (const char* mask : {"10000", "01011", "11111"}) {
            EvolveStats stats;
            const Odf out = apply_process(m, a, ProcessMode::from_mask(mask), ProcessStepConfig{},
                                          slips(), &stats);
            check_feasible(m, out);
            CHECK(stats.max_drift <= 1e-3);
        }
    }
}

TEST_CASE("outputs are valid inputs and paths replay bitwise") {
    const FundamentalMesh& m = test::mesh(3);
    const ProcessStepConfig cfg;
    const Odf a0 = test::random_odf(m, 7);
    std::vector<ProcessMode> modes;
    for (int i = 0; i < 10; ++i) modes.push_back(ProcessMode::from_id(3 * i + 1));

    Odf a = a0;
    std::vector<Odf> manual{a0};
    for (const ProcessMode mode : modes) manual.push_back(a = apply_process(m, a, mode, cfg, slips()));

    const StiffnessMatrix c0 = copper_stiffness();
    const ObjectiveWeights w;
    const Trajectory t = simulate_path(m, a0, modes, cfg, slips(), c0, w);
    REQUIRE(t.odfs.size() == 11);
    CHECK(t.modes == modes);
    CHECK(t.objectives.size() == 11);
    for (std::size_t i = 0; i < t.odfs.size(); ++i) {
        CHECK(t.odfs[i] == manual[i]);
        check_feasible(m, t.odfs[i]);
        CHECK(t.objectives[i] == objective(homogenize(m, c0, t.odfs[i]), w));
    }
    const Trajectory again = simulate_path(m, a0, modes, cfg, slips(), c0, w);
    CHECK(again.odfs == t.odfs);
    CHECK(again.objectives == t.objectives);
}

TEST_CASE("simulate_path edge cases") {
    const FundamentalMesh& m = test::mesh(3);
    const Odf a0 = m.uniform_odf();
    const StiffnessMatrix c0 = copper_stiffness();
    const Trajectory empty = simulate_path(m, a0, {}, ProcessStepConfig{}, slips(), c0, {});
    CHECK(empty.odfs.size() == 1);
    CHECK(empty.modes.empty());
    CHECK(empty.odfs[0] == a0);

    const std::vector<ProcessMode> tension(10, ProcessMode::from_mask("10000"));
    const Trajectory t = simulate_path(m, a0, tension, ProcessStepConfig{}, slips(), c0, {});
    CHECK(t.odfs.size() == 11);
    const PropertyMatrix p = assemble_property_matrix(m, c0);
    const Eigen::VectorXd row = objective_row(p, {});
    const double upper = single_crystal_bound(p, m.node_weights, {}).objective;
    const double lower = row.cwiseQuotient(m.node_weights).minCoeff();
    for (std::size_t i = 0; i < t.odfs.size(); ++i) {
        check_feasible(m, t.odfs[i]);
        CHECK(t.objectives[i] <= upper + 1e-9);
        CHECK(t.objectives[i] >= lower - 1e-9);
    }
}

TEST_CASE("non-finite velocities raise a blowup naming the substep") {
    const FundamentalMesh& m = test::mesh(2);
    Eigen::Matrix3Xd v = Eigen::Matrix3Xd::Zero(3, m.node_count());
    v(0, 13) = std::numeric_limits<double>::quiet_NaN();
    try {
        (void)advect(m, m.uniform_odf(), v, ProcessStepConfig{});
        FAIL("expected a blowup");
    } catch (const NumericalBlowup& e) {
        CHECK(e.substep() == 0);
    }
    CHECK_THROWS_AS(advect(m, m.uniform_odf(), Eigen::Matrix3Xd::Zero(3, 2), ProcessStepConfig{}),
                    InvalidArgument);
}

TEST_CASE("clipping can be disabled") {
    const FundamentalMesh& m = test::mesh(3);
    ProcessStepConfig cfg;
    cfg.clip_negative = false;
    const Odf out = apply_process(m, test::random_odf(m, 5), ProcessMode::from_id(9), cfg, slips());
    CHECK(std::abs(m.node_weights.dot(out) - 1) < 1e-12);
}
