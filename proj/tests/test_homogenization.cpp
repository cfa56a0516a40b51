#include <texforge/errors.hpp>
#include <texforge/homogenization.hpp>
#include <texforge/stiffness.hpp>

#include "test_support.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace texforge;

namespace {

using Tensor4 = std::array<std::array<std::array<std::array<double, 3>, 3>, 3>, 3>;

constexpr int kVoigt[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};

Tensor4 to_tensor(const StiffnessMatrix& c) {
    Tensor4 t{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) t[i][j][k][l] = c(kVoigt[i][j], kVoigt[k][l]);
    return t;
}

StiffnessMatrix to_voigt(const Tensor4& t) {
    const int pairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
    StiffnessMatrix c;
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) c(a, b) = t[pairs[a][0]][pairs[a][1]][pairs[b][0]][pairs[b][1]];
    return c;
}

// C'_ijkl = R_ip R_jq R_kr R_ls C_pqrs, summed term by term.
StiffnessMatrix rotate_by_tensor(const StiffnessMatrix& c0, const Matrix3& rot) {
    const Tensor4 t = to_tensor(c0);
    Tensor4 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    double sum = 0;
                    for (int p = 0; p < 3; ++p)
                        for (int q = 0; q < 3; ++q)
                            for (int r = 0; r < 3; ++r)
                                for (int s = 0; s < 3; ++s)
                                    sum += rot(i, p) * rot(j, q) * rot(k, r) * rot(l, s) * t[p][q][r][s];
                    out[i][j][k][l] = sum;
                }
    return to_voigt(out);
}

Eigen::Matrix<double, 6, 1> mandel_spectrum(const StiffnessMatrix& c) {
    return Eigen::SelfAdjointEigenSolver<StiffnessMatrix>(to_mandel(c)).eigenvalues();
}

// Isotropic orientation average of a cubic crystal.
StiffnessMatrix analytic_cubic_average(double c11, double c12, double c44) {
    return cubic_stiffness((3 * c11 + 2 * c12 + 4 * c44) / 5, (c11 + 4 * c12 - 2 * c44) / 5,
                           (c11 - c12 + 3 * c44) / 5);
}

}  // namespace

TEST_CASE("rotate_stiffness at symmetry elements") {
    const StiffnessMatrix c0 = copper_stiffness();
    CHECK(rotate_stiffness(c0, Matrix3::Identity()) == c0);
    const Matrix3 quarter = Eigen::AngleAxisd(std::numbers::pi / 2, Vector3::UnitZ()).toRotationMatrix();
    CHECK((rotate_stiffness(c0, quarter) - c0).cwiseAbs().maxCoeff() < 1e-12);
    for (const Matrix3& op : cubic_symmetry_rotations())
        CHECK((rotate_stiffness(c0, op) - c0).cwiseAbs().maxCoeff() < 1e-12);
    Matrix3 sheared = Matrix3::Identity();
    sheared(0, 1) = 1e-3;
    CHECK_THROWS_AS(rotate_stiffness(c0, sheared), InvalidArgument);
}

TEST_CASE("rotate_stiffness matches the fourth-order tensor rotation") {
    std::mt19937_64 rng(17);
    StiffnessMatrix anisotropic = StiffnessMatrix::Random();
    anisotropic = (anisotropic * anisotropic.transpose()).eval() * 50;
    for (const StiffnessMatrix& c0 : {copper_stiffness(), anisotropic}) {
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix3 rot = test::random_rotation(rng);
            const StiffnessMatrix c = rotate_stiffness(c0, rot);
            CHECK((c - rotate_by_tensor(c0, rot)).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((mandel_spectrum(c) - mandel_spectrum(c0)).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("objective examples") {
    CHECK(objective(StiffnessMatrix::Zero()) == 0);
    CHECK(std::abs(objective(copper_stiffness()) - 912.3) < 1e-9);
    const StiffnessMatrix avg = analytic_cubic_average(168.0, 121.4, 75.4);
    CHECK(std::abs(avg(0, 0) - 209.68) < 1e-9);
    CHECK(std::abs(avg(0, 1) - 100.56) < 1e-9);
    CHECK(std::abs(avg(3, 3) - 54.56) < 1e-9);
    CHECK(std::abs(objective(avg) - 943.56) < 1e-9);
    ObjectiveWeights w;
    w.diagonal << 1, 0, 0, 0, 0, 0;
    w.off_diagonal = 0;
    CHECK(objective(copper_stiffness(), w) == 168.0);
    w.off_diagonal = -1;
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
}

TEST_CASE("Monte-Carlo orientation average agrees with the analytic cubic average") {
    std::mt19937_64 rng(99);
    const StiffnessMatrix c0 = copper_stiffness();
    StiffnessMatrix sum = StiffnessMatrix::Zero();
    const int samples = 100000;
    for (int i = 0; i < samples; ++i) sum += rotate_stiffness(c0, test::random_rotation(rng));
    const StiffnessMatrix mc = sum / samples;
    const StiffnessMatrix analytic = analytic_cubic_average(168.0, 121.4, 75.4);
    CHECK(test::rel_diff(mc(0, 0), analytic(0, 0)) < 1e-3);
    CHECK(test::rel_diff(mc(0, 1), analytic(0, 1)) < 1e-3);
    CHECK(test::rel_diff(mc(3, 3), analytic(3, 3)) < 1e-3);
}

TEST_CASE("uniform ODF reproduces the isotropic average") {
    const StiffnessMatrix c0 = copper_stiffness();
    for (int s : {2, 3}) {
        const FundamentalMesh& m = test::mesh(s);
        const StiffnessMatrix c = homogenize(m, c0, m.uniform_odf());
        CAPTURE(s);
        CHECK(test::rel_diff(c(0, 0), 209.68) < 0.01);
        CHECK(test::rel_diff(c(1, 1), 209.68) < 0.01);
        CHECK(test::rel_diff(c(0, 1), 100.56) < 0.01);
        CHECK(test::rel_diff(c(3, 3), 54.56) < 0.01);
        CHECK(test::rel_diff(objective(c), 943.56) < 0.01);
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("homogenize through P matches quadrature and is linear") {
    const FundamentalMesh& m = test::mesh(3);
    const StiffnessMatrix c0 = copper_stiffness();
    const PropertyMatrix p = assemble_property_matrix(m, c0);
    const Odf a1 = test::random_odf(m, 1), a2 = test::random_odf(m, 2);
    for (const Odf& a : {a1, a2, m.uniform_odf()}) {
        const StiffnessMatrix direct = homogenize(m, c0, a);
        CHECK((homogenize(p, a) - direct).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((direct - direct.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    }
    const double alpha = 0.3;
    const StiffnessMatrix mixed = homogenize(m, c0, Odf(alpha * a1 + (1 - alpha) * a2));
    const StiffnessMatrix combo =
        alpha * homogenize(m, c0, a1) + (1 - alpha) * homogenize(m, c0, a2);
    CHECK((mixed - combo).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(homogenize(m, c0, Odf(2 * a1)), InvalidArgument);
    CHECK_THROWS_AS(homogenize(m, c0, Odf::Ones(4)), InvalidArgument);
}

TEST_CASE("homogenized spectrum lies within the crystal spectrum") {
    const FundamentalMesh& m = test::mesh(3);
    const StiffnessMatrix c0 = copper_stiffness();
    const auto crystal = mandel_spectrum(c0);
    const PropertyMatrix p = assemble_property_matrix(m, c0);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto spectrum = mandel_spectrum(homogenize(p, test::random_odf(m, seed)));
        CHECK(spectrum.minCoeff() >= crystal.minCoeff() - 1e-9);
        CHECK(spectrum.maxCoeff() <= crystal.maxCoeff() + 1e-6);
    }
    for (int slot = 0; slot < m.independent_count(); ++slot) {
        Odf spike = Odf::Zero(m.independent_count());
        spike(slot) = 1.0 / m.node_weights(slot);
        const auto spectrum = mandel_spectrum(homogenize(p, spike));
        CHECK(spectrum.minCoeff() >= crystal.minCoeff() - 1e-9);
        CHECK(spectrum.maxCoeff() <= crystal.maxCoeff() + 1e-6);
    }
}

TEST_CASE("mass concentrated at the origin approaches the crystal stiffness") {
    const StiffnessMatrix c0 = copper_stiffness();
    // Even grids put a node at the origin; the lumped spike spreads over one spacing.
    double previous = 1e9, first = 0;
    for (int s : {2, 4, 6, 8}) {
        const FundamentalMesh m = build_mesh(s);
        int nearest = 0;
        for (int n = 1; n < m.node_count(); ++n)
            if (m.nodes[n].norm() < m.nodes[nearest].norm()) nearest = n;
        Odf a = Odf::Zero(m.independent_count());
        a(m.node_slot[nearest]) = 1.0 / m.node_weights(m.node_slot[nearest]);
        const double gap = (homogenize(m, c0, a) - c0).norm() / c0.norm();
        CAPTURE(s);
        CHECK(gap < previous);
        if (s == 2) first = gap;
        previous = gap;
    }
    CHECK(previous < first / 5);
}

TEST_CASE("single-crystal bound") {
    const StiffnessMatrix c0 = copper_stiffness();
    const ObjectiveWeights w;
    SUBCASE("brute force over vertex ODFs") {
        const FundamentalMesh& m = test::mesh(2);
        const PropertyMatrix p = assemble_property_matrix(m, c0);
        const CrystalBound bound = single_crystal_bound(p, m.node_weights, w);
        int best = -1;
        double best_value = -1e300;
        for (int k = 0; k < m.independent_count(); ++k) {
            Odf a = Odf::Zero(m.independent_count());
            a(k) = 1.0 / m.node_weights(k);
            const double value = objective(homogenize(m, c0, a), w);
            if (value > best_value + 1e-12) {
                best = k;
                best_value = value;
            }
        }
        CHECK(bound.slot == best);
        CHECK(std::abs(bound.objective - best_value) < 1e-10);
    }
    SUBCASE("dominates random ODFs") {
        const FundamentalMesh& m = test::mesh(3);
        const PropertyMatrix p = assemble_property_matrix(m, c0);
        const CrystalBound bound = single_crystal_bound(p, m.node_weights, w);
        Odf vertex = Odf::Zero(m.independent_count());
        vertex(bound.slot) = 1.0 / m.node_weights(bound.slot);
        CHECK(std::abs(objective(homogenize(m, c0, vertex), w) - bound.objective) < 1e-9);
        CHECK(bound.objective > objective(homogenize(m, c0, m.uniform_odf()), w));
        for (std::uint64_t seed = 0; seed < 1000; ++seed)
            CHECK(objective(homogenize(p, test::random_odf(m, seed)), w) <= bound.objective);
    }
    SUBCASE("shape errors") {
        const FundamentalMesh& m = test::mesh(2);
        const PropertyMatrix p = assemble_property_matrix(m, c0);
        CHECK_THROWS_AS(single_crystal_bound(p, Eigen::VectorXd::Ones(2), w), InvalidArgument);
    }
}
