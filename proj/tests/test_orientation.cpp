#include <texforge/errors.hpp>
#include <texforge/orientation.hpp>

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace texforge;

namespace {

// Quaternion oracle for r = n tan(theta / 2).
Eigen::Quaterniond quaternion_of(const Vector3& r) {
    const double norm = r.norm();
    if (norm == 0) return Eigen::Quaterniond::Identity();
    return Eigen::Quaterniond(Eigen::AngleAxisd(2 * std::atan(norm), r / norm));
}

}  // namespace

TEST_CASE("rotation_from_rodrigues at the identity and a quarter turn") {
    CHECK(rotation_from_rodrigues(Vector3::Zero()).isApprox(Matrix3::Identity(), 0));
    Matrix3 expected;
    expected << 1, 0, 0, 0, 0, -1, 0, 1, 0;
    CHECK((rotation_from_rodrigues(Vector3(1, 0, 0)) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("rotation_from_rodrigues matches the quaternion oracle") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
        const Vector3 r(n(rng), n(rng), n(rng));
        const Matrix3 rot = rotation_from_rodrigues(r);
        CHECK((rot - quaternion_of(r).toRotationMatrix()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((rot * r - r).norm() < 1e-12 * (1 + r.norm()));
        const double angle = std::acos(std::clamp((rot.trace() - 1) / 2, -1.0, 1.0));
        CHECK(std::abs(angle - 2 * std::atan(r.norm())) < 1e-7);
    }
}

TEST_CASE("rotation_from_rodrigues is proper orthogonal and reverses with -r") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 500; ++trial) {
        const Vector3 r(u(rng), u(rng), u(rng));
        const Matrix3 rot = rotation_from_rodrigues(r);
        CHECK((rot.transpose() * rot - Matrix3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(rot.determinant() - 1) < 1e-12);
        CHECK((rotation_from_rodrigues(Vector3(-r)) - rot.transpose()).cwiseAbs().maxCoeff() < 1e-15);
        const auto back = rodrigues_from_rotation(rot);
        REQUIRE(back);
        CHECK((*back - r).norm() < 1e-9 * (1 + r.squaredNorm()));
    }
}

TEST_CASE("rotation_from_rodrigues rejects non-finite input") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(rotation_from_rodrigues(Vector3(nan, 0, 0)), InvalidArgument);
    CHECK_THROWS_AS(metric_factor(Vector3(0, std::numeric_limits<double>::infinity(), 0)),
                    InvalidArgument);
}

TEST_CASE("metric_factor examples and monotonicity") {
    CHECK(metric_factor(Vector3::Zero()) == 1.0);
    CHECK(metric_factor(Vector3(1, 0, 0)) == 0.25);
    CHECK(metric_factor(Vector3(1, 1, 1)) == 0.0625);
    const Vector3 dir = Vector3(0.3, -0.5, 0.8).normalized();
    double previous = 2;
    for (double t = 0; t < 5; t += 0.01) {
        const double g = metric_factor(Vector3(t * dir));
        CHECK(g > 0);
        CHECK(g <= 1);
        CHECK(g < previous);
        previous = g;
    }
}

TEST_CASE("rodrigues_rate examples") {
    CHECK(rodrigues_rate(Vector3(0.3, 0.1, -0.2), Vector3::Zero()) == Vector3::Zero());
    CHECK(rodrigues_rate(Vector3::Zero(), Vector3(2, -4, 6)) == Vector3(1, -2, 3));
}

TEST_CASE("rodrigues_rate agrees with a small finite rotation") {
    const double dt = 1e-6;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::pair<Vector3, Vector3>> cases{{Vector3(1, 0, 0), Vector3(0, 0, 1.7)}};
    for (int i = 0; i < 50; ++i)
        cases.emplace_back(Vector3(u(rng), u(rng), u(rng)), Vector3(u(rng), u(rng), u(rng)));
    for (const auto& [r, omega] : cases) {
        // Spatial spin: R(t + dt) = exp([omega] dt) R(t).
        const Eigen::Quaterniond step(Eigen::AngleAxisd(omega.norm() * dt, omega.normalized()));
        const Eigen::Quaterniond moved = step * quaternion_of(r);
        const Vector3 r_next = moved.vec() / moved.w();
        const Vector3 fd = (r_next - r) / dt;
        const Vector3 rate = rodrigues_rate(r, omega);
        CHECK((fd - rate).norm() <= 1e-5 * (1 + rate.norm()));
    }
}

TEST_CASE("rodrigues_rate is linear in the spin") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Vector3 r(u(rng), u(rng), u(rng));
        const Vector3 w1(u(rng), u(rng), u(rng)), w2(u(rng), u(rng), u(rng));
        const double a = u(rng), b = u(rng);
        const Vector3 lhs = rodrigues_rate(r, Vector3(a * w1 + b * w2));
        const Vector3 rhs = a * rodrigues_rate(r, w1) + b * rodrigues_rate(r, w2);
        CHECK((lhs - rhs).norm() < 1e-14);
    }
}

TEST_CASE("cubic symmetry group") {
    const auto& ops = cubic_symmetry_rotations();
    CHECK(ops.front().isApprox(Matrix3::Identity(), 0));
    for (std::size_t i = 0; i < ops.size(); ++i) {
        CHECK(std::abs(ops[i].determinant() - 1) < 1e-15);
        for (std::size_t j = 0; j < i; ++j) CHECK((ops[i] - ops[j]).cwiseAbs().maxCoeff() > 0.5);
    }
}

TEST_CASE("templates evaluate at long double precision") {
    const Eigen::Matrix<long double, 3, 1> r(0.1L, 0.2L, 0.3L);
    const auto rot = rotation_from_rodrigues(r);
    CHECK(std::abs(static_cast<double>(rot.determinant() - 1)) < 1e-15);
    CHECK(std::abs(static_cast<double>(metric_factor(r)) - 1.0 / (1.14 * 1.14)) < 1e-15);
}
