#pragma once

// Rodrigues angle-axis kinematics.  r = n tan(theta/2); rotations are active
// and right-handed, and spins act from the left (dR/dt = [omega]x R).

#include <texforge/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

namespace texforge {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

using Vector3 = Vec3<double>;
using Matrix3 = Mat3<double>;

/// Half-width of the cube approximating the cubic fundamental region.
inline const double kFundamentalHalfWidth = std::tan(std::numbers::pi / 8.0);

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
    if (!v.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite input");
}

/// Cross-product matrix: cross_matrix(a) * b == a.cross(b).
template <typename Derived>
Mat3<typename Derived::Scalar> cross_matrix(const Eigen::MatrixBase<Derived>& a) {
    Mat3<typename Derived::Scalar> k;
    k << 0, -a(2), a(1),
         a(2), 0, -a(0),
         -a(1), a(0), 0;
    return k;
}

/// Axial vector of the skew part of m, so axial(cross_matrix(w)) == w.
template <typename Derived>
Vec3<typename Derived::Scalar> axial(const Eigen::MatrixBase<Derived>& m) {
    using S = typename Derived::Scalar;
    return Vec3<S>(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) / S(2);
}

template <typename Derived>
Mat3<typename Derived::Scalar> sym(const Eigen::MatrixBase<Derived>& m) {
    return (m + m.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
Mat3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& m) {
    return (m - m.transpose()) / typename Derived::Scalar(2);
}

/// R = [(1 - r.r) I + 2 (r r^T + [r]x)] / (1 + r.r)
template <typename Derived>
Mat3<typename Derived::Scalar> rotation_from_rodrigues(const Eigen::MatrixBase<Derived>& r) {
    using S = typename Derived::Scalar;
    require_finite(r, "rotation_from_rodrigues");
    const S rr = r.squaredNorm();
    Mat3<S> m = (S(1) - rr) * Mat3<S>::Identity() + S(2) * (r * r.transpose() + cross_matrix(r));
    return m / (S(1) + rr);
}

/// Inverse of rotation_from_rodrigues.  Empty for half-turns (infinite r).
template <typename Derived>
std::optional<Vec3<typename Derived::Scalar>> rodrigues_from_rotation(
    const Eigen::MatrixBase<Derived>& rot) {
    using S = typename Derived::Scalar;
    const S denom = S(1) + rot.trace();
    if (std::abs(denom) < S(1e-12)) return std::nullopt;
    return Vec3<S>(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1)) / denom;
}

/// Haar-measure density of Rodrigues space, 1 / (1 + r.r)^2.
template <typename Derived>
typename Derived::Scalar metric_factor(const Eigen::MatrixBase<Derived>& r) {
    using S = typename Derived::Scalar;
    require_finite(r, "metric_factor");
    const S d = S(1) + r.squaredNorm();
    return S(1) / (d * d);
}

/// dr/dt for a spatial angular velocity omega: (omega + omega x r + (omega.r) r) / 2.
template <typename DerivedR, typename DerivedW>
Vec3<typename DerivedR::Scalar> rodrigues_rate(const Eigen::MatrixBase<DerivedR>& r,
                                               const Eigen::MatrixBase<DerivedW>& omega) {
    using S = typename DerivedR::Scalar;
    return (omega + omega.cross(r) + omega.dot(r) * r) / S(2);
}

/// The 24 proper rotations of the cube (signed permutation matrices with det +1),
/// identity first, in a fixed order.
inline const std::array<Matrix3, 24>& cubic_symmetry_rotations() {
    static const std::array<Matrix3, 24> ops = [] {
        std::array<Matrix3, 24> out{};
        std::array<int, 3> perm{0, 1, 2};
        std::size_t n = 0;
        do {
            for (int signs = 0; signs < 8; ++signs) {
                Matrix3 m = Matrix3::Zero();
                for (int i = 0; i < 3; ++i) m(i, perm[i]) = (signs >> i & 1) ? -1.0 : 1.0;
                if (m.determinant() > 0) out[n++] = m;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return out;
    }();
    return ops;
}

}  // namespace texforge
