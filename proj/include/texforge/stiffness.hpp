#pragma once

// 6x6 elastic stiffness in Voigt notation, ordering (11, 22, 33, 23, 13, 12),
// engineering shear strains.  Units are GPa throughout.

#include <texforge/errors.hpp>
#include <texforge/orientation.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <utility>

namespace texforge {

template <typename Scalar>
using Stiffness = Eigen::Matrix<Scalar, 6, 6>;
using StiffnessMatrix = Stiffness<double>;

/// Number of independent entries of a symmetric 6x6 matrix.
inline constexpr int kStiffnessEntries = 21;

/// (row, col) of the k-th independent entry, upper triangle in row-major order.
inline constexpr std::pair<int, int> stiffness_entry(int k) {
    int row = 0;
    while (k >= 6 - row) {
        k -= 6 - row;
        ++row;
    }
    return {row, row + k};
}

template <typename Scalar>
Stiffness<Scalar> cubic_stiffness(Scalar c11, Scalar c12, Scalar c44) {
    Stiffness<Scalar> c = Stiffness<Scalar>::Zero();
    c.template topLeftCorner<3, 3>().setConstant(c12);
    c.template topLeftCorner<3, 3>().diagonal().setConstant(c11);
    c.template bottomRightCorner<3, 3>().diagonal().setConstant(c44);
    return c;
}

/// Single-crystal copper, GPa.
inline StiffnessMatrix copper_stiffness() { return cubic_stiffness(168.0, 121.4, 75.4); }

/// Bond matrix K for Voigt stiffness: C' = K C K^T is the fourth-order rotation
/// C'_ijkl = R_ip R_jq R_kr R_ls C_pqrs written back in Voigt form.
template <typename Derived>
Stiffness<typename Derived::Scalar> bond_matrix(const Eigen::MatrixBase<Derived>& rot) {
    using S = typename Derived::Scalar;
    Stiffness<S> k;
    auto R = [&](int i, int j) { return rot(i % 3, j % 3); };
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            k(i, j) = R(i, j) * R(i, j);
            k(i, j + 3) = S(2) * R(i, j + 1) * R(i, j + 2);
            k(i + 3, j) = R(i + 1, j) * R(i + 2, j);
            k(i + 3, j + 3) = R(i + 1, j + 1) * R(i + 2, j + 2) + R(i + 1, j + 2) * R(i + 2, j + 1);
        }
    }
    return k;
}

template <typename DerivedC, typename DerivedR>
Stiffness<typename DerivedC::Scalar> rotate_stiffness(const Eigen::MatrixBase<DerivedC>& c0,
                                                      const Eigen::MatrixBase<DerivedR>& rot) {
    using S = typename DerivedC::Scalar;
    if ((rot.transpose() * rot - Mat3<S>::Identity()).norm() > S(1e-8))
        throw InvalidArgument("rotate_stiffness: rotation is not orthogonal");
    const Stiffness<S> k = bond_matrix(rot);
    return k * c0 * k.transpose();
}

/// Mandel (Kelvin) form W C W with W = diag(1,1,1,sqrt2,sqrt2,sqrt2); its spectrum
/// is rotation invariant, unlike the engineering-shear Voigt matrix.
template <typename Derived>
Stiffness<typename Derived::Scalar> to_mandel(const Eigen::MatrixBase<Derived>& c) {
    using S = typename Derived::Scalar;
    Eigen::Matrix<S, 6, 1> w;
    w << 1, 1, 1, std::sqrt(S(2)), std::sqrt(S(2)), std::sqrt(S(2));
    return w.asDiagonal() * c * w.asDiagonal();
}

struct ObjectiveWeights {
    Eigen::Matrix<double, 6, 1> diagonal = Eigen::Matrix<double, 6, 1>::Ones();
    double off_diagonal = 0.5;

    void validate() const {
        if (!diagonal.allFinite() || !std::isfinite(off_diagonal) || (diagonal.array() < 0).any() ||
            off_diagonal < 0)
            throw InvalidArgument("objective weights must be finite and non-negative");
    }

    /// Weights over the 21 independent entries, ordered as stiffness_entry().
    Eigen::Matrix<double, kStiffnessEntries, 1> entry_weights() const {
        Eigen::Matrix<double, kStiffnessEntries, 1> f;
        for (int k = 0; k < kStiffnessEntries; ++k) {
            const auto [i, j] = stiffness_entry(k);
            f(k) = i == j ? diagonal(i) : off_diagonal;
        }
        return f;
    }
};

/// F = sum_i w_ii C_ii + w_off sum_{i<j} C_ij, each symmetric pair counted once.
template <typename Derived>
typename Derived::Scalar objective(const Eigen::MatrixBase<Derived>& c,
                                   const ObjectiveWeights& w = {}) {
    using S = typename Derived::Scalar;
    S f = 0;
    for (int i = 0; i < 6; ++i) {
        f += S(w.diagonal(i)) * c(i, i);
        for (int j = i + 1; j < 6; ++j) f += S(w.off_diagonal) * c(i, j);
    }
    return f;
}

}  // namespace texforge
