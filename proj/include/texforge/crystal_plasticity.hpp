#pragma once

#include <texforge/mesh.hpp>
#include <texforge/orientation.hpp>

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace texforge {

/// One of the 31 non-empty on/off combinations of the five elementary processes.
/// Mask digits, left to right: tension/compression, plane-strain compression,
/// xy shear, xz shear, yz shear.  The id is the mask read as a binary number.
class ProcessMode {
  public:
    static constexpr int kCount = 31;

    static ProcessMode from_id(int id);
    static ProcessMode from_mask(std::string_view mask);
    /// All modes in ascending id order.
    static std::vector<ProcessMode> all();

    int id() const { return id_; }
    std::string mask() const;
    /// Whether elementary process k (0-based, alpha_{k+1}) is switched on.
    bool active(int k) const { return (id_ >> (4 - k)) & 1; }

    auto operator<=>(const ProcessMode&) const = default;

  private:
    explicit ProcessMode(int id) : id_(id) {}
    int id_;
};

struct VelocityGradient {
    Matrix3 l = Matrix3::Zero();
    Eigen::Matrix<double, 5, 1> alphas = Eigen::Matrix<double, 5, 1>::Zero();
};

/// The five traceless basis matrices, alpha_1 .. alpha_5.
const std::array<Matrix3, 5>& velocity_gradient_basis();

/// L = sum_k alpha_k M_k with alpha_k = rate for every active process.
VelocityGradient build_velocity_gradient(ProcessMode mode, double rate = 1.0);
VelocityGradient velocity_gradient_from_alphas(const Eigen::Matrix<double, 5, 1>& alphas);

/// FCC {111}<110> slip with a rate-sensitive power law
///   gamma_dot = rate0 |tau / g|^(1/m) sign(tau).
struct SlipSystemSet {
    std::array<Vector3, 12> normals;
    std::array<Vector3, 12> directions;
    std::array<Matrix3, 12> schmid;  // direction (x) normal, crystal frame
    double reference_rate = 1.0;
    double rate_sensitivity = 0.05;
    double resistance = 1.0;
    int max_iterations = 100;
    double tolerance = 1e-9;  // relative to |D|
};

SlipSystemSet fcc_slip_systems();

using SlipRates = Eigen::Matrix<double, 12, 1>;

struct TaylorSolution {
    SlipRates rates = SlipRates::Zero();
    Eigen::Matrix<double, 5, 1> stress = Eigen::Matrix<double, 5, 1>::Zero();  // deviatoric, crystal frame
    double residual = 0;  // |sum gamma_dot sym(R T R^T) - D|_F
    int iterations = 0;
};

/// Full-constraint Taylor solve: the crystal's plastic stretching equals sym(L).
/// Throws ConvergenceError if damped Newton fails within slips.max_iterations.
TaylorSolution solve_taylor(const Matrix3& l, const Vector3& r, const SlipSystemSet& slips);

inline SlipRates taylor_slip_rates(const VelocityGradient& l, const Vector3& r,
                                   const SlipSystemSet& slips) {
    return solve_taylor(l.l, r, slips).rates;
}

/// Lattice spin axial vector: axial(skew(L) - skew(R Lp R^T)).
Vector3 lattice_spin(const Matrix3& l, const Vector3& r, const SlipRates& rates,
                     const SlipSystemSet& slips);

/// dr/dt at one orientation.
Vector3 node_velocity(const Matrix3& l, const Vector3& r, const SlipSystemSet& slips);

/// Reorientation velocity at every mesh node (columns follow mesh.nodes).
Eigen::Matrix3Xd reorientation_velocity(const FundamentalMesh& mesh, const VelocityGradient& l,
                                        const SlipSystemSet& slips);

}  // namespace texforge
