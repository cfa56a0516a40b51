#pragma once

#include <texforge/mesh.hpp>
#include <texforge/stiffness.hpp>

#include <Eigen/Dense>

namespace texforge {

/// Voigt average <C> by quadrature of C(r) A(r) over the mesh.  Requires |q.a - 1| <= 1e-6.
StiffnessMatrix homogenize(const FundamentalMesh& mesh, const StiffnessMatrix& c0, const Odf& a);

/// Homogenized stiffness from the linear form P^T a.
StiffnessMatrix homogenize(const PropertyMatrix& p, const Odf& a);

/// Row vector W with F(P^T a) == W.a for every a.
Eigen::VectorXd objective_row(const PropertyMatrix& p, const ObjectiveWeights& w);

struct CrystalBound {
    int slot;  // position in independent_ids
    double objective;
};

/// Maximum of F(P^T a) over {a >= 0, q.a = 1}.  The objective is linear, so the
/// optimum sits on a vertex a = e_i / q_i; ties go to the lowest slot.
CrystalBound single_crystal_bound(const PropertyMatrix& p, const Eigen::VectorXd& q,
                                  const ObjectiveWeights& w);

}  // namespace texforge
