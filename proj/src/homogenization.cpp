#include <texforge/homogenization.hpp>

#include <cmath>

namespace texforge {

StiffnessMatrix homogenize(const FundamentalMesh& mesh, const StiffnessMatrix& c0, const Odf& a) {
    if (a.size() != mesh.independent_count())
        throw InvalidArgument("homogenize: ODF length does not match the mesh");
    if (std::abs(mesh.node_weights.dot(a) - 1.0) > 1e-6)
        throw InvalidArgument("homogenize: ODF is not normalized");

    const Eigen::VectorXd full = mesh.expand(a);
    StiffnessMatrix c = StiffnessMatrix::Zero();
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& tet = mesh.elements[e];
        for (const auto& qp : mesh.quad_points[e]) {
            double density = 0;
            for (int k = 0; k < 4; ++k) density += qp.shape(k) * full(tet[k]);
            const double dv = qp.weight * mesh.jacobians[e] * metric_factor(qp.r);
            c += (density * dv) * rotate_stiffness(c0, rotation_from_rodrigues(qp.r));
        }
    }
    return c;
}

StiffnessMatrix homogenize(const PropertyMatrix& p, const Odf& a) {
    if (a.size() != p.rows()) throw InvalidArgument("homogenize: ODF length does not match P");
    return stiffness_from_entries(p.transpose() * a);
}

Eigen::VectorXd objective_row(const PropertyMatrix& p, const ObjectiveWeights& w) {
    w.validate();
    return p * w.entry_weights();
}

CrystalBound single_crystal_bound(const PropertyMatrix& p, const Eigen::VectorXd& q,
                                  const ObjectiveWeights& w) {
    if (q.size() != p.rows() || q.size() == 0)
        throw InvalidArgument("single_crystal_bound: weights do not match P");
    const Eigen::VectorXd row = objective_row(p, w);
    CrystalBound best{0, row(0) / q(0)};
    for (Eigen::Index i = 1; i < q.size(); ++i) {
        const double f = row(i) / q(i);
        if (f > best.objective) best = {static_cast<int>(i), f};
    }
    return best;
}

}  // namespace texforge
