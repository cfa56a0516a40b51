#include <texforge/crystal_plasticity.hpp>

#include <cmath>
#include <string>

namespace texforge {

namespace {

using Vector5 = Eigen::Matrix<double, 5, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;

// Orthonormal basis (Frobenius product) of symmetric traceless 3x3 tensors.
const std::array<Matrix3, 5>& deviatoric_basis() {
    static const std::array<Matrix3, 5> basis = [] {
        std::array<Matrix3, 5> b;
        const double r2 = std::sqrt(2.0), r6 = std::sqrt(6.0);
        b[0] = Eigen::Vector3d(1, -1, 0).asDiagonal();
        b[0] /= r2;
        b[1] = Eigen::Vector3d(1, 1, -2).asDiagonal();
        b[1] /= r6;
        for (int k = 0; k < 3; ++k) b[k + 2].setZero();
        b[2](0, 1) = b[2](1, 0) = 1 / r2;
        b[3](0, 2) = b[3](2, 0) = 1 / r2;
        b[4](1, 2) = b[4](2, 1) = 1 / r2;
        return b;
    }();
    return basis;
}

Vector5 to_deviatoric5(const Matrix3& m) {
    const auto& b = deviatoric_basis();
    Vector5 v;
    for (int k = 0; k < 5; ++k) v(k) = (b[k].cwiseProduct(m)).sum();
    return v;
}

// Columns: sym(Schmid tensor) of each slip system in the 5-component basis.
Eigen::Matrix<double, 5, 12> schmid_columns(const SlipSystemSet& slips) {
    Eigen::Matrix<double, 5, 12> p;
    for (int a = 0; a < 12; ++a) p.col(a) = to_deviatoric5(sym(slips.schmid[a]));
    return p;
}

struct PowerLaw {
    double rate0, exponent, resistance;

    double rate(double tau) const {
        const double x = tau / resistance;
        return rate0 * std::pow(std::abs(x), exponent) * (x < 0 ? -1.0 : 1.0);
    }
    double slope(double tau) const {
        const double x = std::abs(tau / resistance);
        return rate0 * exponent / resistance * std::pow(x, exponent - 1.0);
    }
};

}  // namespace

ProcessMode ProcessMode::from_id(int id) {
    if (id < 1 || id > kCount) throw InvalidArgument("process mode id must be in 1..31");
    return ProcessMode(id);
}

ProcessMode ProcessMode::from_mask(std::string_view mask) {
    if (mask.size() != 5) throw InvalidArgument("process mode mask must have 5 digits");
    int id = 0;
    for (char c : mask) {
        if (c != '0' && c != '1') throw InvalidArgument("process mode mask must be binary");
        id = 2 * id + (c - '0');
    }
    if (id == 0) throw InvalidArgument("process mode mask 00000 selects no deformation");
    return ProcessMode(id);
}

std::vector<ProcessMode> ProcessMode::all() {
    std::vector<ProcessMode> out;
    for (int id = 1; id <= kCount; ++id) out.push_back(ProcessMode(id));
    return out;
}

std::string ProcessMode::mask() const {
    std::string s(5, '0');
    for (int k = 0; k < 5; ++k) s[k] = active(k) ? '1' : '0';
    return s;
}

const std::array<Matrix3, 5>& velocity_gradient_basis() {
    static const std::array<Matrix3, 5> basis = [] {
        std::array<Matrix3, 5> m;
        m[0] << 1, 0, 0, 0, -0.5, 0, 0, 0, -0.5;
        m[1] << 0, 0, 0, 0, 1, 0, 0, 0, -1;
        m[2] << 0, 1, 0, 1, 0, 0, 0, 0, 0;
        m[3] << 0, 0, 1, 0, 0, 0, 1, 0, 0;
        m[4] << 0, 0, 0, 0, 0, 1, 0, 1, 0;
        return m;
    }();
    return basis;
}

VelocityGradient velocity_gradient_from_alphas(const Eigen::Matrix<double, 5, 1>& alphas) {
    VelocityGradient v;
    v.alphas = alphas;
    const auto& basis = velocity_gradient_basis();
    for (int k = 0; k < 5; ++k) v.l += alphas(k) * basis[k];
    return v;
}

VelocityGradient build_velocity_gradient(ProcessMode mode, double rate) {
    if (!(rate > 0) || !std::isfinite(rate))
        throw InvalidArgument("build_velocity_gradient: rate must be positive");
    Eigen::Matrix<double, 5, 1> alphas;
    for (int k = 0; k < 5; ++k) alphas(k) = mode.active(k) ? rate : 0.0;
    return velocity_gradient_from_alphas(alphas);
}

SlipSystemSet fcc_slip_systems() {
    SlipSystemSet s;
    const std::array<Vector3, 4> planes{Vector3(1, 1, 1), Vector3(-1, 1, 1), Vector3(1, -1, 1),
                                        Vector3(1, 1, -1)};
    const std::array<Vector3, 6> dirs{Vector3(0, 1, -1), Vector3(1, 0, -1), Vector3(1, -1, 0),
                                      Vector3(0, 1, 1),  Vector3(1, 0, 1),  Vector3(1, 1, 0)};
    int a = 0;
    for (const auto& n : planes)
        for (const auto& d : dirs)
            if (n.dot(d) == 0) {
                s.normals[a] = n.normalized();
                s.directions[a] = d.normalized();
                s.schmid[a] = s.directions[a] * s.normals[a].transpose();
                ++a;
            }
    return s;
}

TaylorSolution solve_taylor(const Matrix3& l, const Vector3& r, const SlipSystemSet& slips) {
    TaylorSolution sol;
    const Matrix3 rot = rotation_from_rodrigues(r);
    const Matrix3 stretch = sym(l);
    const double target_norm = stretch.norm();
    if (target_norm == 0) return sol;

    const Vector5 d = to_deviatoric5(rot.transpose() * stretch * rot);
    const Eigen::Matrix<double, 5, 12> p = schmid_columns(slips);
    const PowerLaw law{slips.reference_rate, 1.0 / slips.rate_sensitivity, slips.resistance};
    const double tol = slips.tolerance * target_norm;

    // The residual is the gradient of the convex potential
    //   phi(s) = sum_a rate0 g / (n + 1) |tau_a / g|^(n + 1) - d.s,
    // whose Hessian is the Newton Jacobian; backtracking on phi globalizes Newton.
    auto evaluate = [&](const Vector5& s, SlipRates& rates, double& phi) {
        const SlipRates tau = p.transpose() * s;
        phi = -d.dot(s);
        for (int a = 0; a < 12; ++a) {
            rates(a) = law.rate(tau(a));
            phi += rates(a) * tau(a) / (law.exponent + 1.0);
        }
        return Vector5(p * rates - d);
    };

    // Start from the linear-viscous direction scaled to the power-law magnitude.
    Vector5 s = (p * p.transpose()).ldlt().solve(d);
    s *= slips.resistance * std::pow(target_norm / slips.reference_rate, slips.rate_sensitivity) /
         (p.transpose() * s).cwiseAbs().maxCoeff();

    SlipRates rates;
    double phi = 0;
    Vector5 f = evaluate(s, rates, phi);
    double fnorm = f.norm();
    int it = 0;
    for (; it < slips.max_iterations && !(fnorm < tol); ++it) {
        const SlipRates tau = p.transpose() * s;
        Matrix5 jac = Matrix5::Zero();
        for (int a = 0; a < 12; ++a) jac += law.slope(tau(a)) * p.col(a) * p.col(a).transpose();
        Vector5 step = -jac.ldlt().solve(f);
        // Directions with no active slip make the Jacobian nearly singular; cap the
        // step at half the current stress magnitude.
        const double cap = 0.5 * s.norm();
        if (!step.allFinite()) step = -f;
        if (step.norm() > cap) step *= cap / step.norm();
        const double slope = f.dot(step);

        double lambda = 1.0;
        SlipRates trial_rates;
        double trial_phi = 0;
        Vector5 trial_f;
        for (;;) {
            trial_f = evaluate(s + lambda * step, trial_rates, trial_phi);
            const double trial_norm = trial_f.norm();
            const bool finite = std::isfinite(trial_norm) && std::isfinite(trial_phi);
            if (finite && (trial_norm < fnorm || trial_phi <= phi + 1e-4 * lambda * slope)) break;
            if (lambda < 1e-10) break;
            lambda *= 0.5;
        }
        s += lambda * step;
        rates = trial_rates;
        phi = trial_phi;
        f = trial_f;
        fnorm = f.norm();
    }
    if (!(fnorm < tol))
        throw ConvergenceError("Taylor slip-rate solve did not converge (residual " +
                                   std::to_string(fnorm) + ")",
                               fnorm);
    sol.rates = rates;
    sol.stress = s;
    sol.residual = fnorm;
    sol.iterations = it;
    return sol;
}

Vector3 lattice_spin(const Matrix3& l, const Vector3& r, const SlipRates& rates,
                     const SlipSystemSet& slips) {
    Matrix3 plastic = Matrix3::Zero();
    for (int a = 0; a < 12; ++a) plastic += rates(a) * slips.schmid[a];
    const Matrix3 rot = rotation_from_rodrigues(r);
    return axial(Matrix3(skew(l) - skew(Matrix3(rot * plastic * rot.transpose()))));
}

Vector3 node_velocity(const Matrix3& l, const Vector3& r, const SlipSystemSet& slips) {
    const TaylorSolution sol = solve_taylor(l, r, slips);
    return rodrigues_rate(r, lattice_spin(l, r, sol.rates, slips));
}

Eigen::Matrix3Xd reorientation_velocity(const FundamentalMesh& mesh, const VelocityGradient& l,
                                        const SlipSystemSet& slips) {
    Eigen::Matrix3Xd v(3, mesh.node_count());
    for (int n = 0; n < mesh.node_count(); ++n) {
        try {
            v.col(n) = node_velocity(l.l, mesh.nodes[n], slips);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(std::string(e.what()) + " at node " + std::to_string(n),
                                   e.residual(), n);
        }
    }
    return v;
}

}  // namespace texforge
