#include <texforge/texture_evolution.hpp>

#include <texforge/homogenization.hpp>

#include <cmath>
#include <string>

namespace texforge {

void ProcessStepConfig::validate() const {
    if (!(dt_total > 0) || !std::isfinite(dt_total))
        throw InvalidArgument("process step duration must be positive");
    if (substeps < 1) throw InvalidArgument("process step needs at least one substep");
}

Odf advect(const FundamentalMesh& mesh, const Odf& a, const Eigen::Matrix3Xd& velocity,
           const ProcessStepConfig& cfg, EvolveStats* stats) {
    cfg.validate();
    const int n_nodes = mesh.node_count();
    if (velocity.cols() != n_nodes) throw InvalidArgument("advect: velocity field size mismatch");
    if (a.size() != mesh.independent_count())
        throw InvalidArgument("advect: ODF length does not match the mesh");

    // Conservative form d(gA)/dt + div(g A v) = 0 on the median-dual cells, with
    // upwinded edge fluxes.  Cell masses are the lumped weights q, so q.A changes
    // only through clipping.
    Eigen::Matrix3Xd flow(3, n_nodes);
    for (int n = 0; n < n_nodes; ++n) flow.col(n) = metric_factor(mesh.nodes[n]) * velocity.col(n);

    const std::size_t n_edges = mesh.edges.size();
    Eigen::VectorXd edge_flux(n_edges);
    for (std::size_t k = 0; k < n_edges; ++k) {
        const auto [lo, hi] = mesh.edges[k];
        edge_flux(k) = 0.5 * (flow.col(lo) + flow.col(hi)).dot(mesh.edge_areas[k]);
    }

    // Mass leaving the cube re-enters at the symmetry-equivalent orientation.
    struct Outflow {
        int node;
        double rate;
        FundamentalMesh::Location target;
    };
    std::vector<Outflow> outflows;
    const double nudge = 1e-6 * 2.0 * kFundamentalHalfWidth / mesh.subdivision;
    for (int n = 0; n < n_nodes; ++n) {
        const double rate = flow.col(n).dot(mesh.boundary_areas[n]);
        if (rate <= 0) continue;
        const Vector3 exit =
            mesh.nodes[n] + nudge * mesh.boundary_areas[n].normalized();
        outflows.push_back({n, rate, mesh.locate(mesh.fold_into_region(exit))});
    }

    const double dt = cfg.dt_total / cfg.substeps;
    Odf current = a;
    Eigen::VectorXd mass_change(n_nodes);
    for (int step = 0; step < cfg.substeps; ++step) {
        const Eigen::VectorXd full = mesh.expand(current);
        mass_change.setZero();
        for (std::size_t k = 0; k < n_edges; ++k) {
            const auto [lo, hi] = mesh.edges[k];
            const double f = edge_flux(k) * (edge_flux(k) > 0 ? full(lo) : full(hi));
            mass_change(lo) -= f;
            mass_change(hi) += f;
        }
        for (const auto& out : outflows) {
            const double f = out.rate * full(out.node);
            mass_change(out.node) -= f;
            for (int k = 0; k < 4; ++k) mass_change(out.target.nodes[k]) += out.target.weights(k) * f;
        }

        Eigen::VectorXd folded = Eigen::VectorXd::Zero(mesh.independent_count());
        for (int n = 0; n < n_nodes; ++n) folded(mesh.node_slot[n]) += mass_change(n);
        current += dt * folded.cwiseQuotient(mesh.node_weights);

        if (!current.allFinite())
            throw NumericalBlowup("texture evolution produced non-finite values at substep " +
                                      std::to_string(step),
                                  step);
        if (cfg.clip_negative) current = current.cwiseMax(0.0);
        if (stats) {
            const double drift = std::abs(mesh.node_weights.dot(current) - 1.0);
            if (drift > stats->max_drift) stats->max_drift = drift;
        }
        current = normalize_odf(mesh, current);
    }
    return current;
}

Odf evolve(const FundamentalMesh& mesh, const Odf& a, const VelocityGradient& l,
           const ProcessStepConfig& cfg, const SlipSystemSet& slips, EvolveStats* stats) {
    return advect(mesh, a, reorientation_velocity(mesh, l, slips), cfg, stats);
}

Odf apply_process(const FundamentalMesh& mesh, const Odf& a, ProcessMode mode,
                  const ProcessStepConfig& cfg, const SlipSystemSet& slips, EvolveStats* stats) {
    return evolve(mesh, a, build_velocity_gradient(mode, 1.0), cfg, slips, stats);
}

Trajectory simulate_path(const FundamentalMesh& mesh, const Odf& a0,
                         const std::vector<ProcessMode>& modes, const ProcessStepConfig& cfg,
                         const SlipSystemSet& slips, const StiffnessMatrix& c0,
                         const ObjectiveWeights& w) {
    Trajectory t;
    t.odfs.push_back(a0);
    t.objectives.push_back(objective(homogenize(mesh, c0, a0), w));
    for (std::size_t i = 0; i < modes.size(); ++i) {
        try {
            t.odfs.push_back(apply_process(mesh, t.odfs.back(), modes[i], cfg, slips));
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(std::string(e.what()) + " (path step " + std::to_string(i) + ")",
                                   e.residual(), e.node());
        } catch (const NumericalBlowup& e) {
            throw NumericalBlowup(std::string(e.what()) + " (path step " + std::to_string(i) + ")",
                                  e.substep());
        }
        t.modes.push_back(modes[i]);
        t.objectives.push_back(objective(homogenize(mesh, c0, t.odfs.back()), w));
    }
    return t;
}

}  // namespace texforge
