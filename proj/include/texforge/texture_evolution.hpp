#pragma once

#include <texforge/crystal_plasticity.hpp>
#include <texforge/mesh.hpp>
#include <texforge/stiffness.hpp>

#include <Eigen/Dense>

#include <vector>

namespace texforge {

struct ProcessStepConfig {
    double dt_total = 0.1;  // seconds per process step
    int substeps = 10;
    bool clip_negative = true;

    void validate() const;
};

struct EvolveStats {
    /// Largest |q.a - 1| seen before any renormalization, over all substeps.
    double max_drift = 0;
};

/// Explicit-Euler integration of dA/dt = -grad A . v - A div v over one step, with a
/// fixed nodal velocity field (columns follow mesh.nodes).  Divergence is taken with
/// respect to the invariant measure, so the update is written as d(gA)/dt +
/// div(g A v) = 0 on the median-dual cells of the mesh with upwind fluxes; mass
/// leaving the cube re-enters at the symmetry-equivalent orientation.  Negatives are
/// clipped and the ODF renormalized after every substep.
Odf advect(const FundamentalMesh& mesh, const Odf& a, const Eigen::Matrix3Xd& velocity,
           const ProcessStepConfig& cfg, EvolveStats* stats = nullptr);

Odf evolve(const FundamentalMesh& mesh, const Odf& a, const VelocityGradient& l,
           const ProcessStepConfig& cfg, const SlipSystemSet& slips, EvolveStats* stats = nullptr);

/// One process step at unit strain rate.
Odf apply_process(const FundamentalMesh& mesh, const Odf& a, ProcessMode mode,
                  const ProcessStepConfig& cfg, const SlipSystemSet& slips,
                  EvolveStats* stats = nullptr);

struct Trajectory {
    std::vector<ProcessMode> modes;
    std::vector<Odf> odfs;          // modes.size() + 1 entries
    std::vector<double> objectives;  // objective(homogenize(odf)) per entry, GPa
};

Trajectory simulate_path(const FundamentalMesh& mesh, const Odf& a0,
                         const std::vector<ProcessMode>& modes, const ProcessStepConfig& cfg,
                         const SlipSystemSet& slips, const StiffnessMatrix& c0,
                         const ObjectiveWeights& w);

}  // namespace texforge
