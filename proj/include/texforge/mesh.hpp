#pragma once

#include <texforge/orientation.hpp>
#include <texforge/stiffness.hpp>

#include <Eigen/Dense>

#include <array>
#include <map>
#include <string>
#include <vector>

namespace texforge {

/// Nodal ODF values over the independent nodes of a FundamentalMesh.
using Odf = Eigen::VectorXd;

/// Rows are independent nodes, columns the 21 entries of stiffness_entry().
using PropertyMatrix = Eigen::Matrix<double, Eigen::Dynamic, kStiffnessEntries>;

struct QuadraturePoint {
    Vector3 r;
    Eigen::Vector4d shape;  // linear shape-function values at r
    double weight;          // reference-element weight
};

/// Tetrahedral discretization of the cubic fundamental region in Rodrigues space,
/// approximated by the cube of half-width tan(pi/8).  Immutable once built.
struct FundamentalMesh {
    int subdivision = 0;
    std::vector<Vector3> nodes;
    std::vector<std::array<int, 4>> elements;
    std::vector<int> independent_ids;
    std::map<int, int> dependent_map;
    std::vector<std::array<QuadraturePoint, 4>> quad_points;
    std::vector<double> jacobians;
    Eigen::VectorXd node_weights;  // q, one entry per independent node
    std::string symmetry_tag = "FCC-cubic";

    // Derived data.
    std::vector<int> node_slot;               // node -> position in independent_ids
    Eigen::VectorXd raw_node_weights;         // lumped weight of every node before folding
    std::vector<Eigen::Matrix<double, 4, 3>> shape_gradients;  // rows: grad N_k per element
    std::vector<double> volumes;              // element volumes
    Eigen::VectorXd node_patch_volume;        // sum of adjacent element volumes per node
    std::vector<std::array<int, 2>> edges;    // unique element edges, (low, high) node ids
    std::vector<Vector3> edge_areas;          // median-dual face vector of each edge, low -> high
    std::vector<Vector3> boundary_areas;      // outward dual-cell area on the cube surface, per node

    int node_count() const { return static_cast<int>(nodes.size()); }
    int independent_count() const { return static_cast<int>(independent_ids.size()); }

    /// Nodal values on all nodes, dependent nodes copying their representative.
    Eigen::VectorXd expand(const Odf& a) const;

    /// Uniform normalized ODF, every entry 1 / sum(q).
    Odf uniform_odf() const;

    /// Element containing r (clamped to the cube) and the barycentric coordinates
    /// of r in it, for linear interpolation of nodal values.
    struct Location {
        std::array<int, 4> nodes;
        Eigen::Vector4d weights;
    };
    Location locate(const Vector3& r) const;

    /// Symmetry-equivalent orientation of r lying inside the cube (r itself if it
    /// already does).
    Vector3 fold_into_region(const Vector3& r) const;

    /// Rebuilds quadrature, Jacobians, weights and derived data from topology.
    static FundamentalMesh from_topology(int subdivision, std::vector<Vector3> nodes,
                                         std::vector<std::array<int, 4>> elements,
                                         std::vector<int> independent_ids,
                                         std::map<int, int> dependent_map);
};

/// Structured (s+1)^3 grid of the cube, Kuhn split into 6 tetrahedra per cell, with
/// nodes identified under the 24 cubic rotations.
FundamentalMesh build_mesh(int subdivision);

/// Lumped integration weight q of every independent node.
Eigen::VectorXd node_weights(const FundamentalMesh& mesh);

/// a / (q.a).  Throws InvalidArgument on negative or wrongly sized input and
/// DegenerateOdf when q.a <= 0.
Odf normalize_odf(const FundamentalMesh& mesh, const Odf& a);

/// P such that P^T a gives the 21 independent entries of the homogenized stiffness.
PropertyMatrix assemble_property_matrix(const FundamentalMesh& mesh, const StiffnessMatrix& c0);

/// Expands the 21-entry form back to a symmetric 6x6 matrix.
StiffnessMatrix stiffness_from_entries(const Eigen::Matrix<double, kStiffnessEntries, 1>& e);

}  // namespace texforge
