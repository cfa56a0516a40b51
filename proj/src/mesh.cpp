#include <texforge/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace texforge {

namespace {

// 4-point rule on the reference tetrahedron (volume 1/6), exact for degree 2.
constexpr double kQuadA = 0.5854101966249685;
constexpr double kQuadB = 0.1381966011250105;
constexpr double kQuadWeight = 1.0 / 24.0;

constexpr double kSymmetryTolerance = 1e-9;

int grid_index(int i, int j, int k, int s) { return i + (s + 1) * (j + (s + 1) * k); }

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

// Inside the truncated octahedral fundamental region |r1|+|r2|+|r3| <= 1.
bool in_truncated_region(const Vector3& r) { return r.lpNorm<1>() <= 1.0 + 1e-12; }

}  // namespace

Eigen::VectorXd FundamentalMesh::expand(const Odf& a) const {
    if (a.size() != independent_count())
        throw InvalidArgument("ODF length does not match the mesh's independent node count");
    Eigen::VectorXd full(node_count());
    for (int n = 0; n < node_count(); ++n) full(n) = a(node_slot[n]);
    return full;
}

Odf FundamentalMesh::uniform_odf() const {
    return Odf::Constant(independent_count(), 1.0 / node_weights.sum());
}

FundamentalMesh::Location FundamentalMesh::locate(const Vector3& r) const {
    const int s = subdivision;
    const double h = kFundamentalHalfWidth;
    const double spacing = 2.0 * h / s;
    std::array<int, 3> cell{};
    Vector3 t;
    for (int d = 0; d < 3; ++d) {
        const double x = std::clamp((r(d) + h) / spacing, 0.0, static_cast<double>(s));
        cell[d] = std::min(static_cast<int>(x), s - 1);
        t(d) = x - cell[d];
    }
    // The Kuhn tetrahedron holding t walks the axes in decreasing order of t.
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return t(a) > t(b); });
    Location loc;
    std::array<int, 3> c = cell;
    loc.nodes[0] = grid_index(c[0], c[1], c[2], s);
    for (int step = 0; step < 3; ++step) {
        ++c[order[step]];
        loc.nodes[step + 1] = grid_index(c[0], c[1], c[2], s);
    }
    loc.weights << 1.0 - t(order[0]), t(order[0]) - t(order[1]), t(order[1]) - t(order[2]),
        t(order[2]);
    return loc;
}

Vector3 FundamentalMesh::fold_into_region(const Vector3& r) const {
    const double h = kFundamentalHalfWidth;
    if (r.cwiseAbs().maxCoeff() <= h) return r;
    const Matrix3 rot = rotation_from_rodrigues(r);
    Vector3 best = r;
    double best_norm = r.cwiseAbs().maxCoeff();
    for (const Matrix3& op : cubic_symmetry_rotations()) {
        const auto image = rodrigues_from_rotation(Matrix3(rot * op));
        if (!image) continue;
        const double norm = image->cwiseAbs().maxCoeff();
        if (norm < best_norm) {
            best = *image;
            best_norm = norm;
        }
    }
    return best;
}

FundamentalMesh FundamentalMesh::from_topology(int subdivision, std::vector<Vector3> nodes,
                                               std::vector<std::array<int, 4>> elements,
                                               std::vector<int> independent_ids,
                                               std::map<int, int> dependent_map) {
    FundamentalMesh m;
    m.subdivision = subdivision;
    m.nodes = std::move(nodes);
    m.elements = std::move(elements);
    m.independent_ids = std::move(independent_ids);
    m.dependent_map = std::move(dependent_map);

    const int n_nodes = m.node_count();
    m.node_slot.assign(n_nodes, -1);
    for (int slot = 0; slot < m.independent_count(); ++slot) {
        const int id = m.independent_ids[slot];
        if (id < 0 || id >= n_nodes) throw InvalidArgument("independent id out of range");
        m.node_slot[id] = slot;
    }
    for (const auto& [dep, rep] : m.dependent_map) {
        if (dep < 0 || dep >= n_nodes || rep < 0 || rep >= n_nodes || m.node_slot[rep] < 0 ||
            m.node_slot[dep] >= 0)
            throw InvalidArgument("dependent_map must map dependent nodes onto independent nodes");
        m.node_slot[dep] = m.node_slot[rep];
    }
    if (std::find(m.node_slot.begin(), m.node_slot.end(), -1) != m.node_slot.end())
        throw InvalidArgument("node is neither independent nor dependent");

    const std::size_t n_elem = m.elements.size();
    m.quad_points.resize(n_elem);
    m.jacobians.resize(n_elem);
    m.shape_gradients.resize(n_elem);
    m.volumes.resize(n_elem);
    m.raw_node_weights = Eigen::VectorXd::Zero(n_nodes);
    m.node_patch_volume = Eigen::VectorXd::Zero(n_nodes);

    for (std::size_t e = 0; e < n_elem; ++e) {
        const auto& tet = m.elements[e];
        Matrix3 jac;
        for (int c = 0; c < 3; ++c) jac.col(c) = m.nodes[tet[c + 1]] - m.nodes[tet[0]];
        const double det = jac.determinant();
        if (!(det > 0)) throw InvalidArgument("element with non-positive Jacobian");
        m.jacobians[e] = det;
        m.volumes[e] = det / 6.0;

        const Matrix3 inv = jac.inverse();
        Eigen::Matrix<double, 4, 3> grads;
        grads.bottomRows<3>() = inv;
        grads.row(0) = -inv.colwise().sum();
        m.shape_gradients[e] = grads;

        for (int q = 0; q < 4; ++q) {
            Eigen::Vector4d bary = Eigen::Vector4d::Constant(kQuadB);
            bary(q) = kQuadA;
            Vector3 r = Vector3::Zero();
            for (int k = 0; k < 4; ++k) r += bary(k) * m.nodes[tet[k]];
            m.quad_points[e][q] = {r, bary, kQuadWeight};
            const double dv = kQuadWeight * det * metric_factor(r);
            for (int k = 0; k < 4; ++k) m.raw_node_weights(tet[k]) += bary(k) * dv;
        }
        for (int k = 0; k < 4; ++k) m.node_patch_volume(tet[k]) += m.volumes[e];
    }

    // Median-dual geometry: the face between nodes a and b inside element e is
    // V_e (grad N_b - grad N_a) / 4; the part of a's cell on the domain surface
    // sums to V_e grad N_a over the elements touching a.
    std::map<std::array<int, 2>, Vector3> edge_map;
    m.boundary_areas.assign(n_nodes, Vector3::Zero());
    for (std::size_t e = 0; e < n_elem; ++e) {
        const auto& tet = m.elements[e];
        const auto& grads = m.shape_gradients[e];
        for (int i = 0; i < 4; ++i) {
            m.boundary_areas[tet[i]] += m.volumes[e] * grads.row(i).transpose();
            for (int j = i + 1; j < 4; ++j) {
                int a = i, b = j;
                if (tet[a] > tet[b]) std::swap(a, b);
                const Vector3 area = m.volumes[e] * (grads.row(b) - grads.row(a)).transpose() / 4.0;
                auto [it, inserted] = edge_map.try_emplace({tet[a], tet[b]}, Vector3::Zero());
                it->second += area;
            }
        }
    }
    for (const auto& [edge, area] : edge_map) {
        m.edges.push_back(edge);
        m.edge_areas.push_back(area);
    }

    m.node_weights = Eigen::VectorXd::Zero(m.independent_count());
    for (int n = 0; n < n_nodes; ++n) m.node_weights(m.node_slot[n]) += m.raw_node_weights(n);
    return m;
}

FundamentalMesh build_mesh(int subdivision) {
    if (subdivision < 1) throw InvalidArgument("build_mesh: subdivision must be >= 1");
    const int s = subdivision;
    const double h = kFundamentalHalfWidth;
    const double spacing = 2.0 * h / s;

    std::vector<Vector3> nodes;
    nodes.reserve((s + 1) * (s + 1) * (s + 1));
    for (int k = 0; k <= s; ++k)
        for (int j = 0; j <= s; ++j)
            for (int i = 0; i <= s; ++i)
                nodes.emplace_back(-h + spacing * i, -h + spacing * j, -h + spacing * k);

    // Kuhn decomposition: one tetrahedron per axis ordering, all sharing the
    // cell's main diagonal, so neighbouring cells stay conforming.
    std::array<int, 3> axes{0, 1, 2};
    std::vector<std::array<int, 3>> orderings;
    do orderings.push_back(axes);
    while (std::next_permutation(axes.begin(), axes.end()));

    std::vector<std::array<int, 4>> elements;
    elements.reserve(6 * s * s * s);
    for (int k = 0; k < s; ++k)
        for (int j = 0; j < s; ++j)
            for (int i = 0; i < s; ++i)
                for (const auto& order : orderings) {
                    std::array<int, 3> c{i, j, k};
                    std::array<int, 4> tet{};
                    tet[0] = grid_index(c[0], c[1], c[2], s);
                    for (int step = 0; step < 3; ++step) {
                        ++c[order[step]];
                        tet[step + 1] = grid_index(c[0], c[1], c[2], s);
                    }
                    Matrix3 jac;
                    for (int col = 0; col < 3; ++col) jac.col(col) = nodes[tet[col + 1]] - nodes[tet[0]];
                    if (jac.determinant() < 0) std::swap(tet[2], tet[3]);
                    elements.push_back(tet);
                }

    // Identify nodes whose orientations coincide under R -> R S for a cubic S.
    const int n_nodes = static_cast<int>(nodes.size());
    DisjointSets classes(n_nodes);
    const auto& ops = cubic_symmetry_rotations();
    for (int n = 0; n < n_nodes; ++n) {
        const Matrix3 rot = rotation_from_rodrigues(nodes[n]);
        for (std::size_t op = 1; op < ops.size(); ++op) {
            const auto image = rodrigues_from_rotation(Matrix3(rot * ops[op]));
            if (!image) continue;
            std::array<int, 3> idx{};
            bool on_grid = true;
            for (int d = 0; d < 3 && on_grid; ++d) {
                const double t = ((*image)(d) + h) / spacing;
                idx[d] = static_cast<int>(std::lround(t));
                on_grid = idx[d] >= 0 && idx[d] <= s;
            }
            if (!on_grid) continue;
            const int m = grid_index(idx[0], idx[1], idx[2], s);
            if (m != n && (nodes[m] - *image).cwiseAbs().maxCoeff() < kSymmetryTolerance)
                classes.unite(n, m);
        }
    }

    // Representative: prefer nodes inside the truncated region, then lowest index.
    std::vector<int> representative(n_nodes, -1);
    for (int n = 0; n < n_nodes; ++n) {
        int& rep = representative[classes.find(n)];
        if (rep < 0 || (!in_truncated_region(nodes[rep]) && in_truncated_region(nodes[n]))) rep = n;
    }
    std::vector<int> independent_ids;
    std::map<int, int> dependent_map;
    for (int n = 0; n < n_nodes; ++n) {
        const int rep = representative[classes.find(n)];
        if (rep == n)
            independent_ids.push_back(n);
        else
            dependent_map.emplace(n, rep);
    }

    return FundamentalMesh::from_topology(s, std::move(nodes), std::move(elements),
                                          std::move(independent_ids), std::move(dependent_map));
}

Eigen::VectorXd node_weights(const FundamentalMesh& mesh) { return mesh.node_weights; }

Odf normalize_odf(const FundamentalMesh& mesh, const Odf& a) {
    if (a.size() != mesh.independent_count())
        throw InvalidArgument("normalize_odf: length does not match the mesh");
    if (!a.allFinite()) throw InvalidArgument("normalize_odf: non-finite ODF value");
    if ((a.array() < 0).any())
        throw InvalidArgument("normalize_odf: negative ODF value (clip before normalizing)");
    const double volume = mesh.node_weights.dot(a);
    if (!(volume > 0)) throw DegenerateOdf("normalize_odf: q.a <= 0");
    return a / volume;
}

PropertyMatrix assemble_property_matrix(const FundamentalMesh& mesh, const StiffnessMatrix& c0) {
    PropertyMatrix p = PropertyMatrix::Zero(mesh.independent_count(), kStiffnessEntries);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& tet = mesh.elements[e];
        for (const auto& qp : mesh.quad_points[e]) {
            const StiffnessMatrix c = rotate_stiffness(c0, rotation_from_rodrigues(qp.r));
            Eigen::Matrix<double, 1, kStiffnessEntries> entries;
            for (int k = 0; k < kStiffnessEntries; ++k) {
                const auto [i, j] = stiffness_entry(k);
                entries(k) = c(i, j);
            }
            const double dv = qp.weight * mesh.jacobians[e] * metric_factor(qp.r);
            for (int k = 0; k < 4; ++k)
                p.row(mesh.node_slot[tet[k]]) += (qp.shape(k) * dv) * entries;
        }
    }
    return p;
}

StiffnessMatrix stiffness_from_entries(const Eigen::Matrix<double, kStiffnessEntries, 1>& e) {
    StiffnessMatrix c;
    for (int k = 0; k < kStiffnessEntries; ++k) {
        const auto [i, j] = stiffness_entry(k);
        c(i, j) = c(j, i) = e(k);
    }
    return c;
}

}  // namespace texforge
