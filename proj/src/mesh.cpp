#include "hfev/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hfev {

double Tet10Mesh::element_volume(int e) const {
    const auto& el = elements[e];
    const Vec3& v0 = nodes[el[0]];
    const Eigen::Matrix3d j = (Eigen::Matrix3d() << nodes[el[1]] - v0, nodes[el[2]] - v0,
                               nodes[el[3]] - v0)
                                  .finished();
    return j.determinant() / 6.0;
}

Vec3 Tet10Mesh::element_centroid(int e) const {
    const auto& el = elements[e];
    return (nodes[el[0]] + nodes[el[1]] + nodes[el[2]] + nodes[el[3]]) / 4.0;
}

Eigen::Matrix3d Tet10Mesh::element_jacobian(int e) const {
    const auto& el = elements[e];
    const Vec3& v0 = nodes[el[0]];
    Eigen::Matrix3d j;
    j.col(0) = nodes[el[1]] - v0;
    j.col(1) = nodes[el[2]] - v0;
    j.col(2) = nodes[el[3]] - v0;
    return j;
}

NaturalCoords Tet10Mesh::barycentric(int e, const Vec3& p) const {
    const auto& el = elements[e];
    const Vec3 rhs = p - nodes[el[0]];
    const Vec3 loc = element_jacobian(e).partialPivLu().solve(rhs);
    NaturalCoords nc;
    nc.xi = {1.0 - loc.sum(), loc[0], loc[1], loc[2]};
    return nc;
}

void Tet10Mesh::validate() const {
    const int nn = node_count();
    if (std::abs(axial_direction.norm() - 1.0) > 1e-9)
        throw Error(errc::geometry, "axial_direction must be a unit vector");
    for (int e = 0; e < element_count(); ++e) {
        const auto& el = elements[e];
        for (int n : el)
            if (n < 0 || n >= nn)
                throw Error(errc::geometry,
                            "element " + std::to_string(e) + " references missing node");
        if (element_volume(e) <= 0.0)
            throw Error(errc::geometry,
                        "element " + std::to_string(e) + " has non-positive volume");
        for (int s = 0; s < 6; ++s) {
            const Vec3& a = nodes[el[kTet10Edges[s][0]]];
            const Vec3& b = nodes[el[kTet10Edges[s][1]]];
            const Vec3 mid = 0.5 * (a + b);
            const double edge_len = (b - a).norm();
            if ((nodes[el[4 + s]] - mid).norm() > 1e-6 * edge_len)
                throw Error(errc::geometry, "element " + std::to_string(e) +
                                                " mid-edge node off edge midpoint");
        }
    }
}

std::array<double, 10> shape_tet10(const NaturalCoords& nc) {
    const auto& x = nc.xi;
    std::array<double, 10> n;
    for (int i = 0; i < 4; ++i) n[i] = x[i] * (2.0 * x[i] - 1.0);
    for (int s = 0; s < 6; ++s) n[4 + s] = 4.0 * x[kTet10Edges[s][0]] * x[kTet10Edges[s][1]];
    return n;
}

std::array<Vec3, 10> shape_gradients_tet10(const Tet10Mesh& mesh, int e,
                                           const NaturalCoords& nc) {
    // Barycentric gradients: grad xi_0 follows from xi_0 = 1 - xi_1 - xi_2 - xi_3.
    const Eigen::Matrix3d jinv_t = mesh.element_jacobian(e).inverse().transpose();
    std::array<Vec3, 4> g;
    g[1] = jinv_t.col(0);
    g[2] = jinv_t.col(1);
    g[3] = jinv_t.col(2);
    g[0] = -(g[1] + g[2] + g[3]);

    const auto& x = nc.xi;
    std::array<Vec3, 10> out;
    for (int i = 0; i < 4; ++i) out[i] = (4.0 * x[i] - 1.0) * g[i];
    for (int s = 0; s < 6; ++s) {
        const int a = kTet10Edges[s][0], b = kTet10Edges[s][1];
        out[4 + s] = 4.0 * (x[a] * g[b] + x[b] * g[a]);
    }
    return out;
}

namespace {

bool inside_tol(const NaturalCoords& nc) {
    for (double x : nc.xi)
        if (x < MeshIndex::kInsideTol) return false;
    return true;
}

double mean_edge_length(const Tet10Mesh& mesh) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& el : mesh.elements) {
        for (const auto& edge : kTet10Edges) {
            total += (mesh.nodes[el[edge[1]]] - mesh.nodes[el[edge[0]]]).norm();
            ++count;
        }
    }
    return count ? total / count : 1.0;
}

} // namespace

MeshIndex::MeshIndex(const Tet10Mesh& mesh) : mesh_(&mesh) {
    if (mesh.element_count() == 0) {
        cells_.resize(1);
        return;
    }
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const Vec3& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double cell = std::max(2.0 * mean_edge_length(mesh), 1e-12);
    cell_size_ = Vec3::Constant(cell);
    grid_origin_ = lo;
    for (int a = 0; a < 3; ++a) {
        grid_dims_[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / cell)));
    }
    cells_.resize(static_cast<std::size_t>(grid_dims_[0]) * grid_dims_[1] * grid_dims_[2]);

    for (int e = 0; e < mesh.element_count(); ++e) {
        Vec3 elo = Vec3::Constant(std::numeric_limits<double>::max());
        Vec3 ehi = Vec3::Constant(std::numeric_limits<double>::lowest());
        for (int v = 0; v < 4; ++v) {
            const Vec3& p = mesh.nodes[mesh.elements[e][v]];
            elo = elo.cwiseMin(p);
            ehi = ehi.cwiseMax(p);
        }
        std::array<int, 3> c0, c1;
        for (int a = 0; a < 3; ++a) {
            c0[a] = std::clamp(static_cast<int>(std::floor((elo[a] - grid_origin_[a]) / cell)), 0,
                               grid_dims_[a] - 1);
            c1[a] = std::clamp(static_cast<int>(std::floor((ehi[a] - grid_origin_[a]) / cell)), 0,
                               grid_dims_[a] - 1);
        }
        for (int k = c0[2]; k <= c1[2]; ++k)
            for (int j = c0[1]; j <= c1[1]; ++j)
                for (int i = c0[0]; i <= c1[0]; ++i)
                    cells_[static_cast<std::size_t>(i) +
                           static_cast<std::size_t>(grid_dims_[0]) *
                               (j + static_cast<std::size_t>(grid_dims_[1]) * k)]
                        .push_back(e);
    }
    // ids are pushed in increasing order already; keep the invariant explicit
    for (auto& c : cells_) std::sort(c.begin(), c.end());
}

std::optional<std::size_t> MeshIndex::cell_of(const Vec3& p) const {
    std::array<int, 3> c;
    for (int a = 0; a < 3; ++a) {
        c[a] = static_cast<int>(std::floor((p[a] - grid_origin_[a]) / cell_size_[a]));
        if (c[a] < 0 || c[a] >= grid_dims_[a]) return std::nullopt;
    }
    return static_cast<std::size_t>(c[0]) +
           static_cast<std::size_t>(grid_dims_[0]) *
               (c[1] + static_cast<std::size_t>(grid_dims_[1]) * c[2]);
}

std::optional<PointLocation> MeshIndex::locate(const Vec3& p) const {
    const auto cell = cell_of(p);
    if (!cell) return std::nullopt;
    for (int e : cells_[*cell]) {
        const NaturalCoords nc = mesh_->barycentric(e, p);
        if (inside_tol(nc)) return PointLocation{e, nc};
    }
    return std::nullopt;
}

std::optional<PointLocation> MeshIndex::locate_brute_force(const Vec3& p) const {
    for (int e = 0; e < mesh_->element_count(); ++e) {
        const NaturalCoords nc = mesh_->barycentric(e, p);
        if (inside_tol(nc)) return PointLocation{e, nc};
    }
    return std::nullopt;
}

std::optional<Eigen::VectorXd> interpolate_nodal_field(const MeshIndex& index,
                                                       const Eigen::MatrixXd& field,
                                                       const Vec3& p) {
    const auto loc = index.locate(p);
    if (!loc) return std::nullopt;
    const auto weights = shape_tet10(loc->nc);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(field.cols());
    const auto& el = index.mesh().elements[loc->element];
    for (int a = 0; a < 10; ++a) out += weights[a] * field.row(el[a]).transpose();
    return out;
}

std::vector<bool> central_region_filter(const Tet10Mesh& mesh, std::span<const Vec3> points,
                                        double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw Error(errc::contract, "central region fraction must be in (0, 1]");
    if (points.empty()) return {};
    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::lowest();
    for (const Vec3& p : mesh.nodes) {
        const double s = p.dot(mesh.axial_direction);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    const double trim = 0.5 * (1.0 - fraction) * (hi - lo);
    const double band_lo = lo + trim, band_hi = hi - trim;
    std::vector<bool> keep(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double s = points[i].dot(mesh.axial_direction);
        keep[i] = s >= band_lo && s <= band_hi;
    }
    return keep;
}

} // namespace hfev
