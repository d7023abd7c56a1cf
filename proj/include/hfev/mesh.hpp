#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hfev/error.hpp"
#include "hfev/volume.hpp"

namespace hfev {

/// Barycentric coordinates inside a tetrahedron; components sum to 1.
struct NaturalCoords {
    std::array<double, 4> xi{0.25, 0.25, 0.25, 0.25};
};

/// Mid-edge slots 4..9 pair the vertex slots in this order:
/// (0,1) (1,2) (0,2) (0,3) (1,3) (2,3).
inline constexpr std::array<std::array<int, 2>, 6> kTet10Edges = {
    {{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 3}, {2, 3}}};

/// 10-node quadratic tetrahedral mesh with straight edges: mid-edge nodes sit
/// at edge midpoints, so the geometric map is affine per element and only the
/// interpolation is quadratic.
struct Tet10Mesh {
    std::vector<Vec3> nodes;                  // node id = index
    std::vector<std::array<int, 10>> elements; // 4 vertices + 6 mid-edge nodes
    Vec3 axial_direction{0.0, 0.0, 1.0};      // unit, craniocaudal by default

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }

    /// Signed volume of the vertex tetrahedron of element e.
    double element_volume(int e) const;
    Vec3 element_centroid(int e) const;

    /// Jacobian of the affine map: columns v1-v0, v2-v0, v3-v0.
    Eigen::Matrix3d element_jacobian(int e) const;

    /// Barycentric coordinates of p with respect to element e's vertex tet.
    NaturalCoords barycentric(int e, const Vec3& p) const;

    /// Positive volumes, mid-edge placement, node id ranges, unit axial direction.
    void validate() const;
};

/// Quadratic shape values at nc: vertex i -> xi_i(2 xi_i - 1),
/// mid-edge(i,j) -> 4 xi_i xi_j. Weights sum to 1 for any valid nc.
std::array<double, 10> shape_tet10(const NaturalCoords& nc);

/// Physical gradients of the 10 shape functions at nc inside element e.
std::array<Vec3, 10> shape_gradients_tet10(const Tet10Mesh& mesh, int e, const NaturalCoords& nc);

struct PointLocation {
    int element = -1;
    NaturalCoords nc;
};

/// Uniform-grid spatial index over element bounding boxes. Lookup returns the
/// same element exhaustive scan would: the lowest-id element containing the
/// point at tolerance -1e-9 on barycentric coordinates.
class MeshIndex {
public:
    explicit MeshIndex(const Tet10Mesh& mesh);

    std::optional<PointLocation> locate(const Vec3& p) const;

    /// Exhaustive reference scan; used by tests and as the fallback oracle.
    std::optional<PointLocation> locate_brute_force(const Vec3& p) const;

    const Tet10Mesh& mesh() const { return *mesh_; }

    static constexpr double kInsideTol = -1e-9;

private:
    const Tet10Mesh* mesh_;
    Vec3 cell_size_{1, 1, 1};
    Vec3 grid_origin_{0, 0, 0};
    std::array<int, 3> grid_dims_{1, 1, 1};
    std::vector<std::vector<int>> cells_; // sorted element ids per cell

    std::optional<std::size_t> cell_of(const Vec3& p) const;
};

/// Quadratic interpolation of a per-node field at p. Returns nullopt when p
/// is outside the mesh. Field must provide one row per node.
std::optional<Eigen::VectorXd> interpolate_nodal_field(const MeshIndex& index,
                                                       const Eigen::MatrixXd& field,
                                                       const Vec3& p);

/// True per point iff its coordinate along the mesh axial direction lies in
/// the central `fraction` of the mesh axial extent (boundary inclusive).
std::vector<bool> central_region_filter(const Tet10Mesh& mesh, std::span<const Vec3> points,
                                        double fraction = 0.75);

} // namespace hfev
