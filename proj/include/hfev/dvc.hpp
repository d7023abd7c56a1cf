#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hfev/error.hpp"
#include "hfev/mesh.hpp"
#include "hfev/volume.hpp"

namespace hfev {

// Regular grid of displacement vectors as produced by digital volume
// correlation. Points are laid out x-fastest. Non-correlated points carry a
// zero displacement and must be ignored by consumers; inside_bone marks
// points falling inside the vertebral body irrespective of correlation.
struct DvcGrid {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1.95, 1.95, 1.95};
    Vec3 origin{0, 0, 0};
    std::vector<Vec3> displacement;
    std::vector<char> correlated;
    std::vector<char> inside_bone;

    std::size_t point_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }
    Vec3 point(int i, int j, int k) const {
        return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
    }
    bool is_correlated(int i, int j, int k) const {
        return correlated[index(i, j, k)] != 0;
    }
    bool same_geometry(const DvcGrid& other) const {
        return dims == other.dims && spacing == other.spacing && origin == other.origin;
    }
    void validate() const;
};

// Strain tensors per grid cell, evaluated from the trilinear displacement
// interpolant at the cell center. A cell is defined only when all eight
// corners correlate. Tensor Voigt order [11 22 33 12 23 13] with true tensor
// shear components (not engineering doubles).
struct StrainGrid {
    std::array<int, 3> cell_dims{0, 0, 0};
    Vec3 spacing{1.95, 1.95, 1.95};
    Vec3 origin{0, 0, 0}; // grid point origin; cell centers sit half a step in
    std::vector<Eigen::Matrix<double, 6, 1>> tensor;
    std::vector<char> defined;
    // Largest absolute strain component anywhere in the cell, taken from
    // corner evaluations of the interpolant gradient (where it is extremal).
    std::vector<double> cell_peak;

    std::size_t cell_count() const {
        return static_cast<std::size_t>(cell_dims[0]) * cell_dims[1] * cell_dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * cell_dims[1] + j) * cell_dims[0] + i;
    }
    Vec3 cell_center(int i, int j, int k) const {
        return origin + Vec3((i + 0.5) * spacing.x(), (j + 0.5) * spacing.y(),
                             (k + 0.5) * spacing.z());
    }
};

// Displacement at p from the containing cell, or nullopt when p lies outside
// the grid or the cell has a non-correlated corner.
std::optional<Vec3> trilinear_displacement(const DvcGrid& grid, const Vec3& p);

// Throws errc::empty_strain when the grid has no fully correlated cell.
StrainGrid differentiate_strains(const DvcGrid& grid);

// Mean tensor of the defined cells adjacent to grid point (i, j, k);
// nullopt when no adjacent cell is defined.
std::optional<Eigen::Matrix<double, 6, 1>> point_strain(const StrainGrid& strains,
                                                        int i, int j, int k);

// Per grid point, the average of the absolute strain components of all
// adjacent defined cells; quiet NaN where no adjacent cell is defined.
std::vector<double> pointwise_strain_magnitude(const DvcGrid& grid);

// Apparent strain of two scans of the same unloaded object: the difference
// field a-b is differentiated and reduced per point as above. Grids must
// share origin, spacing and dims.
std::vector<double> zero_strain_uncertainty(const DvcGrid& grid_a, const DvcGrid& grid_b);

struct DvcSynthesisConfig {
    double noise_sigma = 0.0; // standard deviation per displacement component
    std::uint64_t seed = 0;
    // Points whose trilinearly sampled density falls below min_density are
    // marked non-correlated (texture-poor regions such as lytic lesions);
    // they stay inside_bone.
    const VoxelVolume* density = nullptr;
    double min_density = 0.0;
};

// Sample a nodal displacement field at every grid point. Points outside the
// mesh are neither inside_bone nor correlated. Noise draws are a fixed-order
// function of the seed alone, so a given seed reproduces the same grid byte
// for byte.
DvcGrid synthesize_dvc(const MeshIndex& mesh_index, const Eigen::MatrixXd& displacements,
                       const std::array<int, 3>& dims, const Vec3& spacing,
                       const Vec3& origin, const DvcSynthesisConfig& cfg = {});

} // namespace hfev
