#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hfev/error.hpp"

namespace hfev {

using Vec3 = Eigen::Vector3d;

enum class VolumeKind { grey, density, mask };

/// Regular 3-D scalar image. Values are stored as 32-bit floats regardless of
/// the on-disk type; world position of voxel (i,j,k) center is
/// origin + (i,j,k) * spacing. Immutable after construction by convention.
struct VoxelVolume {
    std::array<int, 3> dims{0, 0, 0}; // nx, ny, nz
    Vec3 spacing{1.0, 1.0, 1.0};      // mm per voxel
    Vec3 origin{0.0, 0.0, 0.0};       // mm, center of voxel (0,0,0)
    VolumeKind kind = VolumeKind::grey;
    std::vector<float> values;        // x fastest, then y, then z

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    float at(int i, int j, int k) const { return values[index(i, j, k)]; }
    float& at(int i, int j, int k) { return values[index(i, j, k)]; }

    Vec3 voxel_center(int i, int j, int k) const {
        return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
    }

    /// True when p lies inside the hull of voxel centers (the trilinear
    /// sampling domain; a half-voxel smaller than the physical extent).
    bool in_sample_domain(const Vec3& p) const;

    /// Throws on violated invariants (dims, spacing, value count, mask range).
    void validate() const;
};

/// Affine grey-to-density law with an optional affine correction applied
/// after the base fit: rho = correction_scale * (slope*gv + intercept) + correction_offset.
struct DensityCalibration {
    double slope = 1.0;
    double intercept = 0.0;
    double correction_scale = 1.0;
    double correction_offset = 0.0;

    double apply(double grey) const {
        return correction_scale * (slope * grey + intercept) + correction_offset;
    }
};

struct CalibrationFit {
    DensityCalibration cal;
    double rms_residual = 0.0;
};

/// Least-squares affine fit of density against grey value from phantom
/// samples (grey, density). Needs >= 2 samples with distinct grey values.
CalibrationFit fit_calibration(std::span<const std::pair<double, double>> samples);

/// Per-voxel application of the calibration law; negative results are clamped
/// to zero. Input must be a grey volume; output kind is density.
VoxelVolume grey_to_density(const VoxelVolume& volume, const DensityCalibration& cal);

/// Trilinear interpolation of the 8 surrounding voxel centers. Throws
/// out_of_bounds when p lies outside the sampling domain.
double sample_trilinear(const VoxelVolume& volume, const Vec3& p);

/// Same as sample_trilinear but returns nullopt outside the domain.
std::optional<double> try_sample_trilinear(const VoxelVolume& volume, const Vec3& p);

/// Nearest-voxel lookup, nullopt outside the physical voxel extent.
std::optional<double> sample_nearest(const VoxelVolume& volume, const Vec3& p);

} // namespace hfev
