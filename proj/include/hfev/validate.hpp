#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hfev/dvc.hpp"
#include "hfev/error.hpp"
#include "hfev/mesh.hpp"
#include "hfev/solver.hpp"

namespace hfev {

// One DVC/FE displacement pair for a single direction at a grid point.
struct PairSample {
    Vec3 point;
    double dvc = 0.0;
    double fe = 0.0;
};

// Per-direction sample sets, indexed x=0, y=1, z=2.
struct ComparisonSet {
    std::array<std::vector<PairSample>, 3> directions;
};

struct RegressionMetrics {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double rmse = 0.0;         // root mean square of (fe - dvc)
    double rmse_percent = 0.0; // rmse / max |dvc|, in percent
    double max_error = 0.0;    // max |fe - dvc|
    int n = 0;
};

// Ordinary least squares of FE on DVC. Throws errc::insufficient_data for
// fewer than three pairs and errc::degenerate_regression when the DVC values
// carry no variance.
RegressionMetrics regression_metrics(const std::vector<PairSample>& samples);

// Extreme axial slices carrying at least min_points correlated inside-bone
// points: (upper = most cranial, lower = most caudal). Fewer than two
// qualifying slices raise errc::insufficient_coverage.
std::pair<int, int> extract_bc_slices(const DvcGrid& grid, int min_points = 4);

struct DvcBoundaryConditions {
    DirichletSet dirichlet;
    std::vector<int> up_nodes;   // nodes at or above the upper slice plane
    std::vector<int> down_nodes; // nodes at or below the lower slice plane
    double upper_plane = 0.0;
    double lower_plane = 0.0;
};

// Every mesh node beyond a slice plane receives all three displacement
// components of the in-plane slice field at its (x, y): bilinear when the
// containing cell fully correlates, otherwise an affine fit over nearby
// correlated points. Nodes out of reach raise errc::insufficient_coverage
// listing the node ids.
DvcBoundaryConditions build_dirichlet_from_dvc(const Tet10Mesh& mesh, const DvcGrid& grid,
                                               std::pair<int, int> slices);

// FE displacements interpolated at every correlated grid point inside the
// mesh. The optional keep mask (one flag per grid point) restricts the
// samples, e.g. to the central region. Zero qualifying points raise
// errc::empty_comparison.
ComparisonSet fe_at_dvc_points(const MeshIndex& mesh_index,
                               const Eigen::MatrixXd& displacements, const DvcGrid& grid,
                               const std::vector<bool>* keep = nullptr);

// Keep the points whose nearest mask voxel equals 1. Points outside the
// mask volume are dropped.
std::vector<bool> subset_trabecular(std::span<const Vec3> points, const VoxelVolume& mask);
std::vector<PairSample> subset_trabecular(const std::vector<PairSample>& samples,
                                          const VoxelVolume& mask);

struct DirectionReliability {
    std::array<double, 3> median_abs{0.0, 0.0, 0.0};
    std::array<bool, 3> reliable{false, false, false};
};

// A direction is unreliable when the median |displacement| over correlated
// points falls strictly below the parent image voxel size.
DirectionReliability direction_reliability(const DvcGrid& grid, double voxel_size);

struct ExclusionCriterion {
    std::string name;
    bool evaluated = false;
    bool exceeded = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct ExclusionThresholds {
    double strain_warn = 0.008;
    double strain_limit = 0.01;
    double strain_fraction = 0.25;
    double min_correlated_fraction = 0.5;
    double reliability_r2 = 0.5;
};

struct ExclusionReport {
    std::array<ExclusionCriterion, 3> criteria;
    bool excluded = false;
};

// The three exclusion tests: principal-strain plausibility of the measured
// grid, correlated coverage of the bone interior, and per-direction
// error-vs-uncertainty correlation. uncertainty holds one value per grid
// point and may be null, which reports criterion three as not evaluated.
ExclusionReport exclusion_check(const ComparisonSet& comparison, const StrainGrid& strains,
                                const DvcGrid& grid, const std::vector<double>* uncertainty,
                                const ExclusionThresholds& thresholds = {});

struct ErrorPropagation {
    // |error| / finest grid spacing per point; NaN at non-correlated points.
    std::vector<double> quick;
    // differentiate_strains of the error field.
    StrainGrid strain;
    // Per-point average absolute strain component over adjacent defined cells.
    std::vector<double> point_scalar;
    // point_scalar reduced by the zero-strain uncertainty, clamped at zero;
    // all NaN when no uncertainty was supplied.
    std::vector<double> residual;
};

// error holds the FE-DVC displacement difference per grid point; values at
// non-correlated points are ignored.
ErrorPropagation propagate_displacement_error(const DvcGrid& grid,
                                              const std::vector<Vec3>& error,
                                              const std::vector<double>* uncertainty = nullptr);

} // namespace hfev
