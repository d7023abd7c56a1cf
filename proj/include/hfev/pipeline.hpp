#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hfev/dvc.hpp"
#include "hfev/io.hpp"
#include "hfev/materials.hpp"
#include "hfev/phantom.hpp"
#include "hfev/solver.hpp"
#include "hfev/validate.hpp"

namespace hfev {

// Synthetic experiment: axial platen compression of the phantom (top plane
// pushed down by applied_displacement, bottom plane held, two bottom pins
// against the in-plane rigid modes).
struct ExperimentSpec {
    double applied_displacement = 0.16; // mm
    double noise_sigma = 0.0;           // mm, DVC displacement noise
    double uncertainty_sigma = 0.0;     // mm, noise of the two unloaded scans
    double min_density = 0.0;           // g/cm^3, correlate rule (0 disables)
};

struct PipelineConfig {
    std::filesystem::path out_dir = "out";

    // File-driven inputs; ignored in synthetic mode except mask/transform.
    std::filesystem::path volume_path;
    std::filesystem::path mask_path;
    std::filesystem::path mesh_path;
    std::filesystem::path grid_path;
    std::filesystem::path calibration_path;
    std::filesystem::path uncertainty_grid_a;
    std::filesystem::path uncertainty_grid_b;

    bool synthetic = false;
    PhantomSpec phantom;
    double voxel_size = 0.39; // mm, also the reliability threshold
    double mesh_edge = 1.5;   // mm
    ExperimentSpec experiment;

    DensityCalibration calibration; // used when calibration_path is empty
    MaterialMapConfig materials;
    SolverOptions solver;
    Vec3 grid_spacing{1.95, 1.95, 1.95}; // synthetic DVC grid step
    double central_fraction = 0.75;
    int bc_min_points = 4;
    ExclusionThresholds exclusion;
    std::uint64_t seed = 0;
};

PipelineConfig load_pipeline_config(const io::ConfigFile& file);

struct DirectionReport {
    bool computed = false;
    RegressionMetrics metrics;
    double median_abs = 0.0;
    bool reliable = false;
};

struct ValidationReport {
    DensityCalibration calibration;
    double calibration_residual = 0.0;
    int elements = 0;
    std::pair<int, int> bc_slices{-1, -1};
    int up_nodes = 0;
    int down_nodes = 0;
    double reaction_down = 0.0; // N, axial sum over the lower node set
    double reaction_up = 0.0;
    SolveDiagnostics solve;
    std::size_t dvc_points = 0;
    std::size_t dvc_correlated = 0;
    std::size_t dvc_inside = 0;
    std::size_t comparison_points = 0;
    std::array<DirectionReport, 3> directions; // central-region FE vs DVC
    DirectionReport pooled;
    std::array<DirectionReport, 3> trabecular; // computed only with a mask
    ExclusionReport exclusion;
    bool has_uncertainty = false;
    double quick_error_max = 0.0;
    double strain_error_max = 0.0;
    double residual_error_max = 0.0;
    std::filesystem::path report_path;
    std::vector<std::string> artifacts; // file names relative to out_dir
};

// calibrate -> map materials -> extract BCs -> solve -> compare ->
// exclusion check -> error propagation. Writes every artifact plus
// report.json under cfg.out_dir; any stage failure surfaces as errc::stage
// naming the stage, and no report file is written.
ValidationReport run_pipeline(const PipelineConfig& cfg);

struct ModelComparison {
    std::array<RegressionMetrics, 3> directions; // b regressed on a per axis
    RegressionMetrics pooled;
    double reaction_a = 0.0;
    double reaction_b = 0.0;
    double reaction_delta = 0.0; // |a - b| / |a|
};

// Agreement between two solutions on the same mesh (e.g. uCT-based versus
// clinical-CT-based material maps). Reactions are summed along `axis` over
// `reaction_nodes`, which must be constrained in both solutions.
ModelComparison compare_models(const Tet10Mesh& mesh, const Solution& a, const Solution& b,
                               const std::vector<int>& reaction_nodes, int axis = 2);

} // namespace hfev
