#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hfev/mesh.hpp"
#include "hfev/volume.hpp"

namespace hfev {

/// Power-law density-elasticity relationship E = a * rho^b (MPa, g/cm^3).
/// Shipped defaults are the configured literature coefficients for vertebral
/// trabecular bone; they are configuration, not constants of this library.
struct ElasticityLaw {
    double coefficient = 4730.0; // MPa per (g/cm^3)^exponent
    double exponent = 1.56;
};

struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation{0.0, 0.0, 0.0};

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    void validate() const;
};

/// Per-element material state. Plasticity vectors are populated only when
/// has_plasticity is set.
struct MaterialField {
    std::vector<double> density;  // g/cm^3
    std::vector<double> modulus;  // MPa
    std::vector<double> poisson;
    bool has_plasticity = false;
    std::vector<double> yield_stress;      // MPa
    std::vector<double> hardening_modulus; // MPa (uniaxial tangent E_t)

    int element_count() const { return static_cast<int>(density.size()); }
    void validate() const;
};

/// Element-averaging quadrature: fixed Gauss rule of the given polynomial
/// order (1, 2 or 4 -> 1, 4 or 11 points), optionally applied on a red-refined
/// subdivision of the element (8^refine congruent sub-tets) for fields that
/// vary below the element scale.
struct DensityQuadrature {
    int order = 4;
    int refine = 0;
};

/// Volume-average of the density field over element e. Quadrature samples
/// outside the volume contribute zero; an element with every sample outside
/// raises zero_overlap. Result is clamped at 0.
double integrate_element_density(const VoxelVolume& density_volume, const Tet10Mesh& mesh,
                                 int element, const DensityQuadrature& quad = {});

double density_to_modulus(double rho_app, const ElasticityLaw& law, double e_min);

/// sigma_y = 21.70 * rho_app^1.52 (MPa). rho_app must be positive.
double yield_stress_from_density(double rho_app);

/// E_t = 0.05 * E (MPa), the uniaxial post-yield tangent.
double hardening_from_modulus(double modulus);

struct MaterialMapConfig {
    ElasticityLaw law;
    double poisson = 0.3;
    double modulus_floor = 0.01; // MPa; keeps zero-density elements nonsingular
    DensityQuadrature quadrature;
    bool average_modulus = false; // apply the law inside the average instead of after
    bool with_plasticity = false;
};

/// Direct route: integrate a calibrated density volume over each element and
/// apply the density-elasticity law.
MaterialField map_materials(const Tet10Mesh& mesh, const VoxelVolume& density_volume,
                            const MaterialMapConfig& cfg);

/// Clinical-CT route: evaluate the mapping with node coordinates moved by
/// `transform` into the clinical volume's frame, converting grey values with
/// `cal` first. The caller's mesh is left untouched (bit-identical geometry).
MaterialField remap_materials(const Tet10Mesh& mesh, const RigidTransform& transform,
                              const VoxelVolume& clinical_grey, const DensityCalibration& cal,
                              const MaterialMapConfig& cfg);

} // namespace hfev
