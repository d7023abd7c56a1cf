#pragma once

#include <optional>

#include "hfev/mesh.hpp"
#include "hfev/volume.hpp"

namespace hfev {

// Spherical region whose density is scaled by `multiplier` (0 = lytic void,
// 1 = no change).
struct LesionSpec {
    Vec3 center = Vec3::Zero(); // mm
    double radius = 0.0;        // mm
    double multiplier = 0.0;
};

// Vertebra-like synthetic body: an elliptic cylinder spanning z in [0, height]
// with a dense cortical shell (lateral wall and end caps) around a uniform
// trabecular core.
struct PhantomSpec {
    double radius_x = 12.0;          // mm
    double radius_y = 9.0;           // mm
    double height = 30.0;            // mm
    double shell_thickness = 1.0;    // mm
    double trabecular_density = 0.3; // g/cm^3
    double shell_density = 1.2;      // g/cm^3
    std::optional<LesionSpec> lesion;

    void validate() const;
};

struct Phantom {
    VoxelVolume density;
    VoxelVolume mask; // 1 inside the trabecular core, 0 elsewhere
    Tet10Mesh mesh;
};

// Deterministic density volume, trabecular mask, and a conforming Tet10 mesh
// of the body interior (cube columns split into six tets each). The mesh only
// keeps cubes whose footprint lies fully inside the outer ellipse so no
// element samples empty space.
Phantom generate_phantom(const PhantomSpec& spec, double voxel_size, double mesh_edge);

} // namespace hfev
