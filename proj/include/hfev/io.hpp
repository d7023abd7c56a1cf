#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hfev/dvc.hpp"
#include "hfev/materials.hpp"
#include "hfev/mesh.hpp"
#include "hfev/solver.hpp"
#include "hfev/volume.hpp"

// File formats are all text except the voxel payload:
//  - volume: raw little-endian float32 (x fastest) + "<path>.meta" sidecar
//    (key=value: dims, spacing_mm, origin_mm, dtype, kind)
//  - calibration: key=value (slope, intercept, correction_scale, correction_offset)
//  - mesh: "nodes N" / "id x y z" lines, "elements M" / "id n1..n10" lines,
//    optional "attribute <name>" blocks of "id value" lines
//  - transform: 12 whitespace-separated numbers, row-major 3x4 [R | t]
//  - materials: CSV element_id,density,E,nu,sigma_y,Ep (zeros when elastic)
//  - DVC grid: CSV i,j,k,x_mm,y_mm,z_mm,ux,uy,uz,correlate,inside_bone plus
//    "<path>.meta" sidecar (dims, spacing, origin, units mm|um; units scale
//    the displacement columns on read, storage is always mm internally)
namespace hfev::io {

void write_volume(const VoxelVolume& volume, const std::filesystem::path& raw_path);
VoxelVolume read_volume(const std::filesystem::path& raw_path);

void write_calibration(const DensityCalibration& cal, const std::filesystem::path& path);
DensityCalibration read_calibration(const std::filesystem::path& path);

struct MeshFile {
    Tet10Mesh mesh;
    std::map<std::string, std::vector<double>> attributes; // one value per element
};

void write_mesh(const Tet10Mesh& mesh, const std::filesystem::path& path,
                const std::map<std::string, std::vector<double>>& attributes = {});
MeshFile read_mesh(const std::filesystem::path& path);

void write_transform(const RigidTransform& transform, const std::filesystem::path& path);
RigidTransform read_transform(const std::filesystem::path& path);

void write_materials(const MaterialField& materials, const std::filesystem::path& path);
MaterialField read_materials(const std::filesystem::path& path);

void write_dvc_grid(const DvcGrid& grid, const std::filesystem::path& csv_path);
DvcGrid read_dvc_grid(const std::filesystem::path& csv_path);

// id,ux,uy,uz per node
void write_solution_nodes(const Solution& sol, const std::filesystem::path& path);
// id, centroid strain (6), principal strains (3), von Mises stress
void write_solution_elements(const Solution& sol, const std::filesystem::path& path);
// Legacy ASCII unstructured grid (quadratic tetra cells) with nodal
// displacement vectors and per-cell von Mises stress for contour plotting.
void write_vtk(const Tet10Mesh& mesh, const Solution& sol,
               const std::filesystem::path& path);

// Sectioned key=value text config; '#' and ';' start comments.
struct ConfigFile {
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double number(const std::string& section, const std::string& key) const;
    double number_or(const std::string& section, const std::string& key,
                     double fallback) const;
    bool flag_or(const std::string& section, const std::string& key, bool fallback) const;
};

ConfigFile read_config(const std::filesystem::path& path);

} // namespace hfev::io
