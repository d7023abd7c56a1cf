#include "hfev/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>

#include <json.hpp>

namespace hfev {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == errc::stage) throw;
        throw Error(errc::stage, "stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(errc::stage, "stage " + name + ": " + e.what());
    }
}

struct Inputs {
    VoxelVolume volume;
    std::optional<VoxelVolume> mask;
    Tet10Mesh mesh;
    std::optional<DvcGrid> grid;
};

struct PlatenBc {
    DirichletSet bc;
    std::vector<int> top;
    std::vector<int> bottom;
};

// Axial platen compression: top plane pushed down, bottom plane held in z,
// plus two bottom pins against the in-plane rigid modes. The pins sit on the
// footprint center line so a uniaxial-stress field satisfies them exactly.
PlatenBc platen_compression(const Tet10Mesh& mesh, double applied) {
    double zmin = mesh.nodes.front().z(), zmax = zmin;
    for (const auto& p : mesh.nodes) {
        zmin = std::min(zmin, p.z());
        zmax = std::max(zmax, p.z());
    }
    const double tol = 1e-9 * std::max(1.0, zmax - zmin);

    PlatenBc out;
    for (int n = 0; n < mesh.node_count(); ++n) {
        const double z = mesh.nodes[n].z();
        if (z >= zmax - tol) {
            out.top.push_back(n);
            out.bc.set(n, 2, -applied);
        } else if (z <= zmin + tol) {
            out.bottom.push_back(n);
            out.bc.set(n, 2, 0.0);
        }
    }
    if (out.top.empty() || out.bottom.empty())
        throw Error(errc::constraint, "mesh has no platen planes");

    int center = -1;
    double best = std::numeric_limits<double>::max();
    for (int n : out.bottom) {
        const double d = mesh.nodes[n].head<2>().squaredNorm();
        if (d < best) {
            best = d;
            center = n;
        }
    }
    out.bc.set(center, 0, 0.0);
    out.bc.set(center, 1, 0.0);

    int arm = -1;
    double best_y = std::numeric_limits<double>::max();
    double best_x = -1.0;
    for (int n : out.bottom) {
        if (n == center) continue;
        const double dy = std::abs(mesh.nodes[n].y() - mesh.nodes[center].y());
        const double dx = std::abs(mesh.nodes[n].x() - mesh.nodes[center].x());
        if (dy < best_y - 1e-12 || (dy < best_y + 1e-12 && dx > best_x + 1e-12)) {
            best_y = dy;
            best_x = dx;
            arm = n;
        }
    }
    if (arm < 0) throw Error(errc::constraint, "mesh too small for platen pins");
    out.bc.set(arm, 1, 0.0);
    return out;
}

void grid_frame_over_mesh(const Tet10Mesh& mesh, const Vec3& spacing,
                          std::array<int, 3>& dims, Vec3& origin) {
    Vec3 lo = mesh.nodes.front(), hi = lo;
    for (const auto& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    for (int a = 0; a < 3; ++a) {
        origin[a] = std::floor(lo[a] / spacing[a] + 1e-9) * spacing[a];
        int n = static_cast<int>(std::floor((hi[a] - origin[a]) / spacing[a] + 1e-9)) + 1;
        while (origin[a] + (n - 1) * spacing[a] < hi[a] - 1e-9) ++n;
        dims[a] = n;
    }
}

bool finite_max(const std::vector<double>& values, double& out) {
    bool any = false;
    out = 0.0;
    for (double v : values)
        if (std::isfinite(v)) {
            out = any ? std::max(out, v) : v;
            any = true;
        }
    return any;
}

DirectionReport guarded_metrics(const std::vector<PairSample>& samples) {
    DirectionReport r;
    try {
        r.metrics = regression_metrics(samples);
        r.computed = true;
    } catch (const Error& e) {
        if (e.code() != errc::insufficient_data && e.code() != errc::degenerate_regression)
            throw;
    }
    return r;
}

ordered_json metrics_json(const DirectionReport& d) {
    if (!d.computed) return nullptr;
    ordered_json j;
    j["slope"] = d.metrics.slope;
    j["intercept"] = d.metrics.intercept;
    j["r2"] = d.metrics.r2;
    j["rmse"] = d.metrics.rmse;
    j["rmse_percent"] = d.metrics.rmse_percent;
    j["max_error"] = d.metrics.max_error;
    j["n"] = d.metrics.n;
    return j;
}

constexpr const char* kAxisNames[3] = {"x", "y", "z"};

} // namespace

ValidationReport run_pipeline(const PipelineConfig& cfg) {
    namespace fs = std::filesystem;
    ValidationReport rep;
    std::vector<std::string> artifacts;
    const fs::path out_dir = cfg.out_dir;
    fs::create_directories(out_dir);
    auto artifact = [&](const std::string& name) {
        artifacts.push_back(name);
        return out_dir / name;
    };

    Inputs in = stage("inputs", [&] {
        Inputs r;
        if (cfg.synthetic) {
            Phantom ph = generate_phantom(cfg.phantom, cfg.voxel_size, cfg.mesh_edge);
            io::write_volume(ph.density, artifact("density.raw"));
            artifacts.push_back("density.raw.meta");
            io::write_volume(ph.mask, artifact("mask.raw"));
            artifacts.push_back("mask.raw.meta");
            io::write_mesh(ph.mesh, artifact("mesh.txt"));
            r.volume = std::move(ph.density);
            r.mask = std::move(ph.mask);
            r.mesh = std::move(ph.mesh);
        } else {
            if (cfg.volume_path.empty() || cfg.mesh_path.empty() || cfg.grid_path.empty())
                throw Error(errc::contract,
                            "file-driven run needs volume, mesh and grid paths");
            r.volume = io::read_volume(cfg.volume_path);
            if (!cfg.mask_path.empty()) r.mask = io::read_volume(cfg.mask_path);
            r.mesh = io::read_mesh(cfg.mesh_path).mesh;
            r.grid = io::read_dvc_grid(cfg.grid_path);
        }
        return r;
    });

    const VoxelVolume density = stage("calibrate", [&] {
        rep.calibration = cfg.calibration_path.empty()
                              ? cfg.calibration
                              : io::read_calibration(cfg.calibration_path);
        io::write_calibration(rep.calibration, artifact("calibration.txt"));
        if (in.volume.kind == VolumeKind::grey)
            return grey_to_density(in.volume, rep.calibration);
        return in.volume;
    });

    const MaterialField materials = stage("map-materials", [&] {
        auto m = map_materials(in.mesh, density, cfg.materials);
        io::write_materials(m, artifact("materials.csv"));
        return m;
    });
    rep.elements = materials.element_count();

    const MeshIndex index(in.mesh);

    DvcGrid grid;
    std::optional<std::vector<double>> uncertainty;
    stage("experiment", [&] {
        if (cfg.synthetic) {
            const PlatenBc platen =
                platen_compression(in.mesh, cfg.experiment.applied_displacement);
            const Solution fe1 =
                cfg.materials.with_plasticity
                    ? solve_elastoplastic(in.mesh, materials, platen.bc, cfg.solver)
                    : solve_linear(in.mesh, materials, platen.bc, cfg.solver);

            std::array<int, 3> dims;
            Vec3 origin;
            grid_frame_over_mesh(in.mesh, cfg.grid_spacing, dims, origin);
            DvcSynthesisConfig syn;
            syn.noise_sigma = cfg.experiment.noise_sigma;
            syn.seed = cfg.seed;
            if (cfg.experiment.min_density > 0.0) {
                syn.density = &density;
                syn.min_density = cfg.experiment.min_density;
            }
            grid = synthesize_dvc(index, fe1.displacements, dims, cfg.grid_spacing,
                                  origin, syn);
            io::write_dvc_grid(grid, artifact("dvc_grid.csv"));
            artifacts.push_back("dvc_grid.csv.meta");

            if (cfg.experiment.uncertainty_sigma > 0.0) {
                const Eigen::MatrixXd zero =
                    Eigen::MatrixXd::Zero(in.mesh.node_count(), 3);
                DvcSynthesisConfig unloaded = syn;
                unloaded.noise_sigma = cfg.experiment.uncertainty_sigma;
                unloaded.seed = cfg.seed + 1;
                const DvcGrid scan_a = synthesize_dvc(index, zero, dims,
                                                      cfg.grid_spacing, origin, unloaded);
                unloaded.seed = cfg.seed + 2;
                const DvcGrid scan_b = synthesize_dvc(index, zero, dims,
                                                      cfg.grid_spacing, origin, unloaded);
                uncertainty = zero_strain_uncertainty(scan_a, scan_b);
            }
        } else {
            grid = std::move(*in.grid);
            if (!cfg.uncertainty_grid_a.empty() && !cfg.uncertainty_grid_b.empty()) {
                const DvcGrid scan_a = io::read_dvc_grid(cfg.uncertainty_grid_a);
                const DvcGrid scan_b = io::read_dvc_grid(cfg.uncertainty_grid_b);
                uncertainty = zero_strain_uncertainty(scan_a, scan_b);
            }
        }
        if (uncertainty) {
            std::ofstream f(artifact("uncertainty.csv"));
            f << std::setprecision(17) << "i,j,k,uncertainty\n";
            for (int k = 0; k < grid.dims[2]; ++k)
                for (int j = 0; j < grid.dims[1]; ++j)
                    for (int i = 0; i < grid.dims[0]; ++i)
                        f << i << ',' << j << ',' << k << ','
                          << (*uncertainty)[grid.index(i, j, k)] << '\n';
        }
    });
    rep.dvc_points = grid.point_count();
    for (std::size_t n = 0; n < grid.point_count(); ++n) {
        if (grid.correlated[n]) ++rep.dvc_correlated;
        if (grid.inside_bone[n]) ++rep.dvc_inside;
    }
    rep.has_uncertainty = uncertainty.has_value();

    const DvcBoundaryConditions bcs = stage("extract-bcs", [&] {
        const auto slices = extract_bc_slices(grid, cfg.bc_min_points);
        rep.bc_slices = slices;
        return build_dirichlet_from_dvc(in.mesh, grid, slices);
    });
    rep.up_nodes = static_cast<int>(bcs.up_nodes.size());
    rep.down_nodes = static_cast<int>(bcs.down_nodes.size());

    const Solution sol = stage("solve", [&] {
        Solution s = cfg.materials.with_plasticity
                         ? solve_elastoplastic(in.mesh, materials, bcs.dirichlet, cfg.solver)
                         : solve_linear(in.mesh, materials, bcs.dirichlet, cfg.solver);
        io::write_solution_nodes(s, artifact("solution_nodes.csv"));
        io::write_solution_elements(s, artifact("solution_elements.csv"));
        io::write_vtk(in.mesh, s, artifact("solution.vtk"));
        return s;
    });
    rep.solve = sol.diagnostics;
    rep.reaction_down = reaction_force_axial(sol, bcs.down_nodes, 2);
    rep.reaction_up = reaction_force_axial(sol, bcs.up_nodes, 2);

    const ComparisonSet comparison = stage("compare", [&] {
        std::vector<Vec3> points(grid.point_count());
        for (int k = 0; k < grid.dims[2]; ++k)
            for (int j = 0; j < grid.dims[1]; ++j)
                for (int i = 0; i < grid.dims[0]; ++i)
                    points[grid.index(i, j, k)] = grid.point(i, j, k);
        const std::vector<bool> keep =
            central_region_filter(in.mesh, points, cfg.central_fraction);
        auto cmp = fe_at_dvc_points(index, sol.displacements, grid, &keep);

        std::ofstream f(artifact("pairs_all.csv"));
        f << std::setprecision(17)
          << "x_mm,y_mm,z_mm,dvc_ux,dvc_uy,dvc_uz,fe_ux,fe_uy,fe_uz\n";
        for (std::size_t s = 0; s < cmp.directions[0].size(); ++s) {
            const Vec3& p = cmp.directions[0][s].point;
            f << p.x() << ',' << p.y() << ',' << p.z();
            for (int a = 0; a < 3; ++a) f << ',' << cmp.directions[a][s].dvc;
            for (int a = 0; a < 3; ++a) f << ',' << cmp.directions[a][s].fe;
            f << '\n';
        }
        return cmp;
    });
    rep.comparison_points = comparison.directions[0].size();

    stage("metrics", [&] {
        const DirectionReliability reli = direction_reliability(grid, cfg.voxel_size);
        std::vector<PairSample> pooled;
        for (int a = 0; a < 3; ++a) {
            rep.directions[a] = guarded_metrics(comparison.directions[a]);
            rep.directions[a].median_abs = reli.median_abs[a];
            rep.directions[a].reliable = reli.reliable[a];
            pooled.insert(pooled.end(), comparison.directions[a].begin(),
                          comparison.directions[a].end());
        }
        rep.pooled = guarded_metrics(pooled);

        if (in.mask) {
            std::array<std::vector<PairSample>, 3> sub;
            for (int a = 0; a < 3; ++a) {
                sub[a] = subset_trabecular(comparison.directions[a], *in.mask);
                rep.trabecular[a] = guarded_metrics(sub[a]);
                rep.trabecular[a].median_abs = reli.median_abs[a];
                rep.trabecular[a].reliable = reli.reliable[a];
            }
            std::ofstream f(artifact("pairs_trabecular.csv"));
            f << std::setprecision(17)
              << "x_mm,y_mm,z_mm,dvc_ux,dvc_uy,dvc_uz,fe_ux,fe_uy,fe_uz\n";
            for (std::size_t s = 0; s < sub[0].size(); ++s) {
                const Vec3& p = sub[0][s].point;
                f << p.x() << ',' << p.y() << ',' << p.z();
                for (int a = 0; a < 3; ++a) f << ',' << sub[a][s].dvc;
                for (int a = 0; a < 3; ++a) f << ',' << sub[a][s].fe;
                f << '\n';
            }
        }
    });

    stage("exclusion", [&] {
        const StrainGrid strains = differentiate_strains(grid);
        rep.exclusion = exclusion_check(comparison, strains, grid,
                                        uncertainty ? &*uncertainty : nullptr,
                                        cfg.exclusion);
    });

    stage("propagate-error", [&] {
        DvcGrid frame = grid;
        std::vector<Vec3> error(grid.point_count(), Vec3::Zero());
        for (int k = 0; k < grid.dims[2]; ++k)
            for (int j = 0; j < grid.dims[1]; ++j)
                for (int i = 0; i < grid.dims[0]; ++i) {
                    const std::size_t n = grid.index(i, j, k);
                    if (!grid.correlated[n]) continue;
                    const auto u =
                        interpolate_nodal_field(index, sol.displacements, grid.point(i, j, k));
                    if (u)
                        error[n] = Vec3(*u) - grid.displacement[n];
                    else
                        frame.correlated[n] = 0;
                }
        const ErrorPropagation prop = propagate_displacement_error(
            frame, error, uncertainty ? &*uncertainty : nullptr);
        finite_max(prop.quick, rep.quick_error_max);
        finite_max(prop.point_scalar, rep.strain_error_max);
        if (!uncertainty || !finite_max(prop.residual, rep.residual_error_max))
            rep.residual_error_max = std::numeric_limits<double>::quiet_NaN();

        std::ofstream f(artifact("error_propagation.csv"));
        f << std::setprecision(17) << "i,j,k,quick,point_scalar,residual\n";
        for (int k = 0; k < grid.dims[2]; ++k)
            for (int j = 0; j < grid.dims[1]; ++j)
                for (int i = 0; i < grid.dims[0]; ++i) {
                    const std::size_t n = grid.index(i, j, k);
                    f << i << ',' << j << ',' << k << ',' << prop.quick[n] << ','
                      << prop.point_scalar[n] << ',' << prop.residual[n] << '\n';
                }
    });

    stage("report", [&] {
        ordered_json j;
        j["calibration"] = {{"slope", rep.calibration.slope},
                            {"intercept", rep.calibration.intercept},
                            {"correction_scale", rep.calibration.correction_scale},
                            {"correction_offset", rep.calibration.correction_offset}};
        {
            const auto [dmin, dmax] =
                std::minmax_element(materials.density.begin(), materials.density.end());
            const auto [emin, emax] =
                std::minmax_element(materials.modulus.begin(), materials.modulus.end());
            j["materials"] = {{"elements", rep.elements},
                              {"density_min", *dmin},
                              {"density_max", *dmax},
                              {"modulus_min", *emin},
                              {"modulus_max", *emax},
                              {"plasticity", materials.has_plasticity}};
        }
        j["bc"] = {{"upper_slice", rep.bc_slices.first},
                   {"lower_slice", rep.bc_slices.second},
                   {"up_nodes", rep.up_nodes},
                   {"down_nodes", rep.down_nodes}};
        j["solve"] = {{"cg_iterations", rep.solve.cg_iterations},
                      {"newton_iterations", rep.solve.newton_iterations},
                      {"load_steps", rep.solve.load_steps},
                      {"final_residual", rep.solve.final_residual},
                      {"plastic", rep.solve.plastic},
                      {"yielded_elements", rep.solve.yielded_elements},
                      {"reaction_down_n", rep.reaction_down},
                      {"reaction_up_n", rep.reaction_up}};
        j["dvc"] = {{"points", rep.dvc_points},
                    {"correlated", rep.dvc_correlated},
                    {"inside_bone", rep.dvc_inside},
                    {"noise_sigma_mm", cfg.experiment.noise_sigma},
                    {"seed", cfg.seed}};
        {
            ordered_json cj;
            cj["points"] = rep.comparison_points;
            for (int a = 0; a < 3; ++a) cj[kAxisNames[a]] = metrics_json(rep.directions[a]);
            cj["pooled"] = metrics_json(rep.pooled);
            if (in.mask) {
                ordered_json tj;
                for (int a = 0; a < 3; ++a)
                    tj[kAxisNames[a]] = metrics_json(rep.trabecular[a]);
                cj["trabecular"] = tj;
            } else {
                cj["trabecular"] = nullptr;
            }
            j["comparison"] = cj;
        }
        {
            ordered_json rj;
            rj["voxel_size_mm"] = cfg.voxel_size;
            for (int a = 0; a < 3; ++a)
                rj[kAxisNames[a]] = {{"median_abs_mm", rep.directions[a].median_abs},
                                     {"reliable", rep.directions[a].reliable}};
            j["reliability"] = rj;
        }
        {
            ordered_json ej;
            ej["criteria"] = ordered_json::array();
            for (const auto& c : rep.exclusion.criteria)
                ej["criteria"].push_back({{"name", c.name},
                                          {"evaluated", c.evaluated},
                                          {"exceeded", c.exceeded},
                                          {"value", c.value},
                                          {"threshold", c.threshold},
                                          {"detail", c.detail}});
            ej["excluded"] = rep.exclusion.excluded;
            j["exclusion"] = ej;
        }
        j["error_propagation"] = {
            {"quick_max", rep.quick_error_max},
            {"point_scalar_max", rep.strain_error_max},
            {"residual_max", std::isfinite(rep.residual_error_max)
                                 ? ordered_json(rep.residual_error_max)
                                 : ordered_json(nullptr)}};
        artifacts.push_back("report.json");
        j["artifacts"] = artifacts;
        std::ofstream f(out_dir / "report.json");
        if (!f) throw Error(errc::io, "cannot write report.json");
        f << j.dump(2) << '\n';
    });

    rep.report_path = out_dir / "report.json";
    rep.artifacts = artifacts;
    return rep;
}

ModelComparison compare_models(const Tet10Mesh& mesh, const Solution& a, const Solution& b,
                               const std::vector<int>& reaction_nodes, int axis) {
    if (a.displacements.rows() != mesh.node_count() ||
        b.displacements.rows() != mesh.node_count())
        throw Error(errc::contract, "solutions do not share the mesh");

    ModelComparison out;
    std::vector<PairSample> pooled;
    for (int d = 0; d < 3; ++d) {
        std::vector<PairSample> samples(mesh.node_count());
        for (int n = 0; n < mesh.node_count(); ++n)
            samples[n] = {mesh.nodes[n], a.displacements(n, d), b.displacements(n, d)};
        out.directions[d] = regression_metrics(samples);
        pooled.insert(pooled.end(), samples.begin(), samples.end());
    }
    out.pooled = regression_metrics(pooled);
    out.reaction_a = reaction_force_axial(a, reaction_nodes, axis);
    out.reaction_b = reaction_force_axial(b, reaction_nodes, axis);
    const double denom = std::abs(out.reaction_a);
    out.reaction_delta =
        denom > 0.0 ? std::abs(out.reaction_a - out.reaction_b) / denom
                    : (std::abs(out.reaction_b) > 0.0
                           ? std::numeric_limits<double>::infinity()
                           : 0.0);
    return out;
}

PipelineConfig load_pipeline_config(const io::ConfigFile& file) {
    PipelineConfig cfg;
    cfg.out_dir = file.get_or("pipeline", "out_dir", cfg.out_dir.string());
    cfg.seed = static_cast<std::uint64_t>(file.number_or("pipeline", "seed", 0.0));
    cfg.synthetic = file.flag_or("pipeline", "synthetic", false);
    cfg.voxel_size = file.number_or("pipeline", "voxel_size", cfg.voxel_size);
    cfg.mesh_edge = file.number_or("pipeline", "mesh_edge", cfg.mesh_edge);
    cfg.central_fraction =
        file.number_or("pipeline", "central_fraction", cfg.central_fraction);
    cfg.bc_min_points =
        static_cast<int>(file.number_or("pipeline", "bc_min_points", cfg.bc_min_points));
    {
        const double s = file.number_or("pipeline", "grid_spacing", cfg.grid_spacing.x());
        cfg.grid_spacing = Vec3::Constant(s);
    }

    cfg.volume_path = file.get_or("inputs", "volume", "");
    cfg.mask_path = file.get_or("inputs", "mask", "");
    cfg.mesh_path = file.get_or("inputs", "mesh", "");
    cfg.grid_path = file.get_or("inputs", "grid", "");
    cfg.calibration_path = file.get_or("inputs", "calibration", "");
    cfg.uncertainty_grid_a = file.get_or("inputs", "uncertainty_a", "");
    cfg.uncertainty_grid_b = file.get_or("inputs", "uncertainty_b", "");

    auto& ph = cfg.phantom;
    ph.radius_x = file.number_or("phantom", "radius_x", ph.radius_x);
    ph.radius_y = file.number_or("phantom", "radius_y", ph.radius_y);
    ph.height = file.number_or("phantom", "height", ph.height);
    ph.shell_thickness = file.number_or("phantom", "shell_thickness", ph.shell_thickness);
    ph.trabecular_density =
        file.number_or("phantom", "trabecular_density", ph.trabecular_density);
    ph.shell_density = file.number_or("phantom", "shell_density", ph.shell_density);
    if (file.has("phantom", "lesion_radius")) {
        LesionSpec lesion;
        lesion.center = Vec3(file.number_or("phantom", "lesion_x", 0.0),
                             file.number_or("phantom", "lesion_y", 0.0),
                             file.number_or("phantom", "lesion_z", 0.0));
        lesion.radius = file.number("phantom", "lesion_radius");
        lesion.multiplier = file.number_or("phantom", "lesion_multiplier", 0.0);
        ph.lesion = lesion;
    }

    auto& ex = cfg.experiment;
    ex.applied_displacement =
        file.number_or("experiment", "applied_displacement", ex.applied_displacement);
    ex.noise_sigma = file.number_or("experiment", "noise_sigma", ex.noise_sigma);
    ex.uncertainty_sigma =
        file.number_or("experiment", "uncertainty_sigma", ex.uncertainty_sigma);
    ex.min_density = file.number_or("experiment", "min_density", ex.min_density);

    cfg.calibration.slope = file.number_or("calibration", "slope", 1.0);
    cfg.calibration.intercept = file.number_or("calibration", "intercept", 0.0);
    cfg.calibration.correction_scale =
        file.number_or("calibration", "correction_scale", 1.0);
    cfg.calibration.correction_offset =
        file.number_or("calibration", "correction_offset", 0.0);

    auto& mat = cfg.materials;
    mat.law.coefficient = file.number_or("materials", "law_coefficient", mat.law.coefficient);
    mat.law.exponent = file.number_or("materials", "law_exponent", mat.law.exponent);
    mat.poisson = file.number_or("materials", "poisson", mat.poisson);
    mat.modulus_floor = file.number_or("materials", "modulus_floor", mat.modulus_floor);
    mat.quadrature.order =
        static_cast<int>(file.number_or("materials", "quadrature_order", mat.quadrature.order));
    mat.quadrature.refine =
        static_cast<int>(file.number_or("materials", "quadrature_refine", mat.quadrature.refine));
    mat.average_modulus = file.flag_or("materials", "average_modulus", mat.average_modulus);
    mat.with_plasticity = file.flag_or("materials", "plasticity", mat.with_plasticity);

    auto& sv = cfg.solver;
    sv.rel_tol = file.number_or("solver", "rel_tol", sv.rel_tol);
    sv.max_iterations =
        static_cast<int>(file.number_or("solver", "max_iterations", sv.max_iterations));
    sv.n_steps = static_cast<int>(file.number_or("solver", "n_steps", sv.n_steps));
    sv.max_newton_iterations = static_cast<int>(
        file.number_or("solver", "max_newton_iterations", sv.max_newton_iterations));
    sv.newton_rel_tol = file.number_or("solver", "newton_rel_tol", sv.newton_rel_tol);

    auto& th = cfg.exclusion;
    th.strain_warn = file.number_or("exclusion", "strain_warn", th.strain_warn);
    th.strain_limit = file.number_or("exclusion", "strain_limit", th.strain_limit);
    th.strain_fraction = file.number_or("exclusion", "strain_fraction", th.strain_fraction);
    th.min_correlated_fraction =
        file.number_or("exclusion", "min_correlated_fraction", th.min_correlated_fraction);
    th.reliability_r2 = file.number_or("exclusion", "reliability_r2", th.reliability_r2);
    return cfg;
}

} // namespace hfev
