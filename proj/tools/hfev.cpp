#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hfev/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hfev;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitExcluded = 2;
constexpr int kExitStage = 3;

struct CommonArgs {
    std::string config;
    std::string out;
    bool strict = false;
    std::optional<std::uint64_t> seed;
    std::string volume, mask, mesh, grid, calibration;
    std::string uncertainty_a, uncertainty_b;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config, "sectioned key=value config file");
    cmd->add_option("--out", a.out, "output directory");
    cmd->add_flag("--strict", a.strict, "exit 2 when an exclusion criterion fires");
    cmd->add_option("--seed", a.seed, "rng seed override");
    cmd->add_option("--volume", a.volume, "voxel volume (.raw with .meta sidecar)");
    cmd->add_option("--mask", a.mask, "trabecular mask volume");
    cmd->add_option("--mesh", a.mesh, "Tet10 mesh file");
    cmd->add_option("--grid", a.grid, "DVC displacement grid CSV");
    cmd->add_option("--calibration", a.calibration, "density calibration file");
    cmd->add_option("--uncertainty-a", a.uncertainty_a, "first zero-strain repeat grid");
    cmd->add_option("--uncertainty-b", a.uncertainty_b, "second zero-strain repeat grid");
}

PipelineConfig make_config(const CommonArgs& a) {
    PipelineConfig cfg;
    if (!a.config.empty()) cfg = load_pipeline_config(io::read_config(a.config));
    if (!a.out.empty()) cfg.out_dir = a.out;
    if (a.seed) cfg.seed = *a.seed;
    if (!a.volume.empty()) cfg.volume_path = a.volume;
    if (!a.mask.empty()) cfg.mask_path = a.mask;
    if (!a.mesh.empty()) cfg.mesh_path = a.mesh;
    if (!a.grid.empty()) cfg.grid_path = a.grid;
    if (!a.calibration.empty()) cfg.calibration_path = a.calibration;
    if (!a.uncertainty_a.empty()) cfg.uncertainty_grid_a = a.uncertainty_a;
    if (!a.uncertainty_b.empty()) cfg.uncertainty_grid_b = a.uncertainty_b;
    return cfg;
}

DensityCalibration pick_calibration(const PipelineConfig& cfg) {
    if (!cfg.calibration_path.empty()) return io::read_calibration(cfg.calibration_path);
    return cfg.calibration;
}

std::vector<std::pair<double, double>> read_samples(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    std::vector<std::pair<double, double>> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double g, d;
        if (row >> g >> d) samples.emplace_back(g, d);
    }
    return samples;
}

// Reads a pairs CSV back (x_mm,y_mm,z_mm,dvc_ux..dvc_uz,fe_ux..fe_uz).
ComparisonSet read_pairs(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    ComparisonSet cmp;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        Vec3 p;
        double dvc[3], fe[3];
        if (!(row >> p.x() >> p.y() >> p.z() >> dvc[0] >> dvc[1] >> dvc[2] >> fe[0] >>
              fe[1] >> fe[2]))
            throw Error(errc::io, "malformed pair row in " + path.string());
        for (int a = 0; a < 3; ++a) cmp.directions[a].push_back({p, dvc[a], fe[a]});
    }
    return cmp;
}

void print_metrics(const std::string& label, const RegressionMetrics& m) {
    std::cout << label << ": slope=" << m.slope << " intercept=" << m.intercept
              << " r2=" << m.r2 << " rmse=" << m.rmse << " rmse%=" << m.rmse_percent
              << " max=" << m.max_error << " n=" << m.n << '\n';
}

DirichletSet platen_or_grid_bcs(const PipelineConfig& cfg, const Tet10Mesh& mesh,
                                const DvcGrid* grid, double compress, int bc_min_points) {
    if (grid) {
        const auto slices = extract_bc_slices(*grid, bc_min_points);
        return build_dirichlet_from_dvc(mesh, *grid, slices).dirichlet;
    }
    double zmin = mesh.nodes.front().z(), zmax = zmin;
    for (const auto& p : mesh.nodes) {
        zmin = std::min(zmin, p.z());
        zmax = std::max(zmax, p.z());
    }
    const double tol = 1e-9 * std::max(1.0, zmax - zmin);
    DirichletSet bc;
    int pin = -1;
    double best = std::numeric_limits<double>::max();
    for (int n = 0; n < mesh.node_count(); ++n) {
        const double z = mesh.nodes[n].z();
        if (z >= zmax - tol) {
            bc.set(n, 2, -compress);
        } else if (z <= zmin + tol) {
            bc.set(n, 2, 0.0);
            const double d = mesh.nodes[n].head<2>().squaredNorm();
            if (d < best) {
                best = d;
                pin = n;
            }
        }
    }
    if (pin < 0) throw Error(errc::constraint, "mesh has no bottom plane");
    bc.set(pin, 0, 0.0);
    bc.set(pin, 1, 0.0);
    for (int n = 0; n < mesh.node_count(); ++n) {
        if (n == pin || mesh.nodes[n].z() > zmin + tol) continue;
        if (std::abs(mesh.nodes[n].y() - mesh.nodes[pin].y()) < tol) {
            bc.set(n, 1, 0.0);
            break;
        }
    }
    (void)cfg;
    return bc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"homogenized FE validation pipeline for vertebral bodies"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string fit_samples, materials_path, materials_b_path, transform_path, pairs_path;
    double compress = 0.0;
    bool with_plasticity_flag = false;

    auto* c_calibrate = app.add_subcommand(
        "calibrate", "fit a grey-to-density law and/or convert a grey volume");
    add_common(c_calibrate, args);
    c_calibrate->add_option("--fit", fit_samples, "CSV of grey,density phantom samples");

    auto* c_map = app.add_subcommand("map-materials",
                                     "integrate densities per element and apply the law");
    add_common(c_map, args);
    c_map->add_option("--transform", transform_path,
                      "rigid transform for a clinical-CT remap (volume is then grey)");

    auto* c_solve = app.add_subcommand("solve", "solve one model");
    add_common(c_solve, args);
    c_solve->add_option("--materials", materials_path, "materials CSV");
    c_solve->add_option("--compress", compress,
                        "axial platen displacement in mm (alternative to --grid)");
    c_solve->add_flag("--plasticity", with_plasticity_flag, "elastoplastic solve");

    auto* c_validate =
        app.add_subcommand("validate", "solve under DVC boundary conditions and compare");
    add_common(c_validate, args);
    c_validate->add_option("--materials", materials_path, "materials CSV");

    auto* c_exclude = app.add_subcommand("exclude", "run the exclusion criteria on a grid");
    add_common(c_exclude, args);
    c_exclude->add_option("--pairs", pairs_path, "pairs CSV from a previous validate run");

    auto* c_propagate = app.add_subcommand(
        "propagate-error", "translate FE-DVC displacement errors into strain errors");
    add_common(c_propagate, args);
    c_propagate->add_option("--pairs", pairs_path, "pairs CSV from a previous validate run")
        ->required();

    auto* c_phantom = app.add_subcommand("phantom", "generate the synthetic phantom");
    add_common(c_phantom, args);

    auto* c_pipeline = app.add_subcommand("pipeline", "run the full validation pipeline");
    add_common(c_pipeline, args);

    auto* c_compare = app.add_subcommand(
        "compare-models", "solve the same mesh under two material maps and compare");
    add_common(c_compare, args);
    c_compare->add_option("--materials", materials_path, "materials CSV for model a")
        ->required();
    c_compare->add_option("--materials-b", materials_b_path, "materials CSV for model b")
        ->required();
    c_compare->add_option("--compress", compress, "axial platen displacement in mm")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const PipelineConfig cfg = make_config(args);
        const fs::path out_dir = cfg.out_dir;
        fs::create_directories(out_dir);

        if (c_calibrate->parsed()) {
            DensityCalibration cal = pick_calibration(cfg);
            if (!fit_samples.empty()) {
                const auto fit = fit_calibration(read_samples(fit_samples));
                cal = fit.cal;
                std::cout << "fit: slope=" << cal.slope << " intercept=" << cal.intercept
                          << " rms_residual=" << fit.rms_residual << '\n';
            }
            io::write_calibration(cal, out_dir / "calibration.txt");
            if (!cfg.volume_path.empty()) {
                const VoxelVolume grey = io::read_volume(cfg.volume_path);
                io::write_volume(grey_to_density(grey, cal), out_dir / "density.raw");
                std::cout << "wrote " << (out_dir / "density.raw").string() << '\n';
            }
            return kExitOk;
        }

        if (c_map->parsed()) {
            const Tet10Mesh mesh = io::read_mesh(cfg.mesh_path).mesh;
            const VoxelVolume volume = io::read_volume(cfg.volume_path);
            MaterialField materials;
            if (!transform_path.empty()) {
                const RigidTransform t = io::read_transform(transform_path);
                materials =
                    remap_materials(mesh, t, volume, pick_calibration(cfg), cfg.materials);
            } else {
                materials = map_materials(mesh, volume, cfg.materials);
            }
            io::write_materials(materials, out_dir / "materials.csv");
            std::cout << "wrote " << (out_dir / "materials.csv").string() << " ("
                      << materials.element_count() << " elements)\n";
            return kExitOk;
        }

        if (c_solve->parsed()) {
            const Tet10Mesh mesh = io::read_mesh(cfg.mesh_path).mesh;
            const MaterialField materials = io::read_materials(materials_path);
            std::optional<DvcGrid> grid;
            if (!cfg.grid_path.empty()) grid = io::read_dvc_grid(cfg.grid_path);
            if (!grid && compress <= 0.0)
                throw Error(errc::contract, "solve needs --grid or --compress");
            const DirichletSet bc = platen_or_grid_bcs(cfg, mesh, grid ? &*grid : nullptr,
                                                       compress, cfg.bc_min_points);
            SolverOptions opts = cfg.solver;
            const bool plastic = with_plasticity_flag || cfg.materials.with_plasticity;
            const Solution sol = plastic ? solve_elastoplastic(mesh, materials, bc, opts)
                                         : solve_linear(mesh, materials, bc, opts);
            io::write_solution_nodes(sol, out_dir / "solution_nodes.csv");
            io::write_solution_elements(sol, out_dir / "solution_elements.csv");
            io::write_vtk(mesh, sol, out_dir / "solution.vtk");
            std::cout << "cg_iterations=" << sol.diagnostics.cg_iterations
                      << " residual=" << sol.diagnostics.final_residual << '\n';
            return kExitOk;
        }

        if (c_validate->parsed()) {
            const Tet10Mesh mesh = io::read_mesh(cfg.mesh_path).mesh;
            const MaterialField materials = io::read_materials(materials_path);
            const DvcGrid grid = io::read_dvc_grid(cfg.grid_path);
            const auto slices = extract_bc_slices(grid, cfg.bc_min_points);
            const auto bcs = build_dirichlet_from_dvc(mesh, grid, slices);
            const Solution sol =
                cfg.materials.with_plasticity
                    ? solve_elastoplastic(mesh, materials, bcs.dirichlet, cfg.solver)
                    : solve_linear(mesh, materials, bcs.dirichlet, cfg.solver);

            MeshIndex index(mesh);
            std::vector<Vec3> points(grid.point_count());
            for (int k = 0; k < grid.dims[2]; ++k)
                for (int j = 0; j < grid.dims[1]; ++j)
                    for (int i = 0; i < grid.dims[0]; ++i)
                        points[grid.index(i, j, k)] = grid.point(i, j, k);
            const auto keep = central_region_filter(mesh, points, cfg.central_fraction);
            const auto cmp = fe_at_dvc_points(index, sol.displacements, grid, &keep);

            std::ofstream f(out_dir / "pairs_all.csv");
            f << std::setprecision(17)
              << "x_mm,y_mm,z_mm,dvc_ux,dvc_uy,dvc_uz,fe_ux,fe_uy,fe_uz\n";
            for (std::size_t s = 0; s < cmp.directions[0].size(); ++s) {
                const Vec3& p = cmp.directions[0][s].point;
                f << p.x() << ',' << p.y() << ',' << p.z();
                for (int a = 0; a < 3; ++a) f << ',' << cmp.directions[a][s].dvc;
                for (int a = 0; a < 3; ++a) f << ',' << cmp.directions[a][s].fe;
                f << '\n';
            }
            const char* names[3] = {"x", "y", "z"};
            for (int a = 0; a < 3; ++a)
                print_metrics(names[a], regression_metrics(cmp.directions[a]));
            std::cout << "reaction_down_n="
                      << reaction_force_axial(sol, bcs.down_nodes, 2) << '\n';
            return kExitOk;
        }

        if (c_exclude->parsed()) {
            const DvcGrid grid = io::read_dvc_grid(cfg.grid_path);
            const StrainGrid strains = differentiate_strains(grid);
            ComparisonSet cmp;
            if (!pairs_path.empty()) cmp = read_pairs(pairs_path);
            std::optional<std::vector<double>> unc;
            if (!cfg.uncertainty_grid_a.empty() && !cfg.uncertainty_grid_b.empty())
                unc = zero_strain_uncertainty(io::read_dvc_grid(cfg.uncertainty_grid_a),
                                              io::read_dvc_grid(cfg.uncertainty_grid_b));
            const ExclusionReport report =
                exclusion_check(cmp, strains, grid, unc ? &*unc : nullptr, cfg.exclusion);
            for (const auto& c : report.criteria)
                std::cout << c.name << ": "
                          << (c.evaluated ? (c.exceeded ? "exceeded" : "ok")
                                          : "not evaluated")
                          << " value=" << c.value << " threshold=" << c.threshold << '\n';
            std::cout << "excluded=" << (report.excluded ? "yes" : "no") << '\n';
            return report.excluded && args.strict ? kExitExcluded : kExitOk;
        }

        if (c_propagate->parsed()) {
            const DvcGrid grid = io::read_dvc_grid(cfg.grid_path);
            const ComparisonSet cmp = read_pairs(pairs_path);
            std::optional<std::vector<double>> unc;
            if (!cfg.uncertainty_grid_a.empty() && !cfg.uncertainty_grid_b.empty())
                unc = zero_strain_uncertainty(io::read_dvc_grid(cfg.uncertainty_grid_a),
                                              io::read_dvc_grid(cfg.uncertainty_grid_b));
            DvcGrid frame = grid;
            std::fill(frame.correlated.begin(), frame.correlated.end(), 0);
            std::vector<Vec3> error(grid.point_count(), Vec3::Zero());
            for (std::size_t s = 0; s < cmp.directions[0].size(); ++s) {
                const Vec3& p = cmp.directions[0][s].point;
                std::array<int, 3> idx;
                bool on_grid = true;
                for (int a = 0; a < 3; ++a) {
                    const double f = (p[a] - grid.origin[a]) / grid.spacing[a];
                    idx[a] = static_cast<int>(std::lround(f));
                    on_grid = on_grid && std::abs(f - idx[a]) < 1e-6 && idx[a] >= 0 &&
                              idx[a] < grid.dims[a];
                }
                if (!on_grid) continue;
                const std::size_t n = grid.index(idx[0], idx[1], idx[2]);
                frame.correlated[n] = 1;
                for (int a = 0; a < 3; ++a)
                    error[n][a] = cmp.directions[a][s].fe - cmp.directions[a][s].dvc;
            }
            const ErrorPropagation prop =
                propagate_displacement_error(frame, error, unc ? &*unc : nullptr);
            std::ofstream f(out_dir / "error_propagation.csv");
            f << std::setprecision(17) << "i,j,k,quick,point_scalar,residual\n";
            for (int k = 0; k < grid.dims[2]; ++k)
                for (int j = 0; j < grid.dims[1]; ++j)
                    for (int i = 0; i < grid.dims[0]; ++i) {
                        const std::size_t n = grid.index(i, j, k);
                        f << i << ',' << j << ',' << k << ',' << prop.quick[n] << ','
                          << prop.point_scalar[n] << ',' << prop.residual[n] << '\n';
                    }
            std::cout << "wrote " << (out_dir / "error_propagation.csv").string() << '\n';
            return kExitOk;
        }

        if (c_phantom->parsed()) {
            const Phantom ph = generate_phantom(cfg.phantom, cfg.voxel_size, cfg.mesh_edge);
            io::write_volume(ph.density, out_dir / "density.raw");
            io::write_volume(ph.mask, out_dir / "mask.raw");
            io::write_mesh(ph.mesh, out_dir / "mesh.txt");
            std::cout << "nodes=" << ph.mesh.node_count()
                      << " elements=" << ph.mesh.element_count() << '\n';
            return kExitOk;
        }

        if (c_pipeline->parsed()) {
            const ValidationReport rep = run_pipeline(cfg);
            const char* names[3] = {"x", "y", "z"};
            for (int a = 0; a < 3; ++a)
                if (rep.directions[a].computed)
                    print_metrics(names[a], rep.directions[a].metrics);
            std::cout << "excluded=" << (rep.exclusion.excluded ? "yes" : "no")
                      << " report=" << rep.report_path.string() << '\n';
            return rep.exclusion.excluded && args.strict ? kExitExcluded : kExitOk;
        }

        if (c_compare->parsed()) {
            const Tet10Mesh mesh = io::read_mesh(cfg.mesh_path).mesh;
            const MaterialField mat_a = io::read_materials(materials_path);
            const MaterialField mat_b = io::read_materials(materials_b_path);
            const DirichletSet bc =
                platen_or_grid_bcs(cfg, mesh, nullptr, compress, cfg.bc_min_points);
            const Solution sol_a = solve_linear(mesh, mat_a, bc, cfg.solver);
            const Solution sol_b = solve_linear(mesh, mat_b, bc, cfg.solver);
            double zmin = mesh.nodes.front().z();
            for (const auto& p : mesh.nodes) zmin = std::min(zmin, p.z());
            const double tol = 1e-9;
            std::vector<int> bottom;
            for (int n = 0; n < mesh.node_count(); ++n)
                if (mesh.nodes[n].z() <= zmin + tol) bottom.push_back(n);
            const ModelComparison out = compare_models(mesh, sol_a, sol_b, bottom, 2);
            const char* names[3] = {"x", "y", "z"};
            for (int a = 0; a < 3; ++a) print_metrics(names[a], out.directions[a]);
            print_metrics("pooled", out.pooled);
            std::cout << "reaction_a_n=" << out.reaction_a
                      << " reaction_b_n=" << out.reaction_b
                      << " reaction_delta=" << out.reaction_delta << '\n';
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return kExitOk;
}
