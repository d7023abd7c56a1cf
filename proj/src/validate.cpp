#include "hfev/validate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hfev {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    bool degenerate = false;
};

OlsFit fit_ols(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, x_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        x_scale = std::max(x_scale, x[i] * x[i]);
    }
    OlsFit fit;
    if (sxx <= 1e-28 * n * std::max(1.0, x_scale)) {
        fit.degenerate = true;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    fit.r2 = std::clamp(fit.r2, 0.0, 1.0);
    return fit;
}

} // namespace

RegressionMetrics regression_metrics(const std::vector<PairSample>& samples) {
    if (samples.size() < 3)
        throw Error(errc::insufficient_data, "regression needs at least 3 pairs");
    std::vector<double> x(samples.size()), y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        x[i] = samples[i].dvc;
        y[i] = samples[i].fe;
    }
    const OlsFit fit = fit_ols(x, y);
    if (fit.degenerate)
        throw Error(errc::degenerate_regression, "DVC values carry no variance");

    RegressionMetrics m;
    m.slope = fit.slope;
    m.intercept = fit.intercept;
    m.r2 = fit.r2;
    m.n = static_cast<int>(samples.size());
    double sq = 0.0, max_abs_dvc = 0.0;
    for (const auto& s : samples) {
        const double d = s.fe - s.dvc;
        sq += d * d;
        m.max_error = std::max(m.max_error, std::abs(d));
        max_abs_dvc = std::max(max_abs_dvc, std::abs(s.dvc));
    }
    m.rmse = std::sqrt(sq / samples.size());
    m.rmse_percent = 100.0 * m.rmse / max_abs_dvc;
    return m;
}

std::pair<int, int> extract_bc_slices(const DvcGrid& grid, int min_points) {
    grid.validate();
    if (min_points < 1) throw Error(errc::contract, "min_points must be >= 1");
    int lower = -1, upper = -1;
    for (int k = 0; k < grid.dims[2]; ++k) {
        int count = 0;
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int i = 0; i < grid.dims[0]; ++i) {
                const std::size_t n = grid.index(i, j, k);
                if (grid.correlated[n] && grid.inside_bone[n]) ++count;
            }
        if (count < min_points) continue;
        if (lower < 0) lower = k;
        upper = k;
    }
    if (lower < 0 || upper == lower)
        throw Error(errc::insufficient_coverage,
                    "fewer than two grid slices qualify for boundary conditions");
    return {upper, lower};
}

namespace {

// In-plane displacement of slice k at (x, y): bilinear over the containing
// cell when its four corners correlate, otherwise an affine least-squares
// fit over correlated points within two rows/columns of the cell.
std::optional<Vec3> slice_field(const DvcGrid& grid, int k, double x, double y) {
    const double tx = (x - grid.origin.x()) / grid.spacing.x();
    const double ty = (y - grid.origin.y()) / grid.spacing.y();
    const int i0 = std::clamp(static_cast<int>(std::floor(tx)), 0, grid.dims[0] - 2);
    const int j0 = std::clamp(static_cast<int>(std::floor(ty)), 0, grid.dims[1] - 2);
    const double fx = tx - i0, fy = ty - j0;

    const double tol = 1e-9;
    if (fx >= -tol && fx <= 1.0 + tol && fy >= -tol && fy <= 1.0 + tol) {
        bool full = true;
        for (int b = 0; b < 2 && full; ++b)
            for (int a = 0; a < 2; ++a)
                if (!grid.is_correlated(i0 + a, j0 + b, k)) {
                    full = false;
                    break;
                }
        if (full) {
            Vec3 v = Vec3::Zero();
            for (int b = 0; b < 2; ++b)
                for (int a = 0; a < 2; ++a) {
                    const double w = (a ? fx : 1.0 - fx) * (b ? fy : 1.0 - fy);
                    v += w * grid.displacement[grid.index(i0 + a, j0 + b, k)];
                }
            return v;
        }
    }

    // Fallback: affine fit in scaled in-plane coordinates centered on (x, y).
    std::vector<Eigen::Vector2d> pos;
    std::vector<Vec3> val;
    for (int pj = std::max(0, j0 - 2); pj <= std::min(grid.dims[1] - 1, j0 + 3); ++pj)
        for (int pi = std::max(0, i0 - 2); pi <= std::min(grid.dims[0] - 1, i0 + 3); ++pi) {
            if (!grid.is_correlated(pi, pj, k)) continue;
            const Vec3 p = grid.point(pi, pj, k);
            pos.emplace_back((p.x() - x) / grid.spacing.x(), (p.y() - y) / grid.spacing.y());
            val.push_back(grid.displacement[grid.index(pi, pj, k)]);
        }
    if (pos.size() < 3) return std::nullopt;
    Eigen::MatrixXd a(pos.size(), 3);
    Eigen::MatrixXd b(pos.size(), 3);
    for (std::size_t r = 0; r < pos.size(); ++r) {
        a(r, 0) = 1.0;
        a(r, 1) = pos[r].x();
        a(r, 2) = pos[r].y();
        b.row(r) = val[r].transpose();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-8);
    if (qr.rank() < 3) return std::nullopt;
    const Eigen::MatrixXd coeff = qr.solve(b); // rows: constant, d/dx', d/dy'
    return Vec3(coeff.row(0).transpose());     // evaluated at the fit center
}

} // namespace

DvcBoundaryConditions build_dirichlet_from_dvc(const Tet10Mesh& mesh, const DvcGrid& grid,
                                               std::pair<int, int> slices) {
    grid.validate();
    const auto [upper, lower] = slices;
    if (lower < 0 || upper >= grid.dims[2] || lower >= upper)
        throw Error(errc::contract, "invalid BC slice pair");
    if (std::abs(std::abs(mesh.axial_direction.z()) - 1.0) > 1e-3)
        throw Error(errc::contract,
                    "BC slice extraction assumes a z-aligned axial direction");

    DvcBoundaryConditions out;
    out.upper_plane = grid.origin.z() + upper * grid.spacing.z();
    out.lower_plane = grid.origin.z() + lower * grid.spacing.z();

    double zmin = mesh.nodes.front().z(), zmax = zmin;
    for (const auto& p : mesh.nodes) {
        zmin = std::min(zmin, p.z());
        zmax = std::max(zmax, p.z());
    }
    const double tol = 1e-9 * std::max(1.0, zmax - zmin);

    std::vector<int> uncovered;
    auto prescribe = [&](int node, int slice, std::vector<int>& set) {
        const Vec3& p = mesh.nodes[node];
        const auto v = slice_field(grid, slice, p.x(), p.y());
        if (!v) {
            uncovered.push_back(node);
            return;
        }
        set.push_back(node);
        for (int a = 0; a < 3; ++a) out.dirichlet.set(node, a, (*v)(a));
    };
    for (int n = 0; n < mesh.node_count(); ++n) {
        const double z = mesh.nodes[n].z();
        if (z >= out.upper_plane - tol) prescribe(n, upper, out.up_nodes);
        else if (z <= out.lower_plane + tol) prescribe(n, lower, out.down_nodes);
    }
    if (!uncovered.empty()) {
        std::ostringstream msg;
        msg << uncovered.size() << " BC node(s) outside the correlated slice region:";
        for (std::size_t i = 0; i < uncovered.size() && i < 16; ++i)
            msg << ' ' << uncovered[i];
        throw Error(errc::insufficient_coverage, msg.str());
    }
    if (out.up_nodes.empty() || out.down_nodes.empty())
        throw Error(errc::insufficient_coverage,
                    "no mesh nodes beyond one of the BC slice planes");
    return out;
}

ComparisonSet fe_at_dvc_points(const MeshIndex& mesh_index,
                               const Eigen::MatrixXd& displacements, const DvcGrid& grid,
                               const std::vector<bool>* keep) {
    grid.validate();
    if (displacements.rows() != mesh_index.mesh().node_count() || displacements.cols() != 3)
        throw Error(errc::contract, "displacement field does not match the mesh");
    if (keep && keep->size() != grid.point_count())
        throw Error(errc::contract, "keep mask does not match the grid");

    ComparisonSet out;
    std::size_t count = 0;
    for (int k = 0; k < grid.dims[2]; ++k)
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int i = 0; i < grid.dims[0]; ++i) {
                const std::size_t n = grid.index(i, j, k);
                if (!grid.correlated[n]) continue;
                if (keep && !(*keep)[n]) continue;
                const Vec3 p = grid.point(i, j, k);
                const auto u = interpolate_nodal_field(mesh_index, displacements, p);
                if (!u) continue;
                for (int a = 0; a < 3; ++a)
                    out.directions[a].push_back({p, grid.displacement[n][a], (*u)(a)});
                ++count;
            }
    if (count == 0)
        throw Error(errc::empty_comparison, "no qualifying FE/DVC comparison points");
    return out;
}

std::vector<bool> subset_trabecular(std::span<const Vec3> points, const VoxelVolume& mask) {
    if (mask.kind != VolumeKind::mask)
        throw Error(errc::kind_mismatch, "trabecular subset expects a mask volume");
    std::vector<bool> keep(points.size(), false);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto v = sample_nearest(mask, points[i]);
        keep[i] = v && *v > 0.5;
    }
    return keep;
}

std::vector<PairSample> subset_trabecular(const std::vector<PairSample>& samples,
                                          const VoxelVolume& mask) {
    if (mask.kind != VolumeKind::mask)
        throw Error(errc::kind_mismatch, "trabecular subset expects a mask volume");
    std::vector<PairSample> out;
    for (const auto& s : samples) {
        const auto v = sample_nearest(mask, s.point);
        if (v && *v > 0.5) out.push_back(s);
    }
    return out;
}

DirectionReliability direction_reliability(const DvcGrid& grid, double voxel_size) {
    grid.validate();
    if (voxel_size < 0.0) throw Error(errc::contract, "voxel size must be >= 0");
    DirectionReliability out;
    for (int a = 0; a < 3; ++a) {
        std::vector<double> mags;
        for (std::size_t n = 0; n < grid.point_count(); ++n)
            if (grid.correlated[n]) mags.push_back(std::abs(grid.displacement[n][a]));
        if (mags.empty()) {
            out.median_abs[a] = kNan;
            out.reliable[a] = false;
            continue;
        }
        std::sort(mags.begin(), mags.end());
        const std::size_t m = mags.size();
        out.median_abs[a] =
            m % 2 ? mags[m / 2] : 0.5 * (mags[m / 2 - 1] + mags[m / 2]);
        out.reliable[a] = !(out.median_abs[a] < voxel_size);
    }
    return out;
}

ExclusionReport exclusion_check(const ComparisonSet& comparison, const StrainGrid& strains,
                                const DvcGrid& grid, const std::vector<double>* uncertainty,
                                const ExclusionThresholds& thresholds) {
    grid.validate();
    if (strains.cell_dims[0] != grid.dims[0] - 1 || strains.cell_dims[1] != grid.dims[1] - 1 ||
        strains.cell_dims[2] != grid.dims[2] - 1)
        throw Error(errc::grid_mismatch, "strain grid does not match the DVC grid");
    if (uncertainty && uncertainty->size() != grid.point_count())
        throw Error(errc::contract, "uncertainty field does not match the grid");

    ExclusionReport report;

    // (i) measured principal strains against the plausibility limits
    {
        auto& c = report.criteria[0];
        c.name = "strain-limits";
        c.threshold = thresholds.strain_fraction;
        std::size_t evaluated = 0, over_limit = 0, over_warn = 0;
        for (int k = 0; k < grid.dims[2]; ++k)
            for (int j = 0; j < grid.dims[1]; ++j)
                for (int i = 0; i < grid.dims[0]; ++i) {
                    const auto t = point_strain(strains, i, j, k);
                    if (!t) continue;
                    ++evaluated;
                    Eigen::Matrix<double, 6, 1> eng = *t;
                    eng.tail<3>() *= 2.0;
                    const Eigen::Vector3d p = principal_strains(eng);
                    if (p(0) > thresholds.strain_limit || p(2) < -thresholds.strain_limit)
                        ++over_limit;
                    if (p(0) > thresholds.strain_warn || p(2) < -thresholds.strain_warn)
                        ++over_warn;
                }
        c.evaluated = evaluated > 0;
        c.value = c.evaluated ? static_cast<double>(over_limit) / evaluated : 0.0;
        c.exceeded = c.evaluated && c.value > c.threshold;
        std::ostringstream d;
        d << over_limit << " of " << evaluated << " points over "
          << 100.0 * thresholds.strain_limit << "% principal strain (" << over_warn
          << " over the " << 100.0 * thresholds.strain_warn << "% warning tier)";
        c.detail = d.str();
    }

    // (ii) correlated fraction of the bone interior
    {
        auto& c = report.criteria[1];
        c.name = "correlated-coverage";
        c.threshold = thresholds.min_correlated_fraction;
        std::size_t inside = 0, usable = 0;
        for (std::size_t n = 0; n < grid.point_count(); ++n) {
            if (!grid.inside_bone[n]) continue;
            ++inside;
            if (grid.correlated[n]) ++usable;
        }
        c.evaluated = inside > 0;
        c.value = c.evaluated ? static_cast<double>(usable) / inside : 0.0;
        c.exceeded = c.evaluated && c.value < c.threshold;
        std::ostringstream d;
        d << usable << " of " << inside << " inside-bone points correlate";
        c.detail = d.str();
    }

    // (iii) prediction error explained by the zero-strain uncertainty
    {
        auto& c = report.criteria[2];
        c.name = "error-uncertainty-correlation";
        c.threshold = thresholds.reliability_r2;
        if (!uncertainty) {
            c.detail = "not evaluated: no zero-strain uncertainty field";
        } else {
            static constexpr const char* axis_name[3] = {"x", "y", "z"};
            std::ostringstream d;
            for (int a = 0; a < 3; ++a) {
                std::vector<double> err, unc;
                for (const auto& s : comparison.directions[a]) {
                    int idx[3];
                    bool on_grid = true;
                    for (int ax = 0; ax < 3 && on_grid; ++ax) {
                        const double t = (s.point[ax] - grid.origin[ax]) / grid.spacing[ax];
                        idx[ax] = static_cast<int>(std::lround(t));
                        on_grid = std::abs(t - idx[ax]) < 1e-6 && idx[ax] >= 0 &&
                                  idx[ax] < grid.dims[ax];
                    }
                    if (!on_grid) continue;
                    const double u = (*uncertainty)[grid.index(idx[0], idx[1], idx[2])];
                    if (!std::isfinite(u)) continue;
                    unc.push_back(u);
                    err.push_back(std::abs(s.fe - s.dvc));
                }
                if (err.size() < 3) continue;
                const OlsFit fit = fit_ols(unc, err);
                if (fit.degenerate) continue;
                c.evaluated = true;
                if (!d.str().empty()) d << "; ";
                d << axis_name[a] << ": r2=" << fit.r2 << " slope=" << fit.slope;
                if (fit.slope > 0.0) {
                    c.value = std::max(c.value, fit.r2);
                    if (fit.r2 > c.threshold) c.exceeded = true;
                }
            }
            c.detail = c.evaluated ? d.str() : "not evaluated: insufficient data";
        }
    }

    for (const auto& c : report.criteria)
        if (c.evaluated && c.exceeded) report.excluded = true;
    return report;
}

ErrorPropagation propagate_displacement_error(const DvcGrid& grid,
                                              const std::vector<Vec3>& error,
                                              const std::vector<double>* uncertainty) {
    grid.validate();
    if (error.size() != grid.point_count())
        throw Error(errc::contract, "error field does not match the grid");
    if (uncertainty && uncertainty->size() != grid.point_count())
        throw Error(errc::contract, "uncertainty field does not match the grid");

    DvcGrid err_grid = grid;
    for (std::size_t n = 0; n < grid.point_count(); ++n)
        err_grid.displacement[n] = grid.correlated[n] ? error[n] : Vec3::Zero();

    ErrorPropagation out;
    const double h = grid.spacing.minCoeff();
    out.quick.assign(grid.point_count(), kNan);
    for (std::size_t n = 0; n < grid.point_count(); ++n)
        if (grid.correlated[n]) out.quick[n] = error[n].norm() / h;

    out.strain = differentiate_strains(err_grid);
    out.point_scalar = pointwise_strain_magnitude(err_grid);
    out.residual.assign(grid.point_count(), kNan);
    if (uncertainty)
        for (std::size_t n = 0; n < grid.point_count(); ++n) {
            const double s = out.point_scalar[n], u = (*uncertainty)[n];
            if (std::isfinite(s) && std::isfinite(u))
                out.residual[n] = std::max(0.0, s - u);
        }
    return out;
}

} // namespace hfev
