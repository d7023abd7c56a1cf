#include "hfev/dvc.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace hfev {

void DvcGrid::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw Error(errc::contract, "grid dims must be >= 1");
        if (!(spacing[a] > 0.0)) throw Error(errc::contract, "grid spacing must be > 0");
    }
    if (displacement.size() != point_count() || correlated.size() != point_count() ||
        inside_bone.size() != point_count())
        throw Error(errc::contract, "grid array sizes do not match dims");
    for (std::size_t n = 0; n < point_count(); ++n)
        if (correlated[n] && !displacement[n].allFinite())
            throw Error(errc::contract, "correlated point carries non-finite displacement");
}

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct CellHit {
    int i, j, k;
    Vec3 frac;
};

std::optional<CellHit> containing_cell(const DvcGrid& grid, const Vec3& p) {
    CellHit hit{};
    int* cell_index[3] = {&hit.i, &hit.j, &hit.k};
    for (int a = 0; a < 3; ++a) {
        if (grid.dims[a] < 2) return std::nullopt;
        const double t = (p[a] - grid.origin[a]) / grid.spacing[a];
        const double hi = grid.dims[a] - 1.0;
        const double tol = 1e-9;
        if (t < -tol || t > hi + tol) return std::nullopt;
        const double tc = std::min(std::max(t, 0.0), hi);
        int cell = static_cast<int>(std::floor(tc));
        if (cell > grid.dims[a] - 2) cell = grid.dims[a] - 2;
        *cell_index[a] = cell;
        hit.frac[a] = tc - cell;
    }
    return hit;
}

Eigen::Matrix<double, 6, 1> symmetrize(const Eigen::Matrix3d& grad) {
    Eigen::Matrix<double, 6, 1> v;
    v << grad(0, 0), grad(1, 1), grad(2, 2),
        0.5 * (grad(0, 1) + grad(1, 0)),
        0.5 * (grad(1, 2) + grad(2, 1)),
        0.5 * (grad(0, 2) + grad(2, 0));
    return v;
}

} // namespace

std::optional<Vec3> trilinear_displacement(const DvcGrid& grid, const Vec3& p) {
    const auto hit = containing_cell(grid, p);
    if (!hit) return std::nullopt;
    Vec3 value = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
        const int a = c & 1, b = (c >> 1) & 1, d = (c >> 2) & 1;
        if (!grid.is_correlated(hit->i + a, hit->j + b, hit->k + d)) return std::nullopt;
        const double w = (a ? hit->frac.x() : 1.0 - hit->frac.x()) *
                         (b ? hit->frac.y() : 1.0 - hit->frac.y()) *
                         (d ? hit->frac.z() : 1.0 - hit->frac.z());
        value += w * grid.displacement[grid.index(hit->i + a, hit->j + b, hit->k + d)];
    }
    return value;
}

StrainGrid differentiate_strains(const DvcGrid& grid) {
    grid.validate();
    for (int a = 0; a < 3; ++a)
        if (grid.dims[a] < 2)
            throw Error(errc::empty_strain, "grid has no cells to differentiate");

    StrainGrid out;
    out.cell_dims = {grid.dims[0] - 1, grid.dims[1] - 1, grid.dims[2] - 1};
    out.spacing = grid.spacing;
    out.origin = grid.origin;
    out.tensor.assign(out.cell_count(), Eigen::Matrix<double, 6, 1>::Constant(kNan));
    out.defined.assign(out.cell_count(), 0);
    out.cell_peak.assign(out.cell_count(), kNan);

    bool any_defined = false;
    for (int k = 0; k < out.cell_dims[2]; ++k)
        for (int j = 0; j < out.cell_dims[1]; ++j)
            for (int i = 0; i < out.cell_dims[0]; ++i) {
                bool ok = true;
                Vec3 corner[2][2][2];
                for (int d = 0; d < 2 && ok; ++d)
                    for (int b = 0; b < 2 && ok; ++b)
                        for (int a = 0; a < 2 && ok; ++a) {
                            if (!grid.is_correlated(i + a, j + b, k + d)) {
                                ok = false;
                                break;
                            }
                            corner[a][b][d] =
                                grid.displacement[grid.index(i + a, j + b, k + d)];
                        }
                if (!ok) continue;

                // Gradient of the trilinear interpolant at the cell center:
                // each axis averages the four parallel edge differences.
                Eigen::Matrix3d grad;
                Vec3 dx = Vec3::Zero(), dy = Vec3::Zero(), dz = Vec3::Zero();
                for (int b = 0; b < 2; ++b)
                    for (int d = 0; d < 2; ++d) {
                        dx += corner[1][b][d] - corner[0][b][d];
                        dy += corner[b][1][d] - corner[b][0][d];
                        dz += corner[b][d][1] - corner[b][d][0];
                    }
                grad.col(0) = dx / (4.0 * grid.spacing.x());
                grad.col(1) = dy / (4.0 * grid.spacing.y());
                grad.col(2) = dz / (4.0 * grid.spacing.z());
                const std::size_t ci = out.index(i, j, k);
                out.tensor[ci] = symmetrize(grad);
                out.defined[ci] = 1;
                any_defined = true;

                // The gradient of a trilinear interpolant is monotone along
                // each axis, so component extrema sit at the corners where it
                // reduces to plain edge differences.
                double peak = 0.0;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        for (int d = 0; d < 2; ++d) {
                            Eigen::Matrix3d g;
                            g.col(0) = (corner[1][b][d] - corner[0][b][d]) /
                                       grid.spacing.x();
                            g.col(1) = (corner[a][1][d] - corner[a][0][d]) /
                                       grid.spacing.y();
                            g.col(2) = (corner[a][b][1] - corner[a][b][0]) /
                                       grid.spacing.z();
                            peak = std::max(
                                peak, symmetrize(g).cwiseAbs().maxCoeff());
                        }
                out.cell_peak[ci] = peak;
            }
    if (!any_defined)
        throw Error(errc::empty_strain, "grid has no fully correlated cell");
    return out;
}

std::optional<Eigen::Matrix<double, 6, 1>> point_strain(const StrainGrid& strains,
                                                        int i, int j, int k) {
    Eigen::Matrix<double, 6, 1> acc = Eigen::Matrix<double, 6, 1>::Zero();
    int count = 0;
    for (int dk = -1; dk <= 0; ++dk)
        for (int dj = -1; dj <= 0; ++dj)
            for (int di = -1; di <= 0; ++di) {
                const int ci = i + di, cj = j + dj, ck = k + dk;
                if (ci < 0 || cj < 0 || ck < 0 || ci >= strains.cell_dims[0] ||
                    cj >= strains.cell_dims[1] || ck >= strains.cell_dims[2])
                    continue;
                const std::size_t c = strains.index(ci, cj, ck);
                if (!strains.defined[c]) continue;
                acc += strains.tensor[c];
                ++count;
            }
    if (count == 0) return std::nullopt;
    return acc / count;
}

std::vector<double> pointwise_strain_magnitude(const DvcGrid& grid) {
    const StrainGrid strains = differentiate_strains(grid);
    std::vector<double> out(grid.point_count(), kNan);
    for (int k = 0; k < grid.dims[2]; ++k)
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int i = 0; i < grid.dims[0]; ++i) {
                double acc = 0.0;
                int cells = 0;
                for (int dk = -1; dk <= 0; ++dk)
                    for (int dj = -1; dj <= 0; ++dj)
                        for (int di = -1; di <= 0; ++di) {
                            const int ci = i + di, cj = j + dj, ck = k + dk;
                            if (ci < 0 || cj < 0 || ck < 0 ||
                                ci >= strains.cell_dims[0] ||
                                cj >= strains.cell_dims[1] ||
                                ck >= strains.cell_dims[2])
                                continue;
                            const std::size_t c = strains.index(ci, cj, ck);
                            if (!strains.defined[c]) continue;
                            acc += strains.tensor[c].cwiseAbs().sum();
                            ++cells;
                        }
                if (cells > 0) out[grid.index(i, j, k)] = acc / (6.0 * cells);
            }
    return out;
}

std::vector<double> zero_strain_uncertainty(const DvcGrid& grid_a, const DvcGrid& grid_b) {
    if (!grid_a.same_geometry(grid_b))
        throw Error(errc::grid_mismatch, "unloaded grids have different geometry");
    grid_a.validate();
    grid_b.validate();
    DvcGrid diff = grid_a;
    for (std::size_t n = 0; n < diff.point_count(); ++n) {
        diff.correlated[n] = grid_a.correlated[n] && grid_b.correlated[n];
        diff.displacement[n] =
            diff.correlated[n] ? Vec3(grid_a.displacement[n] - grid_b.displacement[n])
                               : Vec3::Zero();
    }
    return pointwise_strain_magnitude(diff);
}

DvcGrid synthesize_dvc(const MeshIndex& mesh_index, const Eigen::MatrixXd& displacements,
                       const std::array<int, 3>& dims, const Vec3& spacing,
                       const Vec3& origin, const DvcSynthesisConfig& cfg) {
    if (displacements.rows() != mesh_index.mesh().node_count() || displacements.cols() != 3)
        throw Error(errc::contract, "displacement field does not match the mesh");
    DvcGrid grid;
    grid.dims = dims;
    grid.spacing = spacing;
    grid.origin = origin;
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw Error(errc::contract, "grid dims must be >= 1");
        if (!(spacing[a] > 0.0)) throw Error(errc::contract, "grid spacing must be > 0");
    }
    grid.displacement.assign(grid.point_count(), Vec3::Zero());
    grid.correlated.assign(grid.point_count(), 0);
    grid.inside_bone.assign(grid.point_count(), 0);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);

    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                // Draw for every point so the stream depends on the seed only,
                // not on which points end up correlated.
                Vec3 jitter = Vec3::Zero();
                if (cfg.noise_sigma > 0.0) jitter = Vec3(noise(rng), noise(rng), noise(rng));

                const Vec3 p = grid.point(i, j, k);
                const auto u = interpolate_nodal_field(mesh_index, displacements, p);
                if (!u) continue;
                const std::size_t n = grid.index(i, j, k);
                grid.inside_bone[n] = 1;
                if (cfg.density) {
                    const auto rho = try_sample_trilinear(*cfg.density, p);
                    if (!rho || *rho < cfg.min_density) continue;
                }
                grid.displacement[n] = Vec3((*u)(0), (*u)(1), (*u)(2)) + jitter;
                grid.correlated[n] = 1;
            }
    return grid;
}

} // namespace hfev
