#include "hfev/volume.hpp"

#include <cmath>

namespace hfev {

bool VoxelVolume::in_sample_domain(const Vec3& p) const {
    for (int a = 0; a < 3; ++a) {
        const double lo = origin[a];
        const double hi = origin[a] + (dims[a] - 1) * spacing[a];
        if (p[a] < lo || p[a] > hi) return false;
    }
    return true;
}

void VoxelVolume::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw Error(errc::geometry, "volume dims must be >= 1");
        if (!(spacing[a] > 0.0)) throw Error(errc::geometry, "volume spacing must be > 0");
    }
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    if (values.size() != n) throw Error(errc::geometry, "volume value count does not match dims");
    if (kind == VolumeKind::mask) {
        for (float v : values)
            if (v != 0.0f && v != 1.0f)
                throw Error(errc::geometry, "mask volume contains values other than {0,1}");
    }
}

CalibrationFit fit_calibration(std::span<const std::pair<double, double>> samples) {
    if (samples.size() < 2)
        throw Error(errc::calibration_degenerate, "calibration needs at least 2 phantom samples");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(samples.size());
    for (const auto& [gv, rho] : samples) {
        sx += gv;
        sy += rho;
        sxx += gv * gv;
        sxy += gv * rho;
    }
    const double det = n * sxx - sx * sx;
    // det == 0 iff all grey values coincide
    const double scale = sxx > 0 ? sxx : 1.0;
    if (std::abs(det) <= 1e-12 * n * scale)
        throw Error(errc::calibration_degenerate, "calibration grey values are all identical");

    CalibrationFit fit;
    fit.cal.slope = (n * sxy - sx * sy) / det;
    fit.cal.intercept = (sy - fit.cal.slope * sx) / n;
    double ssr = 0;
    for (const auto& [gv, rho] : samples) {
        const double r = rho - (fit.cal.slope * gv + fit.cal.intercept);
        ssr += r * r;
    }
    fit.rms_residual = std::sqrt(ssr / n);
    return fit;
}

VoxelVolume grey_to_density(const VoxelVolume& volume, const DensityCalibration& cal) {
    if (volume.kind != VolumeKind::grey)
        throw Error(errc::kind_mismatch, "grey_to_density expects a grey-value volume");

    VoxelVolume out = volume;
    out.kind = VolumeKind::density;
    for (float& v : out.values) {
        const double rho = cal.apply(static_cast<double>(v));
        v = static_cast<float>(rho > 0.0 ? rho : 0.0);
    }
    return out;
}

namespace {

struct CellCoords {
    int i, j, k;       // lower corner voxel
    double fx, fy, fz; // fractions in [0,1]
};

std::optional<CellCoords> cell_coords(const VoxelVolume& v, const Vec3& p) {
    if (!v.in_sample_domain(p)) return std::nullopt;
    CellCoords c{};
    const double gx = (p.x() - v.origin.x()) / v.spacing.x();
    const double gy = (p.y() - v.origin.y()) / v.spacing.y();
    const double gz = (p.z() - v.origin.z()) / v.spacing.z();
    auto split = [](double g, int n, int& i, double& f) {
        i = static_cast<int>(std::floor(g));
        if (i > n - 2) i = n - 2; // p exactly on the far boundary
        if (i < 0) i = 0;         // single-voxel axis
        f = g - i;
    };
    split(gx, v.dims[0], c.i, c.fx);
    split(gy, v.dims[1], c.j, c.fy);
    split(gz, v.dims[2], c.k, c.fz);
    return c;
}

} // namespace

std::optional<double> try_sample_trilinear(const VoxelVolume& volume, const Vec3& p) {
    const auto c = cell_coords(volume, p);
    if (!c) return std::nullopt;

    // Degenerate axes (dims==1) interpolate as constant along that axis.
    const int i1 = volume.dims[0] > 1 ? c->i + 1 : c->i;
    const int j1 = volume.dims[1] > 1 ? c->j + 1 : c->j;
    const int k1 = volume.dims[2] > 1 ? c->k + 1 : c->k;

    const double c000 = volume.at(c->i, c->j, c->k);
    const double c100 = volume.at(i1, c->j, c->k);
    const double c010 = volume.at(c->i, j1, c->k);
    const double c110 = volume.at(i1, j1, c->k);
    const double c001 = volume.at(c->i, c->j, k1);
    const double c101 = volume.at(i1, c->j, k1);
    const double c011 = volume.at(c->i, j1, k1);
    const double c111 = volume.at(i1, j1, k1);

    const double x = c->fx, y = c->fy, z = c->fz;
    const double c00 = c000 * (1 - x) + c100 * x;
    const double c10 = c010 * (1 - x) + c110 * x;
    const double c01 = c001 * (1 - x) + c101 * x;
    const double c11 = c011 * (1 - x) + c111 * x;
    const double c0 = c00 * (1 - y) + c10 * y;
    const double c1 = c01 * (1 - y) + c11 * y;
    return c0 * (1 - z) + c1 * z;
}

double sample_trilinear(const VoxelVolume& volume, const Vec3& p) {
    const auto s = try_sample_trilinear(volume, p);
    if (!s) throw Error(errc::out_of_bounds, "sample point outside volume domain");
    return *s;
}

std::optional<double> sample_nearest(const VoxelVolume& volume, const Vec3& p) {
    std::array<int, 3> idx;
    for (int a = 0; a < 3; ++a) {
        const double g = (p[a] - volume.origin[a]) / volume.spacing[a];
        const int i = static_cast<int>(std::lround(g));
        if (i < 0 || i >= volume.dims[a]) {
            // allow the half-voxel rim around the outermost centers
            if (g < -0.5 || g > volume.dims[a] - 0.5) return std::nullopt;
        }
        idx[a] = std::min(std::max(i, 0), volume.dims[a] - 1);
    }
    return static_cast<double>(volume.at(idx[0], idx[1], idx[2]));
}

} // namespace hfev
