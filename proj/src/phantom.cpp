#include "hfev/phantom.hpp"

#include <array>
#include <cmath>
#include <map>

#include "hfev/error.hpp"

namespace hfev {

void PhantomSpec::validate() const {
    if (radius_x <= 0.0 || radius_y <= 0.0 || height <= 0.0)
        throw Error(errc::spec, "phantom radii and height must be positive");
    if (shell_thickness <= 0.0)
        throw Error(errc::spec, "phantom shell thickness must be positive");
    if (radius_x - shell_thickness <= 0.0 || radius_y - shell_thickness <= 0.0 ||
        height - 2.0 * shell_thickness <= 0.0)
        throw Error(errc::spec, "phantom shell leaves no trabecular core");
    if (trabecular_density < 0.0 || shell_density < 0.0)
        throw Error(errc::spec, "phantom densities must be >= 0");
    if (lesion) {
        if (lesion->radius <= 0.0)
            throw Error(errc::spec, "lesion radius must be positive");
        if (lesion->multiplier < 0.0 || lesion->multiplier > 1.0)
            throw Error(errc::spec, "lesion multiplier must be in [0, 1]");
        if (lesion->center.z() - lesion->radius < 0.0 ||
            lesion->center.z() + lesion->radius > height)
            throw Error(errc::spec, "lesion extends beyond the phantom height");
        for (int s = 0; s < 256; ++s) {
            const double theta = 2.0 * M_PI * s / 256.0;
            const double x = lesion->center.x() + lesion->radius * std::cos(theta);
            const double y = lesion->center.y() + lesion->radius * std::sin(theta);
            const double ex = x / radius_x, ey = y / radius_y;
            if (ex * ex + ey * ey > 1.0 + 1e-12)
                throw Error(errc::spec, "lesion extends beyond the phantom wall");
        }
    }
}

namespace {

Tet10Mesh build_column_mesh(const PhantomSpec& spec, double edge) {
    const int nz = static_cast<int>(std::floor(spec.height / edge + 1e-9));
    if (nz < 1)
        throw Error(errc::spec, "mesh edge length exceeds the phantom height");
    const int mx = static_cast<int>(std::ceil(spec.radius_x / edge));
    const int my = static_cast<int>(std::ceil(spec.radius_y / edge));

    auto corner_inside = [&](int i, int j) {
        const double ex = i * edge / spec.radius_x;
        const double ey = j * edge / spec.radius_y;
        return ex * ex + ey * ey <= 1.0 + 1e-12;
    };
    auto cell_inside = [&](int i, int j) {
        return corner_inside(i, j) && corner_inside(i + 1, j) &&
               corner_inside(i, j + 1) && corner_inside(i + 1, j + 1);
    };

    // Six tets per cube sharing the main diagonal; the lattice of such splits
    // is conforming across neighbouring cubes. Odd vertex permutations are
    // reordered for a positive Jacobian.
    static const std::array<std::array<int, 3>, 6> kPerms = {{
        {0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2}}};
    static const std::array<bool, 6> kOdd = {false, false, false, true, true, true};

    Tet10Mesh mesh;
    std::map<std::array<int, 3>, int> node_ids; // doubled lattice coordinates
    auto node_at = [&](const std::array<int, 3>& key) {
        auto [it, inserted] = node_ids.try_emplace(key, static_cast<int>(mesh.nodes.size()));
        if (inserted)
            mesh.nodes.emplace_back(0.5 * edge * key[0], 0.5 * edge * key[1],
                                    0.5 * edge * key[2]);
        return it->second;
    };

    for (int k = 0; k < nz; ++k)
        for (int j = -my; j < my; ++j)
            for (int i = -mx; i < mx; ++i) {
                if (!cell_inside(i, j)) continue;
                const std::array<int, 3> base = {2 * i, 2 * j, 2 * k};
                for (int t = 0; t < 6; ++t) {
                    std::array<std::array<int, 3>, 4> v;
                    v[0] = base;
                    for (int s = 0; s < 3; ++s) {
                        v[s + 1] = v[s];
                        v[s + 1][kPerms[t][s]] += 2;
                    }
                    if (kOdd[t]) std::swap(v[1], v[2]);

                    std::array<int, 10> el;
                    for (int s = 0; s < 4; ++s) el[s] = node_at(v[s]);
                    for (int e = 0; e < 6; ++e) {
                        const auto [a, b] = kTet10Edges[e];
                        std::array<int, 3> mid;
                        for (int c = 0; c < 3; ++c) mid[c] = (v[a][c] + v[b][c]) / 2;
                        el[4 + e] = node_at(mid);
                    }
                    mesh.elements.push_back(el);
                }
            }
    if (mesh.elements.empty())
        throw Error(errc::spec, "mesh edge length too coarse for the phantom footprint");
    mesh.validate();
    return mesh;
}

} // namespace

Phantom generate_phantom(const PhantomSpec& spec, double voxel_size, double mesh_edge) {
    spec.validate();
    if (voxel_size <= 0.0) throw Error(errc::spec, "voxel size must be positive");
    if (voxel_size > spec.shell_thickness)
        throw Error(errc::spec, "voxel size must not exceed the shell thickness");
    if (mesh_edge < 2.0 * voxel_size)
        throw Error(errc::spec, "mesh edge length must be at least twice the voxel size");

    Phantom out;
    auto& vol = out.density;
    const double half_x = spec.radius_x + 2.0 * voxel_size;
    const double half_y = spec.radius_y + 2.0 * voxel_size;
    vol.dims = {static_cast<int>(std::ceil(2.0 * half_x / voxel_size)),
                static_cast<int>(std::ceil(2.0 * half_y / voxel_size)),
                static_cast<int>(std::ceil((spec.height + 4.0 * voxel_size) / voxel_size))};
    vol.spacing = Vec3::Constant(voxel_size);
    // Voxel centers placed symmetrically about the body (origin is the center
    // of voxel (0,0,0)).
    vol.origin = Vec3(-0.5 * (vol.dims[0] - 1) * voxel_size,
                      -0.5 * (vol.dims[1] - 1) * voxel_size,
                      0.5 * (spec.height - (vol.dims[2] - 1) * voxel_size));
    vol.kind = VolumeKind::density;
    vol.values.assign(static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2],
                      0.0f);

    out.mask = vol;
    out.mask.kind = VolumeKind::mask;

    const double t = spec.shell_thickness;
    const double lesion_r2 = spec.lesion ? spec.lesion->radius * spec.lesion->radius : 0.0;
    for (int k = 0; k < vol.dims[2]; ++k)
        for (int j = 0; j < vol.dims[1]; ++j)
            for (int i = 0; i < vol.dims[0]; ++i) {
                const Vec3 p = vol.voxel_center(i, j, k);
                const double ex = p.x() / spec.radius_x, ey = p.y() / spec.radius_y;
                if (ex * ex + ey * ey > 1.0 || p.z() < 0.0 || p.z() > spec.height)
                    continue;
                const double ix = p.x() / (spec.radius_x - t);
                const double iy = p.y() / (spec.radius_y - t);
                const bool core = ix * ix + iy * iy <= 1.0 && p.z() >= t &&
                                  p.z() <= spec.height - t;
                double rho = core ? spec.trabecular_density : spec.shell_density;
                if (spec.lesion &&
                    (p - spec.lesion->center).squaredNorm() <= lesion_r2)
                    rho *= spec.lesion->multiplier;
                const std::size_t n = vol.index(i, j, k);
                vol.values[n] = static_cast<float>(rho);
                out.mask.values[n] = core ? 1.0f : 0.0f;
            }

    out.mesh = build_column_mesh(spec, mesh_edge);
    return out;
}

} // namespace hfev
