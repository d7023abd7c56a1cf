#include "hfev/materials.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace hfev {

void RigidTransform::validate() const {
    const Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw Error(errc::geometry, "transform rotation is not proper orthonormal");
}

void MaterialField::validate() const {
    const std::size_t n = density.size();
    if (modulus.size() != n || poisson.size() != n)
        throw Error(errc::contract, "material field arrays have mismatched lengths");
    for (std::size_t e = 0; e < n; ++e) {
        if (density[e] < 0.0) throw Error(errc::contract, "negative element density");
        if (!(modulus[e] > 0.0)) throw Error(errc::contract, "element modulus must be > 0");
        if (!(poisson[e] > 0.0 && poisson[e] < 0.5))
            throw Error(errc::contract, "Poisson ratio out of (0, 0.5)");
    }
    if (has_plasticity) {
        if (yield_stress.size() != n || hardening_modulus.size() != n)
            throw Error(errc::contract, "plasticity arrays have mismatched lengths");
        for (std::size_t e = 0; e < n; ++e) {
            if (!(yield_stress[e] > 0.0))
                throw Error(errc::contract, "yield stress must be > 0");
            if (hardening_modulus[e] < 0.0 || hardening_modulus[e] >= modulus[e])
                throw Error(errc::contract, "hardening modulus must satisfy 0 <= E_t < E");
        }
    }
}

namespace {

struct QuadPoint {
    std::array<double, 4> xi;
    double weight; // weights sum to 1 over the element
};

// Keast rules in barycentric coordinates, weights normalized to 1.
std::vector<QuadPoint> base_rule(int order) {
    std::vector<QuadPoint> pts;
    switch (order) {
    case 1:
        pts.push_back({{0.25, 0.25, 0.25, 0.25}, 1.0});
        break;
    case 2: {
        const double a = 0.585410196624969, b = 0.138196601125011;
        for (int i = 0; i < 4; ++i) {
            QuadPoint q{{b, b, b, b}, 0.25};
            q.xi[i] = a;
            pts.push_back(q);
        }
        break;
    }
    case 4: {
        // 11-point degree-4 rule: centroid + 4 vertex-biased + 6 edge-biased points.
        pts.push_back({{0.25, 0.25, 0.25, 0.25}, -0.078933333333333333});
        const double a = 11.0 / 14.0, b = 1.0 / 14.0;
        for (int i = 0; i < 4; ++i) {
            QuadPoint q{{b, b, b, b}, 0.045733333333333333};
            q.xi[i] = a;
            pts.push_back(q);
        }
        const double c = 0.399403576166799219, d = 0.100596423833200785;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 4; ++j) {
                QuadPoint q{{d, d, d, d}, 0.149333333333333333};
                q.xi[i] = c;
                q.xi[j] = c;
                pts.push_back(q);
            }
        break;
    }
    default:
        throw Error(errc::contract, "unsupported density quadrature order (use 1, 2 or 4)");
    }
    return pts;
}

// Expand the rule onto a red-refined subdivision of the reference tet.
// Each level splits every tet into 8 congruent children.
std::vector<QuadPoint> refined_rule(int order, int refine) {
    std::vector<QuadPoint> rule = base_rule(order);
    using Bary = std::array<double, 4>;
    std::vector<std::array<Bary, 4>> tets = {
        {Bary{1, 0, 0, 0}, Bary{0, 1, 0, 0}, Bary{0, 0, 1, 0}, Bary{0, 0, 0, 1}}};
    auto mid = [](const Bary& a, const Bary& b) {
        Bary m;
        for (int i = 0; i < 4; ++i) m[i] = 0.5 * (a[i] + b[i]);
        return m;
    };
    for (int level = 0; level < refine; ++level) {
        std::vector<std::array<Bary, 4>> next;
        next.reserve(tets.size() * 8);
        for (const auto& t : tets) {
            const Bary m01 = mid(t[0], t[1]), m02 = mid(t[0], t[2]), m03 = mid(t[0], t[3]);
            const Bary m12 = mid(t[1], t[2]), m13 = mid(t[1], t[3]), m23 = mid(t[2], t[3]);
            next.push_back({t[0], m01, m02, m03});
            next.push_back({t[1], m01, m12, m13});
            next.push_back({t[2], m02, m12, m23});
            next.push_back({t[3], m03, m13, m23});
            // octahedron split along the m01-m23 diagonal
            next.push_back({m01, m02, m03, m23});
            next.push_back({m01, m02, m12, m23});
            next.push_back({m01, m03, m13, m23});
            next.push_back({m01, m12, m13, m23});
        }
        tets = std::move(next);
    }
    if (refine == 0) return rule;

    std::vector<QuadPoint> out;
    out.reserve(rule.size() * tets.size());
    const double vol_frac = 1.0 / static_cast<double>(tets.size());
    for (const auto& t : tets) {
        for (const auto& q : rule) {
            QuadPoint p{};
            for (int i = 0; i < 4; ++i)
                p.xi[i] = q.xi[0] * t[0][i] + q.xi[1] * t[1][i] + q.xi[2] * t[2][i] +
                          q.xi[3] * t[3][i];
            p.weight = q.weight * vol_frac;
            out.push_back(p);
        }
    }
    return out;
}

double average_over_element(const Tet10Mesh& mesh, int element,
                            const std::vector<QuadPoint>& rule,
                            const std::function<std::optional<double>(const Vec3&)>& f) {
    const auto& el = mesh.elements[element];
    const Vec3& v0 = mesh.nodes[el[0]];
    const Vec3& v1 = mesh.nodes[el[1]];
    const Vec3& v2 = mesh.nodes[el[2]];
    const Vec3& v3 = mesh.nodes[el[3]];

    double acc = 0.0;
    bool any_inside = false;
    for (const auto& q : rule) {
        const Vec3 p = q.xi[0] * v0 + q.xi[1] * v1 + q.xi[2] * v2 + q.xi[3] * v3;
        if (const auto s = f(p)) {
            acc += q.weight * *s;
            any_inside = true;
        }
    }
    if (!any_inside)
        throw Error(errc::zero_overlap,
                    "element " + std::to_string(element) + " has no overlap with the volume");
    return acc;
}

MaterialField map_from_sampler(const Tet10Mesh& mesh, const MaterialMapConfig& cfg,
                               const std::function<std::optional<double>(const Vec3&)>& density_at,
                               std::vector<int>* failed) {
    const auto rule = refined_rule(cfg.quadrature.order, cfg.quadrature.refine);
    MaterialField mat;
    const int ne = mesh.element_count();
    mat.density.resize(ne);
    mat.modulus.resize(ne);
    mat.poisson.assign(ne, cfg.poisson);
    if (cfg.with_plasticity) {
        mat.has_plasticity = true;
        mat.yield_stress.resize(ne);
        mat.hardening_modulus.resize(ne);
    }
    for (int e = 0; e < ne; ++e) {
        double rho = 0.0, modulus = 0.0;
        try {
            rho = std::max(0.0, average_over_element(mesh, e, rule, density_at));
            if (cfg.average_modulus) {
                auto law_at = [&](const Vec3& p) -> std::optional<double> {
                    const auto d = density_at(p);
                    if (!d) return std::nullopt;
                    return density_to_modulus(std::max(0.0, *d), cfg.law, cfg.modulus_floor);
                };
                modulus = std::max(cfg.modulus_floor,
                                   average_over_element(mesh, e, rule, law_at));
            } else {
                modulus = density_to_modulus(rho, cfg.law, cfg.modulus_floor);
            }
        } catch (const Error& err) {
            if (err.code() == errc::zero_overlap && failed) {
                failed->push_back(e);
                continue;
            }
            throw;
        }
        mat.density[e] = rho;
        mat.modulus[e] = modulus;
        if (cfg.with_plasticity) {
            // Zero-density elements stay elastic at the floor modulus: give them
            // a nominal high yield so the return map never activates.
            mat.yield_stress[e] =
                rho > 0.0 ? yield_stress_from_density(rho) : 1e12;
            mat.hardening_modulus[e] = hardening_from_modulus(mat.modulus[e]);
        }
    }
    return mat;
}

} // namespace

double integrate_element_density(const VoxelVolume& density_volume, const Tet10Mesh& mesh,
                                 int element, const DensityQuadrature& quad) {
    if (density_volume.kind != VolumeKind::density)
        throw Error(errc::kind_mismatch, "integration expects a density volume");
    const auto rule = refined_rule(quad.order, quad.refine);
    const double rho = average_over_element(
        mesh, element, rule,
        [&](const Vec3& p) { return try_sample_trilinear(density_volume, p); });
    return std::max(0.0, rho);
}

double density_to_modulus(double rho_app, const ElasticityLaw& law, double e_min) {
    if (rho_app < 0.0) throw Error(errc::contract, "density must be >= 0");
    return std::max(law.coefficient * std::pow(rho_app, law.exponent), e_min);
}

double yield_stress_from_density(double rho_app) {
    if (!(rho_app > 0.0))
        throw Error(errc::contract, "yield stress undefined for non-positive density");
    return 21.70 * std::pow(rho_app, 1.52);
}

double hardening_from_modulus(double modulus) {
    if (!(modulus > 0.0)) throw Error(errc::contract, "hardening requires modulus > 0");
    return 0.05 * modulus;
}

MaterialField map_materials(const Tet10Mesh& mesh, const VoxelVolume& density_volume,
                            const MaterialMapConfig& cfg) {
    if (density_volume.kind != VolumeKind::density)
        throw Error(errc::kind_mismatch, "material mapping expects a density volume");
    std::vector<int> failed;
    MaterialField mat = map_from_sampler(
        mesh, cfg, [&](const Vec3& p) { return try_sample_trilinear(density_volume, p); },
        &failed);
    if (!failed.empty()) {
        std::ostringstream msg;
        msg << failed.size() << " element(s) with no volume overlap:";
        for (std::size_t i = 0; i < failed.size() && i < 16; ++i) msg << ' ' << failed[i];
        throw Error(errc::zero_overlap, msg.str());
    }
    return mat;
}

MaterialField remap_materials(const Tet10Mesh& mesh, const RigidTransform& transform,
                              const VoxelVolume& clinical_grey, const DensityCalibration& cal,
                              const MaterialMapConfig& cfg) {
    transform.validate();
    if (clinical_grey.kind != VolumeKind::grey)
        throw Error(errc::kind_mismatch, "remap expects a grey clinical volume");

    // The mesh itself is never modified; sampling happens in the clinical
    // frame by transforming each quadrature point on the fly.
    std::vector<int> failed;
    auto density_at = [&](const Vec3& p) -> std::optional<double> {
        const auto gv = try_sample_trilinear(clinical_grey, transform.apply(p));
        if (!gv) return std::nullopt;
        return std::max(0.0, cal.apply(*gv));
    };
    MaterialField mat = map_from_sampler(mesh, cfg, density_at, &failed);
    if (!failed.empty()) {
        std::ostringstream msg;
        msg << failed.size()
            << " element(s) with no clinical-volume overlap after transform:";
        for (std::size_t i = 0; i < failed.size() && i < 16; ++i) msg << ' ' << failed[i];
        throw Error(errc::zero_overlap, msg.str());
    }
    return mat;
}

} // namespace hfev
