#include "hfev/materials.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_meshes.hpp"

using namespace hfev;

namespace {

VoxelVolume density_volume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin) {
    VoxelVolume v;
    v.dims = dims;
    v.spacing = spacing;
    v.origin = origin;
    v.kind = VolumeKind::density;
    v.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0.0f);
    return v;
}

// Uniform sample inside the vertex tet of element e via barycentric folding.
Vec3 random_point_in_tet(const Tet10Mesh& mesh, int e, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double s = u(rng), t = u(rng), w = u(rng);
    if (s + t > 1.0) {
        s = 1.0 - s;
        t = 1.0 - t;
    }
    if (t + w > 1.0) {
        const double tw = w;
        w = 1.0 - s - t;
        t = 1.0 - tw;
    } else if (s + t + w > 1.0) {
        const double tw = w;
        w = s + t + w - 1.0;
        s = 1.0 - t - tw;
    }
    const auto& el = mesh.elements[e];
    return (1.0 - s - t - w) * mesh.nodes[el[0]] + s * mesh.nodes[el[1]] +
           t * mesh.nodes[el[2]] + w * mesh.nodes[el[3]];
}

} // namespace

TEST(Laws, DensityToModulus) {
    EXPECT_DOUBLE_EQ(density_to_modulus(2.0, {100.0, 2.0}, 0.01), 400.0);
    EXPECT_DOUBLE_EQ(density_to_modulus(0.0, {100.0, 2.0}, 0.01), 0.01);
    EXPECT_NEAR(density_to_modulus(0.5, {4730.0, 1.56}, 0.01), 1604.184617206872, 1e-9);
}

TEST(Laws, YieldStress) {
    EXPECT_DOUBLE_EQ(yield_stress_from_density(1.0), 21.70);
    EXPECT_NEAR(yield_stress_from_density(0.25), 2.6383265448558246, 1e-12);
    EXPECT_THROW(yield_stress_from_density(0.0), Error);
}

TEST(Laws, HardeningModulus) {
    EXPECT_DOUBLE_EQ(hardening_from_modulus(1000.0), 50.0);
    EXPECT_DOUBLE_EQ(hardening_from_modulus(4730.0), 236.5);
    EXPECT_THROW(hardening_from_modulus(0.0), Error);
}

TEST(Laws, Monotonicity) {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    const ElasticityLaw law{4730.0, 1.56};
    for (int t = 0; t < 200; ++t) {
        double r1 = u(rng), r2 = u(rng);
        if (r1 > r2) std::swap(r1, r2);
        EXPECT_LE(density_to_modulus(r1, law, 0.01), density_to_modulus(r2, law, 0.01));
        EXPECT_LT(yield_stress_from_density(r1), yield_stress_from_density(r2));
    }
}

TEST(Integration, UniformField) {
    auto vol = density_volume({8, 8, 8}, {0.5, 0.5, 0.5}, {-1.0, -1.0, -1.0});
    std::fill(vol.values.begin(), vol.values.end(), 1.2f);
    const auto mesh = testutil::two_tets();
    for (int e = 0; e < mesh.element_count(); ++e)
        EXPECT_NEAR(integrate_element_density(vol, mesh, e), 1.2, 1e-6);
}

TEST(Integration, LinearFieldAveragesToCentroid) {
    // rho(x) = x/4 + 1/2 with dyadic coefficients: float32 stores it exactly,
    // and the volume average over a tet is the centroid value.
    auto vol = density_volume({9, 9, 9}, {0.5, 0.5, 0.5}, {-2.0, -2.0, -2.0});
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 9; ++i)
                vol.values[vol.index(i, j, k)] =
                    static_cast<float>(0.25 * vol.voxel_center(i, j, k).x() + 0.5);
    const auto mesh = testutil::two_tets();
    for (int e = 0; e < mesh.element_count(); ++e) {
        const double expected = 0.25 * mesh.element_centroid(e).x() + 0.5;
        EXPECT_NEAR(integrate_element_density(vol, mesh, e), expected, 1e-10);
    }
}

TEST(Integration, CheckerboardMatchesMonteCarlo) {
    auto vol = density_volume({16, 16, 16}, {0.25, 0.25, 0.25}, {0.0, 0.0, 0.0});
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i)
                vol.values[vol.index(i, j, k)] = static_cast<float>((i + j + k) % 2);

    const auto mesh = testutil::from_tets(
        {{0.5, 0.5, 0.5}, {3.2, 0.7, 0.6}, {0.9, 3.1, 0.8}, {0.7, 0.9, 3.3}}, {{0, 1, 2, 3}});

    std::mt19937 rng(19);
    double sum = 0.0;
    const int samples = 1000000;
    for (int s = 0; s < samples; ++s)
        sum += sample_trilinear(vol, random_point_in_tet(mesh, 0, rng));
    const double mc = sum / samples;

    const double quad = integrate_element_density(vol, mesh, 0, {4, 3});
    EXPECT_NEAR(quad, mc, 0.02 * std::max(mc, 1e-12));
}

TEST(Integration, OutsideSamplesContributeZero) {
    auto vol = density_volume({4, 4, 4}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0});
    std::fill(vol.values.begin(), vol.values.end(), 1.0f);
    // Tet half inside the volume: average must drop below the uniform value.
    const auto mesh = testutil::from_tets(
        {{-3.0, 1.0, 1.0}, {3.0, 1.0, 1.0}, {1.5, 2.5, 1.0}, {1.5, 1.5, 2.5}}, {{0, 1, 2, 3}});
    const double rho = integrate_element_density(vol, mesh, 0);
    EXPECT_GT(rho, 0.0);
    EXPECT_LT(rho, 1.0);
}

TEST(Integration, ZeroOverlapError) {
    auto vol = density_volume({2, 2, 2}, {1.0, 1.0, 1.0}, {100.0, 100.0, 100.0});
    const auto mesh = testutil::single_tet();
    try {
        integrate_element_density(vol, mesh, 0);
        FAIL() << "element outside the volume must raise";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::zero_overlap);
    }
}

TEST(Mapping, UniformVolumeWithPlasticity) {
    auto vol = density_volume({12, 12, 12}, {0.5, 0.5, 0.5}, {-2.0, -2.0, -2.0});
    std::fill(vol.values.begin(), vol.values.end(), 1.2f);
    const auto mesh = testutil::two_tets();
    MaterialMapConfig cfg;
    cfg.with_plasticity = true;
    const auto mat = map_materials(mesh, vol, cfg);
    ASSERT_EQ(mat.element_count(), 2);
    ASSERT_TRUE(mat.has_plasticity);
    for (int e = 0; e < 2; ++e) {
        EXPECT_NEAR(mat.density[e], 1.2, 1e-6);
        EXPECT_NEAR(mat.modulus[e], 6286.137619188566, 1.0);
        EXPECT_DOUBLE_EQ(mat.poisson[e], 0.3);
        EXPECT_NEAR(mat.yield_stress[e], 28.62959654210327, 0.01);
        EXPECT_NEAR(mat.hardening_modulus[e], 0.05 * mat.modulus[e], 1e-9);
    }
}

TEST(Remap, IdentityTransformMatchesDirectMapping) {
    auto direct = density_volume({10, 10, 10}, {0.5, 0.5, 0.5}, {-1.5, -1.5, -1.5});
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(0.1, 1.5);
    for (float& v : direct.values) v = static_cast<float>(u(rng));

    VoxelVolume clinical = direct;
    clinical.kind = VolumeKind::grey;

    const auto mesh = testutil::two_tets();
    const MaterialMapConfig cfg;
    const auto a = map_materials(mesh, direct, cfg);
    const auto b = remap_materials(mesh, RigidTransform{}, clinical, {1.0, 0.0}, cfg);
    ASSERT_EQ(a.element_count(), b.element_count());
    for (int e = 0; e < a.element_count(); ++e) {
        EXPECT_NEAR(b.density[e], a.density[e], 1e-6 * std::max(1.0, a.density[e]));
        EXPECT_NEAR(b.modulus[e], a.modulus[e], 1e-6 * a.modulus[e]);
    }
}

TEST(Remap, TranslationCovariance) {
    auto direct = density_volume({10, 10, 10}, {0.5, 0.5, 0.5}, {-1.5, -1.5, -1.5});
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u(0.1, 1.5);
    for (float& v : direct.values) v = static_cast<float>(u(rng));

    const Vec3 t(10.0, -4.0, 2.5);
    VoxelVolume clinical = direct;
    clinical.kind = VolumeKind::grey;
    clinical.origin += t;

    RigidTransform tr;
    tr.translation = t;

    const auto mesh = testutil::two_tets();
    const auto nodes_before = mesh.nodes;
    const MaterialMapConfig cfg;
    const auto a = map_materials(mesh, direct, cfg);
    const auto b = remap_materials(mesh, tr, clinical, {1.0, 0.0}, cfg);
    for (int e = 0; e < a.element_count(); ++e)
        EXPECT_NEAR(b.modulus[e], a.modulus[e], 1e-9 * a.modulus[e]);
    for (int n = 0; n < mesh.node_count(); ++n)
        EXPECT_TRUE((mesh.nodes[n].array() == nodes_before[n].array()).all());
}

TEST(Remap, QuarterTurnWithRotatedField) {
    // Smooth analytic density; the clinical volume stores the same field
    // expressed in a frame rotated 90 degrees about z.
    auto rho = [](const Vec3& p) {
        return 0.6 + 0.05 * p.x() + 0.03 * p.y() - 0.02 * p.z() +
               0.01 * (p.x() * p.x() + 0.5 * p.y() * p.y());
    };
    Eigen::Matrix3d rot;
    rot << 0, -1, 0, 1, 0, 0, 0, 0, 1;

    auto direct = density_volume({14, 14, 14}, {0.4, 0.4, 0.4}, {-2.6, -2.6, -2.6});
    for (int k = 0; k < 14; ++k)
        for (int j = 0; j < 14; ++j)
            for (int i = 0; i < 14; ++i)
                direct.values[direct.index(i, j, k)] =
                    static_cast<float>(rho(direct.voxel_center(i, j, k)));

    auto clinical = density_volume({14, 14, 14}, {0.4, 0.4, 0.4}, {-2.6, -2.6, -2.6});
    clinical.kind = VolumeKind::grey;
    for (int k = 0; k < 14; ++k)
        for (int j = 0; j < 14; ++j)
            for (int i = 0; i < 14; ++i)
                clinical.values[clinical.index(i, j, k)] = static_cast<float>(
                    rho(rot.transpose() * clinical.voxel_center(i, j, k)));

    RigidTransform tr;
    tr.rotation = rot;

    const auto mesh = testutil::two_tets();
    const MaterialMapConfig cfg;
    const auto a = map_materials(mesh, direct, cfg);
    const auto b = remap_materials(mesh, tr, clinical, {1.0, 0.0}, cfg);
    for (int e = 0; e < a.element_count(); ++e)
        EXPECT_NEAR(b.modulus[e], a.modulus[e], 0.01 * a.modulus[e]);
}

TEST(MaterialField, ValidateRejectsBadEntries) {
    MaterialField m;
    m.density = {1.0};
    m.modulus = {100.0};
    m.poisson = {0.3};
    EXPECT_NO_THROW(m.validate());

    auto bad = m;
    bad.density[0] = -0.1;
    EXPECT_THROW(bad.validate(), Error);

    bad = m;
    bad.poisson[0] = 0.5;
    EXPECT_THROW(bad.validate(), Error);

    bad = m;
    bad.has_plasticity = true;
    bad.yield_stress = {10.0};
    bad.hardening_modulus = {200.0}; // E_t must stay below E
    EXPECT_THROW(bad.validate(), Error);
}
