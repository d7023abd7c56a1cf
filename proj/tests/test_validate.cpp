#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hfev/validate.hpp"
#include "test_meshes.hpp"

using namespace hfev;

namespace {

std::vector<PairSample> pairs_from(std::initializer_list<double> dvc,
                                   std::initializer_list<double> fe) {
    std::vector<PairSample> out;
    auto d = dvc.begin();
    auto f = fe.begin();
    for (; d != dvc.end(); ++d, ++f)
        out.push_back({Vec3::Zero(), *d, *f});
    return out;
}

DvcGrid make_grid(std::array<int, 3> dims, const Vec3& spacing, const Vec3& origin) {
    DvcGrid g;
    g.dims = dims;
    g.spacing = spacing;
    g.origin = origin;
    g.displacement.assign(g.point_count(), Vec3::Zero());
    g.correlated.assign(g.point_count(), 1);
    g.inside_bone.assign(g.point_count(), 1);
    return g;
}

const Eigen::Matrix3d kA = (Eigen::Matrix3d() << 1e-3, 2e-4, -3e-4,
                                                 4e-4, -2e-3, 1e-4,
                                                 -5e-4, 2e-4, 1.5e-3).finished();
const Vec3 kB{0.02, -0.01, 0.03};

Vec3 affine_u(const Vec3& p) { return kA * p + kB; }

} // namespace

TEST(Regression, WorkedThreePointExample) {
    const auto m = regression_metrics(pairs_from({1, 2, 3}, {1, 2, 4}));
    EXPECT_NEAR(m.slope, 1.5, 1e-12);
    EXPECT_NEAR(m.intercept, -2.0 / 3.0, 1e-12);
    EXPECT_NEAR(m.r2, 27.0 / 28.0, 1e-12);
    EXPECT_NEAR(m.rmse, 0.5773502691896258, 1e-12);
    EXPECT_NEAR(m.rmse_percent, 19.245008972987527, 1e-10);
    EXPECT_NEAR(m.max_error, 1.0, 0.0);
    EXPECT_EQ(m.n, 3);
}

TEST(Regression, PerfectAgreement) {
    const auto m = regression_metrics(pairs_from({-1, 0.5, 2, 3}, {-1, 0.5, 2, 3}));
    EXPECT_NEAR(m.slope, 1.0, 1e-12);
    EXPECT_NEAR(m.intercept, 0.0, 1e-12);
    EXPECT_NEAR(m.r2, 1.0, 1e-12);
    EXPECT_NEAR(m.rmse, 0.0, 1e-15);
    EXPECT_NEAR(m.rmse_percent, 0.0, 1e-13);
}

TEST(Regression, UniformScaleFactor) {
    const auto m = regression_metrics(pairs_from({1, 2, 4}, {2, 4, 8}));
    EXPECT_NEAR(m.slope, 2.0, 1e-12);
    EXPECT_NEAR(m.intercept, 0.0, 1e-12);
    EXPECT_NEAR(m.r2, 1.0, 1e-12);
    // errors are (1, 2, 4)
    EXPECT_NEAR(m.rmse, std::sqrt(21.0 / 3.0), 1e-12);
    EXPECT_NEAR(m.max_error, 4.0, 0.0);
}

TEST(Regression, RejectsTooFewOrDegenerate) {
    try {
        regression_metrics(pairs_from({1, 2}, {1, 2}));
        FAIL() << "two pairs must raise";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::insufficient_data);
    }
    try {
        regression_metrics(pairs_from({2, 2, 2}, {1, 2, 3}));
        FAIL() << "constant DVC must raise";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::degenerate_regression);
    }
}

TEST(BcSlices, PicksExtremeQualifyingSlices) {
    auto g = make_grid({4, 4, 14}, {2, 2, 2}, {0, 0, 0});
    std::fill(g.correlated.begin(), g.correlated.end(), 0);
    std::fill(g.inside_bone.begin(), g.inside_bone.end(), 0);
    for (int k = 3; k <= 12; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) {
                g.correlated[g.index(i, j, k)] = 1;
                g.inside_bone[g.index(i, j, k)] = 1;
            }
    const auto slices = extract_bc_slices(g);
    EXPECT_EQ(slices.first, 12);
    EXPECT_EQ(slices.second, 3);
}

TEST(BcSlices, MinPointsFiltersSparseSlices) {
    auto g = make_grid({4, 4, 6}, {2, 2, 2}, {0, 0, 0});
    // Slice 5 keeps only three correlated points, slice 0 only one.
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            if (i + 4 * j >= 3) g.correlated[g.index(i, j, 5)] = 0;
            if (i + 4 * j >= 1) g.correlated[g.index(i, j, 0)] = 0;
        }
    EXPECT_EQ(extract_bc_slices(g, 4), std::make_pair(4, 1));
    EXPECT_EQ(extract_bc_slices(g, 3), std::make_pair(5, 1));
    EXPECT_EQ(extract_bc_slices(g, 1), std::make_pair(5, 0));
}

TEST(BcSlices, RaisesWithoutTwoQualifyingSlices) {
    auto g = make_grid({4, 4, 3}, {2, 2, 2}, {0, 0, 0});
    std::fill(g.correlated.begin(), g.correlated.end(), 0);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) g.correlated[g.index(i, j, 1)] = 1;
    try {
        extract_bc_slices(g);
        FAIL() << "single qualifying slice must raise";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::insufficient_coverage);
    }
}

namespace {

// Mesh [0,5]^2 x [0,10] and a grid whose extreme slices coincide with the
// platen faces; grid xy planes land on the mesh footprint.
struct BcRig {
    Tet10Mesh mesh = testutil::brick_mesh(2, 2, 4, 2.5);
    DvcGrid grid = make_grid({5, 5, 5}, {1.25, 1.25, 2.5}, {0, 0, 0});

    void fill_affine() {
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 5; ++i)
                    grid.displacement[grid.index(i, j, k)] = affine_u(grid.point(i, j, k));
    }
};

} // namespace

TEST(DvcBc, AffineSliceFieldPrescribedExactly) {
    BcRig rig;
    rig.fill_affine();
    const auto bc = build_dirichlet_from_dvc(rig.mesh, rig.grid, {4, 0});
    EXPECT_NEAR(bc.upper_plane, 10.0, 1e-12);
    EXPECT_NEAR(bc.lower_plane, 0.0, 1e-12);

    std::size_t expected_nodes = 0;
    for (int n = 0; n < rig.mesh.node_count(); ++n) {
        const Vec3& p = rig.mesh.nodes[n];
        if (p.z() < 1e-9 || p.z() > 10.0 - 1e-9) ++expected_nodes;
    }
    EXPECT_EQ(bc.up_nodes.size() + bc.down_nodes.size(), expected_nodes);
    EXPECT_EQ(bc.dirichlet.size(), 3 * expected_nodes);

    for (int n : bc.up_nodes) {
        const Vec3& p = rig.mesh.nodes[n];
        const Vec3 want = affine_u(Vec3(p.x(), p.y(), 10.0));
        for (int a = 0; a < 3; ++a)
            EXPECT_NEAR(bc.dirichlet.prescribed.at(3 * n + a), want[a], 1e-12);
    }
    for (int n : bc.down_nodes) {
        const Vec3& p = rig.mesh.nodes[n];
        const Vec3 want = affine_u(Vec3(p.x(), p.y(), 0.0));
        for (int a = 0; a < 3; ++a)
            EXPECT_NEAR(bc.dirichlet.prescribed.at(3 * n + a), want[a], 1e-12);
    }
}

TEST(DvcBc, ConstantSliceActsAsRigidPlaten) {
    BcRig rig;
    const Vec3 shift{0.1, -0.2, -0.16};
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) rig.grid.displacement[rig.grid.index(i, j, 4)] = shift;
    const auto bc = build_dirichlet_from_dvc(rig.mesh, rig.grid, {4, 0});
    for (int n : bc.up_nodes)
        for (int a = 0; a < 3; ++a)
            EXPECT_NEAR(bc.dirichlet.prescribed.at(3 * n + a), shift[a], 1e-12);
    for (int n : bc.down_nodes)
        for (int a = 0; a < 3; ++a)
            EXPECT_NEAR(bc.dirichlet.prescribed.at(3 * n + a), 0.0, 1e-12);
}

TEST(DvcBc, AffineFallbackCoversDroppedCells) {
    BcRig rig;
    rig.fill_affine();
    // Poke a hole in the upper slice; the affine fit over the remaining
    // points reproduces the affine field exactly.
    rig.grid.correlated[rig.grid.index(2, 2, 4)] = 0;
    const auto bc = build_dirichlet_from_dvc(rig.mesh, rig.grid, {4, 0});
    for (int n : bc.up_nodes) {
        const Vec3& p = rig.mesh.nodes[n];
        const Vec3 want = affine_u(Vec3(p.x(), p.y(), 10.0));
        for (int a = 0; a < 3; ++a)
            EXPECT_NEAR(bc.dirichlet.prescribed.at(3 * n + a), want[a], 1e-9);
    }
}

TEST(DvcBc, UnreachableNodesRaise) {
    BcRig rig;
    rig.fill_affine();
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) rig.grid.correlated[rig.grid.index(i, j, 4)] = 0;
    try {
        build_dirichlet_from_dvc(rig.mesh, rig.grid, {4, 0});
        FAIL() << "empty upper slice must raise";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::insufficient_coverage);
    }
}

TEST(FeSampling, QuadraticFieldSampledExactly) {
    Tet10Mesh mesh = testutil::brick_mesh(2, 2, 2, 5.0);
    MeshIndex index(mesh);
    Eigen::MatrixXd disp(mesh.node_count(), 3);
    for (int n = 0; n < mesh.node_count(); ++n)
        disp.row(n) = affine_u(mesh.nodes[n]).transpose();

    auto grid = make_grid({4, 4, 4}, {3.0, 3.0, 3.0}, {0.5, 0.5, 0.5});
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i)
                grid.displacement[grid.index(i, j, k)] = affine_u(grid.point(i, j, k));

    const auto cmp = fe_at_dvc_points(index, disp, grid);
    for (int a = 0; a < 3; ++a) {
        ASSERT_EQ(cmp.directions[a].size(), grid.point_count());
        for (const auto& s : cmp.directions[a]) EXPECT_NEAR(s.fe, s.dvc, 1e-10);
    }
}

TEST(FeSampling, SkipsOutsideAndMaskedPoints) {
    Tet10Mesh mesh = testutil::brick_mesh(1, 1, 1, 10.0);
    MeshIndex index(mesh);
    Eigen::MatrixXd disp = Eigen::MatrixXd::Zero(mesh.node_count(), 3);

    // Third z layer sits above the cube.
    auto grid = make_grid({3, 3, 3}, {4.0, 4.0, 5.5}, {1.0, 1.0, 1.0});
    grid.correlated[grid.index(0, 0, 0)] = 0;

    std::size_t in_mesh = 0;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 3; ++i)
                if (grid.is_correlated(i, j, k) &&
                    index.locate(grid.point(i, j, k)).has_value())
                    ++in_mesh;
    const auto cmp = fe_at_dvc_points(index, disp, grid);
    EXPECT_EQ(cmp.directions[0].size(), in_mesh);
    EXPECT_LT(in_mesh, grid.point_count());

    // A keep mask shrinks the set further.
    std::vector<bool> keep(grid.point_count(), false);
    keep[grid.index(1, 1, 0)] = true;
    const auto masked = fe_at_dvc_points(index, disp, grid, &keep);
    EXPECT_EQ(masked.directions[2].size(), 1u);

    std::fill(keep.begin(), keep.end(), false);
    try {
        fe_at_dvc_points(index, disp, grid, &keep);
        FAIL() << "empty comparison must raise";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::empty_comparison);
    }
}

TEST(TrabecularSubset, NearestVoxelRule) {
    VoxelVolume mask;
    mask.dims = {10, 10, 10};
    mask.spacing = {1.0, 1.0, 1.0};
    mask.origin = {0.0, 0.0, 0.0};
    mask.kind = VolumeKind::mask;
    mask.values.assign(1000, 0.0f);
    for (int k = 0; k < 10; ++k)
        for (int j = 0; j < 10; ++j)
            for (int i = 0; i < 5; ++i) mask.at(i, j, k) = 1.0f; // x < 4.5 half

    const std::vector<Vec3> points = {
        {1.0, 5.0, 5.0},  // trabecular
        {4.4, 5.0, 5.0},  // rounds to voxel 4 -> trabecular
        {4.6, 5.0, 5.0},  // rounds to voxel 5 -> cortical
        {8.0, 5.0, 5.0},  // cortical
        {25.0, 5.0, 5.0}, // outside the mask volume
    };
    const auto flags = subset_trabecular(points, mask);
    ASSERT_EQ(flags.size(), points.size());
    EXPECT_TRUE(flags[0]);
    EXPECT_TRUE(flags[1]);
    EXPECT_FALSE(flags[2]);
    EXPECT_FALSE(flags[3]);
    EXPECT_FALSE(flags[4]);

    std::vector<PairSample> samples;
    for (const auto& p : points) samples.push_back({p, 1.0, 1.0});
    EXPECT_EQ(subset_trabecular(samples, mask).size(), 2u);
}

TEST(Reliability, MedianAgainstVoxelSize) {
    auto g = make_grid({3, 3, 3}, {1, 1, 1}, {0, 0, 0});
    // |ux| values 0.1..2.7 -> median 1.4; uy constant 0.39 (equal to the
    // voxel size, which still counts as reliable); uz constant 0.1.
    for (std::size_t n = 0; n < g.displacement.size(); ++n) {
        const double c = static_cast<double>(n + 1);
        g.displacement[n] = Vec3(0.1 * c, 0.39, n % 2 ? 0.1 : -0.1);
    }
    const auto rel = direction_reliability(g, 0.39);
    EXPECT_NEAR(rel.median_abs[0], 1.4, 1e-12);
    EXPECT_NEAR(rel.median_abs[1], 0.39, 1e-15);
    EXPECT_NEAR(rel.median_abs[2], 0.1, 1e-15);
    EXPECT_TRUE(rel.reliable[0]);
    EXPECT_TRUE(rel.reliable[1]);
    EXPECT_FALSE(rel.reliable[2]);
}

TEST(Reliability, IgnoresUncorrelatedPointsAndEvenCount) {
    auto g = make_grid({4, 1, 1}, {1, 1, 1}, {0, 0, 0});
    g.displacement[0] = Vec3(9.0, 0, 0); // dropped below
    g.displacement[1] = Vec3(-1.0, 0, 0);
    g.displacement[2] = Vec3(2.0, 0, 0);
    g.displacement[3] = Vec3(4.0, 0, 0);
    g.correlated[0] = 0;
    const auto rel = direction_reliability(g, 0.39);
    EXPECT_NEAR(rel.median_abs[0], 2.0, 1e-12); // odd count: 1, 2, 4
    g.correlated[0] = 1;
    const auto rel4 = direction_reliability(g, 0.39);
    EXPECT_NEAR(rel4.median_abs[0], 3.0, 1e-12); // even count: mean of 2 and 4
}

namespace {

// 2 x 2 x n column grid whose cells stack along z only; strains then follow
// the per-cell slope of u_z directly.
DvcGrid column_grid(const std::vector<double>& cell_slopes, double h) {
    const int nz = static_cast<int>(cell_slopes.size()) + 1;
    auto g = make_grid({2, 2, nz}, {h, h, h}, {0, 0, 0});
    double uz = 0.0;
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) g.displacement[g.index(i, j, k)] = Vec3(0, 0, uz);
        if (k < nz - 1) uz += cell_slopes[k] * h;
    }
    return g;
}

ComparisonSet on_grid_comparison(const DvcGrid& g) {
    ComparisonSet cmp;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                for (int a = 0; a < 3; ++a)
                    cmp.directions[a].push_back({g.point(i, j, k), 0.0, 0.0});
    return cmp;
}

} // namespace

TEST(Exclusion, StrainFractionBoundaryIsStrict) {
    // 11 cells; the first two carry 3% strain, the rest 0.4%. Points touching
    // a hot cell: k = 0, 1, 2 -> 12 of 48 points = exactly the 25% threshold.
    std::vector<double> slopes(11, 0.004);
    slopes[0] = slopes[1] = 0.03;
    auto g = column_grid(slopes, 1.95);
    const auto strains = differentiate_strains(g);
    const auto cmp = on_grid_comparison(g);

    auto report = exclusion_check(cmp, strains, g, nullptr);
    const auto& c = report.criteria[0];
    ASSERT_TRUE(c.evaluated);
    EXPECT_NEAR(c.value, 0.25, 1e-12);
    EXPECT_FALSE(c.exceeded);
    EXPECT_FALSE(report.excluded);

    // One more hot cell tips the fraction to 1/3.
    slopes[2] = 0.03;
    auto g2 = column_grid(slopes, 1.95);
    report = exclusion_check(cmp, differentiate_strains(g2), g2, nullptr);
    EXPECT_NEAR(report.criteria[0].value, 1.0 / 3.0, 1e-12);
    EXPECT_TRUE(report.criteria[0].exceeded);
    EXPECT_TRUE(report.excluded);
}

TEST(Exclusion, CompressiveStrainsCountToo) {
    std::vector<double> slopes(5, -0.02); // uniform 2% compression
    auto g = column_grid(slopes, 1.95);
    const auto report =
        exclusion_check(on_grid_comparison(g), differentiate_strains(g), g, nullptr);
    EXPECT_NEAR(report.criteria[0].value, 1.0, 1e-12);
    EXPECT_TRUE(report.criteria[0].exceeded);
}

TEST(Exclusion, CoverageFractionAgainstInsideBone) {
    auto g = column_grid(std::vector<double>(5, 0.001), 1.95);
    // 24 points; mark 4 outside bone, then 10 of the remaining 20 uncorrelated.
    for (int n = 0; n < 4; ++n) g.inside_bone[n] = 0;
    int dropped = 0;
    for (std::size_t n = 4; n < g.point_count() && dropped < 10; ++n) {
        g.correlated[n] = 0;
        ++dropped;
    }
    auto report =
        exclusion_check(on_grid_comparison(g), differentiate_strains(g), g, nullptr);
    EXPECT_NEAR(report.criteria[1].value, 0.5, 1e-12);
    EXPECT_FALSE(report.criteria[1].exceeded); // strictly-below rule

    // Dropping one more (still leaving the top cell intact) tips it over.
    g.correlated[14] = 0;
    report = exclusion_check(on_grid_comparison(g), differentiate_strains(g), g, nullptr);
    EXPECT_NEAR(report.criteria[1].value, 9.0 / 20.0, 1e-12);
    EXPECT_TRUE(report.criteria[1].exceeded);
    EXPECT_TRUE(report.excluded);
}

TEST(Exclusion, ErrorTrackingUncertaintyFires) {
    auto g = column_grid(std::vector<double>(5, 0.001), 1.95);
    std::vector<double> uncertainty(g.point_count());
    for (std::size_t n = 0; n < uncertainty.size(); ++n)
        uncertainty[n] = 1e-4 + 1e-5 * static_cast<double>(n);

    ComparisonSet cmp;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto n = g.index(i, j, k);
                for (int a = 0; a < 3; ++a)
                    // |fe - dvc| = 2 * uncertainty + 1e-5, a perfect line
                    cmp.directions[a].push_back(
                        {g.point(i, j, k), 0.0, 2.0 * uncertainty[n] + 1e-5});
            }

    const auto strains = differentiate_strains(g);
    auto report = exclusion_check(cmp, strains, g, &uncertainty);
    const auto& c = report.criteria[2];
    ASSERT_TRUE(c.evaluated);
    EXPECT_NEAR(c.value, 1.0, 1e-9);
    EXPECT_TRUE(c.exceeded);
    EXPECT_TRUE(report.excluded);

    // Negative association must not fire regardless of r2.
    ComparisonSet anti;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto n = g.index(i, j, k);
                for (int a = 0; a < 3; ++a)
                    anti.directions[a].push_back(
                        {g.point(i, j, k), 0.0, 1e-3 - 2.0 * uncertainty[n]});
            }
    report = exclusion_check(anti, strains, g, &uncertainty);
    EXPECT_TRUE(report.criteria[2].evaluated);
    EXPECT_FALSE(report.criteria[2].exceeded);

    // Without an uncertainty field the criterion reports as not evaluated.
    report = exclusion_check(cmp, strains, g, nullptr);
    EXPECT_FALSE(report.criteria[2].evaluated);
    EXPECT_FALSE(report.criteria[2].exceeded);
}

TEST(Propagation, ZeroErrorPropagatesToZero) {
    auto g = make_grid({4, 4, 4}, {1.95, 1.95, 1.95}, {0, 0, 0});
    const std::vector<Vec3> error(g.point_count(), Vec3::Zero());
    const auto prop = propagate_displacement_error(g, error);
    for (std::size_t n = 0; n < g.point_count(); ++n) {
        EXPECT_NEAR(prop.quick[n], 0.0, 0.0);
        EXPECT_NEAR(prop.point_scalar[n], 0.0, 0.0);
        EXPECT_TRUE(std::isnan(prop.residual[n])); // no uncertainty supplied
    }
}

TEST(Propagation, AffineErrorGivesUniformApparentStrain) {
    auto g = make_grid({4, 4, 4}, {1.95, 1.95, 1.95}, {1, 2, 3});
    std::vector<Vec3> error(g.point_count());
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i)
                error[g.index(i, j, k)] = affine_u(g.point(i, j, k));

    const auto prop = propagate_displacement_error(g, error);
    const Eigen::Matrix3d e = 0.5 * (kA + kA.transpose());
    Eigen::Matrix<double, 6, 1> v;
    v << e(0, 0), e(1, 1), e(2, 2), e(0, 1), e(1, 2), e(0, 2);
    const double expected = v.cwiseAbs().mean();
    for (std::size_t n = 0; n < g.point_count(); ++n) {
        EXPECT_NEAR(prop.point_scalar[n], expected, 1e-12);
        EXPECT_NEAR(prop.quick[n], error[n].norm() / 1.95, 1e-12);
    }

    // Uncertainty raises the floor: residual = max(0, scalar - uncertainty).
    const std::vector<double> unc(g.point_count(), expected * 0.25);
    const auto with_unc = propagate_displacement_error(g, error, &unc);
    for (std::size_t n = 0; n < g.point_count(); ++n)
        EXPECT_NEAR(with_unc.residual[n], 0.75 * expected, 1e-12);
    const std::vector<double> big(g.point_count(), expected * 2.0);
    const auto clamped = propagate_displacement_error(g, error, &big);
    for (std::size_t n = 0; n < g.point_count(); ++n)
        EXPECT_NEAR(clamped.residual[n], 0.0, 0.0);
}

TEST(Propagation, SingleNodeHatError) {
    const double h = 1.95, e = 0.05;
    auto g = make_grid({5, 5, 5}, {h, h, h}, {0, 0, 0});
    std::vector<Vec3> error(g.point_count(), Vec3::Zero());
    error[g.index(2, 2, 2)] = Vec3(e, 0, 0);

    const auto prop = propagate_displacement_error(g, error);
    // The trilinear hat reaches slope e/h along x at the node itself; the
    // eight adjacent cells all see that corner, so their recorded peak is
    // exactly e/h.
    for (int k = 1; k <= 2; ++k)
        for (int j = 1; j <= 2; ++j)
            for (int i = 1; i <= 2; ++i)
                EXPECT_NEAR(prop.strain.cell_peak[prop.strain.index(i, j, k)], e / h,
                            1e-12);
    // Cells not touching the node stay silent.
    EXPECT_NEAR(prop.strain.cell_peak[prop.strain.index(0, 0, 0)], 0.0, 1e-15);
    EXPECT_NEAR(prop.quick[g.index(2, 2, 2)], e / h, 1e-12);
    EXPECT_GT(prop.point_scalar[g.index(2, 2, 2)], 0.0);
}

TEST(Propagation, UncorrelatedPointsStayNan) {
    auto g = make_grid({3, 3, 3}, {1, 1, 1}, {0, 0, 0});
    g.correlated[g.index(0, 0, 0)] = 0;
    std::vector<Vec3> error(g.point_count(), Vec3(0.01, 0, 0));
    const auto prop = propagate_displacement_error(g, error);
    EXPECT_TRUE(std::isnan(prop.quick[g.index(0, 0, 0)]));
    EXPECT_TRUE(std::isnan(prop.point_scalar[g.index(0, 0, 0)]));
    EXPECT_FALSE(std::isnan(prop.quick[g.index(1, 1, 1)]));
}
