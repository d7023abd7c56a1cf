#include "hfev/volume.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

using namespace hfev;

namespace {

VoxelVolume make_volume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin,
                        VolumeKind kind = VolumeKind::grey) {
    VoxelVolume v;
    v.dims = dims;
    v.spacing = spacing;
    v.origin = origin;
    v.kind = kind;
    v.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0.0f);
    return v;
}

} // namespace

TEST(Calibration, TwoPointLine) {
    const std::vector<std::pair<double, double>> samples{{0.0, 0.0}, {100.0, 1.0}};
    const auto fit = fit_calibration(samples);
    EXPECT_NEAR(fit.cal.slope, 0.01, 1e-15);
    EXPECT_NEAR(fit.cal.intercept, 0.0, 1e-15);
    EXPECT_NEAR(fit.rms_residual, 0.0, 1e-15);
}

TEST(Calibration, CollinearThreePoints) {
    const std::vector<std::pair<double, double>> samples{
        {0.0, 0.1}, {50.0, 0.6}, {100.0, 1.1}};
    const auto fit = fit_calibration(samples);
    EXPECT_NEAR(fit.cal.slope, 0.01, 1e-12);
    EXPECT_NEAR(fit.cal.intercept, 0.1, 1e-12);
    EXPECT_NEAR(fit.rms_residual, 0.0, 1e-12);
}

TEST(Calibration, LeastSquaresHandOracle) {
    // greys [0,1,2], densities [0,1,1]: slope 1/2, intercept 1/6,
    // residuals (-1/6, 1/3, -1/6), rms = sqrt(1/18).
    const std::vector<std::pair<double, double>> samples{{0.0, 0.0}, {1.0, 1.0}, {2.0, 1.0}};
    const auto fit = fit_calibration(samples);
    EXPECT_NEAR(fit.cal.slope, 0.5, 1e-14);
    EXPECT_NEAR(fit.cal.intercept, 1.0 / 6.0, 1e-14);
    EXPECT_NEAR(fit.rms_residual, 0.23570226039551584, 1e-14);

    // Reproducing the sample densities with the fitted law has exactly the
    // reported rms residual.
    double ssr = 0.0;
    for (const auto& [gv, rho] : samples) {
        const double r = rho - fit.cal.apply(gv);
        ssr += r * r;
    }
    EXPECT_NEAR(std::sqrt(ssr / 3.0), fit.rms_residual, 1e-14);
}

TEST(Calibration, DegenerateInputs) {
    const std::vector<std::pair<double, double>> one{{10.0, 0.2}};
    try {
        fit_calibration(one);
        FAIL() << "single sample must not fit";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::calibration_degenerate);
    }

    const std::vector<std::pair<double, double>> same{{5.0, 0.1}, {5.0, 0.9}};
    try {
        fit_calibration(same);
        FAIL() << "identical grey values must not fit";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::calibration_degenerate);
    }
}

TEST(GreyToDensity, ZeroVolumeStaysZero) {
    auto v = make_volume({2, 2, 2}, {1, 1, 1}, {0, 0, 0});
    const auto d = grey_to_density(v, {0.01, 0.0});
    EXPECT_EQ(d.kind, VolumeKind::density);
    for (float x : d.values) EXPECT_EQ(x, 0.0f);
}

TEST(GreyToDensity, FormulaAndClamp) {
    auto v = make_volume({2, 1, 1}, {1, 1, 1}, {0, 0, 0});
    v.values = {200.0f, -50.0f};
    const auto d = grey_to_density(v, {0.01, 0.0});
    EXPECT_FLOAT_EQ(d.values[0], 2.0f);
    EXPECT_FLOAT_EQ(d.values[1], 0.0f); // negative densities clamp to zero
}

TEST(GreyToDensity, CorrectionAppliedAfterBaseLaw) {
    DensityCalibration cal{0.01, 0.0, 2.0, 0.1};
    EXPECT_NEAR(cal.apply(100.0), 2.1, 1e-15);
    auto v = make_volume({1, 1, 1}, {1, 1, 1}, {0, 0, 0});
    v.values = {100.0f};
    EXPECT_NEAR(grey_to_density(v, cal).values[0], 2.1, 1e-6);
}

TEST(GreyToDensity, RejectsNonGreyInput) {
    auto v = make_volume({1, 1, 1}, {1, 1, 1}, {0, 0, 0}, VolumeKind::density);
    try {
        grey_to_density(v, {});
        FAIL() << "kind mismatch expected";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::kind_mismatch);
    }
}

TEST(Trilinear, VoxelCenterAndMidpoint) {
    auto v = make_volume({3, 2, 2}, {0.5, 0.5, 0.5}, {1.0, -1.0, 0.0});
    for (std::size_t n = 0; n < v.values.size(); ++n)
        v.values[n] = static_cast<float>(3 * n + 1);

    EXPECT_DOUBLE_EQ(sample_trilinear(v, v.voxel_center(1, 1, 0)), v.at(1, 1, 0));
    const Vec3 mid = 0.5 * (v.voxel_center(0, 0, 0) + v.voxel_center(1, 0, 0));
    EXPECT_DOUBLE_EQ(sample_trilinear(v, mid), 0.5 * (v.at(0, 0, 0) + v.at(1, 0, 0)));
}

TEST(Trilinear, AffineFieldExact) {
    // Dyadic spacing and coefficients keep the stored float32 node values
    // exact, so the interpolation error is pure arithmetic noise.
    auto v = make_volume({5, 4, 3}, {0.25, 0.25, 0.25}, {-0.5, 0.25, 0.0});
    auto f = [](const Vec3& p) { return 2.0 * p.x() + 3.0 * p.y() - p.z(); };
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 5; ++i)
                v.values[v.index(i, j, k)] = static_cast<float>(f(v.voxel_center(i, j, k)));

    std::mt19937 rng(42);
    std::uniform_real_distribution<double> ux(-0.5, 0.5), uy(0.25, 1.0), uz(0.0, 0.5);
    for (int t = 0; t < 100; ++t) {
        const Vec3 p(ux(rng), uy(rng), uz(rng));
        const double expected = f(p);
        EXPECT_NEAR(sample_trilinear(v, p), expected, 1e-12 * std::max(1.0, std::abs(expected)));
    }
}

TEST(Trilinear, OutsideDomain) {
    auto v = make_volume({2, 2, 2}, {1, 1, 1}, {0, 0, 0});
    EXPECT_FALSE(try_sample_trilinear(v, {-0.001, 0.5, 0.5}).has_value());
    try {
        sample_trilinear(v, {5.0, 0.0, 0.0});
        FAIL() << "outside point must throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::out_of_bounds);
    }
}

TEST(Nearest, RimAndOutside) {
    auto v = make_volume({2, 1, 1}, {1, 1, 1}, {0, 0, 0});
    v.values = {3.0f, 7.0f};
    EXPECT_DOUBLE_EQ(*sample_nearest(v, {0.2, 0.0, 0.0}), 3.0);
    EXPECT_DOUBLE_EQ(*sample_nearest(v, {1.4, 0.3, -0.3}), 7.0); // half-voxel rim
    EXPECT_FALSE(sample_nearest(v, {2.6, 0.0, 0.0}).has_value());
}

TEST(VolumeValidate, MaskMustBeBinary) {
    auto v = make_volume({1, 1, 2}, {1, 1, 1}, {0, 0, 0}, VolumeKind::mask);
    v.values = {0.0f, 1.0f};
    EXPECT_NO_THROW(v.validate());
    v.values[1] = 2.0f;
    EXPECT_THROW(v.validate(), Error);
}
