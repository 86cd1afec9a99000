#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "rfdress/lattice.hpp"

using namespace rfdress;

namespace {

// Direct closed-form evaluation of the checkerboard preset, independent of the Fourier tables.
double preset_oracle(double depth, int m, double x, double y) {
    return (1.0 + 4.0 * m) * depth / 12.0 * (std::cos(2 * x) + std::cos(2 * y));
}

} // namespace

TEST(Preset, ExtremalRatioMinus3To1To5) {
    const LatticeModel lat = build_preset(default_preset, 10.0);
    // |v| is maximal where cos 2x + cos 2y = +-2, e.g. the origin
    const auto v = lat.potentials(Vec2::Zero());
    EXPECT_NEAR(v[0] / v[1], -3.0, 1e-6 * 3);
    EXPECT_NEAR(v[2] / v[1], 5.0, 1e-6 * 5);
}

TEST(Preset, PlusAndMinusExtremaAntiAligned) {
    const LatticeModel lat = build_preset(default_preset, 10.0);
    const Extremum min_p = lat.extremum(1, 1);
    const Extremum max_m = lat.extremum(-1, -1);
    const Vec2 d = min_p.position - max_m.position;
    // same point modulo the direct lattice
    const Eigen::Vector2d frac = lat.direct().inverse() * d;
    EXPECT_NEAR(frac.x() - std::round(frac.x()), 0.0, 1e-6);
    EXPECT_NEAR(frac.y() - std::round(frac.y()), 0.0, 1e-6);
}

TEST(Preset, ZeroDepthIsIdenticallyZero) {
    const LatticeModel lat = build_preset(default_preset, 0.0);
    for (int i = 0; i < 10; ++i)
        for (int m = -1; m <= 1; ++m) EXPECT_EQ(lat.potential(Vec2(0.3 * i, -0.17 * i), m), 0.0);
}

TEST(Preset, DepthCalibration) {
    for (double u : {1.0, 10.0, 55.0}) {
        const LatticeModel lat = build_preset(default_preset, u);
        EXPECT_NEAR(lat.evaluated_depth(-1), u, 1e-6);
        EXPECT_DOUBLE_EQ(lat.nominal_depth(), u);
    }
}

TEST(Preset, RejectsBadInput) {
    EXPECT_THROW(build_preset("hexagonal", 1.0), DomainError);
    EXPECT_THROW(build_preset(default_preset, -1.0), DomainError);
    EXPECT_THROW(build_preset(default_preset, 1.0).potential(Vec2::Zero(), 2), DomainError);
}

TEST(Preset, MatchesClosedFormOnDenseGrid) {
    const double u = 10.0;
    const LatticeModel lat = build_preset(default_preset, u);
    for (int m = -1; m <= 1; ++m) {
        // oracle extrema from a 640x640 grid (10x the 64x64 test grid)
        double omin = 1e300, omax = -1e300, lmin = 1e300, lmax = -1e300;
        const int dense = 640;
        for (int i = 0; i < dense; ++i)
            for (int j = 0; j < dense; ++j) {
                const double x = constants::pi * i / dense;
                const double y = constants::pi * j / dense;
                const double v = preset_oracle(u, m, x, y);
                omin = std::min(omin, v);
                omax = std::max(omax, v);
            }
        const int grid = 64;
        for (int i = 0; i < grid; ++i)
            for (int j = 0; j < grid; ++j) {
                const Vec2 r = lat.position(double(i) / grid, double(j) / grid);
                const double v = lat.potential(r, m);
                EXPECT_NEAR(v, preset_oracle(u, m, r.x(), r.y()), 1e-12);
                lmin = std::min(lmin, v);
                lmax = std::max(lmax, v);
            }
        EXPECT_NEAR(lmin, omin, 1e-9);
        EXPECT_NEAR(lmax, omax, 1e-9);
        EXPECT_NEAR(lat.extremum(m, 1).value, omin, 1e-9);
        EXPECT_NEAR(lat.extremum(m, -1).value, omax, 1e-9);
    }
}

TEST(Lattice, Periodicity) {
    const LatticeModel lat = build_preset(default_preset, 13.0);
    for (int i = 0; i < 20; ++i) {
        const Vec2 r(0.37 * i - 1.1, 0.23 * i + 0.4);
        for (int m = -1; m <= 1; ++m) {
            EXPECT_NEAR(lat.potential(r + lat.direct().col(0), m), lat.potential(r, m), 1e-10);
            EXPECT_NEAR(lat.potential(r + lat.direct().col(1), m), lat.potential(r, m), 1e-10);
        }
    }
}

TEST(Lattice, CellMeanEqualsZeroComponent) {
    FourierTable t;
    t[{0, 0}] = 1.7;
    t[{1, 1}] = {0.3, 0.2};
    t[{-1, -1}] = {0.3, -0.2};
    t[{2, -1}] = -0.4;
    t[{-2, 1}] = -0.4;
    const LatticeModel lat(LatticeModel::square_reciprocal(), {t, {}, {}}, 0.0, "custom");
    const int n = 32;
    double mean = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mean += lat.potential(lat.position(double(i) / n, double(j) / n), -1);
    EXPECT_NEAR(mean / (n * n), 1.7, 1e-12);
}

TEST(Lattice, RealnessOfComplexTables) {
    FourierTable t;
    t[{1, 0}] = {0.5, 0.8};
    t[{-1, 0}] = {0.5, -0.8};
    t[{1, 2}] = {-0.1, 0.3};
    t[{-1, -2}] = {-0.1, -0.3};
    const LatticeModel lat(LatticeModel::square_reciprocal(), {t, t, t}, 0.0, "custom");
    EXPECT_FALSE(lat.is_real_symmetric());
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j) {
            const Vec2 r = lat.position(i / 64.0, j / 64.0);
            const auto c = lat.evaluate_complex(r, 0);
            EXPECT_LT(std::abs(c.imag()), 1e-12);
            EXPECT_NEAR(c.real(), lat.potential(r, 0), 1e-12);
        }
}

TEST(Lattice, LinearInDepth) {
    const LatticeModel a = build_preset(default_preset, 7.0);
    const LatticeModel b = build_preset(default_preset, 21.0);
    for (int i = 0; i < 16; ++i) {
        const Vec2 r(0.1 * i, 0.31 * i);
        for (int m = -1; m <= 1; ++m) EXPECT_NEAR(b.potential(r, m), 3.0 * a.potential(r, m), 1e-12);
    }
}

TEST(Lattice, VectorPartCancelsInSecondDifference) {
    // V_+1 + V_-1 - 2 V_0 depends only on the scalar part: flipping the sign of the vector part
    // (swapping the +1 and -1 tables) leaves it unchanged, and for s = v/4 it vanishes identically.
    const LatticeModel lat = build_preset(default_preset, 10.0);
    const LatticeModel swapped(lat.reciprocal(), {lat.table(1), lat.table(0), lat.table(-1)}, 10.0, "custom");
    for (int i = 0; i < 16; ++i) {
        const Vec2 r(0.17 * i, -0.29 * i);
        const auto v = lat.potentials(r);
        const auto w = swapped.potentials(r);
        EXPECT_NEAR(v[2] + v[0] - 2 * v[1], w[2] + w[0] - 2 * w[1], 1e-12);
        EXPECT_NEAR(v[2] + v[0] - 2 * v[1], 0.0, 1e-12);
    }
}

TEST(Lattice, GradientAndHessianMatchFiniteDifferences) {
    const LatticeModel lat = build_preset(default_preset, 10.0);
    const Vec2 r(0.3, 0.71);
    const double h = 1e-5;
    for (int m = -1; m <= 1; ++m) {
        const Vec2 g = lat.gradient(r, m);
        EXPECT_NEAR(g.x(), (lat.potential(r + Vec2(h, 0), m) - lat.potential(r - Vec2(h, 0), m)) / (2 * h), 1e-7);
        EXPECT_NEAR(g.y(), (lat.potential(r + Vec2(0, h), m) - lat.potential(r - Vec2(0, h), m)) / (2 * h), 1e-7);
        const Eigen::Matrix2d hs = lat.hessian(r, m);
        EXPECT_NEAR(hs(0, 0), (lat.gradient(r + Vec2(h, 0), m).x() - lat.gradient(r - Vec2(h, 0), m).x()) / (2 * h), 1e-6);
        EXPECT_NEAR(hs(0, 1), (lat.gradient(r + Vec2(0, h), m).x() - lat.gradient(r - Vec2(0, h), m).x()) / (2 * h), 1e-6);
    }
}

TEST(LoadModel, PresetDocumentRoundTrips) {
    const LatticeModel lat = build_preset(default_preset, 12.5);
    for (bool tables : {false, true}) {
        const LatticeModel back = load_model(to_json(lat, tables));
        for (int m = -1; m <= 1; ++m) EXPECT_EQ(back.table(m), lat.table(m));
        EXPECT_NEAR(back.nominal_depth(), 12.5, 1e-9);
        EXPECT_TRUE(back.reciprocal().isApprox(lat.reciprocal()));
    }
}

TEST(LoadModel, ConstantTableHasZeroDepth) {
    const LatticeModel lat = load_model_document(
        R"({"lattice": {"preset": "custom", "coefficients": {"mF=-1": [[0, 0, 2.5, 0]]}}})");
    EXPECT_NEAR(lat.evaluated_depth(-1), 0.0, 1e-14);
    EXPECT_NEAR(lat.potential(Vec2(0.4, 1.3), -1), 2.5, 1e-14);
}

TEST(LoadModel, AsymmetricTableNamesOffendingG) {
    try {
        load_model_document(R"({"lattice": {"preset": "custom",
            "coefficients": {"mF=0": [[1, 2, 0.5, 0], [-1, -2, 0.4, 0]]}}})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "lattice.coefficients.mF=0");
        EXPECT_NE(std::string(e.what()).find("G=(-1,-2)"), std::string::npos) << e.what();
    }
}

TEST(LoadModel, ErrorsCarryJsonPath) {
    auto path_of = [](const char* doc) {
        try {
            load_model_document(doc);
        } catch (const ConfigError& e) {
            return e.path();
        }
        return std::string("<none>");
    };
    EXPECT_EQ(path_of(R"({"lattice": {"preset": "checkerboard-default"}})"), "lattice.depth_Er");
    EXPECT_EQ(path_of(R"({"lattice": {"preset": "checkerboard-default", "depth_Er": "x"}})"), "lattice.depth_Er");
    EXPECT_EQ(path_of(R"({"lattice": {"preset": "nope", "depth_Er": 1}})"), "lattice.preset");
    EXPECT_EQ(path_of(R"({"lattice": {"preset": "custom", "coefficients": {"mF=-1": [[0, 0.5, 1]]}}})"),
              "lattice.coefficients.mF=-1[0][1]");
    EXPECT_EQ(path_of(R"({"lattice": {"preset": "custom", "coefficients": {"mF=2": []}}})"),
              "lattice.coefficients.mF=2");
    EXPECT_EQ(path_of(R"({"lattice": {"preset": "custom", "depth_Er": 3,
                "coefficients": {"mF=-1": [[1, 0, 0.5], [-1, 0, 0.5]]}}})"), "lattice.depth_Er");
    EXPECT_EQ(path_of(R"({"lattice": {"preset": "checkerboard-default", "depth_Er": 1, "extra": 0}})"),
              "lattice.extra");
    EXPECT_EQ(path_of("{not json"), "");
}

TEST(LoadModel, DeclaredDepthAcceptedWhenConsistent) {
    // V = cos(2x) -> depth 2
    const LatticeModel lat = load_model_document(R"({"lattice": {"preset": "custom", "depth_Er": 2,
        "coefficients": {"mF=-1": [[1, 0, 0.5], [-1, 0, 0.5]]}}})");
    EXPECT_DOUBLE_EQ(lat.nominal_depth(), 2.0);
}
