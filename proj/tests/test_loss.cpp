#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rfdress/loss.hpp"

using namespace rfdress;

namespace {

const PhysicalSetup setup;
const UnitSystem units = setup.units();

DressingParams headline_point(double depth = 10.0, double rabi_khz = 205.0, double rf_mhz = 35.90) {
    return make_dressing(setup, build_preset(default_preset, depth), rabi_khz, rf_mhz);
}

double oracle_top(const DressingParams& p, const Vec2& r) {
    return oracle::cubic_eigenvalues(h1_matrix(p, p.lattice.potentials(r)))[2];
}

} // namespace

TEST(LandauZener, AnalyticPoints) {
    EXPECT_EQ(lz_probability(0.0, 1.0, 1.0), 0.0);
    // (pi/2) D^2 / (v E') = ln 2
    const double v = 1.7;
    const double s = 2.3;
    const double d = std::sqrt(2.0 * std::log(2.0) * v * s / constants::pi);
    EXPECT_NEAR(lz_probability(d, v, s), 0.5, 1e-14);
    EXPECT_NEAR(lz_nonadiabatic(d, v, s), 0.5, 1e-14);
}

TEST(LandauZener, MonotoneToOne) {
    double prev = -1.0;
    for (int i = 0; i <= 50; ++i) {
        const double p = lz_probability(0.2 * i, 1.0, 1.0);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        // strictly increasing until it rounds to 1
        if (prev < 1.0) EXPECT_GT(p, prev);
        else EXPECT_EQ(p, 1.0);
        prev = p;
    }
    EXPECT_NEAR(prev, 1.0, 1e-12);
}

TEST(LandauZener, RejectsBadInputs) {
    EXPECT_THROW(lz_probability(1.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(lz_probability(1.0, 1.0, -1.0), DomainError);
    EXPECT_THROW(lz_probability(-1.0, 1.0, 1.0), DomainError);
}

TEST(LandauZener, GapDoublingQuadruplesLogProbability) {
    const LatticeModel lat = build_preset(default_preset, 10.0);
    const double d = units.energy_from_khz(40.0);
    const LossEstimate a = lz_rate(lat, d, {}, units);
    const LossEstimate b = lz_rate(lat, 2 * d, {}, units);
    EXPECT_NEAR(std::log(b.nonadiabatic_probability) / std::log(a.nonadiabatic_probability), 4.0, 1e-10);
}

TEST(LandauZener, VelocityScalesAsQuarterPowerOfDepth) {
    const double v5 = harmonic_rms_velocity(bare_well_frequency(build_preset(default_preset, 5.0)));
    for (double u : {8.0, 10.0, 20.0, 35.0, 50.0}) {
        const double v = harmonic_rms_velocity(bare_well_frequency(build_preset(default_preset, u)));
        EXPECT_NEAR(v / v5, std::pow(u / 5.0, 0.25), 0.01 * std::pow(u / 5.0, 0.25));
    }
}

TEST(LandauZener, BareWellFrequencyIsHarmonicOmega) {
    // V_-1 = -(U/4)(cos 2x + cos 2y): omega = sqrt(2U)
    for (double u : {5.0, 10.0, 50.0})
        EXPECT_NEAR(bare_well_frequency(build_preset(default_preset, u)), std::sqrt(2.0 * u), 1e-9);
}

TEST(LandauZener, RateMonotoneOnDepthGapGrid) {
    for (double u = 8.0; u <= 16.0; u += 2.0) {
        const LatticeModel lat = build_preset(default_preset, u);
        const LatticeModel deeper = build_preset(default_preset, u + 2.0);
        double prev = std::numeric_limits<double>::infinity();
        for (double khz = 20.0; khz <= 120.0; khz += 10.0) {
            const double d = units.energy_from_khz(khz);
            const LossEstimate e = lz_rate(lat, d, {}, units);
            EXPECT_GE(e.rate, 0.0);
            EXPECT_LT(e.rate, prev);
            prev = e.rate;
            if (u < 16.0) EXPECT_GT(lz_rate(deeper, d, {}, units).rate, e.rate);
        }
    }
}

TEST(LandauZener, NoCrossingWithoutSpinDependence) {
    FourierTable t;
    t[{1, 0}] = t[{-1, 0}] = 1.0;
    const LatticeModel lat(LatticeModel::square_reciprocal(), {t, t, t}, 2.0, "custom");
    EXPECT_THROW(lz_rate(lat, 1.0), DomainError);
}

// Order-of-magnitude gate at the headline parameters.
TEST(LandauZener, RateInMeasuredRange) {
    const LossEstimate e = lz_rate(build_preset(default_preset, 10.0), units.energy_from_khz(75.0), {}, units);
    EXPECT_GE(e.rate_per_s, 10.0);
    EXPECT_LE(e.rate_per_s, 1000.0);
}

TEST(LandauZener, RegimeFlagRaisedForSmallGap) {
    const LossEstimate e = lz_rate(build_preset(default_preset, 10.0), 0.01, {}, units);
    EXPECT_FALSE(e.regime_ok);
    EXPECT_FALSE(e.flags.empty());
    EXPECT_LE(e.nonadiabatic_probability, 1.0);
}

TEST(Semiclassical, ZeroAlphaGivesPrefactorTimesFrequency) {
    LossOptions opt;
    opt.alpha = 0.0;
    opt.prefactor = 2.5;
    const LossEstimate e = semiclassical_rate(1.3, 20.0, 10.0, opt, units);
    EXPECT_DOUBLE_EQ(e.rate, 2.5 * 1.3);
    EXPECT_NEAR(e.rate_per_s, units.per_s_from_rate(e.rate), 1e-12 * e.rate_per_s);
}

TEST(Semiclassical, LogSlopeIsMinusAlphaOverOmega) {
    for (double alpha : {0.5, 1.0, 2.0}) {
        const double w = 1.217;
        const double d = 21.0;
        const double h = 1e-4;
        const double slope =
            (std::log(semiclassical_law(w, d + h, alpha, 1.0)) - std::log(semiclassical_law(w, d - h, alpha, 1.0))) /
            (2 * h);
        EXPECT_NEAR(slope, -alpha / w, 0.01 * alpha / w);
    }
}

TEST(Semiclassical, DecreasingInGapWithinRegime) {
    double prev = std::numeric_limits<double>::infinity();
    int checked = 0;
    for (double khz = 150.0; khz <= 400.0; khz += 50.0) {
        const LossEstimate e = semiclassical_rate(headline_point(10.0, khz), {}, units);
        if (!e.regime_ok) continue;
        EXPECT_LT(e.rate, prev) << khz;
        prev = e.rate;
        ++checked;
    }
    EXPECT_GE(checked, 3);
}

TEST(Semiclassical, FlatTopSurfaceRejected) {
    DressingParams p = headline_point(0.0);
    EXPECT_THROW(top_surface_minimum(p), DomainError);
}

TEST(SurfaceMinimum, TrapFrequencyMatchesSecondDifferenceOracle) {
    const DressingParams p = headline_point();
    const SurfaceMinimum m = top_surface_minimum(p);

    // independent minimum: dense scan of the cubic-root top eigenvalue, then successive zooms
    Vec2 best = Vec2::Zero();
    double e_best = 1e300;
    const int n = 200;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Vec2 r = p.lattice.position(double(i) / n, double(j) / n);
            const double e = oracle_top(p, r);
            if (e < e_best) {
                e_best = e;
                best = r;
            }
        }
    // the minimum sits in a trough that is nearly flat along one direction: keep walking the
    // stencil while the best point lands on its edge, shrink only once it is interior
    double span = constants::pi / n;
    for (int zoom = 0; zoom < 2000 && span > 1e-9; ++zoom) {
        const Vec2 c = best;
        int bi = 0, bj = 0;
        for (int i = -10; i <= 10; ++i)
            for (int j = -10; j <= 10; ++j) {
                const Vec2 r = c + Vec2(i, j) * (span / 10);
                const double e = oracle_top(p, r);
                if (e < e_best) {
                    e_best = e;
                    best = r;
                    bi = i;
                    bj = j;
                }
            }
        if (std::abs(bi) < 10 && std::abs(bj) < 10) span *= 0.3;
    }
    // The trough around the m_F = -1 site is level to ~1e-10 E_R while its curvature varies with
    // angle, so the reported point is checked to be a global minimum and the curvature is
    // compared at that point.
    EXPECT_NEAR(m.energy, e_best, 1e-9);
    EXPECT_NEAR(oracle_top(p, m.position), e_best, 1e-9);
    const Vec2 b = m.position;
    const double e0 = oracle_top(p, b);
    const double h = 2e-3;
    const double hxx = (oracle_top(p, b + Vec2(h, 0)) - 2 * e0 + oracle_top(p, b - Vec2(h, 0))) / (h * h);
    const double hyy = (oracle_top(p, b + Vec2(0, h)) - 2 * e0 + oracle_top(p, b - Vec2(0, h))) / (h * h);
    const double omega = std::sqrt((hxx + hyy) / (2 * recoil_mass));
    EXPECT_NEAR(m.trap_frequency, omega, 0.02 * omega);
}

TEST(FourierLz, TwoPointDistributionMatchesSingleMomentum) {
    MomentumDistribution d;
    const double k0 = 1.3;
    d.k = {Vec2(k0, 0.0), Vec2(-k0, 0.0)};
    d.weight = {0.5, 0.5};
    const double gap = 2.0, slope = 15.0, w = 1.2;
    const LossEstimate e = fourier_weighted_lz(d, gap, slope, w, {}, units);
    const double single = w / (2 * constants::pi) * lz_nonadiabatic(gap, k0 / recoil_mass, slope);
    EXPECT_NEAR(e.rate, single, 1e-15);
}

TEST(FourierLz, LimitsGoToZero) {
    MomentumDistribution zero;
    zero.k = {Vec2::Zero()};
    zero.weight = {1.0};
    EXPECT_EQ(fourier_weighted_lz(zero, 1.0, 10.0, 1.0).rate, 0.0);

    MomentumDistribution spread;
    for (int i = -5; i <= 5; ++i) {
        spread.k.push_back(Vec2(0.4 * i, 0.1));
        spread.weight.push_back(1.0 / 11);
    }
    EXPECT_LT(fourier_weighted_lz(spread, 1e3, 10.0, 1.0).rate, 1e-300);
    EXPECT_THROW(fourier_weighted_lz(MomentumDistribution{}, 1.0, 1.0, 1.0), DomainError);
}

TEST(FourierLz, StableUnderRegridding) {
    const DressingParams p = headline_point();
    BlochOptions o;
    o.model = BandModel::single_surface;
    o.q_grid = 16;
    const double a = fourier_weighted_lz(solve_bands(p, o), p, {}, units).rate;
    o.q_grid = 32;
    const double b = fourier_weighted_lz(solve_bands(p, o), p, {}, units).rate;
    EXPECT_GT(a, 0.0);
    EXPECT_LT(std::abs(a - b) / b, 0.02);
}

TEST(Sweep, LoadingRampIsAdiabatic) {
    const SweepAdiabaticity s = sweep_adiabaticity(300e3 / 1e-3, 205e3);
    EXPECT_LT(s.probability, 1e-6);
    EXPECT_TRUE(s.satisfied);
}

TEST(Sweep, ClosedFormProperties) {
    EXPECT_EQ(sweep_adiabaticity(1e8, 0.0).probability, 1.0);
    const double a = sweep_adiabaticity(1e8, 5e3).exponent;
    const double b = sweep_adiabaticity(1e8, 10e3).exponent;
    EXPECT_NEAR(b / a, 4.0, 1e-12);
    EXPECT_THROW(sweep_adiabaticity(0.0, 1e3), DomainError);
}
