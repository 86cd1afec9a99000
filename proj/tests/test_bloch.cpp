#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rfdress/bloch.hpp"
#include "rfdress/eigensolver.hpp"

using namespace rfdress;

namespace {

const PhysicalSetup setup;
const UnitSystem units = setup.units();

// Bare lattice with only the m_F = -1 band in reach: a large positive detuning pushes V_-1 - delta far below.
DressingParams bare_minus_one(double depth) {
    DressingParams p;
    p.lattice = build_preset(default_preset, depth);
    p.detuning = 1000.0;
    return p;
}

BlochOptions lowest(int q_grid = 8, int n_max = 8) {
    BlochOptions o;
    o.selection = BandSelection::lowest;
    o.q_grid = q_grid;
    o.n_max = n_max;
    return o;
}

// Default preset restricted to the x axis: V_m(x) = (1 + 4m)(U/12) cos 2x.
LatticeModel one_axis_preset(double depth) {
    std::array<FourierTable, 3> t;
    for (int m = -1; m <= 1; ++m) {
        const double amp = 0.5 * (1.0 + 4.0 * m) * depth / 12.0;
        t[m + 1][{1, 0}] = amp;
        t[m + 1][{-1, 0}] = amp;
    }
    return LatticeModel(LatticeModel::square_reciprocal(), t, depth, "custom");
}

double fold(double q) { return q - 2.0 * std::floor((q + 1.0) / 2.0); }

} // namespace

TEST(SolveBands, OptionsValidated) {
    DressingParams p;
    BlochOptions o;
    o.n_max = 3;
    EXPECT_THROW(solve_bands(p, o), DomainError);
    o.n_max = 8;
    o.q_grid = 4;
    EXPECT_THROW(solve_bands(p, o), DomainError);
}

TEST(SolveBands, EmptyLatticeIsFreeDispersion) {
    DressingParams p; // U = 0, Omega = 0, delta = delta' = 0
    BlochOptions o = lowest(8, 4);
    o.band_count = 12;
    const BlochSolution sol = solve_bands(p, o);
    for (std::size_t i = 0; i < sol.q_points.size(); ++i) {
        const Vec2 q = sol.q_points[i];
        std::vector<double> ref;
        for (int n1 = -4; n1 <= 4; ++n1)
            for (int n2 = -4; n2 <= 4; ++n2)
                for (int s = 0; s < 3; ++s) ref.push_back((q + sol.g_vector(n1, n2)).squaredNorm());
        std::sort(ref.begin(), ref.end());
        ASSERT_EQ(sol.energies[i].size(), 12);
        for (int b = 0; b < 12; ++b) EXPECT_NEAR(sol.energies[i](b), ref[std::size_t(b)], 1e-10);
        EXPECT_NEAR(sol.ground_energy[i], q.squaredNorm(), 1e-10);
    }
    EXPECT_EQ(sol.convergence_residual, 0.0);
}

TEST(SolveBands, OneAxisPresetMatchesFiniteDifferenceOracle) {
    for (double depth : {10.0, 20.0}) {
        DressingParams p;
        p.lattice = one_axis_preset(depth);
        const BlochSolution sol = solve_bands(p, lowest(8, 8));
        std::map<double, double> cache;
        for (std::size_t i = 0; i < sol.q_points.size(); ++i) {
            const double qx = sol.q_points[i].x();
            const double qy = sol.q_points[i].y();
            if (!cache.count(qx)) {
                double e = 1e300;
                for (int m = -1; m <= 1; ++m) {
                    const double amp = (1.0 + 4.0 * m) * depth / 12.0;
                    e = std::min(e, oracle::fd_ground([amp](double x) { return amp * std::cos(2 * x); },
                                                      constants::pi, qx)
                                        .energy);
                }
                cache[qx] = e;
            }
            // the y direction is free: lowest folded band at q_y is q_y^2
            EXPECT_NEAR(sol.ground_energy[i], cache[qx] + fold(qy) * fold(qy), 1e-3) << depth << " q=" << qx;
        }
    }
}

TEST(SolveBands, SeparableBareLatticeMatchesFiniteDifferenceOracle) {
    const double depth = 10.0;
    const BlochSolution sol = solve_bands(bare_minus_one(depth), lowest(8, 8));
    auto e1 = [&](double q) {
        return oracle::fd_ground([depth](double x) { return -depth / 4 * std::cos(2 * x); }, constants::pi, q).energy;
    };
    for (std::size_t i = 0; i < sol.q_points.size(); ++i) {
        const Vec2 q = sol.q_points[i];
        EXPECT_NEAR(sol.ground_energy[i] + 1000.0, e1(q.x()) + e1(q.y()), 1e-3);
    }
}

// Harmonic estimate for the deep bare lattice. V_-1 = -(U/4)(cos 2x + cos 2y) has per-axis well
// depth U/2 and omega = 2 sqrt(U/2); the per-axis zero-point energy is omega/2.
TEST(SolveBands, DeepLatticeNearHarmonicZeroPoint) {
    const double depth = 50.0;
    const BlochSolution sol = solve_bands(bare_minus_one(depth), lowest(8, 10));
    const double per_axis = 0.5 * (sol.mean_ground_energy() + 1000.0 + depth / 2);
    const double harmonic = 0.5 * 2.0 * std::sqrt(depth / 2);
    EXPECT_NEAR(per_axis, harmonic, 0.05 * harmonic);
}

// Same quantity against the harmonic value with the leading quartic correction -E_R/4 per axis.
TEST(SolveBands, DeepLatticeMatchesAnharmonicCorrectedZeroPoint) {
    const double depth = 50.0;
    const BlochSolution sol = solve_bands(bare_minus_one(depth), lowest(8, 10));
    const double per_axis = 0.5 * (sol.mean_ground_energy() + 1000.0 + depth / 2);
    const double corrected = std::sqrt(depth / 2) - 0.25;
    EXPECT_NEAR(per_axis, corrected, 0.005 * corrected);
}

TEST(SolveBands, VariationalInCutoff) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 20.0), 205.0, 35.90);
    std::vector<BlochSolution> sols;
    for (int n : {4, 6, 8}) {
        BlochOptions o = lowest(8, n);
        o.check_convergence = false;
        o.band_count = 4;
        sols.push_back(solve_bands(p, o));
    }
    for (std::size_t k = 1; k < sols.size(); ++k)
        for (std::size_t i = 0; i < sols[k].q_points.size(); ++i)
            for (int b = 0; b < 4; ++b) EXPECT_LE(sols[k].energies[i](b), sols[k - 1].energies[i](b) + 1e-10);
}

TEST(SolveBands, CutoffCheckReportsResidual) {
    BlochOptions o = lowest(8, 4);
    o.convergence_tol = 1e-14;
    try {
        solve_bands(bare_minus_one(55.0), o);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), o.convergence_tol);
        EXPECT_LT(e.residual(), 1e-2);
    }
}

TEST(SolveBands, ConvergedAtDefaultCutoffForModerateDepth) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 20.0), 205.0, 35.90);
    BlochOptions o;
    o.q_grid = 8;
    const BlochSolution sol = solve_bands(p, o);
    EXPECT_LT(sol.convergence_residual, 1e-4);
}

TEST(SolveBands, NormalizationAndAscendingEnergies) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 10.0), 205.0, 35.90);
    BlochOptions o;
    o.q_grid = 8;
    const BlochSolution sol = solve_bands(p, o);
    for (std::size_t i = 0; i < sol.ground.size(); ++i) {
        EXPECT_NEAR(sol.ground[i].squaredNorm(), 1.0, 1e-10);
        for (Eigen::Index b = 1; b < sol.energies[i].size(); ++b)
            EXPECT_LE(sol.energies[i](b - 1), sol.energies[i](b));
        EXPECT_GT(sol.top_overlap[i], 0.5);
    }
}

TEST(SolveBands, TopSurfaceBandIsMostlyPlusMinusOne) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 10.0), 205.0, 35.90);
    EXPECT_NEAR(units.khz_from_energy(p.detuning), -220.0, 5.0);
    BlochOptions o;
    o.q_grid = 8;
    const Eigen::Vector3d w = solve_bands(p, o).mean_spin_weights();
    EXPECT_NEAR(w.sum(), 1.0, 1e-10);
    EXPECT_GT(w(0) + w(2), 0.5);
}

TEST(SolveBands, ThreadCountDoesNotChangeResults) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 10.0), 205.0, 35.90);
    BlochOptions o;
    o.q_grid = 8;
    o.model = BandModel::single_surface;
    const BlochSolution a = solve_bands(p, o);
    o.threads = 3;
    const BlochSolution b = solve_bands(p, o);
    for (std::size_t i = 0; i < a.ground.size(); ++i) {
        EXPECT_EQ(a.ground_energy[i], b.ground_energy[i]);
        EXPECT_TRUE(a.ground[i] == b.ground[i]);
    }
}

TEST(SolveBands, TimeReversalShortcutMatchesDirectSolve) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 10.0), 205.0, 35.90);
    BlochOptions o;
    o.q_grid = 8;
    o.model = BandModel::single_surface;
    const BlochSolution a = solve_bands(p, o);
    o.use_time_reversal = false;
    const BlochSolution b = solve_bands(p, o);
    for (std::size_t i = 0; i < a.ground.size(); ++i) {
        EXPECT_NEAR(a.ground_energy[i], b.ground_energy[i], 1e-10);
        EXPECT_NEAR(std::abs(a.ground[i].dot(b.ground[i])), 1.0, 1e-8);
    }
}

TEST(SolveBands, SingleSurfaceAgreesWithCoupledFarFromResonance) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 10.0), 205.0, 35.0);
    BlochOptions o;
    o.q_grid = 8;
    const BlochSolution c = solve_bands(p, o);
    o.model = BandModel::single_surface;
    const BlochSolution s = solve_bands(p, o);
    // off-surface admixture shifts energies at second order in Omega / (detuning) only
    EXPECT_NEAR(c.mean_ground_energy(), s.mean_ground_energy(), 0.02);
}

TEST(Eigensolver, OrthonormalEigenvectors) {
    const int n = 60;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(n, n);
    a = (a + a.adjoint()).eval();
    const auto r = eigh_index_range<std::complex<double>>(a, 0, 9);
    ASSERT_EQ(r.values.size(), 10);
    EXPECT_LT((r.vectors.adjoint() * r.vectors - Eigen::MatrixXcd::Identity(10, 10)).norm(), 1e-10);
    EXPECT_LT((a * r.vectors - r.vectors * r.values.asDiagonal()).norm(), 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ref(a);
    for (int k = 0; k < 10; ++k) EXPECT_NEAR(r.values(k), ref.eigenvalues()(k), 1e-10);
}

TEST(MomentumDistribution, EmptyLatticeUniformInFirstZone) {
    DressingParams p;
    const BlochSolution sol = solve_bands(p, lowest(8, 4));
    const MomentumDistribution d = momentum_distribution(sol);
    double total = 0.0;
    for (std::size_t i = 0; i < d.k.size(); ++i) {
        total += d.weight[i];
        const bool first_zone = std::abs(d.k[i].x()) < 1.0 && std::abs(d.k[i].y()) < 1.0;
        if (first_zone) EXPECT_NEAR(d.weight[i], 1.0 / 64.0, 1e-12);
        else EXPECT_NEAR(d.weight[i], 0.0, 1e-12);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(MomentumDistribution, InversionSymmetric) {
    const DressingParams p = make_dressing(setup, build_preset(default_preset, 10.0), 205.0, 35.90);
    BlochOptions o;
    o.q_grid = 8;
    o.model = BandModel::single_surface;
    const BlochSolution sol = solve_bands(p, o);
    for (auto kind : {DistributionKind::dephased_band, DistributionKind::wannier}) {
        const MomentumDistribution d = momentum_distribution(sol, kind);
        std::map<std::pair<long, long>, double> by_k;
        double total = 0.0;
        for (std::size_t i = 0; i < d.k.size(); ++i) {
            by_k[{std::lround(d.k[i].x() * 1e6), std::lround(d.k[i].y() * 1e6)}] = d.weight[i];
            total += d.weight[i];
            EXPECT_GE(d.weight[i], 0.0);
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
        for (const auto& [k, w] : by_k) {
            auto it = by_k.find({-k.first, -k.second});
            ASSERT_NE(it, by_k.end());
            EXPECT_NEAR(it->second, w, 1e-12);
        }
    }
}

TEST(MomentumDistribution, BareLatticeMatchesRealSpaceOracle) {
    const double depth = 10.0;
    const int nm = 8;
    const BlochSolution sol = solve_bands(bare_minus_one(depth), lowest(8, nm));
    const MomentumDistribution d = momentum_distribution(sol);
    // separable: n(q + G) = w(q_x)[n1] w(q_y)[n2] / N_q
    std::map<double, std::vector<double>> w1;
    for (const auto& q : sol.q_points)
        for (double c : {q.x(), q.y()})
            if (!w1.count(c)) {
                const auto s = oracle::fd_ground([depth](double x) { return -depth / 4 * std::cos(2 * x); },
                                                 constants::pi, c);
                w1[c] = oracle::fd_harmonic_weights(s, constants::pi, c, nm);
            }
    const double nq = double(sol.q_points.size());
    double tv = 0.0;
    double satellite = 0.0;
    std::size_t i = 0;
    for (const auto& q : sol.q_points)
        for (int n1 = -nm; n1 <= nm; ++n1)
            for (int n2 = -nm; n2 <= nm; ++n2, ++i) {
                ASSERT_LT((d.k[i] - (q + sol.g_vector(n1, n2))).norm(), 1e-12);
                const double ref = w1[q.x()][n1 + nm] * w1[q.y()][n2 + nm] / nq;
                tv += std::abs(d.weight[i] - ref);
                if (std::abs(n1) == 1 && n2 == 0) satellite += d.weight[i];
            }
    EXPECT_LT(0.5 * tv, 0.01);
    EXPECT_GT(satellite, 0.02);
}

TEST(GaussianFit, RecoversExactGaussian) {
    MomentumDistribution d;
    const double sx = 0.8;
    const double sy = 0.65;
    for (int i = -30; i <= 30; ++i)
        for (int j = -30; j <= 30; ++j) {
            const Vec2 k(0.05 * i, 0.05 * j);
            d.k.push_back(k);
            d.weight.push_back(std::exp(-k.x() * k.x() / (sx * sx) - k.y() * k.y() / (sy * sy)));
        }
    const GaussianFit f = fit_central_gaussian(d);
    EXPECT_NEAR(f.sigma_x, sx, 1e-9);
    EXPECT_NEAR(f.sigma_y, sy, 1e-9);
    EXPECT_LT(f.residual, 1e-9);
}

TEST(GaussianFit, RejectsMaskedOutDistribution) {
    MomentumDistribution d;
    for (int i = 0; i < 20; ++i) {
        d.k.push_back(Vec2(2.0 + 0.1 * i, 0.0));
        d.weight.push_back(1.0);
    }
    d.k.push_back(Vec2::Zero());
    d.weight.push_back(0.5);
    EXPECT_THROW(fit_central_gaussian(d), DomainError);
}

TEST(Tof, RadiusForOneRecoilMomentum) {
    EXPECT_NEAR(tof_radius(1.0, 12.2e-3, 0.0, units) * 1e6, 70.9, 0.1);
    EXPECT_THROW(tof_radius(1.0, 0.0, 0.0, units), DomainError);
}

TEST(Tof, InitialSizeAddsInQuadratureAndInverts) {
    const double d0 = 20e-6;
    const double r = tof_radius(0.9, 12.2e-3, d0, units);
    EXPECT_NEAR(r * r, std::pow(tof_radius(0.9, 12.2e-3, 0.0, units), 2) + d0 * d0, 1e-18);
    EXPECT_NEAR(momentum_radius(r, 12.2e-3, d0, units), 0.9, 1e-12);
    EXPECT_THROW(momentum_radius(10e-6, 12.2e-3, d0, units), DomainError);
}

TEST(Width, DressedNarrowerThanFarDetuned) {
    BlochOptions o;
    o.q_grid = 8;
    const double nu = setup.zeeman().nu_m1_0_hz * 1e-6;
    const double dressed = central_width(make_dressing(setup, build_preset(default_preset, 10.0), 205.0, 35.90), o);
    const double far = central_width(make_dressing(setup, build_preset(default_preset, 10.0), 205.0, nu - 1.0), o);
    EXPECT_LT(dressed, far);
}

TEST(Width, FarDetunedMatchesBareLattice) {
    BlochOptions o;
    o.q_grid = 8;
    const double nu = setup.zeeman().nu_m1_0_hz * 1e-6;
    const double far = central_width(make_dressing(setup, build_preset(default_preset, 10.0), 205.0, nu - 1.0), o);
    const double bare = fit_central_gaussian(momentum_distribution(solve_bands(bare_minus_one(10.0), lowest(8, 8)))).sigma_x;
    EXPECT_NEAR(far, bare, 0.02 * bare);
}

TEST(Width, EnvelopeCollapsesWithoutUncertainty) {
    WidthSweep sweep;
    sweep.rf_mhz = {35.85, 35.90};
    sweep.bloch.q_grid = 8;
    sweep.bloch.model = BandModel::single_surface;
    for (const WidthPoint& pt : width_vs_frequency(sweep)) {
        EXPECT_EQ(pt.lo, pt.width);
        EXPECT_EQ(pt.hi, pt.width);
    }
    sweep.field_uncertainty_mT = 0.003;
    sweep.depth_uncertainty_er = 0.5;
    for (const WidthPoint& pt : width_vs_frequency(sweep)) {
        EXPECT_LE(pt.lo, pt.width);
        EXPECT_GE(pt.hi, pt.width);
        EXPECT_GT(pt.hi - pt.lo, 0.0);
    }
}

TEST(Width, EmptySweepRejected) {
    EXPECT_THROW(width_vs_frequency(WidthSweep{}), DomainError);
}

TEST(BandDensity, UnitMeanAndPeakedAtWellForBareLattice) {
    const BlochSolution sol = solve_bands(bare_minus_one(10.0), lowest(8, 6));
    const Eigen::ArrayXXd n = band_density(sol, 32);
    EXPECT_NEAR(n.mean(), 1.0, 1e-12);
    Eigen::Index i, j;
    n.maxCoeff(&i, &j);
    // V_-1 minimum at the cell origin
    EXPECT_EQ(i, 0);
    EXPECT_EQ(j, 0);
}
