// loss.hpp - nonadiabatic loss estimators for atoms held in the uppermost adiabatic potential
//
// Everything is evaluated in recoil units (hbar = k = E_R = 1, M = 1/2): a gap Delta is the
// energy hbar*Delta in E_R, velocities are in E_R/(hbar k), slopes in E_R k. Rates are converted
// to 1/s only when a LossEstimate is assembled.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfdress/bloch.hpp"
#include "rfdress/dressing.hpp"
#include "rfdress/errors.hpp"
#include "rfdress/lattice.hpp"
#include "rfdress/units.hpp"

namespace rfdress {

enum class LossModel { lz, fourier_lz, semiclassical };

inline std::string to_string(LossModel m) {
    switch (m) {
    case LossModel::lz: return "lz";
    case LossModel::fourier_lz: return "fourier-lz";
    case LossModel::semiclassical: return "semiclassical";
    }
    return "?";
}

struct LossInputs {
    double gap = 0.0;      // hbar Delta, E_R
    double depth = 0.0;    // U, E_R
    double rabi = std::numeric_limits<double>::quiet_NaN();
    double trap_frequency = 0.0; // omega_l, E_R / hbar
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double velocity = std::numeric_limits<double>::quiet_NaN();
    double slope = std::numeric_limits<double>::quiet_NaN();
};

struct LossEstimate {
    double rate = 0.0;        // E_R / hbar
    double rate_per_s = 0.0;
    LossModel model = LossModel::lz;
    LossInputs inputs;
    double nonadiabatic_probability = std::numeric_limits<double>::quiet_NaN();
    bool regime_ok = true;     // (1 - P_A) << 1 for lz, omega_l << Delta for semiclassical
    std::vector<std::string> flags;
};

struct LossOptions {
    double attempt_scale = 1.0; // rate = attempt_scale * (omega_l / 2 pi) * P_NA
    double alpha = 1.0;
    double prefactor = 1.0;
    double regime_ratio = 0.1;  // "<<" taken as "below this ratio"
    int surface_grid = 64;
};

// ---------------------------------------------------------------------------------------------
// Landau-Zener

// Adiabatic following probability P_A = 1 - exp(-(pi/2) Delta^2 / (v E')).
inline double lz_probability(double gap, double velocity, double slope) {
    if (!(velocity > 0.0) || !(slope > 0.0)) throw DomainError("lz_probability: velocity and slope must be positive");
    if (!(gap >= 0.0)) throw DomainError("lz_probability: gap must be non-negative");
    return -std::expm1(-0.5 * constants::pi * gap * gap / (velocity * slope));
}

inline double lz_nonadiabatic(double gap, double velocity, double slope) {
    if (!(velocity > 0.0) || !(slope > 0.0)) throw DomainError("lz_probability: velocity and slope must be positive");
    return std::exp(-0.5 * constants::pi * gap * gap / (velocity * slope));
}

// Harmonic frequency of the bare m_F = -1 well, sqrt of the mean Hessian eigenvalue over M.
inline double bare_well_frequency(const LatticeModel& lat) {
    const Extremum well = lat.extremum(-1, 1);
    const Eigen::Matrix2d h = lat.hessian(well.position, -1);
    const double mean_curvature = 0.5 * h.trace();
    if (!(mean_curvature > 0.0)) throw DomainError("bare m_F=-1 lattice has no confining well");
    return std::sqrt(mean_curvature / recoil_mass);
}

// Ground-state RMS velocity sqrt(hbar omega / 2M) of a harmonic well.
inline double harmonic_rms_velocity(double omega) { return std::sqrt(omega / (2.0 * recoil_mass)); }

// Gradient of the diabat difference (V_+1 + delta + delta') - (V_-1 - delta); the constant
// shifts drop out.
inline Vec2 diabat_difference_gradient(const LatticeModel& lat, const Vec2& r) {
    return lat.gradient(r, 1) - lat.gradient(r, -1);
}

// Where the -1 and +1 diabats meet as the rf is swept: the steepest point of V_+1 - V_-1 on the
// straight path from the m_F = -1 minimum to the nearest m_F = +1 minimum.
inline Vec2 crossing_point(const LatticeModel& lat, int samples = 256) {
    const Vec2 a = lat.extremum(-1, 1).position;
    Vec2 b = lat.extremum(1, 1).position;
    // nearest periodic image of the +1 minimum
    const Eigen::Matrix2d dir = lat.direct();
    Vec2 best_b = b;
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j) {
            const Vec2 cand = b + i * dir.col(0) + j * dir.col(1);
            if ((cand - a).norm() < (best_b - a).norm()) best_b = cand;
        }
    b = best_b;
    Vec2 best = a;
    double steepest = -1.0;
    for (int s = 0; s <= samples; ++s) {
        const Vec2 r = a + (b - a) * (double(s) / samples);
        const double g = diabat_difference_gradient(lat, r).norm();
        if (g > steepest) {
            steepest = g;
            best = r;
        }
    }
    if (!(steepest > 1e-12)) throw DomainError("no crossing found: the -1 and +1 diabats are parallel");
    return best;
}

inline LossEstimate assemble(LossEstimate e, const UnitSystem& units) {
    e.rate_per_s = units.per_s_from_rate(e.rate);
    return e;
}

// gamma = attempt_scale * (omega/2pi) * (1 - P_A), with omega and v from the bare m_F = -1 well
// and E' the diabat-difference slope at the crossing point.
inline LossEstimate lz_rate(const LatticeModel& lat, double gap, const LossOptions& opt = {},
                            const UnitSystem& units = UnitSystem()) {
    if (!(gap >= 0.0)) throw DomainError("lz_rate: gap must be non-negative");
    const double omega = bare_well_frequency(lat);
    const double v = harmonic_rms_velocity(omega);
    const double slope = diabat_difference_gradient(lat, crossing_point(lat)).norm();
    LossEstimate e;
    e.model = LossModel::lz;
    e.inputs.gap = gap;
    e.inputs.depth = lat.nominal_depth();
    e.inputs.trap_frequency = omega;
    e.inputs.velocity = v;
    e.inputs.slope = slope;
    e.nonadiabatic_probability = lz_nonadiabatic(gap, v, slope);
    e.rate = opt.attempt_scale * omega / (2.0 * constants::pi) * e.nonadiabatic_probability;
    e.regime_ok = e.nonadiabatic_probability < opt.regime_ratio;
    if (!e.regime_ok) e.flags.push_back("1-P_A not small");
    return assemble(e, units);
}

// ---------------------------------------------------------------------------------------------
// Uppermost-surface trap frequency

struct SurfaceMinimum {
    Vec2 position = Vec2::Zero();
    double energy = 0.0;
    Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
    double trap_frequency = 0.0; // sqrt(trace(H) / (2M)), E_R / hbar
};

inline double top_energy(const DressingParams& p, const Vec2& r) {
    return diagonalize(h1_matrix(p, r)).values(2);
}

// Hellmann-Feynman gradient of E_top: <top| dH1/dr |top>, with dH1/dr = diag(grad V_-1, grad V_0, grad V_+1).
inline Vec2 top_gradient(const DressingParams& p, const Vec2& r) {
    const SpinEigensystem es = diagonalize(h1_matrix(p, r));
    const Eigen::Vector3d w = es.vectors.col(2).cwiseAbs2();
    Vec2 g = Vec2::Zero();
    for (int m = -1; m <= 1; ++m) g += w(m + 1) * p.lattice.gradient(r, m);
    return g;
}

namespace detail {

// Central differences of the analytic gradient, symmetrized.
inline Eigen::Matrix2d top_hessian(const DressingParams& p, const Vec2& r, double h) {
    Eigen::Matrix2d hess;
    hess.col(0) = (top_gradient(p, r + Vec2(h, 0)) - top_gradient(p, r - Vec2(h, 0))) / (2.0 * h);
    hess.col(1) = (top_gradient(p, r + Vec2(0, h)) - top_gradient(p, r - Vec2(0, h))) / (2.0 * h);
    return 0.5 * (hess + hess.transpose());
}

} // namespace detail

// Global minimum of E_top over the cell (grid scan, then damped Newton on the analytic gradient)
// and the harmonic frequency from the curvature there. The minimum may lie in a shallow trough
// whose Hessian is close to singular, so the iteration runs to a vanishing gradient rather than
// stopping at the first rejected step.
inline SurfaceMinimum top_surface_minimum(const DressingParams& p, int grid = 64) {
    const AdiabaticSurfaces s = adiabatic_surfaces(p, grid, grid);
    Eigen::Index bi = 0;
    Eigen::Index bj = 0;
    s.top.minCoeff(&bi, &bj);
    Vec2 r = s.position(int(bi), int(bj));
    const double cell = std::min(s.direct.col(0).norm(), s.direct.col(1).norm());
    const double h = 1e-4 * cell;
    const double limit = cell / grid;
    double energy = top_energy(p, r);
    double mu = 1e-3;
    for (int it = 0; it < 500; ++it) {
        const Vec2 g = top_gradient(p, r);
        if (g.norm() < 1e-11 * std::max(1.0, std::abs(energy))) break;
        const Eigen::Matrix2d hess = detail::top_hessian(p, r, h);
        const double shift = std::max(0.0, -Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(hess).eigenvalues()(0));
        Vec2 step = -(hess + (shift + mu) * Eigen::Matrix2d::Identity()).ldlt().solve(g);
        if (step.norm() > limit) step *= limit / step.norm();
        const double trial = top_energy(p, r + step);
        if (trial <= energy) {
            r += step;
            energy = trial;
            mu = std::max(mu * 0.3, 1e-12);
            if (step.norm() < 1e-13 * cell) break;
        } else {
            mu *= 10.0;
            if (mu > 1e12) break;
        }
    }
    SurfaceMinimum out;
    out.position = r;
    out.energy = energy;
    out.hessian = detail::top_hessian(p, r, h);
    const double mean_curvature = 0.5 * out.hessian.trace();
    if (!(mean_curvature > 1e-8)) throw DomainError("flat top surface: no confining minimum");
    out.trap_frequency = std::sqrt(mean_curvature / recoil_mass);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Semiclassical exponential law gamma = prefactor * omega_l * exp(-alpha Delta / omega_l)

inline double semiclassical_law(double trap_frequency, double gap, double alpha, double prefactor) {
    if (!(trap_frequency > 0.0)) throw DomainError("semiclassical_rate: trap frequency must be positive");
    if (!(gap >= 0.0)) throw DomainError("semiclassical_rate: gap must be non-negative");
    return prefactor * trap_frequency * std::exp(-alpha * gap / trap_frequency);
}

inline LossEstimate semiclassical_rate(double trap_frequency, double gap, double depth, const LossOptions& opt = {},
                                       const UnitSystem& units = UnitSystem()) {
    LossEstimate e;
    e.model = LossModel::semiclassical;
    e.inputs.gap = gap;
    e.inputs.depth = depth;
    e.inputs.trap_frequency = trap_frequency;
    e.inputs.alpha = opt.alpha;
    e.rate = semiclassical_law(trap_frequency, gap, opt.alpha, opt.prefactor);
    e.regime_ok = trap_frequency < opt.regime_ratio * gap;
    if (!e.regime_ok) e.flags.push_back("omega_l not << Delta");
    return assemble(e, units);
}

// omega_l from the harmonic fit to the top-surface minimum, Delta from min_gap.
inline LossEstimate semiclassical_rate(const DressingParams& p, const LossOptions& opt = {},
                                       const UnitSystem& units = UnitSystem()) {
    const SurfaceMinimum m = top_surface_minimum(p, opt.surface_grid);
    const GapResult g = min_gap(p);
    LossEstimate e = semiclassical_rate(m.trap_frequency, g.gap, p.lattice.nominal_depth(), opt, units);
    e.inputs.rabi = p.rabi;
    return e;
}

// ---------------------------------------------------------------------------------------------
// Fourier-weighted Landau-Zener: sum_k n(k) P_NA(v = hbar|k|/M), converted to a rate with the
// attempt frequency omega_l / 2 pi of the uppermost surface.

inline double fourier_weighted_probability(const MomentumDistribution& dist, double gap, double slope) {
    if (dist.k.empty()) throw DomainError("fourier_weighted_lz: empty distribution");
    if (!(slope > 0.0)) throw DomainError("fourier_weighted_lz: slope must be positive");
    double total = 0.0;
    double weight = 0.0;
    for (std::size_t i = 0; i < dist.k.size(); ++i) {
        const double v = dist.k[i].norm() / recoil_mass;
        weight += dist.weight[i];
        if (v > 0.0) total += dist.weight[i] * std::exp(-0.5 * constants::pi * gap * gap / (v * slope));
    }
    if (!(weight > 0.0)) throw DomainError("fourier_weighted_lz: zero total weight");
    return total / weight;
}

inline LossEstimate fourier_weighted_lz(const MomentumDistribution& dist, double gap, double slope,
                                        double trap_frequency, const LossOptions& opt = {},
                                        const UnitSystem& units = UnitSystem()) {
    LossEstimate e;
    e.model = LossModel::fourier_lz;
    e.inputs.gap = gap;
    e.inputs.slope = slope;
    e.inputs.trap_frequency = trap_frequency;
    e.nonadiabatic_probability = fourier_weighted_probability(dist, gap, slope);
    e.rate = opt.attempt_scale * trap_frequency / (2.0 * constants::pi) * e.nonadiabatic_probability;
    e.regime_ok = e.nonadiabatic_probability < opt.regime_ratio;
    if (!e.regime_ok) e.flags.push_back("1-P_A not small");
    return assemble(e, units);
}

inline LossEstimate fourier_weighted_lz(const BlochSolution& sol, const DressingParams& p, const LossOptions& opt = {},
                                        const UnitSystem& units = UnitSystem()) {
    const MomentumDistribution dist = momentum_distribution(sol);
    const double slope = diabat_difference_gradient(p.lattice, crossing_point(p.lattice)).norm();
    const SurfaceMinimum m = top_surface_minimum(p, opt.surface_grid);
    const GapResult g = min_gap(p);
    LossEstimate e = fourier_weighted_lz(dist, g.gap, slope, m.trap_frequency, opt, units);
    e.inputs.depth = p.lattice.nominal_depth();
    e.inputs.rabi = p.rabi;
    return e;
}

// ---------------------------------------------------------------------------------------------
// Loading sweep: two-level sweep formula P_diabatic = exp(-2 pi (Omega/2)^2 / (d delta / dt))

struct SweepAdiabaticity {
    double probability = 1.0;  // diabatic spin-flip probability
    double exponent = 0.0;     // -ln P
    bool satisfied = false;    // P below `threshold`
    double threshold = 1e-6;
};

// Cyclic inputs: rabi_hz = Omega/2pi, sweep_hz_per_s = (d delta/dt)/2pi.
inline SweepAdiabaticity sweep_adiabaticity(double sweep_hz_per_s, double rabi_hz, double threshold = 1e-6) {
    if (!(sweep_hz_per_s > 0.0)) throw DomainError("sweep_adiabaticity: sweep rate must be positive");
    if (!(rabi_hz >= 0.0)) throw DomainError("sweep_adiabaticity: coupling must be non-negative");
    const double half = constants::pi * rabi_hz; // Omega / 2, rad/s
    SweepAdiabaticity out;
    out.exponent = 2.0 * constants::pi * half * half / (2.0 * constants::pi * sweep_hz_per_s);
    out.probability = std::exp(-out.exponent);
    out.threshold = threshold;
    out.satisfied = out.probability < threshold;
    return out;
}

} // namespace rfdress
