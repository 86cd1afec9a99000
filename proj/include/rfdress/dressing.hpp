// dressing.hpp - rotating-frame spin Hamiltonian, adiabatic surfaces and avoided-crossing gaps
//
// Internal spin order is (m_F = -1, 0, +1). With bare potentials V_m(r), rf detuning delta,
// quadratic Zeeman splitting delta' and rf coupling Omega, the RWA Hamiltonian is
//
//   [ V_-1 - delta   Omega/2   0                      ]
//   [ Omega/2        V_0       Omega/2                ]
//   [ 0              Omega/2   V_+1 + delta + delta'  ]
//
// All functions are unit-agnostic as long as energies and the lattice coefficients share one
// unit; the rest of the library uses E_R.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rfdress/errors.hpp"
#include "rfdress/lattice.hpp"
#include "rfdress/parallel.hpp"
#include "rfdress/units.hpp"
#include "rfdress/zeeman.hpp"

namespace rfdress {

struct DressingParams {
    LatticeModel lattice;
    double rabi = 0.0;            // Omega
    double detuning = 0.0;        // delta
    double quadratic_shift = 0.0; // delta'

    void validate() const {
        if (!(rabi >= 0.0)) throw DomainError("rf coupling must be non-negative");
        if (!(quadratic_shift >= 0.0)) throw DomainError("quadratic Zeeman shift must be non-negative");
        if (!std::isfinite(detuning)) throw DomainError("detuning must be finite");
    }
};

// Laboratory-side inputs that fix the unit system and the Zeeman structure.
struct PhysicalSetup {
    double field_mT = 5.117;
    double wavelength_nm = 790.76;
    double mass_kg = constants::rb87::mass;

    UnitSystem units() const { return UnitSystem(wavelength_nm * 1e-9, mass_kg); }
    ZeemanSpectrum zeeman() const { return breit_rabi(field_mT * 1e-3); }
};

// Omega/2pi in kHz and nu_rf in MHz -> parameters in E_R.
inline DressingParams make_dressing(const PhysicalSetup& setup, LatticeModel lattice, double rabi_khz, double rf_mhz) {
    const UnitSystem units = setup.units();
    const ZeemanSpectrum z = setup.zeeman();
    DressingParams p;
    p.lattice = std::move(lattice);
    p.rabi = units.energy_from_khz(rabi_khz);
    p.detuning = units.energy_from_hz(rf_mhz * 1e6 - z.nu_m1_0_hz);
    p.quadratic_shift = units.energy_from_hz(z.quadratic_shift_hz);
    p.validate();
    return p;
}

inline Eigen::Matrix3d h1_matrix(const DressingParams& p, const std::array<double, 3>& bare) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    h(0, 0) = bare[0] - p.detuning;
    h(1, 1) = bare[1];
    h(2, 2) = bare[2] + p.detuning + p.quadratic_shift;
    h(0, 1) = h(1, 0) = 0.5 * p.rabi;
    h(1, 2) = h(2, 1) = 0.5 * p.rabi;
    return h;
}

inline Eigen::Matrix3d h1_matrix(const DressingParams& p, const Vec2& r) {
    return h1_matrix(p, p.lattice.potentials(r));
}

struct SpinEigensystem {
    Eigen::Vector3d values;  // ascending
    Eigen::Matrix3d vectors; // columns, largest-magnitude component made positive
};

inline SpinEigensystem diagonalize(const Eigen::Matrix3d& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(h);
    if (es.info() != Eigen::Success) throw std::logic_error("3x3 Hermitian eigensolve failed");
    SpinEigensystem out{es.eigenvalues(), es.eigenvectors()};
    for (int c = 0; c < 3; ++c) {
        Eigen::Index k;
        out.vectors.col(c).cwiseAbs().maxCoeff(&k);
        if (out.vectors(k, c) < 0.0) out.vectors.col(c) *= -1.0;
    }
    return out;
}

// E_top - E_mid at one point.
inline double local_gap(const DressingParams& p, const Vec2& r) {
    const Eigen::Vector3d e = diagonalize(h1_matrix(p, r)).values;
    return e(2) - e(1);
}

// Sorted eigenvalue fields over one unit cell; sample (i, j) sits at fractional position (i/n1, j/n2).
struct AdiabaticSurfaces {
    int n1 = 0;
    int n2 = 0;
    Eigen::Matrix2d direct = Eigen::Matrix2d::Identity();
    Eigen::ArrayXXd low, mid, top, gap;
    std::vector<Eigen::Vector3d> top_state; // row-major (i * n2 + j)

    Vec2 position(int i, int j) const {
        return double(i) / n1 * direct.col(0) + double(j) / n2 * direct.col(1);
    }
    const Eigen::Vector3d& top_amplitudes(int i, int j) const { return top_state[std::size_t(i) * n2 + j]; }
    Eigen::Vector3d top_weights(int i, int j) const { return top_amplitudes(i, j).cwiseAbs2(); }
};

inline AdiabaticSurfaces adiabatic_surfaces(const DressingParams& p, int n1, int n2, int threads = 1) {
    p.validate();
    if (n1 < 16 || n2 < 16) throw DomainError("adiabatic_surfaces: grid must be at least 16x16");
    AdiabaticSurfaces s;
    s.n1 = n1;
    s.n2 = n2;
    s.direct = p.lattice.direct();
    s.low.resize(n1, n2);
    s.mid.resize(n1, n2);
    s.top.resize(n1, n2);
    s.gap.resize(n1, n2);
    s.top_state.resize(std::size_t(n1) * n2);
    parallel_for(std::size_t(n1) * n2, threads, [&](std::size_t idx) {
        const int i = int(idx / n2);
        const int j = int(idx % n2);
        const SpinEigensystem es = diagonalize(h1_matrix(p, s.position(i, j)));
        s.low(i, j) = es.values(0);
        s.mid(i, j) = es.values(1);
        s.top(i, j) = es.values(2);
        s.gap(i, j) = es.values(2) - es.values(1);
        s.top_state[idx] = es.vectors.col(2);
    });
    return s;
}

struct GapResult {
    double gap = 0.0;  // min over the cell of E_top - E_mid
    Vec2 location = Vec2::Zero();
    bool crossing = false; // the two highest diabatic levels exchange order somewhere in the cell
};

namespace detail {

// Golden-section minimization of f on [a, b]; returns the abscissa.
template <class F>
double golden_section(F&& f, double a, double b, double tol) {
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (std::abs(b - a) > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

// Avoided-crossing gap: coarse scan of the cell, then alternating golden-section line searches
// in the grid cell around the coarse minimum, repeated with a halving bracket until the gap
// changes by less than `rel_tol` between passes.
inline GapResult min_gap(const DressingParams& p, int coarse = 64, double rel_tol = 1e-3) {
    p.validate();
    if (coarse < 16) throw DomainError("min_gap: coarse grid must be at least 16");
    const LatticeModel& lat = p.lattice;
    auto gap_at = [&](double u, double v) { return local_gap(p, lat.position(u, v)); };

    double best = std::numeric_limits<double>::infinity();
    double bu = 0.0;
    double bv = 0.0;
    int top_label = -1;
    bool crossing = false;
    for (int i = 0; i < coarse; ++i)
        for (int j = 0; j < coarse; ++j) {
            const double u = double(i) / coarse;
            const double v = double(j) / coarse;
            const Eigen::Matrix3d h = h1_matrix(p, lat.position(u, v));
            Eigen::Index label;
            h.diagonal().maxCoeff(&label);
            if (top_label < 0) top_label = int(label);
            else if (top_label != int(label)) crossing = true;
            const Eigen::Vector3d e = diagonalize(h).values;
            if (e(2) - e(1) < best) {
                best = e(2) - e(1);
                bu = u;
                bv = v;
            }
        }

    double half = 1.0 / coarse;
    const double floor_half = 1e-7 / coarse;
    for (int pass = 0; pass < 80 && half > floor_half; ++pass) {
        const double before = best;
        const double tol = half * 1e-3;
        const double nu = detail::golden_section([&](double u) { return gap_at(u, bv); }, bu - half, bu + half, tol);
        if (const double g = gap_at(nu, bv); g < best) {
            best = g;
            bu = nu;
        }
        const double nv = detail::golden_section([&](double v) { return gap_at(bu, v); }, bv - half, bv + half, tol);
        if (const double g = gap_at(bu, nv); g < best) {
            best = g;
            bv = nv;
        }
        // shrink the bracket once a pass stops paying off
        if (before - best <= rel_tol * 1e-6 * std::max(best, 1e-300)) half *= 0.5;
    }
    bu -= std::floor(bu);
    bv -= std::floor(bv);
    return {best, lat.position(bu, bv), crossing};
}

struct GapAsymptotes {
    double weak;   // Omega^2 / delta'          (Omega << delta')
    double strong; // Omega/sqrt2 - delta'/4    (Omega >> delta')
};

inline GapAsymptotes gap_asymptotes(double rabi, double quadratic_shift) {
    if (!(rabi > 0.0) || !(quadratic_shift > 0.0)) throw DomainError("gap_asymptotes: inputs must be positive");
    return {rabi * rabi / quadratic_shift, rabi / std::sqrt(2.0) - 0.25 * quadratic_shift};
}

inline double flat_gap(double rabi, double detuning, double quadratic_shift) {
    DressingParams p;
    p.rabi = rabi;
    p.detuning = detuning;
    p.quadratic_shift = quadratic_shift;
    const Eigen::Vector3d e = diagonalize(h1_matrix(p, std::array<double, 3>{0.0, 0.0, 0.0})).values;
    return e(2) - e(1);
}

// Smallest top-mid gap over rf detuning with spin-independent (flat) potentials.
// The ladder is symmetric about delta = -delta'/2, where the -1 and +1 diabats meet.
inline double flat_minimum_gap(double rabi, double quadratic_shift) {
    const double centre = -0.5 * quadratic_shift;
    const double span = quadratic_shift + 2.0 * rabi + 1e-12;
    auto f = [&](double d) { return flat_gap(rabi, d, quadratic_shift); };
    const double d = detail::golden_section(f, centre - span, centre + span, 1e-10 * span);
    return std::min(f(d), f(centre));
}

struct RabiBeat {
    double frequency; // |E_n - E_m|
    double amplitude; // 2 w_n w_m, the cosine amplitude in P_-1(t)
};

struct RabiOscillation {
    double frequency = 0.0;
    double amplitude = 0.0;
    std::vector<RabiBeat> beats; // all nonzero-frequency beats, strongest first
    bool zero_amplitude = false;
    bool degenerate = false;     // two dressed levels coincide; see `beats`
};

// Dominant oscillation frequency of the m_F = -1 population after starting in m_F = -1,
// with flat potentials. P_-1(t) = sum w_n^2 + sum_{n<m} 2 w_n w_m cos((E_n - E_m) t).
inline RabiOscillation rabi_oscillation_frequency(double rabi, double detuning, double quadratic_shift) {
    if (!(rabi >= 0.0)) throw DomainError("rabi_oscillation_frequency: negative coupling");
    DressingParams p;
    p.rabi = rabi;
    p.detuning = detuning;
    p.quadratic_shift = quadratic_shift;
    const SpinEigensystem es = diagonalize(h1_matrix(p, std::array<double, 3>{0.0, 0.0, 0.0}));
    const Eigen::Vector3d w = es.vectors.row(0).transpose().cwiseAbs2();
    const double scale = std::max({std::abs(es.values(0)), std::abs(es.values(2)), rabi, 1e-300});

    RabiOscillation out;
    struct Candidate {
        RabiBeat beat;
        double weight;
    };
    std::vector<Candidate> cands;
    for (int n = 0; n < 3; ++n)
        for (int m = n + 1; m < 3; ++m) {
            const double f = std::abs(es.values(m) - es.values(n));
            const double a = 2.0 * w(n) * w(m);
            if (f <= 1e-12 * scale) {
                if (a > 1e-14) out.degenerate = true;
                continue;
            }
            cands.push_back({{f, a}, std::max(w(n), w(m))});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
        if (std::abs(x.beat.amplitude - y.beat.amplitude) > 1e-12) return x.beat.amplitude > y.beat.amplitude;
        return x.weight > y.weight;
    });
    for (const auto& c : cands)
        if (c.beat.amplitude > 1e-14) out.beats.push_back(c.beat);
    if (out.beats.empty()) {
        out.zero_amplitude = true;
        return out;
    }
    out.frequency = out.beats.front().frequency;
    out.amplitude = out.beats.front().amplitude;
    return out;
}

// Inverse calibration: the coupling Omega whose dominant m_F=-1 oscillation frequency equals `osc`.
inline double rabi_from_oscillation(double osc, double detuning, double quadratic_shift) {
    if (!(osc > 0.0)) throw DomainError("rabi_from_oscillation: frequency must be positive");
    auto f = [&](double rabi) { return rabi_oscillation_frequency(rabi, detuning, quadratic_shift).frequency - osc; };
    double lo = 0.0;
    double hi = std::max(osc, 1e-12);
    while (f(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace rfdress
