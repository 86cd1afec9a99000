// zeeman.hpp - Breit-Rabi structure of the Rb-87 5S1/2 ground state

#pragma once

#include <array>
#include <cmath>
#include <cstdlib>

#include "rfdress/errors.hpp"
#include "rfdress/units.hpp"

namespace rfdress {

struct ZeemanLevel {
    int f;
    int m_f;
    double energy_hz; // E/h, zero at the field-free hyperfine centroid
};

struct ZeemanSpectrum {
    double field_t = 0.0;
    std::array<ZeemanLevel, 8> levels{}; // F=1 (m=-1,0,1) then F=2 (m=-2..2)
    double nu_m1_0_hz = 0.0;             // E(1,-1) - E(1,0)
    double nu_0_p1_hz = 0.0;             // E(1,0) - E(1,+1)
    double quadratic_shift_hz = 0.0;     // delta'/2pi = nu_m1_0 - nu_0_p1

    double energy(int f, int m_f) const {
        for (const auto& l : levels)
            if (l.f == f && l.m_f == m_f) return l.energy_hz;
        throw DomainError("ZeemanSpectrum::energy: no such level");
    }
};

// Exact Breit-Rabi energy (Hz) of |F, m_F> at field B (tesla), nuclear g-factor included.
inline double breit_rabi_energy(int f, int m_f, double field_t) {
    using namespace constants;
    using namespace constants::rb87;
    if (field_t < 0.0) throw DomainError("breit_rabi: negative field");
    if ((f != 1 && f != 2) || std::abs(m_f) > f) throw DomainError("breit_rabi: invalid |F, mF>");

    const double a = hyperfine_splitting_hz;
    const double n = 2.0 * nuclear_spin + 1.0;
    const double mub = bohr_magneton * field_t / planck; // Hz
    const double m = m_f;

    // Stretched states are linear in B; the square-root form would pick the wrong branch for x > 1.
    if (f == 2 && std::abs(m_f) == 2)
        return a * nuclear_spin / n + 0.5 * m / 2.0 * (g_j + 2.0 * nuclear_spin * g_i) * mub;

    const double x = (g_j - g_i) * mub / a;
    const double sign = (f == 2) ? 1.0 : -1.0;
    return -a / (2.0 * n) + g_i * m * mub + sign * 0.5 * a * std::sqrt(1.0 + 4.0 * m * x / n + x * x);
}

inline ZeemanSpectrum breit_rabi(double field_t) {
    if (field_t < 0.0) throw DomainError("breit_rabi: negative field");
    ZeemanSpectrum s;
    s.field_t = field_t;
    std::size_t i = 0;
    for (int m = -1; m <= 1; ++m) s.levels[i++] = {1, m, breit_rabi_energy(1, m, field_t)};
    for (int m = -2; m <= 2; ++m) s.levels[i++] = {2, m, breit_rabi_energy(2, m, field_t)};
    s.nu_m1_0_hz = s.energy(1, -1) - s.energy(1, 0);
    s.nu_0_p1_hz = s.energy(1, 0) - s.energy(1, 1);
    s.quadratic_shift_hz = s.nu_m1_0_hz - s.nu_0_p1_hz;
    return s;
}

// delta/2pi = nu_rf - nu_{-1,0}(B), in Hz.
inline double detuning_hz(double rf_hz, double field_t) {
    return rf_hz - breit_rabi(field_t).nu_m1_0_hz;
}

// Low-field limit of d nu_{-1,0} / dB in Hz/T: |g_F| mu_B / h with g_F(F=1) from g_J and g_I.
inline double low_field_slope_hz_per_t() {
    using namespace constants;
    return bohr_magneton * (rb87::g_j - 5.0 * rb87::g_i) / (4.0 * planck);
}

} // namespace rfdress
