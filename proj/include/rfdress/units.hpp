// units.hpp - physical constants and the recoil unit system
//
// Every compute module works in recoil units:
//   energy   E_R = hbar^2 k^2 / 2M
//   length   1/k          (k = 2 pi / lambda)
//   time     hbar / E_R
//   momentum hbar k
// In these units hbar = 1 and the atomic mass is M = 1/2, so the kinetic
// energy of a plane wave with wavevector q (in units of k) is |q|^2.

#pragma once

#include <cmath>
#include <numbers>

#include "rfdress/errors.hpp"

namespace rfdress {

namespace constants {

inline constexpr double pi = std::numbers::pi;

// CODATA 2018
inline constexpr double planck = 6.62607015e-34;            // J s (exact)
inline constexpr double hbar = planck / (2.0 * pi);          // J s
inline constexpr double bohr_magneton = 9.2740100783e-24;    // J / T
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg

namespace rb87 {
inline constexpr double mass = 86.909180531 * atomic_mass_unit; // kg
inline constexpr double nuclear_spin = 1.5;
inline constexpr double g_j = 2.00233113;
inline constexpr double g_i = -0.0009951414;                 // sign convention: E includes +g_I mu_B m B
inline constexpr double hyperfine_splitting_hz = 6.834682610904e9;
} // namespace rb87

} // namespace constants

// Recoil energy hbar^2 k^2 / 2M in joules.
inline double recoil_energy(double wavelength_m, double mass_kg) {
    if (!(wavelength_m > 0.0) || !(mass_kg > 0.0))
        throw DomainError("recoil_energy: wavelength and mass must be positive");
    const double k = 2.0 * constants::pi / wavelength_m;
    return constants::hbar * constants::hbar * k * k / (2.0 * mass_kg);
}

// Converters between laboratory units and recoil units for one (wavelength, mass) pair.
class UnitSystem {
public:
    explicit UnitSystem(double wavelength_m = 790.76e-9, double mass_kg = constants::rb87::mass)
        : wavelength_m_(wavelength_m), mass_kg_(mass_kg),
          recoil_j_(recoil_energy(wavelength_m, mass_kg)),
          k_(2.0 * constants::pi / wavelength_m) {}

    double wavelength_m() const noexcept { return wavelength_m_; }
    double mass_kg() const noexcept { return mass_kg_; }
    double wavenumber() const noexcept { return k_; }

    double recoil_energy_j() const noexcept { return recoil_j_; }
    double recoil_frequency_hz() const noexcept { return recoil_j_ / constants::planck; }
    // hbar k / M
    double recoil_velocity() const noexcept { return constants::hbar * k_ / mass_kg_; }

    // frequency f (Hz) <-> energy h f in E_R
    double energy_from_hz(double f) const noexcept { return f / recoil_frequency_hz(); }
    double hz_from_energy(double e) const noexcept { return e * recoil_frequency_hz(); }
    double energy_from_khz(double f) const noexcept { return energy_from_hz(f * 1e3); }
    double khz_from_energy(double e) const noexcept { return hz_from_energy(e) * 1e-3; }
    double energy_from_mhz(double f) const noexcept { return energy_from_hz(f * 1e6); }
    double mhz_from_energy(double e) const noexcept { return hz_from_energy(e) * 1e-6; }
    double energy_from_joule(double e) const noexcept { return e / recoil_j_; }
    double joule_from_energy(double e) const noexcept { return e * recoil_j_; }

    double length_from_m(double x) const noexcept { return x * k_; }
    double m_from_length(double x) const noexcept { return x / k_; }

    // time unit hbar / E_R
    double time_unit_s() const noexcept { return constants::hbar / recoil_j_; }
    double time_from_s(double t) const noexcept { return t / time_unit_s(); }
    double s_from_time(double t) const noexcept { return t * time_unit_s(); }

    // rates: an angular rate in units of E_R / hbar
    double rate_from_per_s(double r) const noexcept { return r * time_unit_s(); }
    double per_s_from_rate(double r) const noexcept { return r / time_unit_s(); }

    // velocity unit (1/k) / (hbar/E_R) = E_R / (hbar k) = v_recoil / 2
    double velocity_unit() const noexcept { return recoil_j_ / (constants::hbar * k_); }
    double velocity_from_m_per_s(double v) const noexcept { return v / velocity_unit(); }
    double m_per_s_from_velocity(double v) const noexcept { return v * velocity_unit(); }

private:
    double wavelength_m_;
    double mass_kg_;
    double recoil_j_;
    double k_;
};

// Atomic mass in recoil units (hbar = k = E_R = 1).
inline constexpr double recoil_mass = 0.5;

} // namespace rfdress
