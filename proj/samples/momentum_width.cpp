// Dephased-band momentum width of the uppermost dressed band, near and far from resonance.

#include <cstdio>

#include "rfdress/bloch.hpp"

int main() {
    using namespace rfdress;
    const PhysicalSetup setup;
    const UnitSystem units = setup.units();
    BlochOptions opt;
    opt.q_grid = 8;
    for (double rf : {35.0, 35.90}) {
        const DressingParams p = make_dressing(setup, build_preset(default_preset, 10.0), 205.0, rf);
        const BlochSolution sol = solve_bands(p, opt);
        const TofWidth w = tof_width(momentum_distribution(sol), 12.2e-3, 0.0, units);
        std::printf("rf %.3f MHz: sigma_k = %.4f hbar k, TOF radius %.1f um, band energy %.3f E_R\n", rf,
                    w.sigma_k, w.radius_m * 1e6, sol.mean_ground_energy());
    }
}
