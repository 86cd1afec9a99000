// Minimum avoided-crossing gap versus lattice depth for the default checkerboard preset.

#include <cstdio>

#include "rfdress/dressing.hpp"

int main() {
    using namespace rfdress;
    const PhysicalSetup setup;
    const UnitSystem units = setup.units();
    std::printf("depth_Er,Delta_kHz,x,y\n");
    for (double depth : {4.0, 8.0, 10.0, 12.0, 16.0, 24.0}) {
        const DressingParams p = make_dressing(setup, build_preset(default_preset, depth), 205.0, 35.90);
        const GapResult g = min_gap(p);
        std::printf("%g,%.3f,%.4f,%.4f\n", depth, units.khz_from_energy(g.gap), g.location.x(),
                    g.location.y());
    }
}
