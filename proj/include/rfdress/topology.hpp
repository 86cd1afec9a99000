// topology.hpp - connectivity class of a thresholded 2D field (ring detection)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rfdress/errors.hpp"

namespace rfdress {

enum class Topology { simply_connected, annular, multiple_components };

// sublevel: the set {f <= t} (potential wells); superlevel: {f >= t} (densities)
enum class LevelSet { sublevel, superlevel };

inline std::string to_string(Topology t) {
    switch (t) {
    case Topology::simply_connected: return "simply-connected";
    case Topology::annular: return "annular";
    case Topology::multiple_components: return "multiple-components";
    }
    return "?";
}

struct TopologyReport {
    Topology tag;
    int components; // connected pieces of the level set (8-connected)
    int holes;      // pieces of the complement (4-connected) that do not touch the border
};

namespace detail {

// Label connected regions of `mask == want`; returns number of regions and, for each,
// whether it touches the array border.
inline std::pair<int, std::vector<bool>> label_regions(const std::vector<std::uint8_t>& mask, int nx, int ny,
                                                      std::uint8_t want, bool diagonal) {
    std::vector<int> label(mask.size(), -1);
    std::vector<bool> touches;
    std::vector<int> stack;
    int count = 0;
    for (int start = 0; start < nx * ny; ++start) {
        if (mask[start] != want || label[start] >= 0) continue;
        bool border = false;
        label[start] = count;
        stack.push_back(start);
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            const int i = cur / ny;
            const int j = cur % ny;
            if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) border = true;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if ((di == 0 && dj == 0) || (!diagonal && di != 0 && dj != 0)) continue;
                    const int ni = i + di;
                    const int nj = j + dj;
                    if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
                    const int nb = ni * ny + nj;
                    if (mask[nb] == want && label[nb] < 0) {
                        label[nb] = count;
                        stack.push_back(nb);
                    }
                }
        }
        touches.push_back(border);
        ++count;
    }
    return {count, touches};
}

} // namespace detail

// Classify the level set of `field` at min + fraction * (max - min), treating the array as a
// bounded window (center the region of interest first, e.g. with `recenter`).
inline TopologyReport ring_character_report(const Eigen::ArrayXXd& field, double threshold_fraction,
                                            LevelSet kind) {
    if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
        throw DomainError("ring_character: threshold fraction must lie in (0, 1)");
    const int nx = int(field.rows());
    const int ny = int(field.cols());
    if (nx < 3 || ny < 3) throw DomainError("ring_character: field too small");
    const double lo = field.minCoeff();
    const double hi = field.maxCoeff();
    if (!(hi - lo > 1e-14 * std::max(1.0, std::abs(hi)))) throw DomainError("ring_character: no level structure");
    const double t = lo + threshold_fraction * (hi - lo);

    std::vector<std::uint8_t> mask(std::size_t(nx) * ny);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            mask[std::size_t(i) * ny + j] = kind == LevelSet::sublevel ? field(i, j) <= t : field(i, j) >= t;

    const auto [components, touches_fg] = detail::label_regions(mask, nx, ny, 1, true);
    const auto [background, touches_bg] = detail::label_regions(mask, nx, ny, 0, false);
    int holes = 0;
    for (int b = 0; b < background; ++b)
        if (!touches_bg[b]) ++holes;

    Topology tag = Topology::multiple_components;
    if (components == 1 && holes == 0) tag = Topology::simply_connected;
    else if (components == 1 && holes == 1) tag = Topology::annular;
    return {tag, components, holes};
}

inline Topology ring_character(const Eigen::ArrayXXd& field, double threshold_fraction, LevelSet kind) {
    return ring_character_report(field, threshold_fraction, kind).tag;
}

// Periodic shift that moves sample (ci, cj) to the middle of the array.
inline Eigen::ArrayXXd recenter(const Eigen::ArrayXXd& field, int ci, int cj);

struct CentredRing {
    bool central_minimum = false; // (ci, cj) lies strictly below its 8 neighbours
    double threshold_fraction = 0.0;
    TopologyReport report{Topology::simply_connected, 1, 0};
};

// Density-style (superlevel) classification about a chosen site. With a central local minimum
// the field is cut halfway between the central value and the global maximum; otherwise at
// mid-range.
inline CentredRing centred_ring_report(const Eigen::ArrayXXd& field, int ci, int cj) {
    const Eigen::ArrayXXd f = recenter(field, ci, cj);
    const int c1 = int(f.rows()) / 2;
    const int c2 = int(f.cols()) / 2;
    CentredRing out;
    out.central_minimum = true;
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
            if ((di || dj) && !(f(c1, c2) < f(c1 + di, c2 + dj))) out.central_minimum = false;
    const double lo = f.minCoeff();
    const double hi = f.maxCoeff();
    if (!(hi - lo > 1e-14 * std::max(1.0, std::abs(hi)))) throw DomainError("ring_character: no level structure");
    if (!out.central_minimum) {
        out.threshold_fraction = 0.5;
        out.report = ring_character_report(f, 0.5, LevelSet::superlevel);
        return out;
    }
    out.threshold_fraction = (0.5 * (f(c1, c2) + hi) - lo) / (hi - lo);
    out.report = ring_character_report(f, out.threshold_fraction, LevelSet::superlevel);
    return out;
}

inline Eigen::ArrayXXd recenter(const Eigen::ArrayXXd& field, int ci, int cj) {
    const int nx = int(field.rows());
    const int ny = int(field.cols());
    Eigen::ArrayXXd out(nx, ny);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            out(i, j) = field(((ci - nx / 2 + i) % nx + nx) % nx, ((cj - ny / 2 + j) % ny + ny) % ny);
    return out;
}

} // namespace rfdress
