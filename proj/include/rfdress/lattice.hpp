// lattice.hpp - state-dependent 2D lattice potentials V_mF(r) as truncated Fourier series

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "rfdress/errors.hpp"
#include "rfdress/units.hpp"

namespace rfdress {

using Vec2 = Eigen::Vector2d;
using FourierTable = std::map<std::pair<int, int>, std::complex<double>>;

inline constexpr std::string_view default_preset = "checkerboard-default";
inline constexpr int max_user_order = 16;

// m_F in {-1, 0, +1} -> storage slot {0, 1, 2}
inline int spin_slot(int m_f) {
    if (m_f < -1 || m_f > 1) throw DomainError("invalid spin index " + std::to_string(m_f));
    return m_f + 1;
}

inline std::string spin_key(int m_f) {
    return m_f > 0 ? "mF=+1" : (m_f == 0 ? "mF=0" : "mF=-1");
}

// First G violating c(-G) = conj(c(G)), if any.
inline std::optional<std::pair<int, int>> find_asymmetry(const FourierTable& table, double tol = 1e-12) {
    double scale = 0.0;
    for (const auto& [g, c] : table) scale = std::max(scale, std::abs(c));
    const double bound = tol * std::max(1.0, scale);
    for (const auto& [g, c] : table) {
        auto it = table.find({-g.first, -g.second});
        const std::complex<double> partner = (it == table.end()) ? 0.0 : it->second;
        if (std::abs(partner - std::conj(c)) > bound) return g;
    }
    return std::nullopt;
}

struct Extremum {
    Vec2 position;
    double value;
};

class LatticeModel {
public:
    LatticeModel() : LatticeModel(square_reciprocal(), {}, 0.0, "custom") {}

    // `reciprocal` holds the primitive reciprocal vectors b1, b2 (units of k) as columns.
    LatticeModel(const Eigen::Matrix2d& reciprocal, std::array<FourierTable, 3> tables, double depth_er,
                 std::string preset)
        : recip_(reciprocal), tables_(std::move(tables)), depth_(depth_er), preset_(std::move(preset)) {
        if (std::abs(recip_.determinant()) < 1e-12) throw DomainError("reciprocal vectors are degenerate");
        direct_ = 2.0 * constants::pi * recip_.inverse().transpose();
        for (int s = 0; s < 3; ++s) {
            if (auto bad = find_asymmetry(tables_[s]))
                throw DomainError(spin_key(s - 1) + " table is not conjugate-symmetric at G=(" +
                                  std::to_string(bad->first) + "," + std::to_string(bad->second) + ")");
            for (const auto& [g, c] : tables_[s]) {
                if (std::abs(g.first) > max_user_order || std::abs(g.second) > max_user_order)
                    throw DomainError("Fourier order exceeds " + std::to_string(max_user_order));
                if (c != 0.0) terms_[s].push_back({g.first, g.second, recip_ * Vec2(g.first, g.second), c});
            }
        }
    }

    static Eigen::Matrix2d square_reciprocal() { return 2.0 * Eigen::Matrix2d::Identity(); }

    const Eigen::Matrix2d& reciprocal() const noexcept { return recip_; }
    // Primitive direct-lattice vectors a1, a2 (units of 1/k) as columns; a_i . b_j = 2 pi delta_ij.
    const Eigen::Matrix2d& direct() const noexcept { return direct_; }
    double nominal_depth() const noexcept { return depth_; }
    const std::string& preset() const noexcept { return preset_; }
    const FourierTable& table(int m_f) const { return tables_[spin_slot(m_f)]; }

    std::complex<double> coefficient(int m_f, int n1, int n2) const {
        const auto& t = tables_[spin_slot(m_f)];
        auto it = t.find({n1, n2});
        return it == t.end() ? 0.0 : it->second;
    }

    int max_order() const {
        int n = 0;
        for (const auto& t : tables_)
            for (const auto& [g, c] : t) n = std::max({n, std::abs(g.first), std::abs(g.second)});
        return n;
    }

    bool is_real_symmetric() const {
        for (const auto& t : tables_)
            for (const auto& [g, c] : t)
                if (c.imag() != 0.0) return false;
        return true;
    }

    Vec2 position(double u, double v) const { return u * direct_.col(0) + v * direct_.col(1); }

    std::complex<double> evaluate_complex(const Vec2& r, int m_f) const {
        std::complex<double> sum = 0.0;
        for (const auto& t : terms_[spin_slot(m_f)]) sum += t.c * std::polar(1.0, t.g.dot(r));
        return sum;
    }

    double potential(const Vec2& r, int m_f) const {
        double sum = 0.0;
        for (const auto& t : terms_[spin_slot(m_f)]) {
            const double phase = t.g.dot(r);
            sum += t.c.real() * std::cos(phase) - t.c.imag() * std::sin(phase);
        }
        return sum;
    }

    std::array<double, 3> potentials(const Vec2& r) const {
        return {potential(r, -1), potential(r, 0), potential(r, 1)};
    }

    Vec2 gradient(const Vec2& r, int m_f) const {
        Vec2 g = Vec2::Zero();
        for (const auto& t : terms_[spin_slot(m_f)]) {
            const double phase = t.g.dot(r);
            g += t.g * (-t.c.real() * std::sin(phase) - t.c.imag() * std::cos(phase));
        }
        return g;
    }

    Eigen::Matrix2d hessian(const Vec2& r, int m_f) const {
        Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
        for (const auto& t : terms_[spin_slot(m_f)]) {
            const double phase = t.g.dot(r);
            h -= t.g * t.g.transpose() * (t.c.real() * std::cos(phase) - t.c.imag() * std::sin(phase));
        }
        return h;
    }

    // Global minimum (sign=+1) or maximum (sign=-1) of V_mF over the cell: grid scan + Newton polish.
    Extremum extremum(int m_f, int sign = 1, int grid = 48) const {
        std::vector<std::pair<double, Vec2>> candidates;
        for (int i = 0; i < grid; ++i)
            for (int j = 0; j < grid; ++j) {
                const Vec2 r = position(double(i) / grid, double(j) / grid);
                candidates.emplace_back(sign * potential(r, m_f), r);
            }
        const std::size_t keep = std::min<std::size_t>(6, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
        Extremum best{candidates.front().second, candidates.front().first * sign};
        for (std::size_t c = 0; c < keep; ++c) {
            Vec2 r = candidates[c].second;
            for (int it = 0; it < 30; ++it) {
                const Vec2 g = sign * gradient(r, m_f);
                const Eigen::Matrix2d h = sign * hessian(r, m_f);
                if (g.norm() < 1e-14) break;
                Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
                if (es.eigenvalues().minCoeff() <= 0.0) break;
                Vec2 step = -h.ldlt().solve(g);
                const double before = sign * potential(r, m_f);
                if (sign * potential(r + step, m_f) > before) break;
                r += step;
            }
            const double value = potential(r, m_f);
            if (sign * value < sign * best.value) best = {r, value};
        }
        return best;
    }

    double evaluated_depth(int m_f) const { return extremum(m_f, -1).value - extremum(m_f, 1).value; }

private:
    struct Term {
        int n1, n2;
        Vec2 g;
        std::complex<double> c;
    };

    Eigen::Matrix2d recip_;
    Eigen::Matrix2d direct_;
    std::array<FourierTable, 3> tables_;
    std::array<std::vector<Term>, 3> terms_;
    double depth_;
    std::string preset_;
};

inline double potential_at(const LatticeModel& model, const Vec2& r, int m_f) { return model.potential(r, m_f); }

// Square lattice of period lambda/2 with V_mF(r) = (1 + 4 m_F) c [cos 2kx + cos 2ky]:
// scalar part c f(r), vector part 4c f(r), so the shifts at the intensity maximum are -3 : 1 : 5
// and the m_F = +1 minima sit on the m_F = -1 maxima. c = U / 12 makes V_-1 peak-to-valley U.
inline LatticeModel build_preset(std::string_view name, double depth_er) {
    if (name != default_preset) throw DomainError("unknown lattice preset '" + std::string(name) + "'");
    if (depth_er < 0.0) throw DomainError("lattice depth must be non-negative");
    const double c = depth_er / 12.0;
    std::array<FourierTable, 3> tables;
    for (int m = -1; m <= 1; ++m) {
        if (depth_er == 0.0) continue;
        const double amp = 0.5 * (1.0 + 4.0 * m) * c;
        auto& t = tables[spin_slot(m)];
        t[{1, 0}] = t[{-1, 0}] = t[{0, 1}] = t[{0, -1}] = amp;
    }
    return LatticeModel(LatticeModel::square_reciprocal(), std::move(tables), depth_er, std::string(name));
}

// Serialized "lattice" block. Presets are written by name; anything else as explicit tables.
inline nlohmann::json to_json(const LatticeModel& model, bool force_tables = false) {
    nlohmann::json j;
    if (!force_tables && model.preset() == default_preset) {
        j["preset"] = model.preset();
        j["depth_Er"] = model.nominal_depth();
        return j;
    }
    j["preset"] = "custom";
    j["depth_Er"] = model.nominal_depth();
    const auto& b = model.reciprocal();
    j["reciprocal_vectors_k"] = {{b(0, 0), b(1, 0)}, {b(0, 1), b(1, 1)}};
    for (int m = -1; m <= 1; ++m) {
        auto rows = nlohmann::json::array();
        for (const auto& [g, c] : model.table(m)) rows.push_back({g.first, g.second, c.real(), c.imag()});
        j["coefficients"][spin_key(m)] = rows;
    }
    return j;
}

namespace detail {

inline double require_number(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline int require_int(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    return j.get<int>();
}

} // namespace detail

// Parse a "lattice" block. `path` is the JSON path of that block, used in error messages.
inline LatticeModel load_model(const nlohmann::json& block, const std::string& path = "lattice",
                               double depth_tol = 1e-6) {
    if (!block.is_object()) throw ConfigError(path, "expected an object");
    for (const auto& [key, value] : block.items())
        if (key != "preset" && key != "depth_Er" && key != "coefficients" && key != "reciprocal_vectors_k")
            throw ConfigError(path + "." + key, "unknown key");
    if (!block.contains("preset")) throw ConfigError(path + ".preset", "missing required key");
    if (!block["preset"].is_string()) throw ConfigError(path + ".preset", "expected a string");
    const std::string preset = block["preset"].get<std::string>();

    if (preset != "custom") {
        if (preset != default_preset) throw ConfigError(path + ".preset", "unknown preset '" + preset + "'");
        if (!block.contains("depth_Er")) throw ConfigError(path + ".depth_Er", "missing required key");
        if (block.contains("coefficients"))
            throw ConfigError(path + ".coefficients", "coefficients are only accepted with preset 'custom'");
        const double depth = detail::require_number(block["depth_Er"], path + ".depth_Er");
        if (depth < 0.0) throw ConfigError(path + ".depth_Er", "depth must be non-negative");
        return build_preset(preset, depth);
    }

    Eigen::Matrix2d recip = LatticeModel::square_reciprocal();
    if (block.contains("reciprocal_vectors_k")) {
        const auto& rv = block["reciprocal_vectors_k"];
        const std::string rp = path + ".reciprocal_vectors_k";
        if (!rv.is_array() || rv.size() != 2) throw ConfigError(rp, "expected [[bx, by], [bx, by]]");
        for (int c = 0; c < 2; ++c) {
            if (!rv[c].is_array() || rv[c].size() != 2) throw ConfigError(rp + "[" + std::to_string(c) + "]", "expected [bx, by]");
            for (int r = 0; r < 2; ++r)
                recip(r, c) = detail::require_number(rv[c][r], rp + "[" + std::to_string(c) + "][" + std::to_string(r) + "]");
        }
        if (std::abs(recip.determinant()) < 1e-12) throw ConfigError(rp, "degenerate reciprocal vectors");
    }

    if (!block.contains("coefficients")) throw ConfigError(path + ".coefficients", "missing required key");
    const auto& coeffs = block["coefficients"];
    const std::string cp = path + ".coefficients";
    if (!coeffs.is_object()) throw ConfigError(cp, "expected an object");
    for (const auto& [key, value] : coeffs.items())
        if (key != "mF=-1" && key != "mF=0" && key != "mF=+1") throw ConfigError(cp + "." + key, "unknown spin key");

    std::array<FourierTable, 3> tables;
    for (int m = -1; m <= 1; ++m) {
        const std::string key = spin_key(m);
        if (!coeffs.contains(key)) continue;
        const std::string sp = cp + "." + key;
        const auto& rows = coeffs[key];
        if (!rows.is_array()) throw ConfigError(sp, "expected an array of [n1, n2, re, im]");
        auto& table = tables[spin_slot(m)];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string rp = sp + "[" + std::to_string(i) + "]";
            const auto& row = rows[i];
            if (!row.is_array() || (row.size() != 4 && row.size() != 3)) throw ConfigError(rp, "expected [n1, n2, re, im]");
            const int n1 = detail::require_int(row[0], rp + "[0]");
            const int n2 = detail::require_int(row[1], rp + "[1]");
            const double re = detail::require_number(row[2], rp + "[2]");
            const double im = row.size() == 4 ? detail::require_number(row[3], rp + "[3]") : 0.0;
            if (std::abs(n1) > max_user_order || std::abs(n2) > max_user_order)
                throw ConfigError(rp, "Fourier order exceeds " + std::to_string(max_user_order));
            if (!table.emplace(std::make_pair(n1, n2), std::complex<double>(re, im)).second)
                throw ConfigError(rp, "duplicate entry for G=(" + std::to_string(n1) + "," + std::to_string(n2) + ")");
        }
        if (auto bad = find_asymmetry(table))
            throw ConfigError(sp, "table is not conjugate-symmetric at G=(" + std::to_string(bad->first) + "," +
                                      std::to_string(bad->second) + ")");
    }

    LatticeModel probe(recip, tables, 0.0, "custom");
    const double evaluated = probe.evaluated_depth(-1);
    double depth = evaluated;
    if (block.contains("depth_Er")) {
        depth = detail::require_number(block["depth_Er"], path + ".depth_Er");
        if (std::abs(depth - evaluated) > depth_tol * std::max(1.0, std::abs(depth)))
            throw ConfigError(path + ".depth_Er", "declared depth " + std::to_string(depth) +
                                                      " E_R does not match the evaluated V_-1 depth " +
                                                      std::to_string(evaluated) + " E_R");
    }
    return LatticeModel(recip, std::move(tables), depth, "custom");
}

inline LatticeModel load_model_document(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed document: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("lattice")) throw ConfigError("lattice", "missing required key");
    return load_model(doc["lattice"]);
}

} // namespace rfdress
