// config.hpp - run configuration: JSON schema, dotted-path overrides, canonical hash

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfdress/bloch.hpp"
#include "rfdress/dressing.hpp"
#include "rfdress/errors.hpp"
#include "rfdress/lattice.hpp"

namespace rfdress {

using json = nlohmann::json;

struct RfBlock {
    std::optional<double> rabi_khz;
    std::optional<double> frequency_mhz;
    std::vector<double> sweep_mhz;
    std::vector<double> rabi_sweep_khz;
};

struct SolverBlock {
    int n_max = 8;
    int q_grid = 16;
    int cell_grid = 64;
    int band_count = 8;
    int projection_grid = 32;
    BandModel model = BandModel::coupled;
    BandSelection selection = BandSelection::top_surface;
    DistributionKind distribution = DistributionKind::dephased_band;
    double convergence_tol = 1e-4;
    bool check_convergence = true;
    double tof_ms = 12.2;
    double initial_size_um = 0.0;
    double mask_radius_hbar_k = 1.5;
};

struct UncertaintyBlock {
    double field_uT = 0.0;
    double depth_Er = 0.0;
};

struct LossBlock {
    double alpha = 1.0;
    double prefactor = 1.0;
    double attempt_scale = 1.0;
    std::vector<double> depths_Er;
    std::vector<double> rabi_kHz;
};

struct FitBlock {
    std::string input;
    std::string model = "decay";
};

struct FigureBlock {
    double noise_rel = 0.0;       // multiplicative Gaussian noise on synthetic data
    double synthetic_a_per_s = 1000.0; // prefactor A for the gamma(Delta) generator
};

struct RunConfig {
    PhysicalSetup setup;
    std::optional<LatticeModel> lattice;
    RfBlock rf;
    SolverBlock solver;
    UncertaintyBlock uncertainty;
    LossBlock loss;
    FitBlock fit;
    FigureBlock figure;
    std::string out_dir = "out";
    json document; // the validated input document, after overrides

    BlochOptions bloch(int threads) const {
        BlochOptions o;
        o.n_max = solver.n_max;
        o.q_grid = solver.q_grid;
        o.band_count = solver.band_count;
        o.projection_grid = solver.projection_grid;
        o.surface_grid = solver.cell_grid;
        o.model = solver.model;
        o.selection = solver.selection;
        o.convergence_tol = solver.convergence_tol;
        o.check_convergence = solver.check_convergence;
        o.threads = threads;
        return o;
    }
};

namespace detail {

// Walks one JSON object, type-checking known keys and rejecting the rest.
class BlockReader {
public:
    BlockReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }
    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    void number(const std::string& key, double& out) {
        if (!has(key)) return;
        if (!j_[key].is_number()) throw ConfigError(at(key), "expected a number");
        out = j_[key].get<double>();
    }
    void number(const std::string& key, std::optional<double>& out) {
        if (!has(key)) return;
        if (!j_[key].is_number()) throw ConfigError(at(key), "expected a number");
        out = j_[key].get<double>();
    }
    void integer(const std::string& key, int& out, int min_value) {
        if (!has(key)) return;
        if (!j_[key].is_number_integer()) throw ConfigError(at(key), "expected an integer");
        out = j_[key].get<int>();
        if (out < min_value) throw ConfigError(at(key), "must be at least " + std::to_string(min_value));
    }
    void boolean(const std::string& key, bool& out) {
        if (!has(key)) return;
        if (!j_[key].is_boolean()) throw ConfigError(at(key), "expected true or false");
        out = j_[key].get<bool>();
    }
    void string(const std::string& key, std::string& out) {
        if (!has(key)) return;
        if (!j_[key].is_string()) throw ConfigError(at(key), "expected a string");
        out = j_[key].get<std::string>();
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        if (!j_[key].is_array()) throw ConfigError(at(key), "expected an array of numbers");
        out.clear();
        for (std::size_t i = 0; i < j_[key].size(); ++i) {
            if (!j_[key][i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(j_[key][i].get<double>());
        }
    }
    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError(at(key), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require_positive(double v, const std::string& path) {
    if (!(v > 0.0)) throw ConfigError(path, "must be positive");
}

inline void require_non_negative(double v, const std::string& path) {
    if (!(v >= 0.0)) throw ConfigError(path, "must be non-negative");
}

} // namespace detail

// Set `path` (dotted, e.g. "rf.rabi_kHz") in `doc`; `value` is parsed as JSON when possible and
// taken as a string otherwise.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(key, "empty path component");
        if (!node->is_object()) throw ConfigError(key, "override path crosses a non-object value");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

inline RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("$", "configuration must be a JSON object");
    RunConfig cfg;
    cfg.document = doc;
    static const std::set<std::string> blocks = {"setup",  "lattice", "rf",     "solver",
                                                 "uncertainty", "loss", "fit", "figure", "output"};
    for (const auto& [key, value] : doc.items())
        if (!blocks.count(key)) throw ConfigError(key, "unknown key");

    if (doc.contains("setup")) {
        detail::BlockReader r(doc["setup"], "setup");
        r.number("field_mT", cfg.setup.field_mT);
        r.number("wavelength_nm", cfg.setup.wavelength_nm);
        r.number("mass_kg", cfg.setup.mass_kg);
        r.finish();
        detail::require_positive(cfg.setup.field_mT, "setup.field_mT");
        detail::require_positive(cfg.setup.wavelength_nm, "setup.wavelength_nm");
        detail::require_positive(cfg.setup.mass_kg, "setup.mass_kg");
    }
    if (doc.contains("lattice")) {
        try {
            cfg.lattice = load_model(doc["lattice"], "lattice");
        } catch (const DomainError& e) {
            throw ConfigError("lattice", e.what());
        }
    }
    if (doc.contains("rf")) {
        detail::BlockReader r(doc["rf"], "rf");
        r.number("rabi_kHz", cfg.rf.rabi_khz);
        r.number("frequency_MHz", cfg.rf.frequency_mhz);
        r.numbers("sweep_MHz", cfg.rf.sweep_mhz);
        r.numbers("rabi_sweep_kHz", cfg.rf.rabi_sweep_khz);
        r.finish();
        if (cfg.rf.rabi_khz) detail::require_non_negative(*cfg.rf.rabi_khz, "rf.rabi_kHz");
        if (cfg.rf.frequency_mhz) detail::require_positive(*cfg.rf.frequency_mhz, "rf.frequency_MHz");
        for (std::size_t i = 0; i < cfg.rf.sweep_mhz.size(); ++i)
            detail::require_positive(cfg.rf.sweep_mhz[i], "rf.sweep_MHz[" + std::to_string(i) + "]");
        for (std::size_t i = 0; i < cfg.rf.rabi_sweep_khz.size(); ++i)
            detail::require_non_negative(cfg.rf.rabi_sweep_khz[i], "rf.rabi_sweep_kHz[" + std::to_string(i) + "]");
    }
    if (doc.contains("solver")) {
        detail::BlockReader r(doc["solver"], "solver");
        auto& s = cfg.solver;
        r.integer("n_max", s.n_max, 4);
        r.integer("q_grid", s.q_grid, 8);
        r.integer("cell_grid", s.cell_grid, 16);
        r.integer("band_count", s.band_count, 1);
        r.integer("projection_grid", s.projection_grid, 8);
        std::string model = to_string(s.model);
        r.string("model", model);
        if (model == "coupled") s.model = BandModel::coupled;
        else if (model == "single-surface") s.model = BandModel::single_surface;
        else throw ConfigError("solver.model", "expected \"coupled\" or \"single-surface\"");
        std::string selection = "top-surface";
        r.string("selection", selection);
        if (selection == "top-surface") s.selection = BandSelection::top_surface;
        else if (selection == "lowest") s.selection = BandSelection::lowest;
        else throw ConfigError("solver.selection", "expected \"top-surface\" or \"lowest\"");
        std::string dist = to_string(s.distribution);
        r.string("distribution", dist);
        if (dist == "dephased-band") s.distribution = DistributionKind::dephased_band;
        else if (dist == "wannier") s.distribution = DistributionKind::wannier;
        else throw ConfigError("solver.distribution", "expected \"dephased-band\" or \"wannier\"");
        r.number("convergence_tol", s.convergence_tol);
        r.boolean("check_convergence", s.check_convergence);
        r.number("tof_ms", s.tof_ms);
        r.number("initial_size_um", s.initial_size_um);
        r.number("mask_radius_hbar_k", s.mask_radius_hbar_k);
        r.finish();
        detail::require_positive(s.convergence_tol, "solver.convergence_tol");
        detail::require_positive(s.tof_ms, "solver.tof_ms");
        detail::require_non_negative(s.initial_size_um, "solver.initial_size_um");
        detail::require_positive(s.mask_radius_hbar_k, "solver.mask_radius_hbar_k");
    }
    if (doc.contains("uncertainty")) {
        detail::BlockReader r(doc["uncertainty"], "uncertainty");
        r.number("field_uT", cfg.uncertainty.field_uT);
        r.number("depth_Er", cfg.uncertainty.depth_Er);
        r.finish();
        detail::require_non_negative(cfg.uncertainty.field_uT, "uncertainty.field_uT");
        detail::require_non_negative(cfg.uncertainty.depth_Er, "uncertainty.depth_Er");
    }
    if (doc.contains("loss")) {
        detail::BlockReader r(doc["loss"], "loss");
        r.number("alpha", cfg.loss.alpha);
        r.number("prefactor", cfg.loss.prefactor);
        r.number("attempt_scale", cfg.loss.attempt_scale);
        r.numbers("depths_Er", cfg.loss.depths_Er);
        r.numbers("rabi_kHz", cfg.loss.rabi_kHz);
        r.finish();
        detail::require_non_negative(cfg.loss.alpha, "loss.alpha");
        detail::require_non_negative(cfg.loss.prefactor, "loss.prefactor");
        detail::require_non_negative(cfg.loss.attempt_scale, "loss.attempt_scale");
    }
    if (doc.contains("fit")) {
        detail::BlockReader r(doc["fit"], "fit");
        r.string("input", cfg.fit.input);
        r.string("model", cfg.fit.model);
        r.finish();
        if (cfg.fit.model != "decay" && cfg.fit.model != "exp-decay-law" && cfg.fit.model != "exp-growth-law")
            throw ConfigError("fit.model", "expected \"decay\", \"exp-decay-law\" or \"exp-growth-law\"");
    }
    if (doc.contains("figure")) {
        detail::BlockReader r(doc["figure"], "figure");
        r.number("noise_rel", cfg.figure.noise_rel);
        r.number("synthetic_A_per_s", cfg.figure.synthetic_a_per_s);
        r.finish();
        detail::require_non_negative(cfg.figure.noise_rel, "figure.noise_rel");
        detail::require_positive(cfg.figure.synthetic_a_per_s, "figure.synthetic_A_per_s");
    }
    if (doc.contains("output")) {
        detail::BlockReader r(doc["output"], "output");
        r.string("dir", cfg.out_dir);
        r.finish();
    }
    return cfg;
}

inline json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    json doc = json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded()) throw ConfigError("$", "config file '" + path + "' is not valid JSON");
    return doc;
}

// 64-bit FNV-1a; stable across platforms and standard-library implementations.
inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const std::string& subcommand, const json& doc, std::uint64_t seed) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(subcommand + "\n" + doc.dump() + "\n" + std::to_string(seed))));
    return buf;
}

} // namespace rfdress
