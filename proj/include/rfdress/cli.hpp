// cli.hpp - subcommand pipelines behind the rfdress command-line tool
//
// run() validates the configuration completely before computing anything, assembles every
// output file in memory, and only then writes them into the output directory. A failed run
// therefore leaves no partial output behind.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rfdress/bloch.hpp"
#include "rfdress/config.hpp"
#include "rfdress/dressing.hpp"
#include "rfdress/errors.hpp"
#include "rfdress/fit.hpp"
#include "rfdress/lattice.hpp"
#include "rfdress/loss.hpp"
#include "rfdress/topology.hpp"
#include "rfdress/zeeman.hpp"

namespace rfdress::cli {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, convergence_failure = 3, io_error = 4 };

struct Invocation {
    std::string subcommand;          // zeeman, surfaces, gap, rabi-cal, bands, momentum, width-sweep, loss, fit, figure
    std::string figure;              // "2", "3" or "4" for the figure subcommand
    std::string config_path;         // optional
    std::optional<json> config;      // used instead of config_path when set
    std::string out_dir;             // overrides output.dir when non-empty
    std::vector<std::string> overrides;
    int threads = 1;
    std::uint64_t seed = 0;
    std::optional<double> field_mT;  // zeeman --field-mT
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"zeeman", "surfaces",    "gap",  "rabi-cal", "bands",
                                                   "momentum", "width-sweep", "loss", "fit",      "figure"};
    return names;
}

// Rf frequencies of the figure 2 width sweep and the far-detuned reference offset.
inline const std::vector<double>& figure2_frequencies() {
    static const std::vector<double> f = {35.80, 35.825, 35.85, 35.875, 35.90, 35.925, 35.95};
    return f;
}
inline constexpr double far_detuning_mhz = -1.0;

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class Csv {
public:
    Csv(const std::string& header_comment, const std::vector<std::string>& columns) {
        out_ << header_comment << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << '\n';
    }
    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }
    void values(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << num(cells[i]);
        out_ << '\n';
    }
    std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return num(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    std::ostringstream out_;
};

struct Context {
    const Invocation& inv;
    RunConfig cfg;
    std::string hash;
    std::string header;
    std::map<std::string, std::string> files; // name -> contents, written in name order

    Context(const Invocation& i, RunConfig c, const std::string& command) : inv(i), cfg(std::move(c)) {
        json hashed = cfg.document;
        hashed.erase("output");
        hash = config_hash(command, hashed, inv.seed);
        header = "# rfdress " + command + " config_hash=" + hash + " seed=" + std::to_string(inv.seed) +
                 " units=E_R(recoil),kHz,MHz config=" + hashed.dump();
    }

    const LatticeModel& lattice() const {
        if (!cfg.lattice) throw ConfigError("lattice", "missing required key");
        return *cfg.lattice;
    }
    double rabi_khz() const {
        if (!cfg.rf.rabi_khz) throw ConfigError("rf.rabi_kHz", "missing required key");
        return *cfg.rf.rabi_khz;
    }
    double rf_mhz() const {
        if (!cfg.rf.frequency_mhz) throw ConfigError("rf.frequency_MHz", "missing required key");
        return *cfg.rf.frequency_mhz;
    }
    std::vector<double> rf_list() const {
        if (!cfg.rf.sweep_mhz.empty()) return cfg.rf.sweep_mhz;
        return {rf_mhz()};
    }
    const LatticeModel& preset_lattice(const char* who) const {
        const LatticeModel& l = lattice();
        if (l.preset() != default_preset)
            throw ConfigError("lattice.preset", std::string(who) + " needs the \"" + std::string(default_preset) + "\" preset");
        return l;
    }
    DressingParams dressing(const LatticeModel& l, double rabi, double rf) const {
        return make_dressing(cfg.setup, l, rabi, rf);
    }
    // Validate inputs a subcommand needs before any heavy computation starts.
    void require_dressing() const {
        (void)lattice();
        (void)rabi_khz();
        if (cfg.rf.sweep_mhz.empty()) (void)rf_mhz();
    }
};

inline std::string join_flags(const std::vector<std::string>& flags) {
    std::string s;
    for (const auto& f : flags) s += (s.empty() ? "" : ";") + f;
    return s.empty() ? "-" : s;
}

inline void cmd_zeeman(Context& c) {
    const double field = c.inv.field_mT.value_or(c.cfg.setup.field_mT);
    if (!(field > 0.0)) throw ConfigError("--field-mT", "must be positive");
    const ZeemanSpectrum z = breit_rabi(field * 1e-3);
    Csv csv(c.header, {"F", "mF", "E_MHz"});
    for (const auto& l : z.levels) csv.row(l.f, l.m_f, l.energy_hz * 1e-6);
    c.files["zeeman.csv"] = csv.str();
    json doc;
    doc["config_hash"] = c.hash;
    doc["field_mT"] = field;
    doc["nu_m1_0_MHz"] = z.nu_m1_0_hz * 1e-6;
    doc["nu_0_p1_MHz"] = z.nu_0_p1_hz * 1e-6;
    doc["deltap_kHz"] = z.quadratic_shift_hz * 1e-3;
    c.files["zeeman.json"] = doc.dump(2) + "\n";
}

inline void cmd_surfaces(Context& c) {
    c.require_dressing();
    const DressingParams p = c.dressing(c.lattice(), c.rabi_khz(), c.rf_mhz());
    const AdiabaticSurfaces s = adiabatic_surfaces(p, c.cfg.solver.cell_grid, c.cfg.solver.cell_grid, c.inv.threads);
    Csv csv(c.header, {"x_invk", "y_invk", "E_low_Er", "E_mid_Er", "E_top_Er", "w_m1", "w_0", "w_p1"});
    for (int i = 0; i < s.n1; ++i)
        for (int j = 0; j < s.n2; ++j) {
            const Vec2 r = s.position(i, j);
            const Eigen::Vector3d w = s.top_weights(i, j);
            csv.row(r.x(), r.y(), s.low(i, j), s.mid(i, j), s.top(i, j), w(0), w(1), w(2));
        }
    c.files["surfaces.csv"] = csv.str();
}

inline void cmd_gap(Context& c) {
    c.require_dressing();
    const UnitSystem u = c.cfg.setup.units();
    const ZeemanSpectrum z = c.cfg.setup.zeeman();
    Csv csv(c.header, {"U_Er", "Omega_kHz", "rf_MHz", "delta_kHz", "deltap_kHz", "Delta_kHz", "x_invk", "y_invk",
                       "crossing"});
    for (double rf : c.rf_list()) {
        const DressingParams p = c.dressing(c.lattice(), c.rabi_khz(), rf);
        const GapResult g = min_gap(p, c.cfg.solver.cell_grid);
        csv.row(c.lattice().nominal_depth(), c.rabi_khz(), rf, u.khz_from_energy(p.detuning),
                z.quadratic_shift_hz * 1e-3, u.khz_from_energy(g.gap), g.location.x(), g.location.y(), g.crossing);
    }
    c.files["gap.csv"] = csv.str();
}

inline void cmd_rabi_cal(Context& c) {
    const UnitSystem u = c.cfg.setup.units();
    const ZeemanSpectrum z = c.cfg.setup.zeeman();
    std::vector<double> rabis = c.cfg.rf.rabi_sweep_khz;
    if (rabis.empty()) rabis = {c.rabi_khz()};
    const double rf = c.rf_mhz();
    const double delta = u.energy_from_hz(rf * 1e6 - z.nu_m1_0_hz);
    const double dp = u.energy_from_hz(z.quadratic_shift_hz);
    Csv csv(c.header, {"Omega_kHz", "omega_osc_kHz", "amplitude", "zero_amplitude", "degenerate"});
    for (double om : rabis) {
        const RabiOscillation r = rabi_oscillation_frequency(u.energy_from_khz(om), delta, dp);
        csv.row(om, u.khz_from_energy(r.frequency), r.amplitude, r.zero_amplitude, r.degenerate);
    }
    c.files["rabi_cal.csv"] = csv.str();
}

inline void cmd_bands(Context& c) {
    c.require_dressing();
    const DressingParams p = c.dressing(c.lattice(), c.rabi_khz(), c.rf_mhz());
    BlochOptions o = c.cfg.bloch(c.inv.threads);
    o.selection = BandSelection::lowest;
    const BlochSolution sol = solve_bands(p, o);
    std::vector<std::string> cols = {"qx_k", "qy_k"};
    for (int b = 1; b <= o.band_count; ++b) cols.push_back("E_" + std::to_string(b) + "_Er");
    Csv csv(c.header, cols);
    for (std::size_t q = 0; q < sol.q_points.size(); ++q) {
        std::vector<double> cells = {sol.q_points[q].x(), sol.q_points[q].y()};
        for (Eigen::Index b = 0; b < sol.energies[q].size(); ++b) cells.push_back(sol.energies[q](b));
        csv.values(cells);
    }
    c.files["bands.csv"] = csv.str();
}

inline void cmd_momentum(Context& c) {
    c.require_dressing();
    const DressingParams p = c.dressing(c.lattice(), c.rabi_khz(), c.rf_mhz());
    const BlochSolution sol = solve_bands(p, c.cfg.bloch(c.inv.threads));
    const MomentumDistribution d = momentum_distribution(sol, c.cfg.solver.distribution);
    Csv csv(c.header + " distribution=" + to_string(d.kind), {"kx_hbar_k", "ky_hbar_k", "n"});
    for (std::size_t i = 0; i < d.k.size(); ++i) csv.row(d.k[i].x(), d.k[i].y(), d.weight[i]);
    c.files["momentum.csv"] = csv.str();
}

inline WidthSweep make_sweep(const Context& c, const std::vector<double>& rfs) {
    WidthSweep w;
    w.setup = c.cfg.setup;
    const LatticeModel& l = c.preset_lattice("width-sweep");
    w.preset = l.preset();
    w.depth_er = l.nominal_depth();
    w.rabi_khz = c.rabi_khz();
    w.rf_mhz = rfs;
    w.field_uncertainty_mT = c.cfg.uncertainty.field_uT * 1e-3;
    w.depth_uncertainty_er = c.cfg.uncertainty.depth_Er;
    w.mask_radius = c.cfg.solver.mask_radius_hbar_k;
    w.bloch = c.cfg.bloch(c.inv.threads);
    return w;
}

inline std::string width_table(const Context& c, const std::vector<WidthPoint>& pts) {
    const UnitSystem u = c.cfg.setup.units();
    const double t = c.cfg.solver.tof_ms * 1e-3;
    const double d0 = c.cfg.solver.initial_size_um * 1e-6;
    Csv csv(c.header, {"rf_MHz", "width_hbar_k", "width_lo", "width_hi", "delta_kHz", "d_um"});
    for (const auto& pt : pts) csv.row(pt.rf_mhz, pt.width, pt.lo, pt.hi, pt.detuning_khz, tof_radius(pt.width, t, d0, u) * 1e6);
    return csv.str();
}

inline void cmd_width_sweep(Context& c) {
    (void)c.rabi_khz();
    if (c.cfg.rf.sweep_mhz.empty()) throw ConfigError("rf.sweep_MHz", "missing required key");
    const WidthSweep w = make_sweep(c, c.cfg.rf.sweep_mhz);
    c.files["width_sweep.csv"] = width_table(c, width_vs_frequency(w));
}

struct LossRow {
    double depth, rabi, rf, gap_khz, lz, flz, semi;
    std::vector<std::string> flags;
};

inline LossRow loss_row(const Context& c, const LatticeModel& lat, double rabi, double rf) {
    const UnitSystem u = c.cfg.setup.units();
    const DressingParams p = c.dressing(lat, rabi, rf);
    LossOptions opt;
    opt.alpha = c.cfg.loss.alpha;
    opt.prefactor = c.cfg.loss.prefactor;
    opt.attempt_scale = c.cfg.loss.attempt_scale;
    opt.surface_grid = c.cfg.solver.cell_grid;
    const GapResult g = min_gap(p, c.cfg.solver.cell_grid);
    LossRow row{lat.nominal_depth(), rabi, rf, u.khz_from_energy(g.gap), 0, 0, 0, {}};
    const LossEstimate lz = lz_rate(lat, g.gap, opt, u);
    const LossEstimate sc = semiclassical_rate(p, opt, u);
    const BlochSolution sol = solve_bands(p, c.cfg.bloch(c.inv.threads));
    const LossEstimate fl = fourier_weighted_lz(sol, p, opt, u);
    row.lz = lz.rate_per_s;
    row.semi = sc.rate_per_s;
    row.flz = fl.rate_per_s;
    for (const auto* e : {&lz, &fl, &sc})
        for (const auto& f : e->flags) row.flags.push_back(to_string(e->model) + ":" + f);
    if (!g.crossing) row.flags.push_back("no-crossing-in-cell");
    return row;
}

inline void cmd_loss(Context& c) {
    c.require_dressing();
    std::vector<double> depths = c.cfg.loss.depths_Er;
    std::vector<double> rabis = c.cfg.loss.rabi_kHz;
    if (rabis.empty()) rabis = {c.rabi_khz()};
    const LatticeModel& base = c.lattice();
    if (!depths.empty()) c.preset_lattice("loss.depths_Er");
    else depths = {base.nominal_depth()};
    Csv csv(c.header, {"U_Er", "Omega_kHz", "rf_MHz", "Delta_kHz", "gamma_lz", "gamma_fourier_lz",
                       "gamma_semiclassical", "flags"});
    for (double d : depths)
        for (double om : rabis)
            for (double rf : c.rf_list()) {
                const LatticeModel lat = c.cfg.loss.depths_Er.empty() ? base : build_preset(base.preset(), d);
                const LossRow r = loss_row(c, lat, om, rf);
                csv.row(r.depth, r.rabi, r.rf, r.gap_khz, r.lz, r.flz, r.semi, join_flags(r.flags));
            }
    c.files["loss.csv"] = csv.str();
}

inline json fit_document(const Context& c, const FitResult& r) {
    json doc;
    doc["config_hash"] = c.hash;
    doc["model"] = r.model;
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        doc["parameters"][r.names[i]] = r.params(Eigen::Index(i));
        doc["uncertainties"][r.names[i]] = r.sigma(Eigen::Index(i));
    }
    doc["residual_norm"] = r.residual_norm;
    doc["iterations"] = r.iterations;
    doc["converged"] = r.converged;
    doc["flags"] = r.flags;
    return doc;
}

inline void read_xy(const std::string& path, std::vector<double>& x, std::vector<double>& y, std::vector<double>& s) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fit input '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) numeric = false;
            cells.push_back(v);
        }
        if (!numeric) {
            if (x.empty()) continue; // column header
            throw ConfigError("fit.input", "non-numeric data on line " + std::to_string(lineno));
        }
        if (cells.size() < 2 || cells.size() > 3)
            throw ConfigError("fit.input", "expected x,y[,sigma] on line " + std::to_string(lineno));
        x.push_back(cells[0]);
        y.push_back(cells[1]);
        if (cells.size() == 3) s.push_back(cells[2]);
    }
    if (!s.empty() && s.size() != x.size()) throw ConfigError("fit.input", "sigma column present on only some rows");
}

inline void cmd_fit(Context& c) {
    if (c.cfg.fit.input.empty()) throw ConfigError("fit.input", "missing required key");
    std::vector<double> x, y, s;
    read_xy(c.cfg.fit.input, x, y, s);
    FitResult r;
    if (c.cfg.fit.model == "decay") r = fit_decay(x, y);
    else r = fit_exponential_law(x, y, c.cfg.fit.model == "exp-decay-law" ? LawSign::decay : LawSign::growth, s);
    c.files["fit.json"] = fit_document(c, r).dump(2) + "\n";
}

// figure 2: central width against final rf frequency, plus the far-detuned reference.
inline void cmd_figure2(Context& c) {
    const ZeemanSpectrum z = c.cfg.setup.zeeman();
    std::vector<double> rfs = {z.nu_m1_0_hz * 1e-6 + far_detuning_mhz};
    for (double f : figure2_frequencies()) rfs.push_back(f);
    WidthSweep w = make_sweep(c, rfs);
    c.files["figure2.csv"] = width_table(c, width_vs_frequency(w));
}

// Synthetic data from an exponential rate law, optionally with seeded multiplicative noise.
inline std::vector<double> synthesize(const std::vector<double>& x, double a, double b, double noise, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> y;
    for (double v : x) {
        double g = a * std::exp(b * v);
        if (noise > 0.0) g *= std::max(1e-3, 1.0 + noise * n(rng));
        y.push_back(g);
    }
    return y;
}

// figure 3: loss against gap for four depths. Theory rates from the loss models; synthetic
// gamma = A exp(-B Delta/2pi) with the measured B per depth, refitted.
inline void cmd_figure3(Context& c) {
    const LatticeModel& base = c.preset_lattice("figure 3");
    (void)base;
    const std::vector<std::pair<double, double>> depth_b = {{8.0, 83e-6}, {10.0, 83e-6}, {12.0, 82e-6}, {16.0, 100e-6}};
    std::vector<double> rabis = c.cfg.loss.rabi_kHz;
    if (rabis.empty()) rabis = {60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 205.0};
    const double rf = c.cfg.rf.frequency_mhz.value_or(35.90);
    std::mt19937_64 rng(c.inv.seed);
    Csv csv(c.header, {"U_Er", "Omega_kHz", "Delta_kHz", "gamma_lz", "gamma_semiclassical", "gamma_synthetic",
                       "gamma_fit"});
    json fits = json::object();
    fits["config_hash"] = c.hash;
    for (const auto& [depth, b] : depth_b) {
        const LatticeModel lat = build_preset(default_preset, depth);
        std::vector<double> gaps_hz;
        std::vector<LossRow> rows;
        for (double om : rabis) {
            const UnitSystem u = c.cfg.setup.units();
            const DressingParams p = c.dressing(lat, om, rf);
            const GapResult g = min_gap(p, c.cfg.solver.cell_grid);
            LossOptions opt;
            opt.alpha = c.cfg.loss.alpha;
            opt.prefactor = c.cfg.loss.prefactor;
            opt.attempt_scale = c.cfg.loss.attempt_scale;
            opt.surface_grid = c.cfg.solver.cell_grid;
            LossRow r{depth, om, rf, u.khz_from_energy(g.gap), lz_rate(lat, g.gap, opt, u).rate_per_s, 0.0,
                      semiclassical_rate(p, opt, u).rate_per_s, {}};
            rows.push_back(r);
            gaps_hz.push_back(r.gap_khz * 1e3);
        }
        const std::vector<double> syn = synthesize(gaps_hz, c.cfg.figure.synthetic_a_per_s, -b, c.cfg.figure.noise_rel, rng);
        const FitResult f = fit_exponential_law(gaps_hz, syn, LawSign::decay);
        for (std::size_t i = 0; i < rows.size(); ++i)
            csv.row(rows[i].depth, rows[i].rabi, rows[i].gap_khz, rows[i].lz, rows[i].semi, syn[i],
                    f["A"] * std::exp(-f["B"] * gaps_hz[i]));
        const std::string key = "U=" + num(depth);
        fits[key]["B_true_us"] = b * 1e6;
        fits[key]["B_fit_us"] = f["B"] * 1e6;
        fits[key]["B_sigma_us"] = f.sigma(1) * 1e6;
        fits[key]["A_fit_per_s"] = f["A"];
    }
    c.files["figure3.csv"] = csv.str();
    c.files["figure3_fit.json"] = fits.dump(2) + "\n";
}

// figure 4: loss against depth at constant coupling; synthetic gamma = C exp(D U), refitted.
inline void cmd_figure4(Context& c) {
    (void)c.preset_lattice("figure 4");
    constexpr double c_true = 1.2;
    constexpr double d_true = 0.27;
    std::vector<double> depths = c.cfg.loss.depths_Er;
    if (depths.empty()) depths = {8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0};
    const double rabi = c.cfg.rf.rabi_khz.value_or(205.0);
    std::mt19937_64 rng(c.inv.seed);
    const std::vector<double> syn = synthesize(depths, c_true, d_true, c.cfg.figure.noise_rel, rng);
    const FitResult f = fit_exponential_law(depths, syn, LawSign::growth);
    Csv csv(c.header, {"U_Er", "rf_MHz", "Delta_kHz", "gamma_lz", "gamma_semiclassical", "gamma_synthetic", "gamma_fit"});
    const UnitSystem u = c.cfg.setup.units();
    for (std::size_t i = 0; i < depths.size(); ++i) {
        // first five depths at 35.900 MHz, the rest at 35.875 MHz
        const double rf = i < 5 ? 35.900 : 35.875;
        const LatticeModel lat = build_preset(default_preset, depths[i]);
        const DressingParams p = c.dressing(lat, rabi, rf);
        const GapResult g = min_gap(p, c.cfg.solver.cell_grid);
        LossOptions opt;
        opt.alpha = c.cfg.loss.alpha;
        opt.prefactor = c.cfg.loss.prefactor;
        opt.attempt_scale = c.cfg.loss.attempt_scale;
        opt.surface_grid = c.cfg.solver.cell_grid;
        csv.row(depths[i], rf, u.khz_from_energy(g.gap), lz_rate(lat, g.gap, opt, u).rate_per_s,
                semiclassical_rate(p, opt, u).rate_per_s, syn[i], f["A"] * std::exp(f["B"] * depths[i]));
    }
    json fits;
    fits["config_hash"] = c.hash;
    fits["C_true_per_s"] = c_true;
    fits["D_true_per_Er"] = d_true;
    fits["C_fit_per_s"] = f["A"];
    fits["D_fit_per_Er"] = f["B"];
    fits["C_sigma_per_s"] = f.sigma(0);
    fits["D_sigma_per_Er"] = f.sigma(1);
    c.files["figure4.csv"] = csv.str();
    c.files["figure4_fit.json"] = fits.dump(2) + "\n";
}

inline void write_files(const std::string& dir, const std::map<std::string, std::string>& files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    for (const auto& [name, contents] : files) {
        // names are fixed by the pipelines; refuse anything that could leave the directory
        if (name.find('/') != std::string::npos || name.find("..") != std::string::npos)
            throw IoError("refusing to write '" + name + "' outside the output directory");
        const std::filesystem::path path = std::filesystem::path(dir) / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
        out << contents;
        if (!out) throw IoError("write to '" + path.string() + "' failed");
    }
}

} // namespace detail

struct RunResult {
    int code = ok;
    std::string message;
    std::vector<std::string> written; // file paths
};

inline RunResult run(const Invocation& inv, std::ostream& err = std::cerr) {
    RunResult result;
    try {
        bool known = false;
        for (const auto& s : subcommands()) known = known || s == inv.subcommand;
        if (!known) throw ConfigError("subcommand", "unknown subcommand '" + inv.subcommand + "'");
        std::string command = inv.subcommand;
        if (command == "figure") {
            if (inv.figure != "2" && inv.figure != "3" && inv.figure != "4")
                throw ConfigError("figure", "expected 2, 3 or 4");
            command += " " + inv.figure;
        }
        if (inv.threads < 1) throw ConfigError("--threads", "must be at least 1");

        json doc = json::object();
        if (inv.config) doc = *inv.config;
        else if (!inv.config_path.empty()) doc = read_config_file(inv.config_path);
        for (const auto& o : inv.overrides) apply_override(doc, o);
        RunConfig cfg = parse_config(doc);
        if (!inv.out_dir.empty()) cfg.out_dir = inv.out_dir;
        if (cfg.out_dir.empty()) throw ConfigError("output.dir", "must not be empty");

        detail::Context ctx(inv, std::move(cfg), command);
        const std::string& s = inv.subcommand;
        if (s == "zeeman") detail::cmd_zeeman(ctx);
        else if (s == "surfaces") detail::cmd_surfaces(ctx);
        else if (s == "gap") detail::cmd_gap(ctx);
        else if (s == "rabi-cal") detail::cmd_rabi_cal(ctx);
        else if (s == "bands") detail::cmd_bands(ctx);
        else if (s == "momentum") detail::cmd_momentum(ctx);
        else if (s == "width-sweep") detail::cmd_width_sweep(ctx);
        else if (s == "loss") detail::cmd_loss(ctx);
        else if (s == "fit") detail::cmd_fit(ctx);
        else if (inv.figure == "2") detail::cmd_figure2(ctx);
        else if (inv.figure == "3") detail::cmd_figure3(ctx);
        else detail::cmd_figure4(ctx);

        detail::write_files(ctx.cfg.out_dir, ctx.files);
        for (const auto& [name, contents] : ctx.files)
            result.written.push_back((std::filesystem::path(ctx.cfg.out_dir) / name).string());
    } catch (const ConfigError& e) {
        result = {config_error, std::string("config error: ") + e.what(), {}};
    } catch (const DomainError& e) {
        result = {config_error, std::string("invalid input: ") + e.what(), {}};
    } catch (const ConvergenceError& e) {
        result = {convergence_failure, std::string("convergence failure: ") + e.what(), {}};
    } catch (const IoError& e) {
        result = {io_error, std::string("I/O error: ") + e.what(), {}};
    } catch (const std::exception& e) {
        result = {failure, std::string("error: ") + e.what(), {}};
    }
    if (result.code != ok) err << "rfdress: " << result.message << '\n';
    return result;
}

} // namespace rfdress::cli
