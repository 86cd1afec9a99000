// bloch.hpp - plane-wave band structure of H = p^2/2M + H1(r), momentum distributions, TOF widths
//
// Basis: spin m_F in {-1, 0, +1} times plane waves e^{i(q+G)r}, G = n1 b1 + n2 b2 with
// |n1|, |n2| <= n_max. In recoil units the kinetic term is |q + G|^2. Coefficient vectors are
// laid out spin-major, then n1, then n2.
//
// Two models share the same solution type:
//   coupled         the full three-component problem; the band loaded by the experiment is
//                   picked by its real-space overlap with the uppermost adiabatic eigenvector
//   single_surface  a scalar problem on the uppermost adiabatic surface alone
//                   (Born-Oppenheimer), one component

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfdress/dressing.hpp"
#include "rfdress/eigensolver.hpp"
#include "rfdress/errors.hpp"
#include "rfdress/lattice.hpp"
#include "rfdress/parallel.hpp"
#include "rfdress/units.hpp"

namespace rfdress {

enum class BandModel { coupled, single_surface };
enum class BandSelection { lowest, top_surface };

inline std::string to_string(BandModel m) { return m == BandModel::coupled ? "coupled" : "single-surface"; }

struct BlochOptions {
    int n_max = 8;
    int q_grid = 16;
    BandModel model = BandModel::coupled;
    BandSelection selection = BandSelection::top_surface;
    int band_count = 8;          // energies kept per q for BandSelection::lowest
    int projection_grid = 32;    // real-space samples per axis for the top-surface overlap
    int surface_grid = 64;       // samples per axis for the single-surface Fourier transform
    double convergence_tol = 1e-4;
    bool check_convergence = true;
    bool use_time_reversal = true;
    int threads = 1;

    void validate() const {
        if (n_max < 4) throw DomainError("solve_bands: n_max must be at least 4");
        if (q_grid < 8) throw DomainError("solve_bands: q grid must be at least 8x8");
        if (band_count < 1) throw DomainError("solve_bands: band_count must be positive");
    }
};

struct BlochSolution {
    Eigen::Matrix2d reciprocal = Eigen::Matrix2d::Identity();
    int n_max = 0;
    int q_grid = 0;
    int components = 3;
    BandModel model = BandModel::coupled;
    BandSelection selection = BandSelection::top_surface;

    std::vector<Vec2> q_points;                  // units of k
    std::vector<Eigen::VectorXd> energies;       // per q, ascending (lowest band_count, or the search window)
    std::vector<Eigen::VectorXcd> ground;        // per q, coefficients of the selected band
    std::vector<double> ground_energy;           // per q
    std::vector<double> top_overlap;             // per q, real-space weight on the uppermost adiabatic state
    std::vector<Eigen::Vector3d> spin_weights;   // per q, populations of m_F = -1, 0, +1
    double convergence_residual = 0.0;           // |E(n_max+2) - E(n_max)| at the check point

    int side() const { return 2 * n_max + 1; }
    int plane_waves() const { return side() * side(); }
    int basis_size() const { return components * plane_waves(); }
    int index(int component, int n1, int n2) const {
        return component * plane_waves() + (n1 + n_max) * side() + (n2 + n_max);
    }
    Vec2 g_vector(int n1, int n2) const { return reciprocal * Vec2(n1, n2); }
    double mean_ground_energy() const {
        double s = 0.0;
        for (double e : ground_energy) s += e;
        return ground_energy.empty() ? 0.0 : s / double(ground_energy.size());
    }
    Eigen::Vector3d mean_spin_weights() const {
        Eigen::Vector3d s = Eigen::Vector3d::Zero();
        for (const auto& w : spin_weights) s += w;
        return spin_weights.empty() ? s : Eigen::Vector3d(s / double(spin_weights.size()));
    }
};

namespace detail {

// Dense lookup of Fourier coefficients V(dn1, dn2) for |dn| <= reach.
struct CouplingTable {
    int reach = 0;
    std::vector<std::complex<double>> values;

    CouplingTable() = default;
    explicit CouplingTable(int r) : reach(r), values(std::size_t(2 * r + 1) * (2 * r + 1), 0.0) {}
    std::complex<double>& at(int d1, int d2) { return values[std::size_t(d1 + reach) * (2 * reach + 1) + (d2 + reach)]; }
    std::complex<double> at(int d1, int d2) const {
        return values[std::size_t(d1 + reach) * (2 * reach + 1) + (d2 + reach)];
    }
    bool is_real() const {
        for (const auto& v : values)
            if (v.imag() != 0.0) return false;
        return true;
    }
};

inline CouplingTable table_from_lattice(const LatticeModel& lat, int m_f, int reach) {
    CouplingTable t(reach);
    for (const auto& [g, c] : lat.table(m_f))
        if (std::abs(g.first) <= reach && std::abs(g.second) <= reach) t.at(g.first, g.second) = c;
    return t;
}

// Fourier coefficients of a real periodic field sampled at fractional positions (i/M, j/M).
inline CouplingTable table_from_samples(const Eigen::ArrayXXd& field, int reach) {
    const int m1 = int(field.rows());
    const int m2 = int(field.cols());
    CouplingTable t(reach);
    const int w = 2 * reach + 1;
    Eigen::MatrixXcd e1(w, m1), e2(m2, w);
    for (int d = -reach; d <= reach; ++d) {
        for (int i = 0; i < m1; ++i) e1(d + reach, i) = std::polar(1.0, -2.0 * constants::pi * d * i / m1);
        for (int j = 0; j < m2; ++j) e2(j, d + reach) = std::polar(1.0, -2.0 * constants::pi * d * j / m2);
    }
    const Eigen::MatrixXcd coeffs = e1 * field.matrix().cast<std::complex<double>>() * e2 / double(m1 * m2);
    double scale = 0.0;
    for (int a = 0; a < w; ++a)
        for (int b = 0; b < w; ++b) scale = std::max(scale, std::abs(coeffs(a, b)));
    for (int a = -reach; a <= reach; ++a)
        for (int b = -reach; b <= reach; ++b) {
            // enforce exact conjugate symmetry; drop roundoff-level imaginary parts
            std::complex<double> c = 0.5 * (coeffs(a + reach, b + reach) + std::conj(coeffs(-a + reach, -b + reach)));
            if (std::abs(c.imag()) < 1e-13 * std::max(scale, 1e-300)) c.imag(0.0);
            t.at(a, b) = c;
        }
    return t;
}

struct Problem {
    int n_max = 0;
    int components = 3;
    Eigen::Matrix2d reciprocal;
    std::array<CouplingTable, 3> potentials; // only [0] used when components == 1
    std::array<double, 3> shifts{};          // spin-diagonal constants
    double rabi = 0.0;
    bool real = true;

    int side() const { return 2 * n_max + 1; }
    int plane_waves() const { return side() * side(); }
    int dim() const { return components * plane_waves(); }

    template <class Scalar>
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix(const Vec2& q) const {
        const int s = side();
        const int p = plane_waves();
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> h =
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(dim(), dim());
        for (int c = 0; c < components; ++c) {
            const CouplingTable& v = potentials[c];
            const int off = c * p;
            for (int a = 0; a < p; ++a) {
                const int a1 = a / s - n_max;
                const int a2 = a % s - n_max;
                for (int b = 0; b < p; ++b) {
                    const int b1 = b / s - n_max;
                    const int b2 = b % s - n_max;
                    const std::complex<double> val = v.at(a1 - b1, a2 - b2);
                    if constexpr (std::is_same_v<Scalar, double>) h(off + a, off + b) = val.real();
                    else h(off + a, off + b) = val;
                }
                const Vec2 k = q + reciprocal * Vec2(a1, a2);
                h(off + a, off + a) += k.squaredNorm() + shifts[c];
            }
        }
        if (components == 3)
            for (int a = 0; a < p; ++a) {
                h(a, p + a) = h(p + a, a) = 0.5 * rabi;
                h(p + a, 2 * p + a) = h(2 * p + a, p + a) = 0.5 * rabi;
            }
        return h;
    }
};

// Real-space overlap of a coupled Bloch state with the local uppermost adiabatic eigenvector.
class TopSurfaceProjector {
public:
    TopSurfaceProjector(const DressingParams& p, int n_max, int grid) : grid_(grid), side_(2 * n_max + 1) {
        phase_.resize(grid, side_);
        for (int i = 0; i < grid; ++i)
            for (int n = -n_max; n <= n_max; ++n)
                phase_(i, n + n_max) = std::polar(1.0, 2.0 * constants::pi * n * i / grid);
        for (auto& c : chi_) c.resize(grid, grid);
        energy_.resize(grid, grid);
        for (int i = 0; i < grid; ++i)
            for (int j = 0; j < grid; ++j) {
                const SpinEigensystem es = diagonalize(h1_matrix(p, p.lattice.position(double(i) / grid, double(j) / grid)));
                for (int c = 0; c < 3; ++c) chi_[c](i, j) = es.vectors(c, 2);
                energy_(i, j) = es.values(2);
            }
    }

    double min_energy() const { return energy_.minCoeff(); }
    double max_energy() const { return energy_.maxCoeff(); }

    // psi_c(u_i, v_j) for one component of a coefficient vector
    Eigen::MatrixXcd field(const Eigen::VectorXcd& coeffs, int component) const {
        const int p = side_ * side_;
        const Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c(
            coeffs.data() + std::ptrdiff_t(component) * p, side_, side_);
        return phase_ * c * phase_.transpose();
    }

    double overlap(const Eigen::VectorXcd& coeffs) const {
        Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(grid_, grid_);
        double norm = 0.0;
        for (int c = 0; c < 3; ++c) {
            const Eigen::MatrixXcd f = field(coeffs, c);
            norm += f.cwiseAbs2().sum();
            proj += f.cwiseProduct(chi_[c].cast<std::complex<double>>());
        }
        return norm > 0.0 ? proj.cwiseAbs2().sum() / norm : 0.0;
    }

private:
    int grid_;
    int side_;
    Eigen::MatrixXcd phase_;
    std::array<Eigen::MatrixXd, 3> chi_;
    Eigen::MatrixXd energy_;
};

struct QResult {
    Eigen::VectorXd energies;
    Eigen::VectorXcd ground;
    double ground_energy = 0.0;
    double overlap = 1.0;
};

template <class Scalar>
EigenRange<std::complex<double>> to_complex(EigenRange<Scalar>&& r) {
    if constexpr (std::is_same_v<Scalar, double>) {
        return {std::move(r.values), r.vectors.template cast<std::complex<double>>()};
    } else {
        return std::move(r);
    }
}

template <class Scalar>
QResult solve_q(const Problem& prob, const Vec2& q, const BlochOptions& opt, const TopSurfaceProjector* projector) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Matrix h = prob.template matrix<Scalar>(q);
    QResult out;
    if (opt.selection == BandSelection::lowest || prob.components == 1) {
        const int last = std::min(opt.band_count, prob.dim()) - 1;
        auto r = eigh_index_range<Scalar>(h, 0, last);
        out.energies = r.values;
        out.ground = r.vectors.col(0).template cast<std::complex<double>>();
        out.ground_energy = r.values(0);
        if (projector) out.overlap = projector->overlap(out.ground);
        return out;
    }

    // Uppermost-surface band: scan upward from just below the surface minimum for the first
    // state whose overlap with the local top eigenvector exceeds one half.
    const double lower = projector->min_energy() - 1.0;
    const double upper = projector->max_energy() + 20.0;
    auto scan = [&](const EigenRange<std::complex<double>>& r) {
        double best_overlap = -1.0;
        for (Eigen::Index b = 0; b < r.values.size(); ++b) {
            const double w = projector->overlap(r.vectors.col(b));
            best_overlap = std::max(best_overlap, w);
            if (w > 0.5) {
                out.energies = r.values;
                out.ground = r.vectors.col(b);
                out.ground_energy = r.values(b);
                out.overlap = w;
                return -1.0;
            }
        }
        return best_overlap;
    };
    double missed = scan(to_complex(eigh_value_range<Scalar>(h, lower, upper)));
    if (missed >= -0.5) missed = scan(to_complex(eigh_all<Scalar>(h)));
    if (missed >= -0.5) throw ConvergenceError("no band with uppermost-surface overlap above 1/2", missed);
    return out;
}

} // namespace detail

namespace detail {

inline Problem make_problem(const DressingParams& p, const BlochOptions& opt, int n_max) {
    Problem prob;
    prob.n_max = n_max;
    prob.reciprocal = p.lattice.reciprocal();
    const int reach = 2 * n_max;
    if (opt.model == BandModel::coupled) {
        prob.components = 3;
        for (int m = -1; m <= 1; ++m) prob.potentials[spin_slot(m)] = table_from_lattice(p.lattice, m, reach);
        prob.shifts = {-p.detuning, 0.0, p.detuning + p.quadratic_shift};
        prob.rabi = p.rabi;
        prob.real = p.lattice.is_real_symmetric();
    } else {
        prob.components = 1;
        const int m = std::max(opt.surface_grid, 2 * reach + 2);
        const AdiabaticSurfaces s = adiabatic_surfaces(p, m, m, 1);
        prob.potentials[0] = table_from_samples(s.top, reach);
        prob.real = prob.potentials[0].is_real();
    }
    return prob;
}

inline QResult solve_one(const Problem& prob, const Vec2& q, const BlochOptions& opt, const TopSurfaceProjector* proj) {
    return prob.real ? solve_q<double>(prob, q, opt, proj) : solve_q<std::complex<double>>(prob, q, opt, proj);
}

// c'(G) = conj(c(-G)) maps the state at q onto the state at -q.
inline Eigen::VectorXcd time_reverse(const Eigen::VectorXcd& c, int components, int n_max) {
    const int s = 2 * n_max + 1;
    const int p = s * s;
    Eigen::VectorXcd out(c.size());
    for (int comp = 0; comp < components; ++comp)
        for (int a = 0; a < p; ++a) out(comp * p + a) = std::conj(c(comp * p + (p - 1 - a)));
    return out;
}

} // namespace detail

inline BlochSolution solve_bands(const DressingParams& p, const BlochOptions& opt = {}) {
    p.validate();
    opt.validate();
    const int nq = opt.q_grid;

    BlochSolution sol;
    sol.reciprocal = p.lattice.reciprocal();
    sol.n_max = opt.n_max;
    sol.q_grid = nq;
    sol.model = opt.model;
    sol.selection = opt.selection;

    const detail::Problem prob = detail::make_problem(p, opt, opt.n_max);
    sol.components = prob.components;

    std::optional<detail::TopSurfaceProjector> projector;
    if (opt.model == BandModel::coupled)
        projector.emplace(p, opt.n_max, std::max(opt.projection_grid, 2 * (2 * opt.n_max + 1)));
    const detail::TopSurfaceProjector* proj = projector ? &*projector : nullptr;

    // Monkhorst-Pack grid, symmetric under q -> -q
    const std::size_t count = std::size_t(nq) * nq;
    sol.q_points.resize(count);
    for (int i = 0; i < nq; ++i)
        for (int j = 0; j < nq; ++j)
            sol.q_points[std::size_t(i) * nq + j] =
                sol.reciprocal * Vec2((i + 0.5) / nq - 0.5, (j + 0.5) / nq - 0.5);
    auto mirror = [&](std::size_t idx) { return count - 1 - idx; };

    std::vector<std::size_t> work;
    for (std::size_t idx = 0; idx < count; ++idx)
        if (!opt.use_time_reversal || idx <= mirror(idx)) work.push_back(idx);

    std::vector<detail::QResult> results(count);
    parallel_for(work.size(), opt.threads, [&](std::size_t w) {
        const std::size_t idx = work[w];
        results[idx] = detail::solve_one(prob, sol.q_points[idx], opt, proj);
    });
    if (opt.use_time_reversal)
        for (std::size_t idx = 0; idx < count; ++idx) {
            const std::size_t m = mirror(idx);
            if (m < idx) {
                results[idx].energies = results[m].energies;
                results[idx].ground = detail::time_reverse(results[m].ground, prob.components, opt.n_max);
                results[idx].ground_energy = results[m].ground_energy;
                results[idx].overlap = results[m].overlap;
            }
        }

    const int pw = sol.plane_waves();
    for (auto& r : results) {
        sol.energies.push_back(std::move(r.energies));
        sol.ground_energy.push_back(r.ground_energy);
        sol.top_overlap.push_back(r.overlap);
        Eigen::Vector3d w = Eigen::Vector3d::Zero();
        if (prob.components == 3)
            for (int c = 0; c < 3; ++c) w(c) = r.ground.segment(std::ptrdiff_t(c) * pw, pw).squaredNorm();
        else
            w(0) = std::numeric_limits<double>::quiet_NaN();
        sol.spin_weights.push_back(w);
        sol.ground.push_back(std::move(r.ground));
    }

    if (opt.check_convergence) {
        // point nearest the zone centre
        std::size_t centre = 0;
        for (std::size_t idx = 1; idx < count; ++idx)
            if (sol.q_points[idx].norm() < sol.q_points[centre].norm()) centre = idx;
        const detail::Problem bigger = detail::make_problem(p, opt, opt.n_max + 2);
        std::optional<detail::TopSurfaceProjector> big_proj;
        if (projector) big_proj.emplace(p, opt.n_max + 2, std::max(opt.projection_grid, 2 * (2 * opt.n_max + 5)));
        const detail::QResult ref = detail::solve_one(bigger, sol.q_points[centre], opt, big_proj ? &*big_proj : nullptr);
        sol.convergence_residual = std::abs(ref.ground_energy - sol.ground_energy[centre]);
        if (sol.convergence_residual > opt.convergence_tol)
            throw ConvergenceError("plane-wave cutoff n_max=" + std::to_string(opt.n_max) + " not converged",
                                   sol.convergence_residual);
    }
    return sol;
}

// Spinor density of the selected band, averaged over the q grid, on an M x M grid over the
// unit cell (sample (i, j) at fractional position (i/M, j/M)); normalized to unit mean.
inline Eigen::ArrayXXd band_density(const BlochSolution& sol, int grid) {
    if (sol.ground.empty()) throw DomainError("band_density: empty solution");
    const int s = sol.side();
    Eigen::MatrixXcd phase(grid, s);
    for (int i = 0; i < grid; ++i)
        for (int n = -sol.n_max; n <= sol.n_max; ++n)
            phase(i, n + sol.n_max) = std::polar(1.0, 2.0 * constants::pi * n * i / grid);
    Eigen::ArrayXXd density = Eigen::ArrayXXd::Zero(grid, grid);
    for (const auto& c : sol.ground)
        for (int comp = 0; comp < sol.components; ++comp) {
            const Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
                c.data() + std::ptrdiff_t(comp) * sol.plane_waves(), s, s);
            density += (phase * m * phase.transpose()).cwiseAbs2().array();
        }
    return density / density.mean();
}

// ---------------------------------------------------------------------------------------------
// Momentum distributions

enum class DistributionKind { dephased_band, wannier };

inline std::string to_string(DistributionKind k) { return k == DistributionKind::wannier ? "wannier" : "dephased-band"; }

struct MomentumDistribution {
    std::vector<Vec2> k;        // units of hbar k
    std::vector<double> weight; // sums to 1
    DistributionKind kind = DistributionKind::dephased_band;
};

// dephased_band: incoherent q-average of |c_G(q)|^2 placed at k = q + G, summed over spin.
// wannier: |<c_G(q)>_q|^2 at k = G after fixing each q's phase so that the G = 0 amplitude of
// the dominant spin component is real and positive.
inline MomentumDistribution momentum_distribution(const BlochSolution& sol,
                                                  DistributionKind kind = DistributionKind::dephased_band) {
    if (sol.ground.empty()) throw DomainError("momentum_distribution: empty solution");
    MomentumDistribution d;
    d.kind = kind;
    const int nm = sol.n_max;
    const double nq = double(sol.ground.size());

    if (kind == DistributionKind::dephased_band) {
        for (std::size_t qi = 0; qi < sol.ground.size(); ++qi)
            for (int n1 = -nm; n1 <= nm; ++n1)
                for (int n2 = -nm; n2 <= nm; ++n2) {
                    double w = 0.0;
                    for (int c = 0; c < sol.components; ++c) w += std::norm(sol.ground[qi](sol.index(c, n1, n2)));
                    d.k.push_back(sol.q_points[qi] + sol.g_vector(n1, n2));
                    d.weight.push_back(w / nq);
                }
    } else {
        int anchor = 0;
        for (int c = 1; c < sol.components; ++c)
            if (std::abs(sol.ground[0](sol.index(c, 0, 0))) > std::abs(sol.ground[0](sol.index(anchor, 0, 0)))) anchor = c;
        Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(sol.basis_size());
        for (const auto& c : sol.ground) {
            const std::complex<double> a = c(sol.index(anchor, 0, 0));
            const std::complex<double> phase = std::abs(a) > 0.0 ? std::conj(a) / std::abs(a) : 1.0;
            mean += c * phase;
        }
        mean /= nq;
        double total = 0.0;
        for (int n1 = -nm; n1 <= nm; ++n1)
            for (int n2 = -nm; n2 <= nm; ++n2) {
                double w = 0.0;
                for (int c = 0; c < sol.components; ++c) w += std::norm(mean(sol.index(c, n1, n2)));
                d.k.push_back(sol.g_vector(n1, n2));
                d.weight.push_back(w);
                total += w;
            }
        if (!(total > 0.0)) throw DomainError("momentum_distribution: vanishing Wannier amplitude");
        for (auto& w : d.weight) w /= total;
    }
    return d;
}

// ---------------------------------------------------------------------------------------------
// Gaussian fit of the central momentum feature and time-of-flight mapping

struct GaussianFit {
    double amplitude = 0.0;
    double sigma_x = 0.0; // 1/e radius, hbar k
    double sigma_y = 0.0;
    double residual = 0.0; // rms residual over the fitted samples
    double kept_weight = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Least-squares fit of A exp(-kx^2/sx^2 - ky^2/sy^2) to the samples with |k| < mask_radius.
// Damped Gauss-Newton, started from the second moments of the masked samples.
inline GaussianFit fit_central_gaussian(const MomentumDistribution& dist, double mask_radius = 1.5) {
    std::vector<std::size_t> kept;
    double kept_weight = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < dist.k.size(); ++i) {
        total += dist.weight[i];
        if (dist.k[i].norm() < mask_radius) {
            kept.push_back(i);
            kept_weight += dist.weight[i];
        }
    }
    if (!(total > 0.0) || kept_weight < 0.1 * total)
        throw DomainError("tof_width: satellite mask removes more than 90% of the weight");
    if (kept.size() < 4) throw DomainError("tof_width: too few samples inside the mask");

    double mxx = 0.0;
    double myy = 0.0;
    double amax = 0.0;
    for (auto i : kept) {
        mxx += dist.weight[i] * dist.k[i].x() * dist.k[i].x();
        myy += dist.weight[i] * dist.k[i].y() * dist.k[i].y();
        amax = std::max(amax, dist.weight[i]);
    }
    // parameters: A, a = 1/sx^2, b = 1/sy^2
    Eigen::Vector3d x(amax, kept_weight / (2.0 * mxx), kept_weight / (2.0 * myy));
    auto residuals = [&](const Eigen::Vector3d& par, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(Eigen::Index(kept.size()));
        if (jac) jac->resize(Eigen::Index(kept.size()), 3);
        for (std::size_t n = 0; n < kept.size(); ++n) {
            const Vec2& k = dist.k[kept[n]];
            const double e = std::exp(-par(1) * k.x() * k.x() - par(2) * k.y() * k.y());
            r(Eigen::Index(n)) = par(0) * e - dist.weight[kept[n]];
            if (jac) {
                (*jac)(Eigen::Index(n), 0) = e;
                (*jac)(Eigen::Index(n), 1) = -par(0) * e * k.x() * k.x();
                (*jac)(Eigen::Index(n), 2) = -par(0) * e * k.y() * k.y();
            }
        }
    };

    GaussianFit fit;
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    double lambda = 1e-3;
    residuals(x, r, &jac);
    double cost = r.squaredNorm();
    for (int it = 1; it <= 500; ++it) {
        fit.iterations = it;
        const Eigen::Matrix3d jtj = jac.transpose() * jac;
        const Eigen::Vector3d grad = jac.transpose() * r;
        Eigen::Matrix3d damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal();
        const Eigen::Vector3d step = damped.ldlt().solve(-grad);
        const Eigen::Vector3d trial = x + step;
        Eigen::VectorXd rt;
        residuals(trial, rt, nullptr);
        const double trial_cost = rt.squaredNorm();
        if (trial_cost <= cost && trial(1) > 0.0 && trial(2) > 0.0) {
            x = trial;
            cost = trial_cost;
            lambda = std::max(lambda * 0.3, 1e-12);
            residuals(x, r, &jac);
            if (step.cwiseAbs().cwiseQuotient(x.cwiseAbs()).maxCoeff() < 1e-8) {
                fit.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) {
                fit.converged = true; // no further descent possible
                break;
            }
        }
    }
    if (!(x(1) > 0.0) || !(x(2) > 0.0)) throw DomainError("tof_width: non-positive fitted width");
    fit.amplitude = x(0);
    fit.sigma_x = 1.0 / std::sqrt(x(1));
    fit.sigma_y = 1.0 / std::sqrt(x(2));
    fit.residual = std::sqrt(cost / double(kept.size()));
    fit.kept_weight = kept_weight / total;
    return fit;
}

// Ballistic expansion: d = hbar sigma_k t / M, with an initial cloud radius added in quadrature.
inline double tof_radius(double sigma_k, double t_tof_s, double initial_size_m, const UnitSystem& units) {
    if (!(t_tof_s > 0.0)) throw DomainError("tof: time of flight must be positive");
    const double d = sigma_k * units.recoil_velocity() * t_tof_s;
    return std::sqrt(d * d + initial_size_m * initial_size_m);
}

// Inverse map: observed radius -> momentum 1/e radius in hbar k, initial size removed in quadrature.
inline double momentum_radius(double observed_m, double t_tof_s, double initial_size_m, const UnitSystem& units) {
    if (!(t_tof_s > 0.0)) throw DomainError("tof: time of flight must be positive");
    const double d2 = observed_m * observed_m - initial_size_m * initial_size_m;
    if (!(d2 > 0.0)) throw DomainError("tof: observed radius does not exceed the initial size");
    return std::sqrt(d2) / (units.recoil_velocity() * t_tof_s);
}

struct TofWidth {
    double sigma_k = 0.0;   // along x, hbar k
    double sigma_k_y = 0.0;
    double radius_m = 0.0;  // cloud 1/e radius after TOF (initial size included)
    GaussianFit fit;
};

inline TofWidth tof_width(const MomentumDistribution& dist, double t_tof_s, double initial_size_m,
                          const UnitSystem& units, double mask_radius = 1.5) {
    TofWidth w;
    w.fit = fit_central_gaussian(dist, mask_radius);
    w.sigma_k = w.fit.sigma_x;
    w.sigma_k_y = w.fit.sigma_y;
    w.radius_m = tof_radius(w.sigma_k, t_tof_s, initial_size_m, units);
    return w;
}

// ---------------------------------------------------------------------------------------------
// Width versus final rf frequency

struct WidthSweep {
    PhysicalSetup setup;
    std::string preset = std::string(default_preset);
    double depth_er = 10.0;
    double rabi_khz = 205.0;
    std::vector<double> rf_mhz;
    double field_uncertainty_mT = 0.0;
    double depth_uncertainty_er = 0.0;
    double mask_radius = 1.5;
    BlochOptions bloch;
};

struct WidthPoint {
    double rf_mhz = 0.0;
    double detuning_khz = 0.0;
    double width = 0.0; // sigma_k, hbar k
    double lo = 0.0;
    double hi = 0.0;
};

inline double central_width(const DressingParams& p, const BlochOptions& opt, double mask_radius = 1.5) {
    const BlochSolution sol = solve_bands(p, opt);
    return fit_central_gaussian(momentum_distribution(sol), mask_radius).sigma_x;
}

inline std::vector<WidthPoint> width_vs_frequency(const WidthSweep& sweep) {
    if (sweep.rf_mhz.empty()) throw DomainError("width_vs_frequency: empty frequency list");
    std::vector<WidthPoint> out;
    for (double rf : sweep.rf_mhz) {
        auto width_at = [&](double field_mT, double depth) {
            PhysicalSetup s = sweep.setup;
            s.field_mT = field_mT;
            return central_width(make_dressing(s, build_preset(sweep.preset, depth), sweep.rabi_khz, rf), sweep.bloch,
                                 sweep.mask_radius);
        };
        WidthPoint pt;
        pt.rf_mhz = rf;
        pt.detuning_khz = (rf * 1e6 - sweep.setup.zeeman().nu_m1_0_hz) * 1e-3;
        pt.width = width_at(sweep.setup.field_mT, sweep.depth_er);
        pt.lo = pt.hi = pt.width;
        const double db = sweep.field_uncertainty_mT;
        const double du = sweep.depth_uncertainty_er;
        std::vector<std::pair<double, double>> corners;
        for (double sb : {-1.0, 1.0})
            for (double su : {-1.0, 1.0}) {
                if ((db == 0.0 && sb > 0.0) || (du == 0.0 && su > 0.0)) continue;
                if (db == 0.0 && du == 0.0) continue;
                corners.emplace_back(sweep.setup.field_mT + sb * db, std::max(0.0, sweep.depth_er + su * du));
            }
        for (const auto& [b, u] : corners) {
            const double w = width_at(b, u);
            pt.lo = std::min(pt.lo, w);
            pt.hi = std::max(pt.hi, w);
        }
        out.push_back(pt);
    }
    return out;
}

} // namespace rfdress
