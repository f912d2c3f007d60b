#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rydberg_id/basis.hpp"
#include "rydberg_id/geometry.hpp"
#include "rydberg_id/rng.hpp"

// Units throughout: time in microseconds, frequencies in rad/us (hbar absorbed),
// lengths in micrometres. A frequency of f MHz is 2*pi*f rad/us.

namespace rydberg_id {

using Matrix = Eigen::MatrixXcd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double mhz_to_rad_per_us(double mhz) { return kTwoPi * mhz; }

struct HamiltonianParams {
    double omega = kTwoPi * 1.0;           // Rabi frequency
    double c6 = kTwoPi * 863.0e3;          // C6/hbar in rad/us * um^6 (2*pi * 863 GHz um^6)
    InteractionMode mode = InteractionMode::NNN;

    [[nodiscard]] double blockade_radius() const { return rydberg_id::blockade_radius(c6, omega); }
};

struct NoiseParams {
    double intensity_mean = 0.03;
    double intensity_std = 0.01;
    double base_dephasing = kTwoPi * 0.05;
    double base_decay = kTwoPi * 0.01;
};

struct NoiseRealization {
    double rabi_multiplier = 1.0;
    double dephasing_rate = 0.0;
    double decay_rate = 0.0;
};

inline void validate(const HamiltonianParams& p) {
    if (!(p.omega > 0.0) || !(p.c6 > 0.0)) throw std::invalid_argument("Hamiltonian parameters must be positive");
}

inline void validate(const NoiseParams& p) {
    if (p.intensity_mean < 0.0 || p.intensity_std < 0.0 || p.base_dephasing < 0.0 || p.base_decay < 0.0) {
        throw std::invalid_argument("noise parameters must be non-negative");
    }
}

/// Quasi-static noise draw for one shot. The fluctuation level f is a
/// non-negative normal draw (negatives re-drawn); it jitters the Rabi
/// frequency and broadens the dephasing rate in proportion to f / mean.
inline NoiseRealization sample_noise(const NoiseParams& p, RngStream& rng) {
    validate(p);
    double f = 0.0;
    if (p.intensity_std > 0.0) {
        std::normal_distribution<double> level(p.intensity_mean, p.intensity_std);
        do {
            f = level(rng);
        } while (f < 0.0);
    } else {
        f = p.intensity_mean;
    }
    double multiplier = 1.0;
    if (f > 0.0) {
        std::normal_distribution<double> jitter(0.0, f);
        do {
            multiplier = 1.0 + jitter(rng);
        } while (multiplier <= 0.0);
    }
    const double broadening = p.intensity_mean > 0.0 ? 1.0 + f / p.intensity_mean : 1.0;
    return {multiplier, p.base_dephasing * broadening, p.base_decay};
}

/// Fluctuation-free realization: nominal Rabi frequency and the base rates.
inline NoiseRealization nominal_noise(const NoiseParams& p) { return {1.0, p.base_dephasing, p.base_decay}; }

/// Hamiltonian parameters seen by one shot: the drive scaled by the realization's multiplier.
inline HamiltonianParams perturbed(HamiltonianParams params, const NoiseRealization& noise) {
    params.omega *= noise.rabi_multiplier;
    return params;
}

/// Diagonal van der Waals energy of every basis state (index = excitation bitmask).
inline std::vector<double> interaction_energies(const AtomConfiguration& config, const HamiltonianParams& params) {
    const auto pairs = interaction_pairs(config, params.mode);
    const std::size_t dim = std::size_t{1} << config.count();
    std::vector<double> energy(dim, 0.0);
    for (const auto& pr : pairs) {
        const double u = params.c6 / std::pow(pr.distance, 6);
        for (std::size_t a = 0; a < dim; ++a)
            if ((a >> pr.j & 1u) && (a >> pr.k & 1u)) energy[a] += u;
    }
    return energy;
}

inline Matrix build_hamiltonian(const AtomConfiguration& config, const HamiltonianParams& params) {
    validate(params);
    const int n = config.count();
    if (n > kMaxAtoms) throw std::invalid_argument("build_hamiltonian: too many atoms");
    const Eigen::Index dim = Eigen::Index{1} << n;
    Matrix h = Matrix::Zero(dim, dim);
    const auto energy = interaction_energies(config, params);
    for (Eigen::Index a = 0; a < dim; ++a) {
        h(a, a) = energy[static_cast<std::size_t>(a)];
        for (int j = 0; j < n; ++j) h(a ^ (Eigen::Index{1} << j), a) += params.omega / 2.0;
    }
    return h;
}

/// Single-atom operator `op` (2x2, basis |0>,|1>) acting on atom j of n.
inline Matrix embed_single(const Eigen::Matrix2cd& op, int j, int n) {
    const Eigen::Index dim = Eigen::Index{1} << n;
    Matrix out = Matrix::Zero(dim, dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
        const int bit_a = static_cast<int>(a >> j & 1);
        for (int bit_b = 0; bit_b < 2; ++bit_b) {
            const Complex v = op(bit_a, bit_b);
            if (v == Complex{}) continue;
            const Eigen::Index b = (a & ~(Eigen::Index{1} << j)) | (Eigen::Index{bit_b} << j);
            out(a, b) = v;
        }
    }
    return out;
}

/// Per atom: sqrt(dephasing) n_j and sqrt(decay) |0><1|_j. Zero-rate channels are omitted.
inline std::vector<Matrix> collapse_operators(int n, const NoiseRealization& noise) {
    if (n < 1 || n > kMaxAtoms) throw std::invalid_argument("collapse_operators: atom count out of range");
    std::vector<Matrix> ops;
    Eigen::Matrix2cd number;
    number << 0, 0, 0, 1;
    Eigen::Matrix2cd lower;
    lower << 0, 1, 0, 0;
    for (int j = 0; j < n; ++j) {
        if (noise.dephasing_rate > 0.0) ops.push_back(std::sqrt(noise.dephasing_rate) * embed_single(number, j, n));
        if (noise.decay_rate > 0.0) ops.push_back(std::sqrt(noise.decay_rate) * embed_single(lower, j, n));
    }
    return ops;
}

inline Matrix lindblad_rhs(const Matrix& h, const std::vector<Matrix>& collapse_ops, const DensityMatrix& rho) {
    if (h.rows() != h.cols() || rho.rows() != h.rows() || rho.cols() != h.cols()) {
        throw std::invalid_argument("lindblad_rhs: dimension mismatch");
    }
    const Complex i{0.0, 1.0};
    Matrix out = -i * (h * rho - rho * h);
    for (const auto& l : collapse_ops) {
        if (l.rows() != h.rows() || l.cols() != h.cols()) throw std::invalid_argument("lindblad_rhs: dimension mismatch");
        const Matrix ldag = l.adjoint();
        const Matrix ldl = ldag * l;
        out += l * rho * ldag - 0.5 * (ldl * rho + rho * ldl);
    }
    return out;
}

/// Observation grid. All three durations in microseconds.
struct TimeGrid {
    double total = 1.0;
    double observe_every = 0.05;
    double step = 1e-3;

    [[nodiscard]] int observations() const {
        check();
        return static_cast<int>(std::llround(total / observe_every)) + 1;
    }
    [[nodiscard]] int steps_per_observation() const {
        check();
        return static_cast<int>(std::llround(observe_every / step));
    }
    [[nodiscard]] double time_at(int k) const { return observe_every * k; }

    void check() const {
        if (!(total > 0.0) || !(observe_every > 0.0) || !(step > 0.0)) {
            throw std::invalid_argument("time grid durations must be positive");
        }
        const double obs = total / observe_every;
        if (std::abs(obs - std::round(obs)) > 1e-9 * std::max(1.0, obs)) {
            throw std::invalid_argument("observe_every must divide total_time");
        }
        const double sub = observe_every / step;
        if (std::abs(sub - std::round(sub)) > 1e-9 * std::max(1.0, sub)) {
            throw std::invalid_argument("integration step must divide observe_every");
        }
    }
};

inline constexpr double kTraceDriftLimit = 1e-6;

/// Generic fixed-step RK4 integration of the Lindblad equation on dense matrices.
/// Returns states at t = 0, observe_every, ..., total.
inline std::vector<DensityMatrix> evolve(const Matrix& h, const std::vector<Matrix>& collapse_ops, const DensityMatrix& rho0,
                                         const TimeGrid& grid) {
    const int observations = grid.observations();
    const int substeps = grid.steps_per_observation();
    const double dt = grid.step;
    std::vector<DensityMatrix> out;
    out.reserve(static_cast<std::size_t>(observations));
    DensityMatrix rho = rho0;
    const Complex tr0 = rho0.trace();
    out.push_back(rho);
    for (int k = 1; k < observations; ++k) {
        for (int s = 0; s < substeps; ++s) {
            const Matrix k1 = lindblad_rhs(h, collapse_ops, rho);
            const Matrix k2 = lindblad_rhs(h, collapse_ops, rho + 0.5 * dt * k1);
            const Matrix k3 = lindblad_rhs(h, collapse_ops, rho + 0.5 * dt * k2);
            const Matrix k4 = lindblad_rhs(h, collapse_ops, rho + dt * k3);
            rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        const double drift = std::abs(rho.trace() - tr0);
        if (!(drift <= kTraceDriftLimit)) {
            std::ostringstream msg;
            msg << "evolve: trace drift " << drift << " at t = " << grid.time_at(k) << " us";
            throw std::runtime_error(msg.str());
        }
        out.push_back(rho);
    }
    return out;
}

inline DensityMatrix ground_state_density(int atoms) {
    const Eigen::Index dim = Eigen::Index{1} << atoms;
    DensityMatrix rho = DensityMatrix::Zero(dim, dim);
    rho(0, 0) = 1.0;
    return rho;
}

/// Permutations of atoms that leave every pairwise interaction energy unchanged.
inline std::vector<Permutation> interaction_symmetries(const AtomConfiguration& config, const HamiltonianParams& params) {
    const int n = config.count();
    std::vector<std::vector<double>> u(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    double scale = 0.0;
    for (const auto& pr : interaction_pairs(config, params.mode)) {
        const double v = params.c6 / std::pow(pr.distance, 6);
        u[pr.j][pr.k] = u[pr.k][pr.j] = v;
        scale = std::max(scale, v);
    }
    const double tol = 1e-9 * std::max(scale, 1.0);
    Permutation perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<Permutation> group;
    do {
        bool ok = true;
        for (int j = 0; j < n && ok; ++j)
            for (int k = j + 1; k < n && ok; ++k)
                ok = std::abs(u[perm[j]][perm[k]] - u[j][k]) <= tol;
        if (ok) group.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return group;
}

/// Lindblad evolution of a Rydberg array from |0...0>, specialised to the
/// model's structure: uniform drive, diagonal interactions, per-atom dephasing
/// and decay. The density matrix is stored on orbit representatives of
/// (row, column) pairs under the interaction symmetry group together with
/// Hermitian conjugation, which is exact because the initial state and every
/// term of the generator are invariant under that group.
///
/// Each right-hand-side evaluation is the same fixed-step RK4 as `evolve`;
/// only the storage differs.
class RydbergPropagator {
public:
    RydbergPropagator(const AtomConfiguration& config, const HamiltonianParams& params)
        : RydbergPropagator(config.count(), interaction_energies(config, params), interaction_symmetries(config, params),
                            params.omega) {
        validate(params);
    }

    RydbergPropagator(int atoms, std::vector<double> energies, const std::vector<Permutation>& symmetries, double omega)
        : atoms_(atoms), dim_(std::size_t{1} << atoms), omega_(omega), energies_(std::move(energies)) {
        if (atoms < 1 || atoms > kMaxAtoms) throw std::invalid_argument("RydbergPropagator: atom count out of range");
        if (energies_.size() != dim_) throw std::invalid_argument("RydbergPropagator: energy table size");
        build_orbits(symmetries);
        build_stencil();
    }

    [[nodiscard]] int atoms() const { return atoms_; }
    [[nodiscard]] std::size_t reduced_size() const { return rep_row_.size(); }
    [[nodiscard]] std::size_t symmetry_order() const { return group_order_; }

    /// Sparse linear functional on the reduced state: sum_i weight_i * Re x[index_i].
    struct Observable {
        std::vector<std::uint32_t> index;
        std::vector<double> weight;
    };

    [[nodiscard]] Observable projector(const SymmetrizedState& w) const {
        std::vector<double> dense(rep_row_.size(), 0.0);
        const double norm = 1.0 / static_cast<double>(w.orbit.size());
        for (ExcitationPattern a : w.orbit) {
            for (ExcitationPattern b : w.orbit) {
                if (a >= dim_ || b >= dim_) throw std::invalid_argument("projector: pattern exceeds 2^n");
                dense[slot_[a * dim_ + b]] += norm;
            }
        }
        return compress(dense);
    }

    [[nodiscard]] Observable trace_functional() const {
        std::vector<double> dense(rep_row_.size(), 0.0);
        for (std::size_t a = 0; a < dim_; ++a) dense[slot_[a * dim_ + a]] += 1.0;
        return compress(dense);
    }

    /// Integrates from |0...0><0...0| and evaluates each observable at every grid point.
    /// Result is indexed [observable][time]. Throws on trace drift above 1e-6.
    [[nodiscard]] std::vector<std::vector<double>> observe(const NoiseRealization& noise, const TimeGrid& grid,
                                                           const std::vector<Observable>& observables) const {
        std::vector<std::vector<double>> out(observables.size());
        run(noise, grid, [&](int, const std::vector<Complex>& x) {
            for (std::size_t i = 0; i < observables.size(); ++i) out[i].push_back(evaluate(observables[i], x));
        });
        return out;
    }

    /// Same integration, returning full density matrices at the grid points.
    [[nodiscard]] std::vector<DensityMatrix> trajectory(const NoiseRealization& noise, const TimeGrid& grid) const {
        std::vector<DensityMatrix> out;
        run(noise, grid, [&](int, const std::vector<Complex>& x) { out.push_back(expand(x)); });
        return out;
    }

    [[nodiscard]] DensityMatrix expand(const std::vector<Complex>& x) const {
        DensityMatrix rho(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        for (std::size_t a = 0; a < dim_; ++a) {
            for (std::size_t b = 0; b < dim_; ++b) {
                const std::size_t p = a * dim_ + b;
                const Complex v = x[slot_[p]];
                rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = conj_[p] ? std::conj(v) : v;
            }
        }
        return rho;
    }

    static double evaluate(const Observable& o, const std::vector<Complex>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < o.index.size(); ++i) s += o.weight[i] * x[o.index[i]].real();
        return s;
    }

private:
    struct Ref {
        std::uint32_t index;
        double re_sign;
        double im_sign;
    };

    template <class Callback>
    void run(const NoiseRealization& noise, const TimeGrid& grid, Callback&& on_observation) const {
        const int observations = grid.observations();
        const int substeps = grid.steps_per_observation();
        const double dt = grid.step;
        const std::size_t m = rep_row_.size();

        // per-sample diagonal coefficients
        std::vector<Complex> diag(m);
        for (std::size_t r = 0; r < m; ++r) {
            diag[r] = Complex{-0.5 * noise.dephasing_rate * rep_xor_[r] - 0.5 * noise.decay_rate * rep_exc_[r], -rep_du_[r]};
        }
        const Complex drive{0.0, -0.5 * omega_ * noise.rabi_multiplier};
        const double gain = noise.decay_rate;

        std::vector<Complex> x(m, Complex{}), k1(m), k2(m), k3(m), k4(m), tmp(m);
        x[slot_[0]] = 1.0;
        const Observable trace = trace_functional();
        on_observation(0, x);
        for (int k = 1; k < observations; ++k) {
            for (int s = 0; s < substeps; ++s) {
                rhs(x, k1, diag, drive, gain);
                for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + (0.5 * dt) * k1[i];
                rhs(tmp, k2, diag, drive, gain);
                for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + (0.5 * dt) * k2[i];
                rhs(tmp, k3, diag, drive, gain);
                for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + dt * k3[i];
                rhs(tmp, k4, diag, drive, gain);
                for (std::size_t i = 0; i < m; ++i) x[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            const double drift = std::abs(evaluate(trace, x) - 1.0);
            if (!(drift <= kTraceDriftLimit)) {
                std::ostringstream msg;
                msg << "evolve: trace drift " << drift << " at t = " << grid.time_at(k) << " us";
                throw std::runtime_error(msg.str());
            }
            on_observation(k, x);
        }
    }

    void rhs(const std::vector<Complex>& x, std::vector<Complex>& out, const std::vector<Complex>& diag, Complex drive,
             double gain) const {
        const std::size_t m = rep_row_.size();
        for (std::size_t r = 0; r < m; ++r) {
            double sre = 0.0, sim = 0.0;
            for (std::uint32_t q = rabi_ptr_[r]; q < rabi_ptr_[r + 1]; ++q) {
                const Ref& ref = rabi_[q];
                sre += ref.re_sign * x[ref.index].real();
                sim += ref.im_sign * x[ref.index].imag();
            }
            double gre = 0.0, gim = 0.0;
            for (std::uint32_t q = decay_ptr_[r]; q < decay_ptr_[r + 1]; ++q) {
                const Ref& ref = decay_[q];
                gre += x[ref.index].real();
                gim += ref.im_sign * x[ref.index].imag();
            }
            Complex v = diag[r] * x[r] + drive * Complex{sre, sim} + gain * Complex{gre, gim};
            if (self_conjugate_[r]) v = Complex{v.real(), 0.0};
            out[r] = v;
        }
    }

    void build_orbits(const std::vector<Permutation>& symmetries) {
        std::vector<std::vector<std::size_t>> basis_maps;
        for (const auto& perm : symmetries) {
            if (static_cast<int>(perm.size()) != atoms_) throw std::invalid_argument("RydbergPropagator: bad permutation");
            std::vector<std::size_t> map(dim_);
            for (std::size_t a = 0; a < dim_; ++a) map[a] = permute(static_cast<ExcitationPattern>(a), perm);
            basis_maps.push_back(std::move(map));
        }
        if (basis_maps.empty()) {
            std::vector<std::size_t> id(dim_);
            std::iota(id.begin(), id.end(), std::size_t{0});
            basis_maps.push_back(std::move(id));
        }
        group_order_ = basis_maps.size();

        constexpr std::uint32_t unset = UINT32_MAX;
        slot_.assign(dim_ * dim_, unset);
        conj_.assign(dim_ * dim_, 0);
        for (std::size_t a = 0; a < dim_; ++a) {
            for (std::size_t b = 0; b < dim_; ++b) {
                if (slot_[a * dim_ + b] != unset) continue;
                const auto idx = static_cast<std::uint32_t>(rep_row_.size());
                rep_row_.push_back(static_cast<std::uint32_t>(a));
                rep_col_.push_back(static_cast<std::uint32_t>(b));
                bool self_conj = false;
                for (const auto& g : basis_maps) slot_[g[a] * dim_ + g[b]] = idx;
                for (const auto& g : basis_maps) {
                    const std::size_t p = g[b] * dim_ + g[a];
                    if (slot_[p] == unset) {
                        slot_[p] = idx;
                        conj_[p] = 1;
                    } else if (slot_[p] == idx && !conj_[p]) {
                        self_conj = true;
                    }
                }
                self_conjugate_.push_back(self_conj ? 1 : 0);
            }
        }
    }

    void build_stencil() {
        const std::size_t m = rep_row_.size();
        rabi_ptr_.assign(1, 0);
        decay_ptr_.assign(1, 0);
        auto make_ref = [&](std::size_t a, std::size_t b, double sign) {
            const std::size_t p = a * dim_ + b;
            return Ref{slot_[p], sign, conj_[p] ? -sign : sign};
        };
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t a = rep_row_[r], b = rep_col_[r];
            for (int j = 0; j < atoms_; ++j) {
                const std::size_t bit = std::size_t{1} << j;
                rabi_.push_back(make_ref(a ^ bit, b, +1.0));
                rabi_.push_back(make_ref(a, b ^ bit, -1.0));
                if (!(a & bit) && !(b & bit)) decay_.push_back(make_ref(a | bit, b | bit, +1.0));
            }
            rabi_ptr_.push_back(static_cast<std::uint32_t>(rabi_.size()));
            decay_ptr_.push_back(static_cast<std::uint32_t>(decay_.size()));
            rep_du_.push_back(energies_[a] - energies_[b]);
            rep_xor_.push_back(std::popcount(a ^ b));
            rep_exc_.push_back(std::popcount(a) + std::popcount(b));
        }
    }

    [[nodiscard]] static Observable compress(const std::vector<double>& dense) {
        Observable o;
        for (std::size_t i = 0; i < dense.size(); ++i) {
            if (dense[i] != 0.0) {
                o.index.push_back(static_cast<std::uint32_t>(i));
                o.weight.push_back(dense[i]);
            }
        }
        return o;
    }

    int atoms_;
    std::size_t dim_;
    double omega_;
    std::vector<double> energies_;
    std::size_t group_order_ = 1;

    std::vector<std::uint32_t> slot_;  // (a * dim + b) -> representative index
    std::vector<std::uint8_t> conj_;   // entry equals conj of its representative
    std::vector<std::uint32_t> rep_row_, rep_col_;
    std::vector<std::uint8_t> self_conjugate_;

    std::vector<Ref> rabi_, decay_;
    std::vector<std::uint32_t> rabi_ptr_, decay_ptr_;
    std::vector<double> rep_du_;
    std::vector<double> rep_xor_, rep_exc_;
};

}  // namespace rydberg_id
