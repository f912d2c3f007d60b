#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rydberg_id/geometry.hpp"

namespace rydberg_id {

using Complex = std::complex<double>;
using DensityMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Bit j set <=> atom j excited. Bit 0 is the leftmost character of a ket.
using ExcitationPattern = unsigned;

/// Vertex permutation: perm[j] is the image of vertex j.
using Permutation = std::vector<int>;

inline int excitation_count(ExcitationPattern p) { return std::popcount(p); }

inline std::string ket_string(ExcitationPattern p, int n) {
    std::string s(static_cast<std::size_t>(n), '0');
    for (int j = 0; j < n; ++j)
        if (p >> j & 1u) s[static_cast<std::size_t>(j)] = '1';
    return s;
}

inline ExcitationPattern parse_ket(std::string_view ket) {
    ExcitationPattern p = 0;
    for (std::size_t j = 0; j < ket.size(); ++j) {
        if (ket[j] == '1') p |= 1u << j;
        else if (ket[j] != '0') throw std::invalid_argument("bad ket string");
    }
    return p;
}

inline ExcitationPattern permute(ExcitationPattern p, const Permutation& perm) {
    ExcitationPattern out = 0;
    for (std::size_t j = 0; j < perm.size(); ++j)
        if (p >> j & 1u) out |= 1u << perm[j];
    return out;
}

/// All independent sets of g (empty set included), ascending by bitmask.
inline std::vector<ExcitationPattern> enumerate_independent_sets(const Graph& g) {
    if (g.vertices() > kMaxAtoms) throw std::invalid_argument("enumerate_independent_sets: too many vertices");
    std::vector<ExcitationPattern> sets;
    const ExcitationPattern limit = 1u << g.vertices();
    for (ExcitationPattern m = 0; m < limit; ++m) {
        bool independent = true;
        for (auto [a, b] : g.edges()) {
            if ((m >> a & 1u) && (m >> b & 1u)) {
                independent = false;
                break;
            }
        }
        if (independent) sets.push_back(m);
    }
    return sets;
}

/// Every vertex permutation mapping the edge set onto itself, in lexicographic order.
inline std::vector<Permutation> automorphisms(const Graph& g) {
    if (g.vertices() > kMaxAtoms) throw std::invalid_argument("automorphisms: too many vertices");
    Permutation perm(static_cast<std::size_t>(g.vertices()));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<Permutation> out;
    do {
        bool ok = true;
        for (auto [a, b] : g.edges()) {
            if (!g.adjacent(perm[a], perm[b])) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

struct SymmetrizedState {
    int id = 0;
    std::vector<ExcitationPattern> orbit;  // ascending
    int excitations = 0;
    std::string label;  // W0, W1, W2a, ...

    [[nodiscard]] double amplitude() const { return 1.0 / std::sqrt(static_cast<double>(orbit.size())); }
};

struct BasisCatalog {
    std::string configuration;
    int atoms = 0;
    std::vector<SymmetrizedState> states;

    [[nodiscard]] int size() const { return static_cast<int>(states.size()); }
};

namespace detail {

// Dimensionless van der Waals weight of a pattern: sum over excited pairs of (d / r)^6.
inline double pattern_vdw_weight(const AtomConfiguration& config, ExcitationPattern p) {
    double w = 0.0;
    for (int j = 0; j < config.count(); ++j) {
        if (!(p >> j & 1u)) continue;
        for (int k = j + 1; k < config.count(); ++k) {
            if (p >> k & 1u) w += std::pow(kEdgeLengthUm / pairwise_distance(config, j, k), 6);
        }
    }
    return w;
}

}  // namespace detail

/// Groups independent sets of the blockade graph into automorphism orbits.
///
/// IDs run in order of excitation count, then closer excitations first (larger
/// geometric van der Waals weight), then smallest member bitmask. Labels get a
/// letter suffix when an excitation count has more than one orbit.
inline BasisCatalog build_basis_catalog(const AtomConfiguration& config, double blockade_radius_um) {
    const Graph g = blockade_graph(config, blockade_radius_um);
    const auto sets = enumerate_independent_sets(g);
    const auto group = automorphisms(g);

    struct Orbit {
        std::vector<ExcitationPattern> members;
        int excitations;
        double weight;
    };
    std::vector<Orbit> orbits;
    std::vector<bool> seen(std::size_t{1} << config.count(), false);
    for (ExcitationPattern p : sets) {
        if (seen[p]) continue;
        Orbit o{{}, excitation_count(p), detail::pattern_vdw_weight(config, p)};
        for (const auto& perm : group) {
            ExcitationPattern q = permute(p, perm);
            if (!seen[q]) {
                seen[q] = true;
                o.members.push_back(q);
            }
        }
        std::sort(o.members.begin(), o.members.end());
        orbits.push_back(std::move(o));
    }

    constexpr double weight_tol = 1e-9;
    std::sort(orbits.begin(), orbits.end(), [&](const Orbit& a, const Orbit& b) {
        if (a.excitations != b.excitations) return a.excitations < b.excitations;
        if (std::abs(a.weight - b.weight) > weight_tol * std::max(1.0, std::abs(a.weight))) return a.weight > b.weight;
        return a.members.front() < b.members.front();
    });

    BasisCatalog catalog{config.name, config.count(), {}};
    for (std::size_t i = 0; i < orbits.size(); ++i) {
        const int ex = orbits[i].excitations;
        const auto same = std::count_if(orbits.begin(), orbits.end(), [&](const Orbit& o) { return o.excitations == ex; });
        const auto rank = std::count_if(orbits.begin(), orbits.begin() + static_cast<std::ptrdiff_t>(i),
                                        [&](const Orbit& o) { return o.excitations == ex; });
        std::string label = "W" + std::to_string(ex);
        if (same > 1) label += static_cast<char>('a' + rank);
        catalog.states.push_back({static_cast<int>(i), std::move(orbits[i].members), ex, std::move(label)});
    }
    return catalog;
}

/// |W> in the 2^n computational basis, index = bitmask.
inline StateVector state_vector(const SymmetrizedState& w, int atoms) {
    const auto dim = static_cast<Eigen::Index>(1) << atoms;
    StateVector v = StateVector::Zero(dim);
    const double amp = w.amplitude();
    for (ExcitationPattern p : w.orbit) {
        if (static_cast<Eigen::Index>(p) >= dim) throw std::invalid_argument("state_vector: pattern exceeds 2^n");
        v[static_cast<Eigen::Index>(p)] = amp;
    }
    return v;
}

/// Re <W|rho|W>, clamped to [0,1] when within 1e-9 of the interval.
inline double probability(const DensityMatrix& rho, const SymmetrizedState& w) {
    const auto dim = rho.rows();
    if (rho.cols() != dim) throw std::invalid_argument("probability: density matrix not square");
    for (ExcitationPattern p : w.orbit) {
        if (static_cast<Eigen::Index>(p) >= dim) throw std::invalid_argument("probability: dimension mismatch");
    }
    double sum = 0.0;
    for (ExcitationPattern a : w.orbit)
        for (ExcitationPattern b : w.orbit) sum += rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)).real();
    double p = sum / static_cast<double>(w.orbit.size());
    constexpr double tol = 1e-9;
    if (p < 0.0 && p >= -tol) p = 0.0;
    if (p > 1.0 && p <= 1.0 + tol) p = 1.0;
    return p;
}

inline std::string format_state(const SymmetrizedState& w, int atoms) {
    std::string s = std::to_string(w.id) + ": " + w.label + " = ";
    if (w.orbit.size() > 1) s += "(";
    for (std::size_t i = 0; i < w.orbit.size(); ++i) {
        if (i) s += " + ";
        s += "|" + ket_string(w.orbit[i], atoms) + ">";
    }
    if (w.orbit.size() > 1) s += ")/sqrt(" + std::to_string(w.orbit.size()) + ")";
    return s;
}

}  // namespace rydberg_id
