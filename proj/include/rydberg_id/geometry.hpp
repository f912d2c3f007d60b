#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rydberg_id {

/// Edge length of every shipped configuration, in micrometres.
inline constexpr double kEdgeLengthUm = 8.0;
inline constexpr int kMaxAtoms = 6;

using Vec3 = std::array<double, 3>;

/// Undirected simple graph on at most kMaxAtoms vertices.
/// Edges are stored as (lo, hi) pairs, sorted.
class Graph {
public:
    Graph() = default;
    explicit Graph(int vertices) : vertices_(vertices) {
        if (vertices < 0 || vertices > kMaxAtoms) {
            throw std::invalid_argument("Graph: vertex count out of range");
        }
    }
    Graph(int vertices, const std::vector<std::pair<int, int>>& edges) : Graph(vertices) {
        for (auto [a, b] : edges) add_edge(a, b);
    }

    void add_edge(int a, int b) {
        if (a == b) throw std::invalid_argument("Graph: self-loop");
        if (a < 0 || b < 0 || a >= vertices_ || b >= vertices_) {
            throw std::out_of_range("Graph: edge endpoint out of range");
        }
        std::pair<int, int> e{std::min(a, b), std::max(a, b)};
        auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
        if (it == edges_.end() || *it != e) edges_.insert(it, e);
    }

    [[nodiscard]] int vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    [[nodiscard]] bool adjacent(int a, int b) const {
        std::pair<int, int> e{std::min(a, b), std::max(a, b)};
        return std::binary_search(edges_.begin(), edges_.end(), e);
    }

    /// Bitmask of neighbours of vertex v.
    [[nodiscard]] unsigned neighbours(int v) const {
        unsigned mask = 0;
        for (auto [a, b] : edges_) {
            if (a == v) mask |= 1u << b;
            if (b == v) mask |= 1u << a;
        }
        return mask;
    }

    bool operator==(const Graph&) const = default;

private:
    int vertices_ = 0;
    std::vector<std::pair<int, int>> edges_;
};

/// A named arrangement of atoms with its declared (drawn) edges.
struct AtomConfiguration {
    std::string name;
    std::vector<Vec3> positions;
    std::vector<std::pair<int, int>> edges;

    [[nodiscard]] int count() const { return static_cast<int>(positions.size()); }
};

enum class InteractionMode { NN, NNN, FULL };

inline std::string to_string(InteractionMode m) {
    switch (m) {
        case InteractionMode::NN: return "NN";
        case InteractionMode::NNN: return "NNN";
        case InteractionMode::FULL: return "FULL";
    }
    return "?";
}

inline InteractionMode parse_interaction_mode(std::string_view s) {
    if (s == "NN" || s == "nn") return InteractionMode::NN;
    if (s == "NNN" || s == "nnn") return InteractionMode::NNN;
    if (s == "FULL" || s == "full") return InteractionMode::FULL;
    throw std::invalid_argument("unknown interaction mode: " + std::string(s));
}

struct InteractionPair {
    int j;
    int k;
    double distance;
};

inline double distance(const Vec3& a, const Vec3& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

inline double pairwise_distance(const AtomConfiguration& config, int j, int k) {
    const int n = config.count();
    if (j < 0 || k < 0 || j >= n || k >= n) {
        throw std::out_of_range("pairwise_distance: atom index out of range");
    }
    if (j == k) throw std::invalid_argument("pairwise_distance: j == k");
    return distance(config.positions[j], config.positions[k]);
}

/// Throws if atoms coincide or a declared edge is not kEdgeLengthUm long.
inline void validate(const AtomConfiguration& config) {
    const int n = config.count();
    if (n < 1 || n > kMaxAtoms) {
        throw std::invalid_argument("configuration '" + config.name + "': atom count out of range [1,6]");
    }
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            if (!(pairwise_distance(config, j, k) > 0.0)) {
                throw std::invalid_argument("configuration '" + config.name + "': coincident atoms");
            }
        }
    }
    for (auto [j, k] : config.edges) {
        if (std::abs(pairwise_distance(config, j, k) - kEdgeLengthUm) > 1e-9) {
            throw std::invalid_argument("configuration '" + config.name + "': declared edge (" +
                                        std::to_string(j) + "," + std::to_string(k) +
                                        ") is not 8 um long");
        }
    }
}

namespace detail {

inline AtomConfiguration regular_polygon(std::string name, int n) {
    // circumradius for side length d
    const double radius = kEdgeLengthUm / (2.0 * std::sin(std::numbers::pi / n));
    AtomConfiguration c{std::move(name), {}, {}};
    for (int j = 0; j < n; ++j) {
        const double phi = 2.0 * std::numbers::pi * j / n;
        c.positions.push_back({radius * std::cos(phi), radius * std::sin(phi), 0.0});
    }
    for (int j = 0; j < n; ++j) c.edges.emplace_back(std::min(j, (j + 1) % n), std::max(j, (j + 1) % n));
    std::sort(c.edges.begin(), c.edges.end());
    return c;
}

inline AtomConfiguration chain(std::string name, int n) {
    AtomConfiguration c{std::move(name), {}, {}};
    for (int j = 0; j < n; ++j) c.positions.push_back({kEdgeLengthUm * j, 0.0, 0.0});
    for (int j = 0; j + 1 < n; ++j) c.edges.emplace_back(j, j + 1);
    return c;
}

inline void expect_count(std::string_view kind, int n, int expected) {
    if (n != expected) {
        throw std::invalid_argument("configuration kind '" + std::string(kind) + "' requires n = " +
                                    std::to_string(expected));
    }
}

}  // namespace detail

/// Builds one of the shipped geometries. `kind` is a shape family,
/// `n` the atom count (must agree with fixed-size kinds).
inline AtomConfiguration build_configuration(std::string_view kind, int n) {
    if (n < 1 || n > kMaxAtoms) throw std::invalid_argument("atom count out of range [1,6]");
    const double d = kEdgeLengthUm;
    AtomConfiguration c;
    if (kind == "chain") {
        c = detail::chain("chain-" + std::to_string(n), n);
    } else if (kind == "single") {
        detail::expect_count(kind, n, 1);
        c = detail::chain("S1", 1);
    } else if (kind == "pair") {
        detail::expect_count(kind, n, 2);
        c = detail::chain("B2", 2);
    } else if (kind == "triangle") {
        detail::expect_count(kind, n, 3);
        c = detail::regular_polygon("T3", 3);
    } else if (kind == "square" || kind == "cycle4") {
        detail::expect_count(kind, n, 4);
        c = AtomConfiguration{"C4", {{0, 0, 0}, {d, 0, 0}, {d, d, 0}, {0, d, 0}}, {{0, 1}, {0, 3}, {1, 2}, {2, 3}}};
    } else if (kind == "pentagon") {
        detail::expect_count(kind, n, 5);
        c = detail::regular_polygon("P5", 5);
    } else if (kind == "hexagon") {
        detail::expect_count(kind, n, 6);
        c = detail::regular_polygon("H6", 6);
    } else if (kind == "star4") {
        detail::expect_count(kind, n, 4);
        // centre plus three leaves at 120 degrees
        c.name = "S4";
        c.positions.push_back({0, 0, 0});
        for (int j = 0; j < 3; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / 3.0;
            c.positions.push_back({d * std::cos(phi), d * std::sin(phi), 0.0});
        }
        c.edges = {{0, 1}, {0, 2}, {0, 3}};
    } else if (kind == "complete4") {
        detail::expect_count(kind, n, 4);
        // regular tetrahedron with edge d
        const double h = d * std::sqrt(3.0) / 2.0;
        c.name = "K4";
        c.positions = {{0, 0, 0}, {d, 0, 0}, {d / 2, h, 0}, {d / 2, h / 3.0, d * std::sqrt(2.0 / 3.0)}};
        c.edges = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    } else if (kind == "k4-minus-edge") {
        detail::expect_count(kind, n, 4);
        // rhombus of two equilateral triangles sharing edge (0,1); (2,3) is the long diagonal
        const double h = d * std::sqrt(3.0) / 2.0;
        c.name = "K4e";
        c.positions = {{0, d / 2, 0}, {0, -d / 2, 0}, {h, 0, 0}, {-h, 0, 0}};
        c.edges = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}};
    } else {
        throw std::invalid_argument("unknown configuration kind: " + std::string(kind));
    }
    if (c.count() != n) throw std::invalid_argument("atom count inconsistent with configuration kind");
    validate(c);
    return c;
}

/// Label → (kind, n) for every catalog entry.
struct CatalogEntry {
    std::string label;
    std::string kind;
    int atoms;
    std::string description;
};

inline const std::vector<CatalogEntry>& configuration_catalog() {
    static const std::vector<CatalogEntry> entries = {
        {"S1", "single", 1, "single atom"},
        {"B2", "pair", 2, "two atoms at 8 um"},
        {"T3", "triangle", 3, "equilateral triangle"},
        {"C4", "square", 4, "square (4-cycle)"},
        {"P5", "pentagon", 5, "regular pentagon"},
        {"H6", "hexagon", 6, "regular hexagon"},
        {"chain-1", "chain", 1, "linear chain of 1 (same as S1)"},
        {"chain-2", "chain", 2, "linear chain of 2 (same as B2)"},
        {"chain-3", "chain", 3, "linear chain of 3"},
        {"chain-4", "chain", 4, "linear chain of 4"},
        {"chain-5", "chain", 5, "linear chain of 5"},
        {"chain-6", "chain", 6, "linear chain of 6"},
        {"S4", "star4", 4, "star: centre and three leaves"},
        {"K4", "complete4", 4, "complete graph, regular tetrahedron"},
        {"K4e", "k4-minus-edge", 4, "K4 minus one edge, planar rhombus"},
    };
    return entries;
}

inline AtomConfiguration configuration_by_name(std::string_view label) {
    for (const auto& e : configuration_catalog()) {
        if (e.label == label) {
            auto c = build_configuration(e.kind, e.atoms);
            c.name = e.label;
            return c;
        }
    }
    throw std::invalid_argument("unknown configuration: " + std::string(label));
}

inline bool is_catalog_configuration(std::string_view label) {
    return std::any_of(configuration_catalog().begin(), configuration_catalog().end(),
                       [&](const CatalogEntry& e) { return e.label == label; });
}

/// Reads a custom geometry: `x y z` rows (um), then an `edges` line, then `j k` rows.
/// `#` starts a comment. The configuration name is taken from a leading `name <label>` line if any.
inline AtomConfiguration load_configuration(std::istream& in, std::string default_name = "custom") {
    AtomConfiguration c{std::move(default_name), {}, {}};
    bool in_edges = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first == "name") {
            ls >> c.name;
            continue;
        }
        if (first == "edges") {
            in_edges = true;
            continue;
        }
        std::istringstream row(line);
        if (in_edges) {
            int j = 0, k = 0;
            if (!(row >> j >> k)) throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 'j k'");
            if (j < 0 || k < 0 || j >= c.count() || k >= c.count() || j == k) {
                throw std::invalid_argument("line " + std::to_string(line_no) + ": bad edge");
            }
            c.edges.emplace_back(std::min(j, k), std::max(j, k));
        } else {
            Vec3 p{};
            if (!(row >> p[0] >> p[1] >> p[2])) {
                throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 'x y z'");
            }
            c.positions.push_back(p);
        }
    }
    std::sort(c.edges.begin(), c.edges.end());
    c.edges.erase(std::unique(c.edges.begin(), c.edges.end()), c.edges.end());
    validate(c);
    return c;
}

inline AtomConfiguration load_configuration_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open configuration file: " + path);
    return load_configuration(in, path);
}

/// Blockade radius |C6 / Omega|^(1/6) with C6 and Omega in consistent units (hbar absorbed).
inline double blockade_radius(double c6, double omega) {
    if (!(c6 > 0.0) || !(omega > 0.0)) throw std::invalid_argument("blockade_radius: inputs must be positive");
    return std::pow(c6 / omega, 1.0 / 6.0);
}

inline Graph blockade_graph(const AtomConfiguration& config, double blockade_radius_um) {
    Graph g(config.count());
    for (int j = 0; j < config.count(); ++j) {
        for (int k = j + 1; k < config.count(); ++k) {
            if (pairwise_distance(config, j, k) <= blockade_radius_um) g.add_edge(j, k);
        }
    }
    return g;
}

/// Pairs that carry a van der Waals term in the Hamiltonian, sorted by (j, k).
inline std::vector<InteractionPair> interaction_pairs(const AtomConfiguration& config, InteractionMode mode) {
    const int n = config.count();
    std::vector<std::vector<bool>> use(n, std::vector<bool>(n, false));
    for (auto [j, k] : config.edges) use[j][k] = use[k][j] = true;

    if (mode == InteractionMode::FULL) {
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) use[j][k] = j != k;
    } else if (mode == InteractionMode::NNN) {
        // per vertex: add the second distance shell
        constexpr double shell_tol = 1e-9;
        for (int j = 0; j < n; ++j) {
            std::vector<double> shells;
            for (int k = 0; k < n; ++k) {
                if (k == j) continue;
                const double r = pairwise_distance(config, j, k);
                if (std::none_of(shells.begin(), shells.end(), [&](double s) { return std::abs(s - r) <= shell_tol; })) {
                    shells.push_back(r);
                }
            }
            if (shells.size() < 2) continue;
            std::sort(shells.begin(), shells.end());
            for (int k = 0; k < n; ++k) {
                if (k != j && std::abs(pairwise_distance(config, j, k) - shells[1]) <= shell_tol) {
                    use[j][k] = use[k][j] = true;
                }
            }
        }
    }

    std::vector<InteractionPair> pairs;
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k)
            if (use[j][k]) pairs.push_back({j, k, pairwise_distance(config, j, k)});
    return pairs;
}

}  // namespace rydberg_id
