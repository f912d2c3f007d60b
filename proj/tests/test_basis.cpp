#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rydberg_id/basis.hpp"
#include "rydberg_id/dynamics.hpp"

using namespace rydberg_id;

namespace {

using KetList = std::vector<std::vector<std::string>>;

BasisCatalog catalog_of(const std::string& name) {
    return build_basis_catalog(configuration_by_name(name), HamiltonianParams{}.blockade_radius());
}

std::vector<std::string> kets(const SymmetrizedState& w, int atoms) {
    std::vector<std::string> out;
    for (auto p : w.orbit) out.push_back(ket_string(p, atoms));
    std::sort(out.begin(), out.end());
    return out;
}

void expect_catalog(const std::string& name, KetList expected) {
    const auto cat = catalog_of(name);
    ASSERT_EQ(cat.size(), static_cast<int>(expected.size())) << name;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        std::sort(expected[i].begin(), expected[i].end());
        EXPECT_EQ(kets(cat.states[i], cat.atoms), expected[i]) << name << " ID " << i;
        EXPECT_EQ(cat.states[i].id, static_cast<int>(i));
    }
}

// Brute-force orbit count: canonical form = smallest image under the full
// symmetric group restricted to permutations preserving adjacency.
int brute_orbit_count(const AtomConfiguration& c, double rb) {
    const int n = c.count();
    const Graph g = blockade_graph(c, rb);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> autos;
    do {
        bool ok = true;
        for (int a = 0; a < n && ok; ++a)
            for (int b = 0; b < n && ok; ++b)
                if (a != b && g.adjacent(a, b) != g.adjacent(perm[a], perm[b])) ok = false;
        if (ok) autos.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::set<unsigned> canon;
    for (unsigned m = 0; m < (1u << n); ++m) {
        bool independent = true;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if ((m >> a & 1u) && (m >> b & 1u) && g.adjacent(a, b)) independent = false;
        if (!independent) continue;
        unsigned best = m;
        for (const auto& p : autos) {
            unsigned img = 0;
            for (int j = 0; j < n; ++j)
                if (m >> j & 1u) img |= 1u << p[static_cast<std::size_t>(j)];
            best = std::min(best, img);
        }
        canon.insert(best);
    }
    return static_cast<int>(canon.size());
}

}  // namespace

TEST(PaperBasisLists, Triangle) { expect_catalog("T3", {{"000"}, {"100", "010", "001"}}); }

TEST(PaperBasisLists, ChainThree) { expect_catalog("chain-3", {{"000"}, {"100", "001"}, {"010"}, {"101"}}); }

TEST(PaperBasisLists, Square) {
    expect_catalog("C4", {{"0000"}, {"1000", "0100", "0010", "0001"}, {"1010", "0101"}});
}

TEST(PaperBasisLists, Pentagon) {
    expect_catalog("P5", {{"00000"},
                          {"10000", "01000", "00100", "00010", "00001"},
                          {"10100", "01010", "00101", "10010", "01001"}});
}

TEST(PaperBasisLists, ChainFive) {
    expect_catalog("chain-5", {{"00000"},
                               {"10000", "00001"},
                               {"01000", "00010"},
                               {"00100"},
                               {"10100", "00101"},
                               {"01010"},
                               {"10010", "01001"},
                               {"10001"},
                               {"10101"}});
}

TEST(PaperBasisLists, Hexagon) {
    expect_catalog("H6", {{"000000"},
                          {"100000", "010000", "001000", "000100", "000010", "000001"},
                          {"101000", "010100", "001010", "000101", "100010", "010001"},
                          {"100100", "010010", "001001"},
                          {"101010", "010101"}});
}

TEST(PaperBasisLists, ChainSix) {
    expect_catalog("chain-6", {{"000000"},
                               {"100000", "000001"},
                               {"010000", "000010"},
                               {"001000", "000100"},
                               {"101000", "000101"},
                               {"010100", "001010"},
                               {"100100", "001001"},
                               {"010010"},
                               {"100010", "010001"},
                               {"100001"},
                               {"101010", "010101"},
                               {"101001", "100101"}});
}

TEST(PaperBasisLists, ChainFourLeadingIds) {
    // The published list stops at four states; the orbit {1001} is a fifth
    // independent-set class of the same graph and is kept as the last ID.
    const auto cat = catalog_of("chain-4");
    ASSERT_EQ(cat.size(), 5);
    const KetList paper{{"0000"}, {"0001", "1000"}, {"0010", "0100"}, {"0101", "1010"}};
    for (std::size_t i = 0; i < paper.size(); ++i) EXPECT_EQ(kets(cat.states[i], 4), paper[i]) << "ID " << i;
    EXPECT_EQ(kets(cat.states[4], 4), (std::vector<std::string>{"1001"}));
}

TEST(PaperBasisLists, Labels) {
    const auto c5 = catalog_of("chain-5");
    const std::vector<std::string> labels{"W0", "W1a", "W1b", "W1c", "W2a", "W2b", "W2c", "W2d", "W3"};
    for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(c5.states[i].label, labels[i]);
    EXPECT_EQ(catalog_of("H6").states[3].label, "W2b");
    EXPECT_EQ(catalog_of("T3").states[1].label, "W1");
}

TEST(PaperBasisLists, SingleAndPair) {
    expect_catalog("S1", {{"0"}, {"1"}});
    expect_catalog("B2", {{"00"}, {"10", "01"}});
}

TEST(IndependentSets, Counts) {
    // path P_n: Fibonacci F(n+2); cycle C_n: Lucas L(n)
    EXPECT_EQ(enumerate_independent_sets(Graph(4, {{0, 1}, {1, 2}, {2, 3}})).size(), 8u);
    EXPECT_EQ(enumerate_independent_sets(Graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}})).size(), 21u);
    EXPECT_EQ(enumerate_independent_sets(Graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}})).size(), 18u);
    EXPECT_EQ(enumerate_independent_sets(Graph(3)).size(), 8u);
}

TEST(Automorphisms, GroupOrders) {
    const double rb = HamiltonianParams{}.blockade_radius();
    const std::map<std::string, std::size_t> order{{"S1", 1},  {"B2", 2},      {"T3", 6},      {"C4", 8},
                                                   {"P5", 10}, {"H6", 12},     {"chain-3", 2}, {"chain-6", 2},
                                                   {"S4", 6},  {"K4", 24},     {"K4e", 4}};
    for (const auto& [name, expected] : order) {
        EXPECT_EQ(automorphisms(blockade_graph(configuration_by_name(name), rb)).size(), expected) << name;
    }
}

TEST(Automorphisms, FormAGroup) {
    const double rb = HamiltonianParams{}.blockade_radius();
    for (const auto& e : configuration_catalog()) {
        const auto g = blockade_graph(configuration_by_name(e.label), rb);
        const auto group = automorphisms(g);
        std::set<Permutation> members(group.begin(), group.end());
        Permutation identity(static_cast<std::size_t>(g.vertices()));
        std::iota(identity.begin(), identity.end(), 0);
        EXPECT_TRUE(members.contains(identity)) << e.label;
        for (const auto& a : group) {
            Permutation inverse(a.size());
            for (std::size_t j = 0; j < a.size(); ++j) inverse[static_cast<std::size_t>(a[j])] = static_cast<int>(j);
            EXPECT_TRUE(members.contains(inverse));
            for (const auto& b : group) {
                Permutation ab(a.size());
                for (std::size_t j = 0; j < a.size(); ++j) ab[j] = a[static_cast<std::size_t>(b[j])];
                EXPECT_TRUE(members.contains(ab));
            }
        }
    }
}

TEST(Catalog, OrbitsPartitionIndependentSets) {
    const double rb = HamiltonianParams{}.blockade_radius();
    for (const auto& e : configuration_catalog()) {
        const auto c = configuration_by_name(e.label);
        const auto cat = build_basis_catalog(c, rb);
        const auto sets = enumerate_independent_sets(blockade_graph(c, rb));
        std::multiset<ExcitationPattern> covered;
        for (const auto& w : cat.states) {
            for (auto p : w.orbit) {
                covered.insert(p);
                EXPECT_EQ(excitation_count(p), w.excitations);
            }
        }
        EXPECT_EQ(std::vector<ExcitationPattern>(covered.begin(), covered.end()), sets) << e.label;
        EXPECT_EQ(cat.size(), brute_orbit_count(c, rb)) << e.label;
        EXPECT_EQ(cat.states.front().orbit, std::vector<ExcitationPattern>{0u});
        for (std::size_t i = 1; i < cat.states.size(); ++i) {
            EXPECT_LE(cat.states[i - 1].excitations, cat.states[i].excitations);
        }
    }
}

TEST(Catalog, StatesAreOrthonormal) {
    for (const auto& e : configuration_catalog()) {
        const auto cat = catalog_of(e.label);
        for (const auto& a : cat.states) {
            const auto va = state_vector(a, cat.atoms);
            for (const auto& b : cat.states) {
                const Complex overlap = va.dot(state_vector(b, cat.atoms));
                EXPECT_NEAR(std::abs(overlap), a.id == b.id ? 1.0 : 0.0, 1e-12);
            }
        }
    }
}

TEST(Probability, MatchesExpectationValueAndSumsBelowOne) {
    const auto cat = catalog_of("chain-4");
    const int dim = 16;
    // random density matrix A A† / tr
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = Complex(g(rng), g(rng));
    DensityMatrix rho = a * a.adjoint();
    rho /= rho.trace();
    double total = 0.0;
    for (const auto& w : cat.states) {
        const auto v = state_vector(w, 4);
        const double oracle = (v.adjoint() * rho * v)(0, 0).real();
        EXPECT_NEAR(probability(rho, w), oracle, 1e-12);
        EXPECT_GE(probability(rho, w), 0.0);
        total += probability(rho, w);
    }
    EXPECT_LE(total, 1.0 + 1e-12);
    EXPECT_THROW(probability(DensityMatrix::Identity(4, 4), cat.states.back()), std::invalid_argument);
}

TEST(Kets, RoundTripAndBitOrder) {
    EXPECT_EQ(parse_ket("100"), 1u);
    EXPECT_EQ(parse_ket("001"), 4u);
    for (unsigned p = 0; p < 64; ++p) EXPECT_EQ(parse_ket(ket_string(p, 6)), p);
    EXPECT_THROW(parse_ket("10x"), std::invalid_argument);
    EXPECT_EQ(format_state(catalog_of("B2").states[1], 2), "1: W1 = (|10> + |01>)/sqrt(2)");
}
