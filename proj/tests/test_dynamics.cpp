#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "rydberg_id/basis.hpp"
#include "rydberg_id/dynamics.hpp"

using namespace rydberg_id;

namespace {

const NoiseRealization kClosed{1.0, 0.0, 0.0};

DensityMatrix random_density(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = Complex(g(rng), g(rng));
    DensityMatrix rho = a * a.adjoint();
    return rho / rho.trace();
}

std::vector<DensityMatrix> dense_trajectory(const AtomConfiguration& c, const HamiltonianParams& hp,
                                            const NoiseRealization& noise, const TimeGrid& grid) {
    return evolve(build_hamiltonian(c, perturbed(hp, noise)), collapse_operators(c.count(), noise),
                  ground_state_density(c.count()), grid);
}

}  // namespace

TEST(Hamiltonian, SingleAtomSpectrum) {
    const HamiltonianParams hp;
    const Matrix h = build_hamiltonian(configuration_by_name("S1"), hp);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    EXPECT_NEAR(eig.eigenvalues()(0), -hp.omega / 2.0, 1e-12);
    EXPECT_NEAR(eig.eigenvalues()(1), hp.omega / 2.0, 1e-12);
}

TEST(Hamiltonian, PairInteraction) {
    HamiltonianParams hp;
    hp.mode = InteractionMode::FULL;
    const Matrix h = build_hamiltonian(configuration_by_name("B2"), hp);
    EXPECT_NEAR(h(3, 3).real(), hp.c6 / std::pow(8.0, 6), 1e-9);
    EXPECT_NEAR(h(3, 3).real() / kTwoPi, 3.292, 1e-3);
    EXPECT_EQ(h(1, 1), Complex(0.0));
}

TEST(Hamiltonian, ChainThreeNextNearest) {
    const HamiltonianParams hp;
    const auto e = interaction_energies(configuration_by_name("chain-3"), hp);
    const double u8 = hp.c6 / std::pow(8.0, 6);
    EXPECT_NEAR(e[0b101], u8 / 64.0, 1e-12);
    EXPECT_NEAR(e[0b011], u8, 1e-9);
    EXPECT_NEAR(e[0b111], 2.0 * u8 + u8 / 64.0, 1e-9);
    HamiltonianParams nn = hp;
    nn.mode = InteractionMode::NN;
    EXPECT_EQ(interaction_energies(configuration_by_name("chain-3"), nn)[0b101], 0.0);
}

TEST(Hamiltonian, HermitianForCatalog) {
    for (const auto& e : configuration_catalog()) {
        for (auto mode : {InteractionMode::NN, InteractionMode::NNN, InteractionMode::FULL}) {
            HamiltonianParams hp;
            hp.mode = mode;
            const Matrix h = build_hamiltonian(configuration_by_name(e.label), hp);
            EXPECT_LT((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-15) << e.label;
        }
    }
    HamiltonianParams bad;
    bad.omega = 0.0;
    EXPECT_THROW(build_hamiltonian(configuration_by_name("S1"), bad), std::invalid_argument);
}

TEST(NoiseSampler, NoiselessLimit) {
    NoiseParams p;
    p.intensity_mean = 0.0;
    p.intensity_std = 0.0;
    auto rng = make_stream(1);
    const auto n = sample_noise(p, rng);
    EXPECT_EQ(n.rabi_multiplier, 1.0);
    EXPECT_EQ(n.dephasing_rate, p.base_dephasing);
    EXPECT_EQ(n.decay_rate, p.base_decay);
}

TEST(NoiseSampler, MeanFluctuationLevel) {
    const NoiseParams p;
    auto rng = make_stream(20240601);
    const int draws = 100000;
    double sum_f = 0.0, max_f = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto n = sample_noise(p, rng);
        ASSERT_GT(n.rabi_multiplier, 0.0);
        ASSERT_GE(n.dephasing_rate, 0.0);
        const double f = (n.dephasing_rate / p.base_dephasing - 1.0) * p.intensity_mean;
        ASSERT_GE(f, 0.0);
        sum_f += f;
        max_f = std::max(max_f, f);
    }
    // truncated-normal mean: mu + sigma * phi(a) / (1 - Phi(a)), a = -mu / sigma
    const double a = -p.intensity_mean / p.intensity_std;
    const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
    const double oracle = p.intensity_mean + p.intensity_std * phi / tail;
    EXPECT_NEAR(sum_f / draws, 0.03, 1e-3);
    EXPECT_NEAR(sum_f / draws, oracle, 2e-4);
    EXPECT_LT(max_f, 0.08);
}

TEST(NoiseSampler, RejectsNegativeParameters) {
    NoiseParams p;
    p.intensity_std = -0.01;
    auto rng = make_stream(1);
    EXPECT_THROW(sample_noise(p, rng), std::invalid_argument);
}

TEST(CollapseOperators, CountsAndShapes) {
    EXPECT_EQ(collapse_operators(1, {1.0, 0.3, 0.1}).size(), 2u);
    const auto three = collapse_operators(3, {1.0, 0.3, 0.1});
    ASSERT_EQ(three.size(), 6u);
    for (const auto& l : three) EXPECT_EQ(l.rows(), 8);
    EXPECT_TRUE(collapse_operators(4, kClosed).empty());
    EXPECT_THROW(collapse_operators(7, kClosed), std::invalid_argument);
}

TEST(LindbladRhs, PureDephasingDecaysCoherenceAtHalfRate) {
    const double gamma = 0.7;
    const Matrix h = Matrix::Zero(2, 2);
    const auto ops = collapse_operators(1, {1.0, gamma, 0.0});
    DensityMatrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    const Matrix d = lindblad_rhs(h, ops, plus);
    EXPECT_NEAR(d(0, 1).real(), -gamma / 2.0 * 0.5, 1e-15);
    EXPECT_NEAR(d(1, 0).real(), -gamma / 2.0 * 0.5, 1e-15);
    EXPECT_NEAR(std::abs(d(0, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(d(1, 1)), 0.0, 1e-15);
}

TEST(LindbladRhs, TraceFreeAndHermitianFlow) {
    const auto c = configuration_by_name("T3");
    const Matrix h = build_hamiltonian(c, {});
    const auto ops = collapse_operators(3, {1.0, 0.4, 0.2});
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto rho = random_density(8, s);
        const Matrix d = lindblad_rhs(h, ops, rho);
        EXPECT_LT(std::abs(d.trace()), 1e-13);
        EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(LindbladRhs, StationaryEigenstate) {
    const Matrix h = build_hamiltonian(configuration_by_name("B2"), {});
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    const Eigen::VectorXcd v = eig.eigenvectors().col(0);
    const DensityMatrix rho = v * v.adjoint();
    EXPECT_LT(lindblad_rhs(h, {}, rho).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(lindblad_rhs(h, {}, DensityMatrix::Identity(2, 2)), std::invalid_argument);
}

TEST(Evolution, SingleAtomRabiOscillation) {
    const HamiltonianParams hp;
    const auto c = configuration_by_name("S1");
    const TimeGrid grid;
    ASSERT_EQ(grid.observations(), 21);
    const auto dense = dense_trajectory(c, hp, kClosed, grid);
    const RydbergPropagator prop(c, hp);
    const auto fast = prop.observe(kClosed, grid, {prop.projector(build_basis_catalog(c, hp.blockade_radius()).states[1])})[0];
    for (int k = 0; k < 21; ++k) {
        const double oracle = std::pow(std::sin(hp.omega * grid.time_at(k) / 2.0), 2);
        EXPECT_NEAR(dense[static_cast<std::size_t>(k)](1, 1).real(), oracle, 1e-4);
        EXPECT_NEAR(fast[static_cast<std::size_t>(k)], oracle, 1e-4);
    }
}

TEST(Evolution, PairCollectiveOscillationIsRootTwoFaster) {
    // first maximum of P(W1) against the single-atom pi time
    HamiltonianParams hp;
    const auto c = configuration_by_name("B2");
    TimeGrid fine;
    fine.total = 0.6;
    fine.observe_every = 0.001;
    const RydbergPropagator prop(c, hp);
    const auto w1 = build_basis_catalog(c, hp.blockade_radius()).states[1];
    const auto p = prop.observe(kClosed, fine, {prop.projector(w1)})[0];
    const auto peak = std::max_element(p.begin(), p.end()) - p.begin();
    const double t_pair = fine.time_at(static_cast<int>(peak));
    const double t_single = std::numbers::pi / hp.omega;
    EXPECT_GE(t_single / t_pair, 1.38);
    EXPECT_LE(t_single / t_pair, 1.44);
}

TEST(Evolution, BlockadeSuppressesDoubleExcitation) {
    const auto c = configuration_by_name("B2");
    TimeGrid fine;
    fine.observe_every = 0.01;
    const auto traj = RydbergPropagator(c, {}).trajectory(kClosed, fine);
    for (const auto& rho : traj) EXPECT_LT(rho(3, 3).real(), 0.05);
}

TEST(Evolution, FastPropagatorMatchesDenseLindblad) {
    auto rng = make_stream(99);
    const NoiseParams np{0.07, 0.02, kTwoPi * 0.05, kTwoPi * 0.01};
    for (const auto& e : configuration_catalog()) {
        const auto c = configuration_by_name(e.label);
        TimeGrid grid;
        if (c.count() >= 5) {
            grid.total = 0.04;  // keep the 32/64-dim dense reference affordable
            grid.observe_every = 0.02;
        }
        for (auto mode : {InteractionMode::NNN, InteractionMode::NN}) {
            HamiltonianParams hp;
            hp.mode = mode;
            const auto noise = sample_noise(np, rng);
            const auto dense = dense_trajectory(c, hp, noise, grid);
            const auto fast = RydbergPropagator(c, hp).trajectory(noise, grid);
            ASSERT_EQ(dense.size(), fast.size());
            for (std::size_t k = 0; k < dense.size(); ++k) {
                EXPECT_LT((dense[k] - fast[k]).cwiseAbs().maxCoeff(), 1e-12) << e.label << " t=" << grid.time_at(static_cast<int>(k));
            }
        }
    }
}

TEST(Evolution, SymmetryReductionShrinksState) {
    const RydbergPropagator h6(configuration_by_name("H6"), {});
    EXPECT_EQ(h6.symmetry_order(), 12u);
    EXPECT_LT(h6.reduced_size(), 64u * 64u / 12u);
    const RydbergPropagator chain(configuration_by_name("chain-6"), {});
    EXPECT_EQ(chain.symmetry_order(), 2u);
}

TEST(Evolution, PhysicalInvariantsUnderNoise) {
    const NoiseParams np{0.10, 0.05, kTwoPi * 0.05, kTwoPi * 0.01};
    auto rng = make_stream(5);
    for (const char* name : {"chain-4", "C4", "P5", "chain-6"}) {
        const auto c = configuration_by_name(name);
        const auto traj = RydbergPropagator(c, {}).trajectory(sample_noise(np, rng), TimeGrid{});
        for (const auto& rho : traj) {
            EXPECT_LT(std::abs(rho.trace() - Complex(1.0)), 1e-6) << name;
            EXPECT_LT((rho - rho.adjoint()).cwiseAbs().maxCoeff(), 1e-9) << name;
            const Eigen::SelfAdjointEigenSolver<DensityMatrix> eig(rho, Eigen::EigenvaluesOnly);
            EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-7) << name;
        }
    }
}

TEST(Evolution, StepHalvingConverged) {
    const auto c = configuration_by_name("chain-4");
    const auto cat = build_basis_catalog(c, HamiltonianParams{}.blockade_radius());
    const RydbergPropagator prop(c, {});
    std::vector<RydbergPropagator::Observable> obs;
    for (const auto& w : cat.states) obs.push_back(prop.projector(w));
    const NoiseRealization noise{1.05, kTwoPi * 0.1, kTwoPi * 0.01};
    TimeGrid half;
    half.step = 5e-4;
    const auto a = prop.observe(noise, TimeGrid{}, obs);
    const auto b = prop.observe(noise, half, obs);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < a[i].size(); ++k) EXPECT_LT(std::abs(a[i][k] - b[i][k]), 1e-6);
}

TEST(Evolution, NoiselessRunsAreBitIdentical) {
    const RydbergPropagator prop(configuration_by_name("P5"), {});
    const auto a = prop.trajectory(kClosed, TimeGrid{});
    const auto b = prop.trajectory(kClosed, TimeGrid{});
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(a[k] == b[k]);
}

TEST(Evolution, TraceDriftAborts) {
    // omega * dt = 1e3 is far outside the RK4 stability region; the state overflows
    Matrix h = Matrix::Zero(2, 2);
    h(0, 1) = h(1, 0) = 1e6;
    DensityMatrix rho = DensityMatrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    EXPECT_THROW(evolve(h, {}, rho, TimeGrid{}), std::runtime_error);
}

TEST(TimeGridChecks, Validation) {
    TimeGrid g;
    EXPECT_EQ(g.observations(), 21);
    g.observe_every = 0.15;
    EXPECT_THROW(g.check(), std::invalid_argument);
    g.observe_every = 1.0;
    EXPECT_EQ(g.observations(), 2);
    g.total = -1.0;
    EXPECT_THROW(g.check(), std::invalid_argument);
    TimeGrid vis;
    vis.observe_every = 0.005;
    EXPECT_EQ(vis.observations(), 201);
}

TEST(InteractionSymmetries, OrdersByMode) {
    HamiltonianParams hp;
    EXPECT_EQ(interaction_symmetries(configuration_by_name("C4"), hp).size(), 8u);
    EXPECT_EQ(interaction_symmetries(configuration_by_name("H6"), hp).size(), 12u);
    EXPECT_EQ(interaction_symmetries(configuration_by_name("chain-5"), hp).size(), 2u);
    hp.mode = InteractionMode::FULL;
    EXPECT_EQ(interaction_symmetries(configuration_by_name("K4e"), hp).size(), 4u);
}
