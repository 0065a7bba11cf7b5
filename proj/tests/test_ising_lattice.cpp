#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "qpt/ising_lattice.hpp"
#include "qpt/propagator.hpp"

using namespace qpt;

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Pauli matrix acting on `site` of an n-spin chain; site i is bit i (site 0 least significant), |0> = up.
CMatrix site_op(int n, int site, const CMatrix& pauli) {
    CMatrix out = CMatrix::Identity(1, 1);
    for (int s = n - 1; s >= 0; --s) out = kron(out, s == site ? pauli : CMatrix(CMatrix::Identity(2, 2)));
    return out;
}

CMatrix sigma_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

CMatrix sigma_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

CMatrix dense_ising(int n, double j, double b, double power = 3.0, int range = 0) {
    const int dim = 1 << n;
    CMatrix h = CMatrix::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
        for (int k = i + 1; k < n; ++k) {
            if (range && k - i > range) continue;
            h += j / std::pow(k - i, power) * site_op(n, i, sigma_z()) * site_op(n, k, sigma_z());
        }
        h -= b * site_op(n, i, sigma_x());
    }
    return h;
}

CVector random_vector(std::size_t dim, std::uint64_t salt) { return detail::probe_vector(dim, salt); }

} // namespace

TEST(IsingDiagonals, TwoAndThreeSpins) {
    const auto d2 = build_ising_diagonals(2);
    EXPECT_EQ(d2.coupling, (RVector(4) << 1, -1, -1, 1).finished());
    const auto d3 = build_ising_diagonals(3);
    EXPECT_DOUBLE_EQ(d3.coupling(0), 2.125);
    EXPECT_DOUBLE_EQ(d3.mz(0), 1.5);
    EXPECT_DOUBLE_EQ(d3.mz(7), -1.5);
}

TEST(IsingDiagonals, MatchesBruteForcePairLoop) {
    const int n = 5;
    const auto d = build_ising_diagonals(n);
    for (int k = 0; k < (1 << n); ++k) {
        double expected = 0.0, mz = 0.0;
        for (int a = 0; a < n; ++a) {
            const int za = ((k >> a) & 1) ? -1 : 1;
            mz += 0.5 * za;
            for (int b = 0; b < n; ++b)
                if (a < b) expected += za * (((k >> b) & 1) ? -1 : 1) / std::pow(std::abs(a - b), 3.0);
        }
        EXPECT_NEAR(d.coupling(k), expected, 1e-14) << k;
        EXPECT_DOUBLE_EQ(d.mz(k), mz);
    }
}

TEST(IsingDiagonals, FlipSymmetry) {
    const auto d = build_ising_diagonals(7);
    const Eigen::Index mask = d.coupling.size() - 1;
    for (Eigen::Index k = 0; k <= mask; ++k) {
        EXPECT_DOUBLE_EQ(d.coupling(k), d.coupling(k ^ mask));
        EXPECT_DOUBLE_EQ(d.mz(k), -d.mz(k ^ mask));
    }
}

TEST(IsingDiagonals, RangeTruncationAndCap) {
    const auto nn = build_ising_diagonals(4, 3.0, 1);
    EXPECT_DOUBLE_EQ(nn.coupling(0), 3.0);
    EXPECT_THROW(build_ising_diagonals(kMaxIsingSpins + 1), InvalidArgument);
    EXPECT_THROW(build_ising_diagonals(0), InvalidArgument);
}

TEST(IsingApply, ZeroAndFieldOnly) {
    const int n = 4;
    const auto d = build_ising_diagonals(n);
    const CVector x = random_vector(d.dimension(), 2);
    EXPECT_LT(apply_hamiltonian(x, 0.0, 0.0, d).norm(), 1e-15);
    const CVector u = coherent_x_state(n).amplitudes();
    EXPECT_LT((apply_hamiltonian(u, 0.0, 1.0, d) + n * u).norm(), 1e-13);
    EXPECT_THROW(apply_hamiltonian(CVector::Ones(3), 1.0, 1.0, d), DimensionMismatch);
}

TEST(IsingApply, MatchesKroneckerOracle) {
    for (int n = 1; n <= 6; ++n) {
        for (int range : {0, 1}) {
            const auto d = build_ising_diagonals(n, 3.0, range);
            const CMatrix h = dense_ising(n, -1.0, 1.0, 3.0, range);
            for (std::uint64_t s = 1; s <= 3; ++s) {
                const CVector x = random_vector(d.dimension(), s + 10 * n);
                EXPECT_LT((apply_hamiltonian(x, -1.0, 1.0, d) - h * x).cwiseAbs().maxCoeff(), 1e-10) << n;
            }
        }
    }
}

TEST(IsingApply, HermitianOnRandomPairs) {
    for (int n = 2; n <= 10; n += 2) {
        const auto d = build_ising_diagonals(n);
        for (std::uint64_t s = 0; s < 100; ++s) {
            const CVector u = random_vector(d.dimension(), 2 * s + 1), v = random_vector(d.dimension(), 2 * s + 2);
            const cplx lhs = u.dot(apply_hamiltonian(v, -0.7, 1.3, d));
            const cplx rhs = std::conj(v.dot(apply_hamiltonian(u, -0.7, 1.3, d)));
            EXPECT_LT(std::abs(lhs - rhs), 1e-12);
        }
    }
}

TEST(IsingStates, CoherentAndGhz) {
    const auto one = coherent_x_state(1);
    EXPECT_NEAR(one.amplitudes()(0).real(), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(one.amplitudes()(1).real(), 1 / std::sqrt(2.0), 1e-15);
    const auto three = coherent_x_state(3);
    for (Eigen::Index k = 0; k < 8; ++k) EXPECT_NEAR(three.amplitudes()(k).real(), 1 / std::sqrt(8.0), 1e-15);
    EXPECT_LT((apply_hamiltonian(three.amplitudes(), 0.0, 1.0, build_ising_diagonals(3)) + 3.0 * three.amplitudes()).norm(),
              1e-14);
    EXPECT_NEAR(global_flip_parity_expectation(three), 1.0, 1e-14);
    EXPECT_NEAR(global_flip_parity_expectation(ghz_state(5)), 1.0, 1e-14);
}

TEST(IsingMoments, Examples) {
    CVector up = CVector::Zero(16);
    up(0) = 1.0;
    const auto [a1, a2] = mz_moments(SpinChainState(4, up));
    EXPECT_DOUBLE_EQ(a1, 2.0);
    EXPECT_DOUBLE_EQ(a2, 4.0);
    const auto [b1, b2] = mz_moments(coherent_x_state(2));
    EXPECT_NEAR(b1, 0.0, 1e-15);
    EXPECT_NEAR(b2, 0.5, 1e-15);
    const auto [c1, c2] = mz_moments(ghz_state(5));
    EXPECT_NEAR(c1, 0.0, 1e-15);
    EXPECT_NEAR(c2, 25.0 / 4.0, 1e-14);
}

TEST(IsingPhase, IdentityAndRoundTrip) {
    const SpinChainState s(3, random_vector(8, 9));
    EXPECT_LT((apply_phase_mz(s, 0.0).amplitudes() - s.amplitudes()).norm(), 1e-15);
    const SpinChainState single(1, random_vector(2, 4));
    EXPECT_LT((apply_phase_mz(single, 4 * kPi).amplitudes() - single.amplitudes()).norm(), 1e-13);
    EXPECT_LT((apply_phase_mz(apply_phase_mz(s, 0.77), -0.77).amplitudes() - s.amplitudes()).norm(), 1e-14);
}

TEST(IsingGroundState, FieldOnlyIsCoherent) {
    for (int n = 2; n <= 6; ++n) {
        const IsingSweepGenerator gen(std::make_shared<const IsingDiagonals>(build_ising_diagonals(n)),
                                      {PiecewiseLinearSchedule::constant(1.0, 1.0), PiecewiseLinearSchedule::constant(0.0, 1.0)});
        EXPECT_GT(fidelity(ground_state(gen, 0.0).state, coherent_x_state(n).amplitudes()), 1 - 1e-10);
    }
}

TEST(IsingGroundState, MatrixFreeMatchesDense) {
    for (int n = 3; n <= 6; ++n) {
        const IsingSweepGenerator gen(std::make_shared<const IsingDiagonals>(build_ising_diagonals(n)),
                                      {PiecewiseLinearSchedule::constant(0.8, 1.0), PiecewiseLinearSchedule::constant(-1.0, 1.0)});
        Eigen::SelfAdjointEigenSolver<CMatrix> es(dense_ising(n, -1.0, 0.8));
        const auto lanczos = ground_state(gen, 0.0, EigenMethod::lanczos);
        EXPECT_GT(fidelity(lanczos.state, es.eigenvectors().col(0)), 1 - 1e-10) << n;
        EXPECT_NEAR(lanczos.energy, es.eigenvalues()(0), 1e-10);
    }
}

TEST(IsingEvolution, FlipParityConservedAlongSplitting) {
    const int n = 6;
    const auto diag = std::make_shared<const IsingDiagonals>(build_ising_diagonals(n));
    const IsingSweepGenerator gen(diag, ising_splitting(1.0, -1.0, 10.0));
    const CVector psi0 = coherent_x_state(n).amplitudes();
    const auto out = evolve(psi0, gen, 0.0, 10.0, EvolutionSettings{});
    EXPECT_LT(std::abs(detail::flip_parity(out.state) - 1.0), 1e-6);
    EXPECT_LT(out.norm_drift, 1e-8);
}

TEST(IsingEvolution, FrozenEnergyConserved) {
    const int n = 5;
    const auto diag = std::make_shared<const IsingDiagonals>(build_ising_diagonals(n));
    const IsingSweepGenerator gen(diag, {PiecewiseLinearSchedule::constant(0.6, 5.0), PiecewiseLinearSchedule::constant(-1.0, 5.0)});
    const CVector psi0 = random_vector(diag->dimension(), 77);
    auto energy = [&](const CVector& v) { return v.dot(apply_hamiltonian(v, -1.0, 0.6, *diag)).real(); };
    const auto out = evolve(psi0, gen, 0.0, 5.0, EvolutionSettings{});
    EXPECT_LT(std::abs(energy(out.state) - energy(psi0)), 1e-7 * ising_norm_bound(-1.0, 0.6, *diag));
}
