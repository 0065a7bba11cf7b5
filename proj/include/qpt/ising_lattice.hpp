#pragma once

// Matrix-free transverse-field Ising chain with power-law couplings, open boundaries.
// Basis index bit i set <=> spin i is down (z_i = -1).

#include <cmath>
#include <cstdint>
#include <utility>

#include "qpt/collective_spin.hpp"
#include "qpt/types.hpp"

namespace qpt {

inline constexpr int kMaxIsingSpins = 14;

class SpinChainState {
public:
    SpinChainState(int n_spins, CVector amplitudes) : n_(n_spins), amps_(std::move(amplitudes)) {
        if (n_ < 1 || n_ > kMaxIsingSpins)
            throw InvalidArgument("SpinChainState: N must be in [1, " + std::to_string(kMaxIsingSpins) + "]");
        if (amps_.size() != (Eigen::Index{1} << n_))
            throw DimensionMismatch(std::size_t{1} << n_, static_cast<std::size_t>(amps_.size()));
        if (std::abs(amps_.squaredNorm() - 1.0) > kStateNormSlack)
            throw InvalidArgument("SpinChainState: amplitudes are not normalized");
    }

    int n_spins() const noexcept { return n_; }
    std::size_t dimension() const noexcept { return std::size_t{1} << n_; }
    const CVector& amplitudes() const noexcept { return amps_; }

private:
    int n_;
    CVector amps_;
};

struct IsingDiagonals {
    int n_spins = 0;
    double power = 3.0;
    int range = 0; // 0 = all pairs, otherwise |i-j| <= range
    RVector coupling; // sum_{i<j} z_i z_j / |i-j|^power
    RVector mz;       // (1/2) sum_i z_i

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(coupling.size()); }
};

inline IsingDiagonals build_ising_diagonals(int n_spins, double power = 3.0, int range = 0) {
    if (n_spins < 1 || n_spins > kMaxIsingSpins)
        throw InvalidArgument("build_ising_diagonals: N must be in [1, " + std::to_string(kMaxIsingSpins) + "]");
    if (range < 0) throw InvalidArgument("build_ising_diagonals: range must be >= 0");
    const Eigen::Index dim = Eigen::Index{1} << n_spins;

    // Pair weights only depend on the distance.
    RVector weight = RVector::Zero(n_spins);
    for (int d = 1; d < n_spins; ++d)
        if (range == 0 || d <= range) weight(d) = 1.0 / std::pow(static_cast<double>(d), power);

    IsingDiagonals out{n_spins, power, range, RVector(dim), RVector(dim)};
    for (Eigen::Index k = 0; k < dim; ++k) {
        double c = 0.0;
        int down = 0;
        for (int i = 0; i < n_spins; ++i) {
            const bool di = (k >> i) & 1;
            down += di;
            for (int j = i + 1; j < n_spins; ++j) {
                const bool dj = (k >> j) & 1;
                c += (di == dj ? 1.0 : -1.0) * weight(j - i);
            }
        }
        out.coupling(k) = c;
        out.mz(k) = 0.5 * (n_spins - 2 * down);
    }
    return out;
}

/// y = J * coupling .* x - B * sum_i flip_i(x); x and y must not alias.
inline void apply_ising(const cplx* x, cplx* y, double coupling_j, double field_b, const IsingDiagonals& diag) noexcept {
    const std::size_t dim = diag.dimension();
    const double* c = diag.coupling.data();
    const int n = diag.n_spins;
    for (std::size_t k = 0; k < dim; ++k) {
        cplx flips = 0.0;
        for (int i = 0; i < n; ++i) flips += x[k ^ (std::size_t{1} << i)];
        y[k] = coupling_j * c[k] * x[k] - field_b * flips;
    }
}

inline CVector apply_hamiltonian(const CVector& x, double coupling_j, double field_b, const IsingDiagonals& diag) {
    if (static_cast<std::size_t>(x.size()) != diag.dimension())
        throw DimensionMismatch(diag.dimension(), static_cast<std::size_t>(x.size()));
    CVector y(x.size());
    apply_ising(x.data(), y.data(), coupling_j, field_b, diag);
    return y;
}

/// Spectral-radius bound of J*H_I - B*sum sigma_x.
inline double ising_norm_bound(double coupling_j, double field_b, const IsingDiagonals& diag) noexcept {
    return std::abs(coupling_j) * diag.coupling.cwiseAbs().maxCoeff() + std::abs(field_b) * diag.n_spins;
}

/// Product of sigma_x = +1 eigenstates.
inline SpinChainState coherent_x_state(int n_spins) {
    if (n_spins < 1 || n_spins > kMaxIsingSpins) throw InvalidArgument("coherent_x_state: N out of range");
    const Eigen::Index dim = Eigen::Index{1} << n_spins;
    return {n_spins, CVector::Constant(dim, cplx(std::pow(2.0, -0.5 * n_spins), 0.0))};
}

/// (|up...up> + |down...down>)/sqrt(2)
inline SpinChainState ghz_state(int n_spins) {
    const Eigen::Index dim = Eigen::Index{1} << n_spins;
    CVector v = CVector::Zero(dim);
    v(0) = v(dim - 1) = 1.0 / std::sqrt(2.0);
    return {n_spins, std::move(v)};
}

namespace detail {

inline void phase_mz_inplace(CVector& amps, const RVector& mz, double phi) {
    for (Eigen::Index k = 0; k < amps.size(); ++k) amps(k) *= std::polar(1.0, -phi * mz(k));
}

inline std::pair<double, double> mz_moments(const CVector& amps, const RVector& mz) {
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index k = 0; k < amps.size(); ++k) {
        const double p = std::norm(amps(k));
        m1 += p * mz(k);
        m2 += p * mz(k) * mz(k);
    }
    return {m1, m2};
}

inline double flip_parity(const CVector& amps) {
    const Eigen::Index mask = amps.size() - 1;
    cplx total = 0.0;
    for (Eigen::Index k = 0; k < amps.size(); ++k) total += std::conj(amps(k)) * amps(k ^ mask);
    return total.real();
}

inline RVector mz_diagonal(int n_spins) {
    const Eigen::Index dim = Eigen::Index{1} << n_spins;
    RVector mz(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        int down = 0;
        for (int i = 0; i < n_spins; ++i) down += static_cast<int>((k >> i) & 1);
        mz(k) = 0.5 * (n_spins - 2 * down);
    }
    return mz;
}

} // namespace detail

/// exp(-i phi Mz) applied exactly.
inline SpinChainState apply_phase_mz(const SpinChainState& state, double phi) {
    CVector amps = state.amplitudes();
    detail::phase_mz_inplace(amps, detail::mz_diagonal(state.n_spins()), phi);
    return {state.n_spins(), std::move(amps)};
}

/// (<Mz>, <Mz^2>)
inline std::pair<double, double> mz_moments(const SpinChainState& state) {
    return detail::mz_moments(state.amplitudes(), detail::mz_diagonal(state.n_spins()));
}

/// <psi| prod_i sigma_x^i |psi>
inline double global_flip_parity_expectation(const SpinChainState& state) {
    return detail::flip_parity(state.amplitudes());
}

} // namespace qpt
