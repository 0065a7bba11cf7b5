#pragma once

// Symmetric two-mode (Bose-Josephson) sector in the Dicke basis |J,m>, J = N/2.
// Amplitudes are stored with m ascending: index k <-> m = k - J.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "qpt/types.hpp"

namespace qpt {

/// Normalization slack accepted when wrapping amplitudes in a state object.
inline constexpr double kStateNormSlack = 1e-8;

class DickeState {
public:
    DickeState(int n_particles, CVector amplitudes)
        : n_(n_particles), amps_(std::move(amplitudes)) {
        if (n_ < 1) throw InvalidArgument("DickeState: N must be >= 1");
        if (amps_.size() != n_ + 1) throw DimensionMismatch(static_cast<std::size_t>(n_ + 1),
                                                            static_cast<std::size_t>(amps_.size()));
        if (std::abs(amps_.squaredNorm() - 1.0) > kStateNormSlack)
            throw InvalidArgument("DickeState: amplitudes are not normalized");
    }

    /// |J, m> with m = -J..J.
    static DickeState basis(int n_particles, double m) {
        const double j = 0.5 * n_particles;
        const double k = m + j;
        if (k < -1e-9 || k > n_particles + 1e-9 || std::abs(k - std::round(k)) > 1e-9)
            throw InvalidArgument("DickeState::basis: m out of range");
        CVector v = CVector::Zero(n_particles + 1);
        v(static_cast<Eigen::Index>(std::lround(k))) = 1.0;
        return {n_particles, std::move(v)};
    }

    int n_particles() const noexcept { return n_; }
    double j() const noexcept { return 0.5 * n_; }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(n_ + 1); }
    double m_of(Eigen::Index k) const noexcept { return static_cast<double>(k) - j(); }
    const CVector& amplitudes() const noexcept { return amps_; }

private:
    int n_;
    CVector amps_;
};

/// Hermitian tridiagonal matrix on the Dicke basis. upper(k) = H(k, k+1); H(k+1, k) = conj(upper(k)).
class CollectiveOperator {
public:
    CollectiveOperator(RVector diagonal, CVector upper)
        : diag_(std::move(diagonal)), upper_(std::move(upper)) {
        if (diag_.size() < 1 || upper_.size() != diag_.size() - 1)
            throw InvalidArgument("CollectiveOperator: band sizes inconsistent");
    }

    static CollectiveOperator zero(std::size_t dim) {
        return {RVector::Zero(static_cast<Eigen::Index>(dim)),
                CVector::Zero(static_cast<Eigen::Index>(dim) - 1)};
    }

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(diag_.size()); }
    const RVector& diagonal() const noexcept { return diag_; }
    const CVector& upper() const noexcept { return upper_; }

    // y = H x; x and y must not alias.
    void apply(const cplx* x, cplx* y) const noexcept {
        const Eigen::Index n = diag_.size();
        const double* d = diag_.data();
        const cplx* u = upper_.data();
        if (n == 1) {
            y[0] = d[0] * x[0];
            return;
        }
        y[0] = d[0] * x[0] + u[0] * x[1];
        for (Eigen::Index k = 1; k + 1 < n; ++k)
            y[k] = std::conj(u[k - 1]) * x[k - 1] + d[k] * x[k] + u[k] * x[k + 1];
        y[n - 1] = std::conj(u[n - 2]) * x[n - 2] + d[n - 1] * x[n - 1];
    }

    CVector operator*(const CVector& x) const {
        if (static_cast<std::size_t>(x.size()) != dimension())
            throw DimensionMismatch(dimension(), static_cast<std::size_t>(x.size()));
        CVector y(x.size());
        apply(x.data(), y.data());
        return y;
    }

    CMatrix to_dense() const {
        const Eigen::Index n = diag_.size();
        CMatrix m = CMatrix::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) m(k, k) = diag_(k);
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            m(k, k + 1) = upper_(k);
            m(k + 1, k) = std::conj(upper_(k));
        }
        return m;
    }

    /// Gershgorin bound on the spectral radius.
    double norm_bound() const noexcept {
        const Eigen::Index n = diag_.size();
        double best = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            double row = std::abs(diag_(k));
            if (k > 0) row += std::abs(upper_(k - 1));
            if (k + 1 < n) row += std::abs(upper_(k));
            best = std::max(best, row);
        }
        return best;
    }

    friend CollectiveOperator operator+(const CollectiveOperator& a, const CollectiveOperator& b) {
        if (a.dimension() != b.dimension()) throw DimensionMismatch(a.dimension(), b.dimension());
        return {a.diag_ + b.diag_, a.upper_ + b.upper_};
    }
    friend CollectiveOperator operator*(double s, const CollectiveOperator& a) {
        return {s * a.diag_, s * a.upper_};
    }

private:
    RVector diag_;
    CVector upper_;
};

inline CollectiveOperator build_angular_momentum(int n_particles, Axis axis) {
    if (n_particles < 1) throw InvalidArgument("build_angular_momentum: N must be >= 1");
    const Eigen::Index dim = n_particles + 1;
    const double j = 0.5 * n_particles;
    RVector diag = RVector::Zero(dim);
    CVector upper = CVector::Zero(dim - 1);
    if (axis == Axis::z) {
        for (Eigen::Index k = 0; k < dim; ++k) diag(k) = static_cast<double>(k) - j;
        return {diag, upper};
    }
    for (Eigen::Index k = 0; k + 1 < dim; ++k) {
        const double m = static_cast<double>(k) - j;
        const double ladder = 0.5 * std::sqrt(j * (j + 1.0) - m * (m + 1.0));
        // <m+1|J+|m> = 2*ladder; Jx = (J+ + J-)/2, Jy = (J+ - J-)/(2i)
        upper(k) = axis == Axis::x ? cplx(ladder, 0.0) : cplx(0.0, ladder);
    }
    return {diag, upper};
}

/// H_BJ = -Omega Jx + (chi/N) Jz^2
inline CollectiveOperator build_bj_hamiltonian(int n_particles, double omega, double chi) {
    const CollectiveOperator jx = build_angular_momentum(n_particles, Axis::x);
    RVector jz2(n_particles + 1);
    const double j = 0.5 * n_particles;
    for (Eigen::Index k = 0; k < jz2.size(); ++k) {
        const double m = static_cast<double>(k) - j;
        jz2(k) = chi / n_particles * m * m;
    }
    return {jz2 - omega * jx.diagonal(), -omega * jx.upper()};
}

namespace detail {

// Eigendecomposition of J_axis for a given N, shared across calls.
struct SpinEigenbasis {
    RVector values;  // ascending m_axis
    CMatrix vectors; // columns
};

inline std::shared_ptr<const SpinEigenbasis> spin_eigenbasis(int n_particles, Axis axis) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const SpinEigenbasis>> cache;
    const auto key = std::make_pair(n_particles, static_cast<int>(axis));
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(build_angular_momentum(n_particles, axis).to_dense());
    if (solver.info() != Eigen::Success) throw ConvergenceFailure("spin eigenbasis: eigensolver failed");
    auto basis = std::make_shared<SpinEigenbasis>();
    basis->values = solver.eigenvalues();
    // Spectrum is exactly -J..J; snap to remove eigensolver roundoff.
    for (Eigen::Index k = 0; k < basis->values.size(); ++k)
        basis->values(k) = static_cast<double>(k) - 0.5 * n_particles;
    basis->vectors = solver.eigenvectors();
    std::lock_guard lock(mutex);
    return cache.emplace(key, std::move(basis)).first->second;
}

inline void phase_imprint_inplace(CVector& amps, double phi) {
    const double j = 0.5 * static_cast<double>(amps.size() - 1);
    for (Eigen::Index k = 0; k < amps.size(); ++k)
        amps(k) *= std::polar(1.0, -phi * (static_cast<double>(k) - j));
}

inline CVector rotate(const CVector& amps, int n_particles, Axis axis, double angle) {
    if (axis == Axis::z) {
        CVector out = amps;
        phase_imprint_inplace(out, angle);
        return out;
    }
    const auto basis = spin_eigenbasis(n_particles, axis);
    CVector coeffs = basis->vectors.adjoint() * amps;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) coeffs(k) *= std::polar(1.0, -angle * basis->values(k));
    return basis->vectors * coeffs;
}

inline double parity(const CVector& amps, int n_particles) {
    const auto basis = spin_eigenbasis(n_particles, Axis::x);
    const CVector coeffs = basis->vectors.adjoint() * amps;
    double total = 0.0;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
        // J - m_x = N - k
        const double sign = ((n_particles - k) % 2 == 0) ? 1.0 : -1.0;
        total += sign * std::norm(coeffs(k));
    }
    return total;
}

inline double real_checked(cplx value, double scale, const char* what) {
    if (std::abs(value.imag()) > 1e-10 * std::max(1.0, scale))
        throw NumericalFailure(std::string(what) + ": expectation has imaginary residue");
    return value.real();
}

} // namespace detail

/// exp(-i phi Jz) applied exactly.
inline DickeState apply_phase_imprint(const DickeState& state, double phi) {
    CVector amps = state.amplitudes();
    detail::phase_imprint_inplace(amps, phi);
    return {state.n_particles(), std::move(amps)};
}

/// exp(-i angle J_axis) via the cached spectral decomposition of J_axis.
inline DickeState apply_rotation_pulse(const DickeState& state, Axis axis, double angle) {
    return {state.n_particles(), detail::rotate(state.amplitudes(), state.n_particles(), axis, angle)};
}

inline double expectation(const CVector& psi, const CollectiveOperator& op) {
    if (static_cast<std::size_t>(psi.size()) != op.dimension())
        throw DimensionMismatch(op.dimension(), static_cast<std::size_t>(psi.size()));
    return detail::real_checked(psi.dot(op * psi), op.norm_bound(), "expectation");
}

inline double second_moment(const CVector& psi, const CollectiveOperator& op) {
    if (static_cast<std::size_t>(psi.size()) != op.dimension())
        throw DimensionMismatch(op.dimension(), static_cast<std::size_t>(psi.size()));
    return (op * psi).squaredNorm();
}

inline double expectation(const DickeState& s, const CollectiveOperator& op) { return expectation(s.amplitudes(), op); }
inline double second_moment(const DickeState& s, const CollectiveOperator& op) { return second_moment(s.amplitudes(), op); }

/// <Pi> with Pi = (-1)^(J - m_x) on the Jx eigenbasis; commutes with H_BJ for all Omega, chi.
inline double parity_expectation(const DickeState& state) {
    return detail::parity(state.amplitudes(), state.n_particles());
}

/// Dense parity operator, for symmetry checks.
inline CMatrix parity_operator(int n_particles) {
    const auto basis = detail::spin_eigenbasis(n_particles, Axis::x);
    RVector signs(basis->values.size());
    for (Eigen::Index k = 0; k < signs.size(); ++k) signs(k) = ((n_particles - k) % 2 == 0) ? 1.0 : -1.0;
    return basis->vectors * signs.asDiagonal() * basis->vectors.adjoint();
}

} // namespace qpt
