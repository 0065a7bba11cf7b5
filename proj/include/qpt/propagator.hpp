#pragma once

// Time-dependent Schrodinger propagation (hbar = 1) and ground-state solvers.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "qpt/collective_spin.hpp"
#include "qpt/ising_lattice.hpp"
#include "qpt/schedule.hpp"
#include "qpt/types.hpp"

namespace qpt {

struct EvolutionSettings {
    double dt = 1e-3;
    double norm_tolerance = 1e-8;
    double convergence_tolerance = 1e-6;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("evolution.dt must be > 0");
        if (!(norm_tolerance > 0.0)) throw InvalidArgument("evolution.norm_tolerance must be > 0");
        if (!(convergence_tolerance > 0.0)) throw InvalidArgument("evolution.convergence_tolerance must be > 0");
    }

    bool operator==(const EvolutionSettings&) const = default;
};

/// Anything that can act as H(t) on a vector.
template <class G>
concept Generator = requires(const G& g, double t, const cplx* x, cplx* y) {
    { g.dimension() } -> std::convertible_to<std::size_t>;
    g.apply(t, x, y);
    { g.norm_bound(t) } -> std::convertible_to<double>;
    { g.breakpoints() } -> std::convertible_to<std::vector<double>>;
};

/// -Omega(t) Jx + (chi/N) Jz^2
class BjSweepGenerator {
public:
    BjSweepGenerator(int n_particles, double chi, PiecewiseLinearSchedule omega)
        : n_(n_particles), chi_(chi), jx_(build_angular_momentum(n_particles, Axis::x)),
          jz2_(build_bj_hamiltonian(n_particles, 0.0, chi)),
          omega_(std::move(omega)) {}

    std::size_t dimension() const noexcept { return jx_.dimension(); }
    const PiecewiseLinearSchedule& schedule() const noexcept { return omega_; }
    std::vector<double> breakpoints() const { return omega_.breakpoints(); }

    void apply(double t, const cplx* x, cplx* y) const {
        const double om = omega_.evaluate(t);
        const Eigen::Index n = static_cast<Eigen::Index>(dimension());
        const double* d = jz2_.diagonal().data();
        const cplx* u = jx_.upper().data(); // real ladder elements
        if (n == 1) {
            y[0] = d[0] * x[0];
            return;
        }
        y[0] = d[0] * x[0] - om * u[0].real() * x[1];
        for (Eigen::Index k = 1; k + 1 < n; ++k)
            y[k] = d[k] * x[k] - om * (u[k - 1].real() * x[k - 1] + u[k].real() * x[k + 1]);
        y[n - 1] = d[n - 1] * x[n - 1] - om * u[n - 2].real() * x[n - 2];
    }

    double norm_bound(double t) const {
        return std::abs(omega_.evaluate(t)) * jx_.norm_bound() + jz2_.norm_bound();
    }

    CollectiveOperator frozen(double t) const { return build_bj_hamiltonian(n_, omega_.evaluate(t), chi_); }

private:
    int n_;
    double chi_;
    CollectiveOperator jx_;
    CollectiveOperator jz2_;
    PiecewiseLinearSchedule omega_;
};

/// J(t) * sum_{i<j} z_i z_j / |i-j|^p - B(t) * sum_i sigma_x^i
class IsingSweepGenerator {
public:
    IsingSweepGenerator(std::shared_ptr<const IsingDiagonals> diagonals, IsingRamp ramp)
        : diag_(std::move(diagonals)), ramp_(std::move(ramp)) {
        if (ramp_.field.total_duration() != ramp_.coupling.total_duration())
            throw InvalidArgument("IsingSweepGenerator: field and coupling ramps differ in duration");
    }

    std::size_t dimension() const noexcept { return diag_->dimension(); }
    const IsingDiagonals& diagonals() const noexcept { return *diag_; }
    std::vector<double> breakpoints() const { return merge_breakpoints(ramp_.field, ramp_.coupling); }

    void apply(double t, const cplx* x, cplx* y) const {
        apply_ising(x, y, ramp_.coupling.evaluate(t), ramp_.field.evaluate(t), *diag_);
    }

    double norm_bound(double t) const {
        return ising_norm_bound(ramp_.coupling.evaluate(t), ramp_.field.evaluate(t), *diag_);
    }

private:
    std::shared_ptr<const IsingDiagonals> diag_;
    IsingRamp ramp_;
};

/// Type-erased Hermitian operator, used by the generic two-term sweep.
struct OperatorAction {
    std::size_t dimension = 0;
    std::function<void(const cplx*, cplx*)> apply;
    double norm_bound = 0.0;

    static OperatorAction from(const CollectiveOperator& op) {
        return {op.dimension(), [op](const cplx* x, cplx* y) { op.apply(x, y); }, op.norm_bound()};
    }
    static OperatorAction from_dense(CMatrix m) {
        const double bound = m.cwiseAbs().rowwise().sum().maxCoeff();
        const auto dim = static_cast<std::size_t>(m.rows());
        auto shared = std::make_shared<const CMatrix>(std::move(m));
        return {dim,
                [shared](const cplx* x, cplx* y) {
                    const Eigen::Index n = shared->rows();
                    Eigen::Map<CVector>(y, n) = *shared * Eigen::Map<const CVector>(x, n);
                },
                bound};
    }
};

/// R1(t) H1 + R2(t) H2 for arbitrary Hermitian H1, H2.
class TwoTermGenerator {
public:
    TwoTermGenerator(PiecewiseLinearSchedule r1, OperatorAction h1, PiecewiseLinearSchedule r2, OperatorAction h2)
        : r1_(std::move(r1)), r2_(std::move(r2)), h1_(std::move(h1)), h2_(std::move(h2)),
          scratch_dim_(h1_.dimension) {
        if (h1_.dimension != h2_.dimension) throw DimensionMismatch(h1_.dimension, h2_.dimension);
        if (r1_.total_duration() != r2_.total_duration())
            throw InvalidArgument("TwoTermGenerator: schedules differ in duration");
    }

    std::size_t dimension() const noexcept { return scratch_dim_; }
    std::vector<double> breakpoints() const { return merge_breakpoints(r1_, r2_); }

    void apply(double t, const cplx* x, cplx* y) const {
        thread_local CVector tmp;
        tmp.resize(static_cast<Eigen::Index>(scratch_dim_));
        h1_.apply(x, y);
        h2_.apply(x, tmp.data());
        const double a = r1_.evaluate(t), b = r2_.evaluate(t);
        for (std::size_t k = 0; k < scratch_dim_; ++k) y[k] = a * y[k] + b * tmp(static_cast<Eigen::Index>(k));
    }

    double norm_bound(double t) const {
        return std::abs(r1_.evaluate(t)) * h1_.norm_bound + std::abs(r2_.evaluate(t)) * h2_.norm_bound;
    }

private:
    PiecewiseLinearSchedule r1_, r2_;
    OperatorAction h1_, h2_;
    std::size_t scratch_dim_;
};

/// Time-independent H over [0, duration].
class FrozenGenerator {
public:
    FrozenGenerator(OperatorAction h, double duration) : h_(std::move(h)), duration_(duration) {}

    std::size_t dimension() const noexcept { return h_.dimension; }
    std::vector<double> breakpoints() const { return {0.0, duration_}; }
    void apply(double, const cplx* x, cplx* y) const { h_.apply(x, y); }
    double norm_bound(double) const { return h_.norm_bound; }

private:
    OperatorAction h_;
    double duration_;
};

namespace detail {

// Stateless index hash (splitmix64) used for reproducible probe vectors.
inline double hash_unit(std::uint64_t k) {
    std::uint64_t z = k + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

inline CVector probe_vector(std::size_t dim, std::uint64_t salt) {
    CVector v(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k)
        v(static_cast<Eigen::Index>(k)) = cplx(hash_unit(salt * 0x10001ULL + 2 * k), hash_unit(salt * 0x10001ULL + 2 * k + 1));
    return v.normalized();
}

} // namespace detail

/// Largest |<u|H v> - conj(<v|H u>)| over `trials` reproducible probe pairs, relative to the norm bound.
template <Generator G>
double hermiticity_defect(const G& gen, double t, int trials = 4) {
    const std::size_t dim = gen.dimension();
    CVector hu(static_cast<Eigen::Index>(dim)), hv(static_cast<Eigen::Index>(dim));
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        const CVector u = detail::probe_vector(dim, 2 * static_cast<std::uint64_t>(i) + 1);
        const CVector v = detail::probe_vector(dim, 2 * static_cast<std::uint64_t>(i) + 2);
        gen.apply(t, u.data(), hu.data());
        gen.apply(t, v.data(), hv.data());
        const double scale = std::max(1.0, static_cast<double>(gen.norm_bound(t)));
        worst = std::max(worst, std::abs(u.dot(hv) - std::conj(v.dot(hu))) / scale);
    }
    return worst;
}

/// Type-erased generator; construction verifies Hermitian action at the first breakpoint.
class TimeDependentGenerator {
public:
    template <Generator G>
    explicit TimeDependentGenerator(G gen, double hermitian_tolerance = 1e-10)
        : impl_(std::make_shared<Model<G>>(std::move(gen))) {
        const auto knots = impl_->breakpoints();
        const double t = knots.empty() ? 0.0 : knots.front();
        if (impl_->defect(t) > hermitian_tolerance)
            throw InvalidArgument("TimeDependentGenerator: action is not Hermitian");
    }

    std::size_t dimension() const { return impl_->dimension(); }
    std::vector<double> breakpoints() const { return impl_->breakpoints(); }
    void apply(double t, const cplx* x, cplx* y) const { impl_->apply(t, x, y); }
    double norm_bound(double t) const { return impl_->norm_bound(t); }

private:
    struct Concept {
        virtual ~Concept() = default;
        virtual std::size_t dimension() const = 0;
        virtual std::vector<double> breakpoints() const = 0;
        virtual void apply(double, const cplx*, cplx*) const = 0;
        virtual double norm_bound(double) const = 0;
        virtual double defect(double) const = 0;
    };
    template <class G>
    struct Model final : Concept {
        explicit Model(G g) : gen(std::move(g)) {}
        std::size_t dimension() const override { return gen.dimension(); }
        std::vector<double> breakpoints() const override { return gen.breakpoints(); }
        void apply(double t, const cplx* x, cplx* y) const override { gen.apply(t, x, y); }
        double norm_bound(double t) const override { return gen.norm_bound(t); }
        double defect(double t) const override { return hermiticity_defect(gen, t); }
        G gen;
    };
    std::shared_ptr<const Concept> impl_;
};

struct EvolutionResult {
    CVector state;
    double norm_drift = 0.0;
    std::size_t steps = 0;
};

using StepObserver = std::function<void(double t, const CVector& state)>;

namespace detail {

// psi <- exp(-i h H(t)) psi by Taylor series, substepped so each substep has ||h H|| <= 2.
template <Generator G>
void exponential_step(const G& gen, double t, double h, CVector& psi, CVector& term, CVector& next) {
    const double bound = gen.norm_bound(t) * h;
    const int substeps = std::max(1, static_cast<int>(std::ceil(bound / 2.0)));
    const double hs = h / substeps;
    const Eigen::Index n = psi.size();
    const cplx factor0 = cplx(0.0, -hs);
    for (int s = 0; s < substeps; ++s) {
        term = psi;
        const double ref = psi.squaredNorm();
        for (int k = 1; k <= 60; ++k) {
            gen.apply(t, term.data(), next.data());
            const cplx factor = factor0 / static_cast<double>(k);
            double mag = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const cplx v = factor * next(i);
                term(i) = v;
                psi(i) += v;
                mag += std::norm(v);
            }
            if (mag <= 1e-34 * ref) break;
        }
    }
}

} // namespace detail

/// Solves i d|psi>/dt = H(t)|psi> from t0 to t1 with exponential-midpoint steps.
/// Schedule breakpoints inside (t0, t1) are step boundaries. Throws IntegrationFailure on norm drift.
template <Generator G>
EvolutionResult evolve(const CVector& initial, const G& gen, double t0, double t1, const EvolutionSettings& settings,
                       const StepObserver& observer = {}) {
    settings.validate();
    if (static_cast<std::size_t>(initial.size()) != gen.dimension())
        throw DimensionMismatch(gen.dimension(), static_cast<std::size_t>(initial.size()));
    if (!(t1 >= t0)) throw InvalidArgument("evolve: requires t1 >= t0");

    std::vector<double> knots{t0};
    for (double b : gen.breakpoints())
        if (b > t0 && b < t1) knots.push_back(b);
    knots.push_back(t1);

    EvolutionResult result{initial, 0.0, 0};
    CVector term(initial.size()), next(initial.size());
    const double n0 = initial.squaredNorm();
    if (observer) observer(t0, result.state);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = knots[i], b = knots[i + 1];
        if (b <= a) continue;
        const auto n_steps = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / settings.dt - 1e-9)));
        const double h = (b - a) / static_cast<double>(n_steps);
        for (std::size_t s = 0; s < n_steps; ++s) {
            const double ts = a + h * static_cast<double>(s);
            detail::exponential_step(gen, ts + 0.5 * h, h, result.state, term, next);
            ++result.steps;
            if (observer) observer(s + 1 == n_steps ? b : ts + h, result.state);
        }
    }
    result.norm_drift = std::abs(result.state.squaredNorm() - n0);
    if (result.norm_drift > settings.norm_tolerance) throw IntegrationFailure(result.norm_drift, settings.norm_tolerance);
    return result;
}

struct GroundState {
    CVector state;
    double energy = 0.0;
    double gap = 0.0;
};

enum class EigenMethod { automatic, dense, lanczos };

inline constexpr std::size_t kDenseEigenLimit = 2048;

namespace detail {

// Largest-magnitude amplitude made real positive (first index within 1e-9 relative of the max).
inline void fix_global_phase(CVector& v) {
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        if (std::abs(v(k)) >= peak * (1.0 - 1e-9)) {
            v *= std::conj(v(k)) / std::abs(v(k));
            v(k) = std::abs(v(k));
            return;
        }
    }
}

template <Generator G>
CMatrix dense_matrix(const G& gen, double t) {
    const auto dim = static_cast<Eigen::Index>(gen.dimension());
    CMatrix m(dim, dim);
    CVector e = CVector::Zero(dim), col(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        e(k) = 1.0;
        gen.apply(t, e.data(), col.data());
        m.col(k) = col;
        e(k) = 0.0;
    }
    return 0.5 * (m + m.adjoint());
}

// Restarted Lanczos with full reorthogonalization for the two lowest eigenpairs.
template <Generator G>
GroundState lanczos_ground(const G& gen, double t, int krylov_dim = 80, int max_restarts = 200) {
    const auto dim = static_cast<Eigen::Index>(gen.dimension());
    const int m = static_cast<int>(std::min<Eigen::Index>(krylov_dim, dim));
    const double scale = std::max(1.0, static_cast<double>(gen.norm_bound(t)));
    CVector start = probe_vector(gen.dimension(), 7);
    CMatrix basis(dim, m);
    CVector w(dim);
    for (int restart = 0; restart < max_restarts; ++restart) {
        RVector alpha = RVector::Zero(m), beta = RVector::Zero(m);
        basis.col(0) = start.normalized();
        int used = m;
        for (int j = 0; j < m; ++j) {
            gen.apply(t, basis.col(j).data(), w.data());
            alpha(j) = basis.col(j).dot(w).real();
            // Two passes of classical Gram-Schmidt against the whole basis.
            for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).adjoint() * w);
            if (j + 1 == m) break;
            beta(j) = w.norm();
            if (beta(j) < 1e-13 * scale) {
                used = j + 1;
                break;
            }
            basis.col(j + 1) = w / beta(j);
        }
        // Projected matrix (exact Rayleigh quotient in the orthonormal basis).
        CMatrix projected(used, used);
        for (int j = 0; j < used; ++j) {
            gen.apply(t, basis.col(j).data(), w.data());
            projected.col(j) = basis.leftCols(used).adjoint() * w;
        }
        projected = 0.5 * (projected + projected.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<CMatrix> small(projected);
        const CVector ground = basis.leftCols(used) * small.eigenvectors().col(0);
        gen.apply(t, ground.data(), w.data());
        const double e0 = small.eigenvalues()(0);
        const double residual = (w - e0 * ground).norm();
        double e1 = used > 1 ? small.eigenvalues()(1) : e0;
        double residual1 = 0.0;
        CVector excited;
        if (used > 1) {
            excited = basis.leftCols(used) * small.eigenvectors().col(1);
            gen.apply(t, excited.data(), w.data());
            residual1 = (w - e1 * excited).norm();
        }
        if ((residual < 1e-11 * scale && residual1 < 1e-6 * scale) || used == dim) {
            GroundState out{ground.normalized(), e0, std::max(0.0, e1 - e0)};
            fix_global_phase(out.state);
            return out;
        }
        start = used > 1 ? CVector(ground + 0.5 * excited) : ground;
    }
    throw ConvergenceFailure("ground_state: Lanczos did not converge");
}

} // namespace detail

/// Lowest eigenpair of H(t) and the gap to the next level.
template <Generator G>
GroundState ground_state(const G& gen, double t, EigenMethod method = EigenMethod::automatic) {
    if (gen.dimension() < 2) throw InvalidArgument("ground_state: dimension must be >= 2");
    const bool dense = method == EigenMethod::dense ||
                       (method == EigenMethod::automatic && gen.dimension() <= kDenseEigenLimit);
    if (!dense) return detail::lanczos_ground(gen, t);
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(detail::dense_matrix(gen, t));
    if (solver.info() != Eigen::Success) throw ConvergenceFailure("ground_state: dense eigensolver failed");
    GroundState out{solver.eigenvectors().col(0), solver.eigenvalues()(0),
                    std::max(0.0, solver.eigenvalues()(1) - solver.eigenvalues()(0))};
    detail::fix_global_phase(out.state);
    return out;
}

} // namespace qpt
