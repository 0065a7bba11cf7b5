#pragma once

// Five-stage interferometer: prepare, split, imprint, recombine, read out.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qpt/collective_spin.hpp"
#include "qpt/ising_lattice.hpp"
#include "qpt/propagator.hpp"
#include "qpt/schedule.hpp"
#include "qpt/types.hpp"

namespace qpt {

struct BjProtocolConfig {
    int n = 100;
    double chi = -1.0;
    double omega0 = 11.0;
    double omega_f = 0.0;
    double beta1 = 0.1;
    double beta2 = 0.005;
    std::optional<double> omega_end; // unset: resolved by optimize_recombination
    Axis pulse_axis = Axis::x;
    double pulse_angle = kPi / 2;
    double phi = 0.0;

    double omega_c() const noexcept { return std::abs(chi); }

    /// `splitting_only` accepts Omega_f in [Omega_c, Omega0] (a truncated or empty splitting ramp).
    void validate(bool splitting_only = false) const {
        if (n < 1) throw InvalidArgument("model.n: must be >= 1");
        if (!(chi < 0.0)) throw InvalidArgument("model.chi: must be negative (attractive nonlinearity)");
        if (!(beta1 > 0.0) || !(beta2 > 0.0)) throw InvalidArgument("model.beta1/beta2: must be positive");
        if (!(omega0 > omega_c())) throw InvalidArgument("model.omega0: requires omega0 > omega_c = |chi|");
        if (!(omega_f >= 0.0)) throw InvalidArgument("model.omega_f: requires omega_f >= 0");
        if (splitting_only) {
            if (omega_f > omega0) throw InvalidArgument("model.omega_f: requires omega_f <= omega0");
        } else if (!(omega_f < omega_c())) {
            throw InvalidArgument("model.omega_f: ordering omega0 > omega_c > omega_f >= 0 violated (omega_c = |chi|)");
        }
        if (omega_end && !(*omega_end > omega_c() && *omega_end <= omega0))
            throw InvalidArgument("model.omega_end: requires omega_c < omega_end <= omega0");
        if (!std::isfinite(pulse_angle) || !std::isfinite(phi)) throw InvalidArgument("model: non-finite angle");
    }

    bool operator==(const BjProtocolConfig&) const = default;
};

struct IsingProtocolConfig {
    int n = 5;
    double b0 = 1.0;
    double j0 = -1.0;
    double tau = 10.0;
    std::optional<double> tau_prime; // unset: tau
    double power = 3.0;
    int coupling_range = 0; // 0 = full power law
    double phi = 0.0;

    double recombination_duration() const noexcept { return tau_prime.value_or(tau); }

    void validate() const {
        if (n < 1 || n > kMaxIsingSpins)
            throw InvalidArgument("model.n: must be in [1, " + std::to_string(kMaxIsingSpins) + "]");
        if (!(b0 > 0.0)) throw InvalidArgument("model.b0: must be > 0");
        if (!(j0 < 0.0)) throw InvalidArgument("model.j0: must be < 0");
        if (!(tau > 0.0)) throw InvalidArgument("model.tau: must be > 0");
        const double tp = recombination_duration();
        if (tp < 0.5 * tau || tp > tau) throw InvalidArgument("model.tau_prime: requires tau/2 <= tau_prime <= tau");
        if (coupling_range < 0) throw InvalidArgument("model.coupling_range: must be >= 0");
        if (!std::isfinite(power)) throw InvalidArgument("model.power: must be finite");
    }

    bool operator==(const IsingProtocolConfig&) const = default;
};

struct ProtocolDiagnostics {
    double norm_drift = 0.0;   // largest drift of any evolution stage
    double parity_drift = 0.0; // symmetry drift accumulated over splitting and recombination
    std::optional<double> roundtrip_fidelity;
    std::optional<double> adiabatic_floor; // min even-sector ground population during splitting stage 1
};

struct ProtocolOutcome {
    double mean = 0.0;
    double second_moment = 0.0;
    double variance = 0.0;
    std::optional<CVector> final_state;
    ProtocolDiagnostics diagnostics;
};

/// Raised when the optional adiabaticity check fails during splitting.
class AdiabaticityViolation : public NumericalFailure {
public:
    AdiabaticityViolation(double floor, double threshold)
        : NumericalFailure("adiabaticity floor " + std::to_string(floor) + " below " + std::to_string(threshold)),
          floor_(floor) {}
    double floor() const noexcept { return floor_; }

private:
    double floor_;
};

struct AdiabaticityCheck {
    bool enabled = false;
    double threshold = 0.99;
    int samples = 100;
};

namespace detail {

inline ProtocolOutcome make_outcome(double mean, double second) {
    return {mean, second, second - mean * mean, std::nullopt, {}};
}

// Population of the instantaneous lowest even-parity eigenstate of H_BJ.
inline double even_ground_population(const CVector& psi, int n, double omega, double chi) {
    const auto basis = spin_eigenbasis(n, Axis::x);
    const CMatrix h = basis->vectors.adjoint() * build_bj_hamiltonian(n, omega, chi).to_dense() * basis->vectors;
    std::vector<Eigen::Index> even;
    for (Eigen::Index k = 0; k <= n; ++k)
        if ((n - k) % 2 == 0) even.push_back(k);
    const auto m = static_cast<Eigen::Index>(even.size());
    CMatrix block(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) block(a, b) = h(even[a], even[b]);
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (block + block.adjoint()));
    const CVector coeffs = basis->vectors.adjoint() * psi;
    CVector sub(m);
    for (Eigen::Index a = 0; a < m; ++a) sub(a) = coeffs(even[a]);
    return std::norm(solver.eigenvectors().col(0).dot(sub));
}

} // namespace detail

/// Bose-Josephson interferometer. The split state is computed once at construction;
/// `run` is const and safe to call concurrently.
class BjInterferometer {
public:
    BjInterferometer(BjProtocolConfig config, EvolutionSettings settings, AdiabaticityCheck check = {},
                     bool splitting_only = false)
        : cfg_(std::move(config)), settings_(settings) {
        cfg_.validate(splitting_only);
        settings_.validate();
        const auto schedule = bj_splitting(cfg_.omega0, cfg_.omega_c(), cfg_.omega_f, cfg_.beta1, cfg_.beta2);
        const BjSweepGenerator gen(cfg_.n, cfg_.chi, schedule);
        initial_ = ground_state(gen, 0.0).state;
        split_duration_ = schedule.total_duration();

        StepObserver observer;
        double floor = 1.0;
        double next_sample = 0.0;
        const double stage1_end = std::min(split_duration_, (cfg_.omega0 - cfg_.omega_c()) / cfg_.beta1);
        const double spacing = stage1_end / std::max(1, check.samples);
        if (check.enabled) {
            observer = [&](double t, const CVector& psi) {
                if (t + 1e-12 < next_sample || t > stage1_end + 1e-12) return;
                next_sample += spacing;
                floor = std::min(floor, detail::even_ground_population(psi, cfg_.n, schedule.evaluate(t), cfg_.chi));
            };
        }
        const auto result = evolve(initial_, gen, 0.0, split_duration_, settings_, observer);
        split_ = result.state;
        split_norm_drift_ = result.norm_drift;
        split_parity_drift_ = std::abs(detail::parity(split_, cfg_.n) - detail::parity(initial_, cfg_.n));
        if (check.enabled) {
            adiabatic_floor_ = floor;
            if (floor < check.threshold) throw AdiabaticityViolation(floor, check.threshold);
        }
    }

    const BjProtocolConfig& config() const noexcept { return cfg_; }
    const EvolutionSettings& settings() const noexcept { return settings_; }
    const CVector& initial_state() const noexcept { return initial_; }
    const CVector& split_state() const noexcept { return split_; }
    double split_duration() const noexcept { return split_duration_; }
    std::optional<double> adiabatic_floor() const noexcept { return adiabatic_floor_; }

    double recombination_duration(double omega_end) const {
        return recombination_schedule(omega_end).total_duration();
    }

    /// Imprint phi, recombine to omega_end, pulse, read out Jz.
    ProtocolOutcome run(double phi, double omega_end, bool keep_state = false) const {
        const double ends[] = {omega_end};
        auto out = run_sweep(phi, ends, keep_state);
        return std::move(out.front());
    }

    ProtocolOutcome run(double phi, bool keep_state = false) const {
        if (!cfg_.omega_end) throw InvalidArgument("BjInterferometer::run: omega_end is not resolved");
        return run(phi, *cfg_.omega_end, keep_state);
    }

    /// One recombination trajectory read out at each of the ascending `omega_ends`.
    std::vector<ProtocolOutcome> run_sweep(double phi, std::span<const double> omega_ends, bool keep_state = false) const {
        if (omega_ends.empty()) return {};
        if (!std::is_sorted(omega_ends.begin(), omega_ends.end()))
            throw InvalidArgument("run_sweep: omega_end values must be ascending");
        return continue_sweep(imprinted(phi), 0.0, omega_ends, keep_state);
    }

    CVector imprinted(double phi) const {
        CVector psi = split_;
        detail::phase_imprint_inplace(psi, phi);
        return psi;
    }

    /// Recombine an already imprinted state that sits at time `t_start` of the recombination ramp.
    /// With `checkpoints`, the pre-pulse state at every requested endpoint is appended.
    std::vector<ProtocolOutcome> continue_sweep(CVector psi, double t_start, std::span<const double> omega_ends,
                                                bool keep_state, std::vector<CVector>* checkpoints = nullptr) const {
        const auto schedule = recombination_schedule(omega_ends.back());
        const BjSweepGenerator gen(cfg_.n, cfg_.chi, schedule);
        const double imprinted_parity = detail::parity(psi, cfg_.n);
        const auto jz = build_angular_momentum(cfg_.n, Axis::z);
        std::vector<ProtocolOutcome> out;
        out.reserve(omega_ends.size());
        double t = t_start, drift = 0.0;
        for (double end : omega_ends) {
            if (!(end > cfg_.omega_c() && end <= cfg_.omega0))
                throw InvalidArgument("omega_end must satisfy omega_c < omega_end <= omega0");
            const double t_end = end == omega_ends.back() ? schedule.total_duration() : schedule.time_at_value(end);
            auto step = evolve(psi, gen, t, t_end, settings_);
            psi = std::move(step.state);
            drift += step.norm_drift;
            t = t_end;
            if (checkpoints) checkpoints->push_back(psi);
            const CVector readout = detail::rotate(psi, cfg_.n, cfg_.pulse_axis, cfg_.pulse_angle);
            ProtocolOutcome o = detail::make_outcome(expectation(readout, jz), second_moment(readout, jz));
            o.diagnostics.norm_drift = std::max(split_norm_drift_, drift);
            o.diagnostics.parity_drift = split_parity_drift_ + std::abs(detail::parity(psi, cfg_.n) - imprinted_parity);
            o.diagnostics.adiabatic_floor = adiabatic_floor_;
            if (keep_state) o.final_state = readout;
            out.push_back(std::move(o));
        }
        return out;
    }

    /// phi = 0, recombine all the way back to Omega0, no pulse: |<initial|final>|^2.
    double roundtrip_fidelity() const {
        const auto schedule = recombination_schedule(cfg_.omega0);
        const BjSweepGenerator gen(cfg_.n, cfg_.chi, schedule);
        const auto back = evolve(split_, gen, 0.0, schedule.total_duration(), settings_);
        return fidelity(initial_, back.state);
    }

    PiecewiseLinearSchedule recombination_schedule(double omega_end) const {
        // Truncated splitting ramps (omega_f >= omega_c) have no critical crossing to undo.
        if (cfg_.omega_f >= cfg_.omega_c()) {
            if (!(omega_end >= cfg_.omega_f)) throw InvalidArgument("omega_end below omega_f");
            return PiecewiseLinearSchedule({{0.0, (omega_end - cfg_.omega_f) / cfg_.beta1, cfg_.omega_f, omega_end}});
        }
        return bj_recombination(cfg_.omega_f, cfg_.omega_c(), omega_end, cfg_.beta1, cfg_.beta2);
    }

private:
    BjProtocolConfig cfg_;
    EvolutionSettings settings_;
    CVector initial_;
    CVector split_;
    double split_duration_ = 0.0;
    double split_norm_drift_ = 0.0;
    double split_parity_drift_ = 0.0;
    std::optional<double> adiabatic_floor_;
};

/// Transverse-field Ising interferometer; no readout pulse.
class IsingInterferometer {
public:
    IsingInterferometer(IsingProtocolConfig config, EvolutionSettings settings)
        : cfg_(std::move(config)), settings_(settings) {
        cfg_.validate();
        settings_.validate();
        diag_ = std::make_shared<const IsingDiagonals>(build_ising_diagonals(cfg_.n, cfg_.power, cfg_.coupling_range));
        initial_ = coherent_x_state(cfg_.n).amplitudes();
        const IsingSweepGenerator gen(diag_, ising_splitting(cfg_.b0, cfg_.j0, cfg_.tau));
        const auto result = evolve(initial_, gen, 0.0, cfg_.tau, settings_);
        split_ = result.state;
        split_norm_drift_ = result.norm_drift;
        split_parity_drift_ = std::abs(detail::flip_parity(split_) - detail::flip_parity(initial_));
    }

    const IsingProtocolConfig& config() const noexcept { return cfg_; }
    const CVector& initial_state() const noexcept { return initial_; }
    const CVector& split_state() const noexcept { return split_; }
    const IsingDiagonals& diagonals() const noexcept { return *diag_; }

    ProtocolOutcome run(double phi, bool keep_state = false) const {
        return run_with(phi, cfg_.recombination_duration(), keep_state);
    }

    ProtocolOutcome run_with(double phi, double tau_prime, bool keep_state = false) const {
        const double ends[] = {tau_prime};
        auto out = continue_sweep(imprinted(phi), 0.0, ends, keep_state);
        return std::move(out.front());
    }

    CVector imprinted(double phi) const {
        CVector psi = split_;
        detail::phase_mz_inplace(psi, diag_->mz, phi);
        return psi;
    }

    /// A shorter recombination is a prefix of the full one, so one trajectory serves every
    /// ascending tau' in `ends`. With `checkpoints`, the state at each end is appended.
    std::vector<ProtocolOutcome> continue_sweep(CVector psi, double t_start, std::span<const double> ends,
                                                bool keep_state, std::vector<CVector>* checkpoints = nullptr) const {
        if (!std::is_sorted(ends.begin(), ends.end())) throw InvalidArgument("continue_sweep: tau' values must be ascending");
        const IsingSweepGenerator gen(diag_, ising_recombination(cfg_.b0, cfg_.j0, cfg_.tau, ends.back()));
        const double imprinted_parity = detail::flip_parity(psi);
        std::vector<ProtocolOutcome> out;
        out.reserve(ends.size());
        double t = t_start, drift = 0.0;
        for (double end : ends) {
            if (end < 0.5 * cfg_.tau || end > cfg_.tau) throw InvalidArgument("tau' must lie in [tau/2, tau]");
            auto step = evolve(psi, gen, t, end, settings_);
            psi = std::move(step.state);
            drift += step.norm_drift;
            t = end;
            if (checkpoints) checkpoints->push_back(psi);
            const auto [m1, m2] = detail::mz_moments(psi, diag_->mz);
            ProtocolOutcome o = detail::make_outcome(m1, m2);
            o.diagnostics.norm_drift = std::max(split_norm_drift_, drift);
            o.diagnostics.parity_drift = split_parity_drift_ + std::abs(detail::flip_parity(psi) - imprinted_parity);
            if (keep_state) o.final_state = psi;
            out.push_back(std::move(o));
        }
        return out;
    }

    /// phi = 0, tau' = tau.
    double roundtrip_fidelity() const {
        const IsingSweepGenerator gen(diag_, ising_recombination(cfg_.b0, cfg_.j0, cfg_.tau, cfg_.tau));
        const auto back = evolve(split_, gen, 0.0, cfg_.tau, settings_);
        return fidelity(initial_, back.state);
    }

private:
    IsingProtocolConfig cfg_;
    EvolutionSettings settings_;
    std::shared_ptr<const IsingDiagonals> diag_;
    CVector initial_;
    CVector split_;
    double split_norm_drift_ = 0.0;
    double split_parity_drift_ = 0.0;
};

inline ProtocolOutcome run_bj(const BjProtocolConfig& config, const EvolutionSettings& settings = {},
                              AdiabaticityCheck check = {}) {
    if (!config.omega_end) throw InvalidArgument("run_bj: omega_end must be set (see optimize_recombination)");
    return BjInterferometer(config, settings, check).run(config.phi, *config.omega_end);
}

inline ProtocolOutcome run_ising(const IsingProtocolConfig& config, const EvolutionSettings& settings = {}) {
    return IsingInterferometer(config, settings).run(config.phi);
}

/// Stages 1-2 only.
inline DickeState splitting_state(const BjProtocolConfig& config, const EvolutionSettings& settings = {}) {
    return {config.n, BjInterferometer(config, settings, {}, true).split_state()};
}

inline SpinChainState splitting_state(const IsingProtocolConfig& config, const EvolutionSettings& settings = {}) {
    return {config.n, IsingInterferometer(config, settings).split_state()};
}

inline double roundtrip_fidelity(const BjProtocolConfig& config, const EvolutionSettings& settings = {}) {
    return BjInterferometer(config, settings).roundtrip_fidelity();
}

inline double roundtrip_fidelity(const IsingProtocolConfig& config, const EvolutionSettings& settings = {}) {
    return IsingInterferometer(config, settings).roundtrip_fidelity();
}

/// Ising step size default: 1e-3 / max(B0, |J0|).
inline EvolutionSettings default_ising_settings(const IsingProtocolConfig& cfg) {
    EvolutionSettings s;
    s.dt = 1e-3 / std::max(cfg.b0, std::abs(cfg.j0));
    return s;
}

} // namespace qpt
