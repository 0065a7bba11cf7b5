#pragma once

// Control-parameter ramps for beam splitting and recombination.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "qpt/types.hpp"

namespace qpt {

struct Segment {
    double t_start;
    double t_end;
    double v_start;
    double v_end;
};

class PiecewiseLinearSchedule {
public:
    explicit PiecewiseLinearSchedule(std::vector<Segment> segments) : segments_(std::move(segments)) {
        if (segments_.empty()) throw InvalidArgument("schedule: at least one segment required");
        if (segments_.front().t_start != 0.0) throw InvalidArgument("schedule: must start at t = 0");
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const Segment& s = segments_[i];
            if (!(s.t_end >= s.t_start) || !std::isfinite(s.t_end) || !std::isfinite(s.v_start) ||
                !std::isfinite(s.v_end))
                throw InvalidArgument("schedule: segment " + std::to_string(i) + " is malformed");
            if (i > 0) {
                const Segment& p = segments_[i - 1];
                if (p.t_end != s.t_start) throw InvalidArgument("schedule: segments are not contiguous");
                if (std::abs(p.v_end - s.v_start) > 1e-12 * std::max(1.0, std::abs(s.v_start)))
                    throw InvalidArgument("schedule: value is discontinuous at segment boundary");
            }
        }
    }

    static PiecewiseLinearSchedule constant(double value, double duration) {
        return PiecewiseLinearSchedule({{0.0, duration, value, value}});
    }

    double total_duration() const noexcept { return segments_.back().t_end; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }

    double evaluate(double t) const {
        if (t < 0.0 || t > total_duration() || std::isnan(t))
            throw InvalidArgument("schedule: t = " + std::to_string(t) + " outside [0, " +
                                  std::to_string(total_duration()) + "]");
        for (const Segment& s : segments_) {
            if (t > s.t_end) continue;
            if (t == s.t_end) return s.v_end;
            if (t == s.t_start) return s.v_start;
            return s.v_start + (s.v_end - s.v_start) * (t - s.t_start) / (s.t_end - s.t_start);
        }
        return segments_.back().v_end;
    }

    double initial_value() const noexcept { return segments_.front().v_start; }
    double final_value() const noexcept { return segments_.back().v_end; }

    /// Interior segment boundaries plus both endpoints.
    std::vector<double> breakpoints() const {
        std::vector<double> out{0.0};
        for (const Segment& s : segments_) out.push_back(s.t_end);
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// r(t) = this(T - t)
    PiecewiseLinearSchedule reversed() const {
        const double total = total_duration();
        std::vector<Segment> out;
        for (auto it = segments_.rbegin(); it != segments_.rend(); ++it)
            out.push_back({total - it->t_end, total - it->t_start, it->v_end, it->v_start});
        out.front().t_start = 0.0;
        for (std::size_t i = 1; i < out.size(); ++i) out[i].t_start = out[i - 1].t_end;
        out.back().t_end = total;
        return PiecewiseLinearSchedule(std::move(out));
    }

    /// First time at which the value equals `level` (linear inverse); throws if never reached.
    double time_at_value(double level) const {
        for (const Segment& s : segments_) {
            const double lo = std::min(s.v_start, s.v_end), hi = std::max(s.v_start, s.v_end);
            if (level < lo || level > hi) continue;
            if (level == s.v_start) return s.t_start;
            if (level == s.v_end) return s.t_end;
            return s.t_start + (level - s.v_start) / (s.v_end - s.v_start) * (s.t_end - s.t_start);
        }
        throw InvalidArgument("schedule: value " + std::to_string(level) + " is never reached");
    }

private:
    std::vector<Segment> segments_;
};

inline std::vector<double> merge_breakpoints(const PiecewiseLinearSchedule& a, const PiecewiseLinearSchedule& b) {
    std::vector<double> out = a.breakpoints();
    const auto other = b.breakpoints();
    out.insert(out.end(), other.begin(), other.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Omega(t): Omega0 -> Omega_c at rate beta1, then Omega_c -> Omega_f at rate beta2.
/// Omega_f in [Omega_c, Omega0] gives a single first-stage ramp (empty when Omega_f = Omega0).
inline PiecewiseLinearSchedule bj_splitting(double omega0, double omega_c, double omega_f, double beta1, double beta2) {
    if (!(beta1 > 0.0) || !(beta2 > 0.0)) throw InvalidArgument("bj_splitting: sweep rates must be positive");
    if (!(omega0 > omega_c) || !(omega_c > 0.0))
        throw InvalidArgument("bj_splitting: requires Omega0 > Omega_c > 0");
    if (!(omega_f >= 0.0) || omega_f > omega0)
        throw InvalidArgument("bj_splitting: requires 0 <= Omega_f < Omega_c < Omega0");
    if (omega_f >= omega_c) {
        const double t = (omega0 - omega_f) / beta1;
        return PiecewiseLinearSchedule({{0.0, t, omega0, omega_f}});
    }
    const double tau_c = (omega0 - omega_c) / beta1;
    const double tau = tau_c + (omega_c - omega_f) / beta2;
    return PiecewiseLinearSchedule({{0.0, tau_c, omega0, omega_c}, {tau_c, tau, omega_c, omega_f}});
}

/// Omega'(t): Omega_f -> Omega_c at rate beta2, then Omega_c -> Omega_end at rate beta1.
inline PiecewiseLinearSchedule bj_recombination(double omega_f, double omega_c, double omega_end, double beta1,
                                                double beta2) {
    if (!(beta1 > 0.0) || !(beta2 > 0.0)) throw InvalidArgument("bj_recombination: sweep rates must be positive");
    if (!(omega_f >= 0.0) || !(omega_f < omega_c) || !(omega_c < omega_end))
        throw InvalidArgument("bj_recombination: requires 0 <= Omega_f < Omega_c < Omega_end");
    const double tau_c = (omega_c - omega_f) / beta2;
    const double tau = tau_c + (omega_end - omega_c) / beta1;
    return PiecewiseLinearSchedule({{0.0, tau_c, omega_f, omega_c}, {tau_c, tau, omega_c, omega_end}});
}

/// Transverse field and coupling prefactor for the Ising chain.
struct IsingRamp {
    PiecewiseLinearSchedule field;    // B(t)
    PiecewiseLinearSchedule coupling; // J(t)

    double duration() const noexcept { return field.total_duration(); }
};

/// Stage 1: B = B0, J: 0 -> J0. Stage 2: J = J0, B: B0 -> 0. Each stage lasts tau/2.
inline IsingRamp ising_splitting(double b0, double j0, double tau) {
    if (!(b0 > 0.0)) throw InvalidArgument("ising_splitting: requires B0 > 0");
    if (!(j0 < 0.0)) throw InvalidArgument("ising_splitting: requires J0 < 0");
    if (!(tau > 0.0)) throw InvalidArgument("ising_splitting: requires tau > 0");
    const double half = 0.5 * tau;
    return {PiecewiseLinearSchedule({{0.0, half, b0, b0}, {half, tau, b0, 0.0}}),
            PiecewiseLinearSchedule({{0.0, half, 0.0, j0}, {half, tau, j0, j0}})};
}

/// Stage 1: J = J0, B: 0 -> B0 over tau/2. Stage 2: B = B0, J = 2 J0 (1 - t/tau) until tau_prime.
inline IsingRamp ising_recombination(double b0, double j0, double tau, double tau_prime) {
    if (!(b0 > 0.0)) throw InvalidArgument("ising_recombination: requires B0 > 0");
    if (!(j0 < 0.0)) throw InvalidArgument("ising_recombination: requires J0 < 0");
    if (!(tau > 0.0)) throw InvalidArgument("ising_recombination: requires tau > 0");
    const double half = 0.5 * tau;
    if (tau_prime < half || tau_prime > tau)
        throw InvalidArgument("ising_recombination: requires tau/2 <= tau' <= tau");
    const double j_end = tau_prime == tau ? 0.0 : 2.0 * j0 * (1.0 - tau_prime / tau);
    return {PiecewiseLinearSchedule({{0.0, half, 0.0, b0}, {half, tau_prime, b0, b0}}),
            PiecewiseLinearSchedule({{0.0, half, j0, j0}, {half, tau_prime, j0, j_end}})};
}

} // namespace qpt
