#pragma once

// Phase scans, error-propagation precision, sinusoid fits, recombination-endpoint
// search and precision-scaling fits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qpt/parallel.hpp"
#include "qpt/protocol.hpp"
#include "qpt/types.hpp"

namespace qpt {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

using PhaseRunner = std::function<ProtocolOutcome(double phi)>;

/// Central-difference step that shrinks with N, since the fringe frequency grows with N.
inline double default_phase_step(int n) { return std::min(1e-3, 0.01 / n); }

inline double default_derivative_floor(int n) { return 1e-12 * n; }

struct PhaseUncertainty {
    double delta_phi = kInfinity;
    double derivative = 0.0;
    ProtocolOutcome at_phi;
};

/// sqrt(<O^2> - <O>^2) / |d<O>/dphi| with a central difference of half-width `step`.
/// Returns +infinity when the derivative magnitude is below `floor`.
inline PhaseUncertainty phase_uncertainty_detail(const PhaseRunner& runner, double phi, double step, double floor) {
    if (!(step > 0.0)) throw InvalidArgument("phase_uncertainty: step must be > 0");
    PhaseUncertainty out;
    out.at_phi = runner(phi);
    const double plus = runner(phi + step).mean;
    const double minus = runner(phi - step).mean;
    out.derivative = (plus - minus) / (2.0 * step);
    const double sigma = std::sqrt(std::max(0.0, out.at_phi.variance));
    out.delta_phi = std::abs(out.derivative) < floor ? kInfinity : sigma / std::abs(out.derivative);
    return out;
}

inline double phase_uncertainty(const PhaseRunner& runner, double phi, double step, double floor = 1e-12) {
    return phase_uncertainty_detail(runner, phi, step, floor).delta_phi;
}

struct PhaseScanRecord {
    double phi = 0.0;
    double mean = 0.0;
    double second_moment = 0.0;
    double delta_phi = kInfinity;
    double norm_drift = 0.0;
    double parity_drift = 0.0;
    std::string error; // nonempty when this point failed
    bool numerical_failure = false;

    bool ok() const noexcept { return error.empty(); }
};

struct ScanOptions {
    std::size_t workers = 1;
    double step = 1e-3;   // central-difference half-width for delta_phi
    double floor = 1e-12; // derivative floor
    bool with_uncertainty = true;
};

/// One record per grid point, in grid order. A failing point is marked and the scan continues.
inline std::vector<PhaseScanRecord> scan_phase(const PhaseRunner& runner, std::span<const double> grid,
                                               const ScanOptions& options = {}) {
    auto results = parallel_map(grid.size(), options.workers, [&](std::size_t i) {
        PhaseScanRecord r;
        r.phi = grid[i];
        ProtocolOutcome o;
        if (options.with_uncertainty) {
            const auto u = phase_uncertainty_detail(runner, grid[i], options.step, options.floor);
            o = u.at_phi;
            r.delta_phi = u.delta_phi;
        } else {
            o = runner(grid[i]);
        }
        r.mean = o.mean;
        r.second_moment = o.second_moment;
        r.norm_drift = o.diagnostics.norm_drift;
        r.parity_drift = o.diagnostics.parity_drift;
        return r;
    });
    std::vector<PhaseScanRecord> out;
    out.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (results[i].ok()) {
            out.push_back(std::move(*results[i].value));
        } else {
            PhaseScanRecord r;
            r.phi = grid[i];
            r.mean = r.second_moment = std::numeric_limits<double>::quiet_NaN();
            r.error = results[i].error;
            r.numerical_failure = results[i].numerical;
            out.push_back(std::move(r));
        }
    }
    return out;
}

/// `points` values evenly spaced over [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 1) throw InvalidArgument("grid: need at least one point");
    if (points == 1) return {0.5 * (lo + hi)};
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    return g;
}

struct SinusoidFit {
    double amplitude = 0.0; // A; may be negative, c stays positive
    double c = 1.0;         // frequency correction: mean ~ A sin(N phi / c)
    double rms_residual = 0.0;
    double window = 0.0; // |phi| <= window
    std::size_t points = 0;
    int iterations = 0;
};

// Beyond this the window holds far less than a quarter period and A, c are degenerate.
inline constexpr double kMaxFitC = 50.0;

/// Least-squares fit of mean = A sin(N phi / c) over |phi| <= window.
/// Initialization: for each c on a fixed grid the optimal A is linear; the best pair seeds
/// a Levenberg-Marquardt refinement, stopped when the parameter update drops below 1e-10.
inline SinusoidFit fit_sinusoid(std::span<const PhaseScanRecord> records, int n, std::optional<double> window = {},
                                double c_guess = 1.0, int max_iterations = 500) {
    if (n < 1) throw InvalidArgument("fit_sinusoid: N must be >= 1");
    const double w = window.value_or(kPi * c_guess / (2.0 * n));
    std::vector<double> xs, ys;
    for (const auto& r : records) {
        if (!r.ok() || !std::isfinite(r.mean) || std::abs(r.phi) > w * (1.0 + 1e-12)) continue;
        xs.push_back(r.phi);
        ys.push_back(r.mean);
    }
    if (xs.size() < 5) throw InvalidArgument("fit_sinusoid: fewer than 5 points inside the window");
    const std::size_t m = xs.size();

    auto sse_at = [&](double a, double c) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = ys[i] - a * std::sin(n * xs[i] / c);
            s += r * r;
        }
        return s;
    };
    auto best_amplitude = [&](double c) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double s = std::sin(n * xs[i] / c);
            num += s * ys[i];
            den += s * s;
        }
        return den > 0.0 ? num / den : 0.0;
    };

    double a = 0.0, c = 0.0, best = kInfinity;
    for (double cg = 0.2; cg <= 5.0 + 1e-12; cg += 0.005) {
        const double ag = best_amplitude(cg);
        const double s = sse_at(ag, cg);
        if (s < best) {
            best = s;
            a = ag;
            c = cg;
        }
    }

    double lambda = 1e-3;
    int it = 0;
    for (; it < max_iterations; ++it) {
        double jtj00 = 0, jtj01 = 0, jtj11 = 0, g0 = 0, g1 = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double arg = n * xs[i] / c;
            const double da = std::sin(arg);
            const double dc = -a * std::cos(arg) * arg / c;
            const double r = ys[i] - a * da;
            jtj00 += da * da;
            jtj01 += da * dc;
            jtj11 += dc * dc;
            g0 += da * r;
            g1 += dc * r;
        }
        bool accepted = false;
        double step_a = 0.0, step_c = 0.0;
        for (int tries = 0; tries < 60 && !accepted; ++tries) {
            const double m00 = jtj00 * (1.0 + lambda), m11 = jtj11 * (1.0 + lambda);
            const double det = m00 * m11 - jtj01 * jtj01;
            if (det == 0.0) {
                lambda *= 10.0;
                continue;
            }
            step_a = (m11 * g0 - jtj01 * g1) / det;
            step_c = (m00 * g1 - jtj01 * g0) / det;
            const double na = a + step_a, nc = c + step_c;
            if (nc > 0.0 && nc <= kMaxFitC && sse_at(na, nc) <= best) {
                best = sse_at(na, nc);
                a = na;
                c = nc;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted) break; // no descent direction left: at a minimum to working precision
        if (std::abs(step_a) < 1e-10 * (1.0 + std::abs(a)) && std::abs(step_c) < 1e-10 * (1.0 + std::abs(c))) break;
    }
    if (it == max_iterations) throw ConvergenceFailure("fit_sinusoid: no convergence");
    return {a, c, std::sqrt(best / static_cast<double>(m)), w, m, it};
}

/// sqrt(B) c / (A N)
inline double min_uncertainty(double amplitude, double b, double c, int n) {
    if (!(amplitude > 0.0)) throw InvalidArgument("min_uncertainty: A must be > 0");
    if (!(b >= 0.0)) throw InvalidArgument("min_uncertainty: B must be >= 0");
    if (!(c > 0.0)) throw InvalidArgument("min_uncertainty: c must be > 0");
    if (n < 1) throw InvalidArgument("min_uncertainty: N must be >= 1");
    return std::sqrt(b) * c / (amplitude * n);
}

struct GridPoint {
    double x;
    double value;
};

struct OptimumResult {
    double x = 0.0;
    double value = kInfinity;
    std::vector<GridPoint> grid;
    int evaluations = 0;
};

class OptimizationFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// Grid points excluding `lo`, including `hi`: lo + (hi - lo) (i + 1) / n.
inline std::vector<double> half_open_grid(double lo, double hi, int points) {
    if (points < 1) throw InvalidArgument("grid: need at least one point");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * (i + 1) / points;
    g.back() = hi;
    return g;
}

/// Minimize over (lo, hi]: scan `grid_values` (precomputed, ascending x), then golden-section
/// refinement between the neighbours of the best grid point. Ties go to the smaller x.
inline OptimumResult refine_minimum(const std::function<double(double)>& objective, double lo, double hi,
                                    std::vector<GridPoint> grid, double x_tolerance = 1e-4) {
    OptimumResult out;
    out.grid = std::move(grid);
    std::size_t best = out.grid.size();
    for (std::size_t i = 0; i < out.grid.size(); ++i)
        if (out.grid[i].value < (best == out.grid.size() ? kInfinity : out.grid[best].value)) best = i;
    if (best == out.grid.size()) throw OptimizationFailure("optimizer: objective is infinite on the whole grid");
    out.x = out.grid[best].x;
    out.value = out.grid[best].value;

    double a = best == 0 ? lo : out.grid[best - 1].x;
    double b = best + 1 == out.grid.size() ? hi : out.grid[best + 1].x;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = objective(x1), f2 = objective(x2);
    out.evaluations += 2;
    while (b - a > x_tolerance) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
        ++out.evaluations;
    }
    const double xr = f1 <= f2 ? x1 : x2;
    const double fr = std::min(f1, f2);
    if (fr < out.value) {
        out.x = xr;
        out.value = fr;
    }
    return out;
}

/// Generic form: evaluates `objective` on the grid itself.
inline OptimumResult minimize_on_bracket(const std::function<double(double)>& objective, double lo, double hi,
                                         int grid_points = 21, double x_tolerance = 1e-4) {
    if (!(hi > lo)) throw InvalidArgument("optimizer: empty bracket");
    std::vector<GridPoint> grid;
    for (double x : half_open_grid(lo, hi, grid_points)) grid.push_back({x, objective(x)});
    auto out = refine_minimum(objective, lo, hi, std::move(grid), x_tolerance);
    out.evaluations += grid_points;
    return out;
}

struct RecombinationSearch {
    std::optional<double> lo; // default: omega_c (BJ) or tau/2 (Ising)
    std::optional<double> hi; // default: omega0 (BJ) or tau (Ising)
    int grid_points = 21;
    double x_tolerance = 1e-4;
    std::optional<double> step; // default: 0.01 / N
};

namespace detail {

/// The three probe trajectories (phi = 0, +step, -step) are each propagated once across the
/// whole grid and checkpointed, so refinement only re-propagates from the nearest checkpoint.
/// `time_of(x)` is the recombination time at which control value x is reached.
template <class Interferometer, class TimeOf>
OptimumResult optimize_checkpointed(const Interferometer& ifm, int n, double lo, double hi,
                                    const RecombinationSearch& search, TimeOf time_of) {
    const double step = search.step.value_or(0.01 / n);
    const double floor = default_derivative_floor(n);
    const auto xs = half_open_grid(lo, hi, search.grid_points);
    const double probes[3] = {0.0, step, -step};

    std::vector<ProtocolOutcome> sweeps[3];
    std::vector<CVector> checkpoints[3];
    for (int p = 0; p < 3; ++p) sweeps[p] = ifm.continue_sweep(ifm.imprinted(probes[p]), 0.0, xs, false, &checkpoints[p]);
    auto uncertainty = [&](const ProtocolOutcome& at, double plus, double minus) {
        const double derivative = (plus - minus) / (2.0 * step);
        return std::abs(derivative) < floor ? kInfinity : std::sqrt(std::max(0.0, at.variance)) / std::abs(derivative);
    };
    std::vector<GridPoint> grid;
    for (std::size_t i = 0; i < xs.size(); ++i)
        grid.push_back({xs[i], uncertainty(sweeps[0][i], sweeps[1][i].mean, sweeps[2][i].mean)});

    auto objective = [&](double x) {
        // Last checkpoint at or below x; below the first grid point, restart from the imprinted state.
        std::size_t k = xs.size();
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (xs[i] <= x) k = i;
        const double ends[] = {x};
        ProtocolOutcome o[3];
        for (int p = 0; p < 3; ++p) {
            o[p] = k == xs.size() ? ifm.continue_sweep(ifm.imprinted(probes[p]), 0.0, ends, false).front()
                                  : ifm.continue_sweep(checkpoints[p][k], time_of(xs[k]), ends, false).front();
        }
        return uncertainty(o[0], o[1].mean, o[2].mean);
    };
    auto out = refine_minimum(objective, lo, hi, std::move(grid), search.x_tolerance);
    out.evaluations += static_cast<int>(xs.size());
    return out;
}

} // namespace detail

/// Finds the recombination endpoint Omega_end minimizing delta_phi at phi = 0.
inline OptimumResult optimize_recombination(const BjInterferometer& interferometer, const RecombinationSearch& search = {}) {
    const auto& cfg = interferometer.config();
    const double lo = search.lo.value_or(cfg.omega_c());
    const double hi = search.hi.value_or(cfg.omega0);
    if (!(lo >= cfg.omega_c()) || !(hi <= cfg.omega0) || !(hi > lo))
        throw InvalidArgument("optimize_recombination: bracket must lie within (omega_c, omega0]");
    const auto schedule = interferometer.recombination_schedule(hi);
    return detail::optimize_checkpointed(interferometer, cfg.n, lo, hi, search,
                                         [&](double x) { return schedule.time_at_value(x); });
}

/// Finds the recombination duration tau' in [tau/2, tau] minimizing delta_phi at phi = 0.
inline OptimumResult optimize_recombination(const IsingInterferometer& interferometer, const RecombinationSearch& search = {}) {
    const auto& cfg = interferometer.config();
    const double lo = search.lo.value_or(0.5 * cfg.tau);
    const double hi = search.hi.value_or(cfg.tau);
    if (!(lo >= 0.5 * cfg.tau) || !(hi <= cfg.tau) || !(hi > lo))
        throw InvalidArgument("optimize_recombination: bracket must lie within [tau/2, tau]");
    return detail::optimize_checkpointed(interferometer, cfg.n, lo, hi, search, [](double x) { return x; });
}

struct ScalingPoint {
    int n = 0;
    double delta_phi_min = 0.0;
    double control = 0.0; // omega_end_opt (BJ) or tau' (Ising)
    double fit_amplitude = 0.0;
    double fit_c = 0.0;
    double second_moment = 0.0; // B = <O^2> at phi = 0
};

struct ScalingFit {
    std::vector<ScalingPoint> points;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Least squares of log(delta_phi_min) against log(N).
inline ScalingFit fit_power_law(std::vector<ScalingPoint> points) {
    if (points.size() < 3) throw InvalidArgument("scaling fit: need at least 3 values of N");
    const double m = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (const auto& p : points) {
        if (!(p.delta_phi_min > 0.0) || !std::isfinite(p.delta_phi_min))
            throw InvalidArgument("scaling fit: delta_phi_min must be finite and > 0");
        sx += std::log(static_cast<double>(p.n));
        sy += std::log(p.delta_phi_min);
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (const auto& p : points) {
        const double dx = std::log(static_cast<double>(p.n)) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p.delta_phi_min) - my);
    }
    if (sxx == 0.0) throw InvalidArgument("scaling fit: N values must not all be equal");
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0;
    for (const auto& p : points) {
        const double r = std::log(p.delta_phi_min) - (fit.intercept + fit.slope * std::log(static_cast<double>(p.n)));
        ssr += r * r;
    }
    fit.slope_stderr = std::sqrt(ssr / (m - 2.0) / sxx);
    fit.points = std::move(points);
    return fit;
}

struct ScalingOptions {
    std::size_t workers = 1;
    RecombinationSearch search;
    int fit_points = 9; // phi points across the half-fringe window used for (A, c)
};

namespace detail {

inline ScalingPoint characterize(const PhaseRunner& runner, int n, double control, const ScalingOptions& options) {
    ScalingPoint p;
    p.n = n;
    p.control = control;
    const auto u = phase_uncertainty_detail(runner, 0.0, default_phase_step(n), default_derivative_floor(n));
    p.delta_phi_min = u.delta_phi;
    p.second_moment = u.at_phi.second_moment;
    const double w = kPi / (2.0 * n);
    const auto grid = linear_grid(-w, w, options.fit_points);
    ScanOptions scan;
    scan.with_uncertainty = false;
    const auto records = scan_phase(runner, grid, scan);
    const auto fit = fit_sinusoid(records, n, w);
    p.fit_amplitude = fit.amplitude;
    p.fit_c = fit.c;
    return p;
}

} // namespace detail

/// Per-N failures abort the fit; the error carries the completed points.
class ScalingFailure : public NumericalFailure {
public:
    ScalingFailure(const std::string& what, std::vector<ScalingPoint> partial, bool numerical)
        : NumericalFailure(what), partial_(std::move(partial)), numerical_(numerical) {}
    const std::vector<ScalingPoint>& partial() const noexcept { return partial_; }
    bool numerical() const noexcept { return numerical_; }

private:
    std::vector<ScalingPoint> partial_;
    bool numerical_;
};

template <class R>
ScalingFit collect_scaling(std::vector<TaskResult<R>> results, std::span<const int> ns) {
    std::vector<ScalingPoint> points;
    std::string errors;
    bool numerical = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].ok()) {
            points.push_back(*results[i].value);
        } else {
            errors += "N=" + std::to_string(ns[i]) + ": " + results[i].error + "; ";
            numerical = numerical && results[i].numerical;
        }
    }
    if (!errors.empty()) throw ScalingFailure("scaling study failed: " + errors, std::move(points), numerical);
    return fit_power_law(std::move(points));
}

/// Re-optimizes omega_end for every N, then measures delta_phi_min at phi = 0.
inline ScalingFit bj_scaling_study(const BjProtocolConfig& base, std::span<const int> ns,
                                   const EvolutionSettings& settings = {}, const ScalingOptions& options = {}) {
    auto results = parallel_map(ns.size(), options.workers, [&](std::size_t i) {
        BjProtocolConfig cfg = base;
        cfg.n = ns[i];
        cfg.omega_end.reset();
        const BjInterferometer bj(cfg, settings);
        const double omega_opt = optimize_recombination(bj, options.search).x;
        const PhaseRunner runner = [&](double phi) { return bj.run(phi, omega_opt); };
        return detail::characterize(runner, cfg.n, omega_opt, options);
    });
    return collect_scaling(std::move(results), ns);
}

/// Per N, tau' is re-optimized over [tau/2, tau] unless the template fixes it.
inline ScalingFit ising_scaling_study(const IsingProtocolConfig& base, std::span<const int> ns,
                                      const EvolutionSettings& settings = {}, const ScalingOptions& options = {}) {
    auto results = parallel_map(ns.size(), options.workers, [&](std::size_t i) {
        IsingProtocolConfig cfg = base;
        cfg.n = ns[i];
        const IsingInterferometer ising(cfg, settings);
        const double tau_prime = base.tau_prime ? *base.tau_prime : optimize_recombination(ising, options.search).x;
        const PhaseRunner runner = [&](double phi) { return ising.run_with(phi, tau_prime); };
        return detail::characterize(runner, cfg.n, tau_prime, options);
    });
    return collect_scaling(std::move(results), ns);
}

} // namespace qpt
