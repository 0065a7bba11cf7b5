#pragma once

// Executes a validated manifest and writes CSV outputs plus run.log and the resolved manifest.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qpt/analysis.hpp"
#include "qpt/manifest.hpp"
#include "qpt/protocol.hpp"

namespace qpt {

/// A CSV table: header plus rows, every number at 17 significant digits.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    CsvTable& row(const std::vector<double>& values) {
        if (values.size() != columns_.size()) throw DimensionMismatch(columns_.size(), values.size());
        std::ostringstream line;
        line << std::setprecision(17);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) line << ',';
            line << values[i];
        }
        rows_.push_back(line.str());
        return *this;
    }

    std::size_t size() const noexcept { return rows_.size(); }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + columns_[i];
        out += '\n';
        for (const auto& r : rows_) out += r + '\n';
        return out;
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::string> rows_;
};

struct RunReport {
    std::filesystem::path output_dir;
    std::vector<std::string> files;
    std::size_t failed_points = 0; // per-point failures (marked rows, not fatal)
};

/// Raised after logging when a run cannot complete; maps to exit code 3.
class RunFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

namespace detail {

class RunContext {
public:
    RunContext(const RunManifest& m, std::ostream* echo) : manifest_(m), echo_(echo), start_(std::chrono::steady_clock::now()) {
        report_.output_dir = m.output_dir;
    }

    void log(const std::string& line) {
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ostringstream s;
        s << '[' << std::fixed << std::setprecision(3) << t << "s] " << line << '\n';
        log_ += s.str();
        if (echo_) *echo_ << s.str() << std::flush;
    }

    void write(const std::string& name, const std::string& body) {
        std::filesystem::create_directories(manifest_.output_dir);
        const auto path = std::filesystem::path(manifest_.output_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw RunFailure("cannot write " + path.string());
        out << body;
        report_.files.push_back(path.string());
    }

    void write(const std::string& name, const CsvTable& table) { write(name, table.str()); }

    void finish() { write("run.log", log_); }

    const RunManifest& manifest() const noexcept { return manifest_; }
    RunReport& report() noexcept { return report_; }

    std::string seconds_note(double duration) const {
        if (!manifest_.chi_over_n_hz || !manifest_.is_bj()) return "";
        std::ostringstream s;
        s << " (" << std::setprecision(4) << duration / (*manifest_.chi_over_n_hz * manifest_.bj().n) << " s at |chi|/N = "
          << *manifest_.chi_over_n_hz << " Hz)";
        return s.str();
    }

private:
    const RunManifest& manifest_;
    std::ostream* echo_;
    std::chrono::steady_clock::time_point start_;
    std::string log_;
    RunReport report_;
};

inline std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

inline double resolve_omega_end(RunContext& ctx, const BjInterferometer& bj) {
    if (bj.config().omega_end) return *bj.config().omega_end;
    const auto opt = optimize_recombination(bj, ctx.manifest().search);
    ctx.log("optimized omega_end = " + fmt(opt.x) + ", delta_phi = " + fmt(opt.value) + " (" +
            std::to_string(opt.evaluations) + " evaluations)");
    return opt.x;
}

inline void emit_scan(RunContext& ctx, const std::vector<PhaseScanRecord>& records, int n, const std::string& control_name,
                      double control) {
    CsvTable scan({"phi", "mean", "second_moment", "delta_phi", "norm_drift", "parity_drift"});
    double max_drift = 0.0, max_parity = 0.0;
    for (const auto& r : records) {
        scan.row({r.phi, r.mean, r.second_moment, r.delta_phi, r.norm_drift, r.parity_drift});
        if (!r.ok()) {
            ++ctx.report().failed_points;
            ctx.log("point phi = " + fmt(r.phi) + " failed" + (r.numerical_failure ? " (numerical)" : "") + ": " + r.error);
            continue;
        }
        max_drift = std::max(max_drift, r.norm_drift);
        max_parity = std::max(max_parity, r.parity_drift);
    }
    ctx.log("max norm drift " + fmt(max_drift) + ", max parity drift " + fmt(max_parity));
    ctx.write("phase_scan.csv", scan);

    const double window = kPi / (2.0 * n);
    try {
        const auto fit = fit_sinusoid(records, n, window);
        CsvTable table({"fit_A", "fit_c", "rms_residual", "window", "points", control_name});
        table.row({fit.amplitude, fit.c, fit.rms_residual, fit.window, static_cast<double>(fit.points), control});
        ctx.write("fit.csv", table);
        ctx.log("fit: A = " + fmt(fit.amplitude) + ", c = " + fmt(fit.c) + ", rms/|A| = " +
                fmt(fit.rms_residual / std::abs(fit.amplitude)));
    } catch (const std::exception& e) {
        ctx.log(std::string("fit skipped: ") + e.what());
    }
}

inline ScanOptions scan_options(const RunManifest& m, int n) {
    ScanOptions o;
    o.workers = m.workers;
    o.step = default_phase_step(n);
    o.floor = default_derivative_floor(n);
    return o;
}

inline void run_bj_scan(RunContext& ctx) {
    const auto& m = ctx.manifest();
    const BjInterferometer bj(m.bj(), m.evolution);
    ctx.log("split state ready, duration " + fmt(bj.split_duration()) + ctx.seconds_note(bj.split_duration()));
    const double omega_end = resolve_omega_end(ctx, bj);
    const PhaseRunner runner = [&](double phi) { return bj.run(phi, omega_end); };
    const auto records = scan_phase(runner, m.phi_grid, scan_options(m, m.bj().n));
    emit_scan(ctx, records, m.bj().n, "omega_end", omega_end);
}

inline void run_ising_scan(RunContext& ctx) {
    const auto& m = ctx.manifest();
    const IsingInterferometer ising(m.ising(), m.evolution);
    const PhaseRunner runner = [&](double phi) { return ising.run(phi); };
    const auto records = scan_phase(runner, m.phi_grid, scan_options(m, m.ising().n));
    emit_scan(ctx, records, m.ising().n, "tau_prime", m.ising().recombination_duration());
}

inline void emit_scaling(RunContext& ctx, const std::vector<ScalingPoint>& points, const std::string& control_name) {
    const auto& m = ctx.manifest();
    // Ising: tau is the fixed splitting duration; the recombination duration actually used follows.
    std::vector<std::string> columns{"n", "delta_phi_min", m.is_bj() ? "omega_end_opt" : "tau", "fit_A", "fit_c"};
    if (!m.is_bj()) columns.push_back("tau_prime");
    CsvTable table(columns);
    for (const auto& p : points) {
        if (m.is_bj())
            table.row({static_cast<double>(p.n), p.delta_phi_min, p.control, p.fit_amplitude, p.fit_c});
        else
            table.row({static_cast<double>(p.n), p.delta_phi_min, m.ising().tau, p.fit_amplitude, p.fit_c, p.control});
        ctx.log("N = " + std::to_string(p.n) + ": delta_phi_min = " + fmt(p.delta_phi_min) + ", N*delta_phi = " +
                fmt(p.n * p.delta_phi_min) + ", " + control_name + " = " + fmt(p.control));
    }
    ctx.write("scaling.csv", table);
}

inline void run_scaling(RunContext& ctx) {
    const auto& m = ctx.manifest();
    ScalingOptions options;
    options.workers = m.workers;
    options.search = m.search;
    options.fit_points = m.fit_points;
    const std::string control = m.is_bj() ? "omega_end_opt" : "tau_prime";
    // The probe step depends on N, so re-derive it per N.
    options.search.step.reset();
    try {
        const auto fit = m.is_bj() ? bj_scaling_study(m.bj(), m.n_list, m.evolution, options)
                                   : ising_scaling_study(m.ising(), m.n_list, m.evolution, options);
        emit_scaling(ctx, fit.points, control);
        CsvTable summary({"slope", "slope_err", "intercept"});
        summary.row({fit.slope, fit.slope_stderr, fit.intercept});
        ctx.write("scaling_summary.csv", summary);
        ctx.log("slope = " + fmt(fit.slope) + " +- " + fmt(fit.slope_stderr));
    } catch (const ScalingFailure& e) {
        emit_scaling(ctx, e.partial(), control);
        throw RunFailure(e.what());
    }
}

inline void run_roundtrip(RunContext& ctx) {
    const auto& m = ctx.manifest();
    CsvTable table({"fidelity", "duration_split", "duration_recombine"});
    if (m.is_bj()) {
        const BjInterferometer bj(m.bj(), m.evolution);
        const double back = bj.recombination_duration(m.bj().omega0);
        table.row({bj.roundtrip_fidelity(), bj.split_duration(), back});
        ctx.log("round trip duration " + fmt(bj.split_duration() + back) + ctx.seconds_note(bj.split_duration() + back));
    } else {
        const IsingInterferometer ising(m.ising(), m.evolution);
        table.row({ising.roundtrip_fidelity(), m.ising().tau, m.ising().tau});
    }
    ctx.write("roundtrip.csv", table);
}

inline void run_optimize(RunContext& ctx) {
    const auto& m = ctx.manifest();
    const BjInterferometer bj(m.bj(), m.evolution);
    const auto opt = optimize_recombination(bj, m.search);
    CsvTable grid({"omega_end", "delta_phi"});
    for (const auto& g : opt.grid) grid.row({g.x, g.value});
    ctx.write("optimize_grid.csv", grid);
    CsvTable best({"omega_end_opt", "delta_phi_min", "evaluations"});
    best.row({opt.x, opt.value, static_cast<double>(opt.evaluations)});
    ctx.write("optimum.csv", best);
    ctx.log("omega_end_opt = " + fmt(opt.x) + ", N*delta_phi = " + fmt(opt.value * m.bj().n));
}

inline void run_splitting(RunContext& ctx) {
    const auto& m = ctx.manifest();
    CsvTable amps({"index", "label", "re", "im", "probability"});
    CsvTable summary({"mean", "second_moment", "parity", "duration"});
    if (m.is_bj()) {
        const BjInterferometer bj(m.bj(), m.evolution, {}, true);
        const DickeState s(m.bj().n, bj.split_state());
        const auto jz = build_angular_momentum(m.bj().n, Axis::z);
        for (Eigen::Index k = 0; k < s.amplitudes().size(); ++k) {
            const cplx a = s.amplitudes()[k];
            amps.row({static_cast<double>(k), s.m_of(static_cast<int>(k)), a.real(), a.imag(), std::norm(a)});
        }
        summary.row({expectation(s, jz), second_moment(s, jz), parity_expectation(s), bj.split_duration()});
    } else {
        const IsingInterferometer ising(m.ising(), m.evolution);
        const SpinChainState s(m.ising().n, ising.split_state());
        for (Eigen::Index k = 0; k < s.amplitudes().size(); ++k) {
            const cplx a = s.amplitudes()[k];
            amps.row({static_cast<double>(k), ising.diagonals().mz[k], a.real(), a.imag(), std::norm(a)});
        }
        const auto [m1, m2] = mz_moments(s);
        summary.row({m1, m2, global_flip_parity_expectation(s), m.ising().tau});
    }
    ctx.write("splitting_state.csv", amps);
    ctx.write("splitting_summary.csv", summary);
}

} // namespace detail

/// Runs the manifest. Validation happens before anything touches the filesystem.
/// Per-point scan failures are marked in the CSV and counted; anything else that fails is
/// logged to run.log and rethrown as RunFailure.
inline RunReport execute(const RunManifest& manifest, std::ostream* echo = nullptr) {
    validate(manifest);
    detail::RunContext ctx(manifest, echo);
    ctx.write("resolved_manifest.json", emit_manifest(manifest));
    ctx.log("kind " + to_string(manifest.kind) + ", workers " + std::to_string(manifest.workers) + ", dt " +
            detail::fmt(manifest.evolution.dt));
    try {
        switch (manifest.kind) {
        case ExperimentKind::bj_scan: detail::run_bj_scan(ctx); break;
        case ExperimentKind::ising_scan: detail::run_ising_scan(ctx); break;
        case ExperimentKind::bj_scaling:
        case ExperimentKind::ising_scaling: detail::run_scaling(ctx); break;
        case ExperimentKind::roundtrip: detail::run_roundtrip(ctx); break;
        case ExperimentKind::optimize_recombination: detail::run_optimize(ctx); break;
        case ExperimentKind::splitting_state: detail::run_splitting(ctx); break;
        }
    } catch (const std::exception& e) {
        ctx.log(std::string("FAILED: ") + e.what());
        ctx.finish();
        throw RunFailure(e.what());
    }
    if (ctx.report().failed_points) ctx.log(std::to_string(ctx.report().failed_points) + " point(s) failed");
    ctx.log("done");
    ctx.finish();
    return ctx.report();
}

/// gnuplot script for the CSVs a given kind writes.
inline std::string plot_script(ExperimentKind kind, const std::string& dir) {
    std::ostringstream s;
    s << "set datafile separator ','\nset key autotitle columnhead\nset grid\n";
    s << "set terminal pngcairo size 900,600\n";
    const std::string d = dir.empty() ? "." : dir;
    switch (kind) {
    case ExperimentKind::bj_scan:
    case ExperimentKind::ising_scan:
        s << "set output '" << d << "/phase_scan.png'\nset xlabel 'phi'\nset ylabel 'mean'\n"
          << "plot '" << d << "/phase_scan.csv' using 1:2 with linespoints\n";
        break;
    case ExperimentKind::bj_scaling:
    case ExperimentKind::ising_scaling:
        s << "set output '" << d << "/scaling.png'\nset logscale xy\nset xlabel 'N'\nset ylabel 'delta phi min'\n"
          << "plot '" << d << "/scaling.csv' using 1:2 with linespoints, 1/x title '1/N' with lines dashtype 2\n";
        break;
    case ExperimentKind::optimize_recombination:
        s << "set output '" << d << "/optimize.png'\nset logscale y\nset xlabel 'omega_end'\nset ylabel 'delta phi'\n"
          << "plot '" << d << "/optimize_grid.csv' using 1:2 with linespoints\n";
        break;
    case ExperimentKind::splitting_state:
        s << "set output '" << d << "/splitting_state.png'\nset xlabel 'm'\nset ylabel 'probability'\n"
          << "plot '" << d << "/splitting_state.csv' using 2:5 with impulses\n";
        break;
    case ExperimentKind::roundtrip:
        s << "# roundtrip.csv is a single row; nothing to plot\n";
        break;
    }
    return s.str();
}

} // namespace qpt
