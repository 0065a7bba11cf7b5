// qptmetro: run interferometry experiments from JSON manifests.
//
//   qptmetro bj-scan --manifest manifests/bj_scan.json --out out/bj_scan --workers 4
//   qptmetro plot-script --kind bj-scan --out out/bj_scan > plot.gp
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qpt/qpt.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
    std::string manifest;
    std::string out;
    int workers = 0;
    double dt = 0.0;
    bool seedless = false;
    bool quiet = false;
};

std::optional<std::size_t> env_workers() {
    const char* v = std::getenv("QPT_WORKERS");
    if (!v || !*v) return std::nullopt;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw qpt::ValidationError("QPT_WORKERS: must be a positive integer");
    return static_cast<std::size_t>(n);
}

int run_kind(qpt::ExperimentKind kind, const Overrides& o) {
    qpt::RunManifest m;
    try {
        m = qpt::parse_manifest(o.manifest, kind);
        if (!o.out.empty()) m.output_dir = o.out;
        if (auto w = env_workers()) m.workers = *w;
        if (o.workers > 0) m.workers = static_cast<std::size_t>(o.workers);
        if (o.dt > 0.0) m.evolution.dt = o.dt;
        qpt::validate(m);
    } catch (const std::exception& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    }
    if (o.seedless && !o.quiet) std::cerr << "seedless: no random numbers are drawn anywhere in this run\n";
    try {
        const auto report = qpt::execute(m, o.quiet ? nullptr : &std::cerr);
        for (const auto& f : report.files) std::cout << f << '\n';
        if (report.failed_points)
            std::cerr << report.failed_points << " point(s) failed; see run.log\n";
        return 0;
    } catch (const qpt::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phase estimation by adiabatic sweeps through quantum phase transitions"};
    app.require_subcommand(1);

    Overrides o;
    for (const auto& [kind, name] : qpt::experiment_kind_names()) {
        auto* sub = app.add_subcommand(name, "run a " + name + " manifest");
        sub->add_option("--manifest", o.manifest, "JSON manifest")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (overrides output_dir)");
        sub->add_option("--workers", o.workers, "worker threads (overrides QPT_WORKERS and the manifest)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--dt", o.dt, "integrator step override")->check(CLI::PositiveNumber);
        sub->add_flag("--seedless", o.seedless, "assert that the run draws no random numbers");
        sub->add_flag("--quiet", o.quiet, "no progress on stderr");
        sub->callback([kind, &o] { throw CLI::RuntimeError(run_kind(kind, o)); });
    }

    std::string plot_kind, plot_dir;
    auto* plot = app.add_subcommand("plot-script", "print a gnuplot script for a run's CSV outputs");
    plot->add_option("--kind", plot_kind, "experiment kind")->required();
    plot->add_option("--out", plot_dir, "directory holding the CSV outputs");
    plot->callback([&] {
        try {
            std::cout << qpt::plot_script(qpt::parse_experiment_kind(plot_kind), plot_dir);
        } catch (const std::exception& e) {
            std::cerr << "validation error: " << e.what() << '\n';
            throw CLI::RuntimeError(kExitValidation);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::RuntimeError& e) {
        return e.get_exit_code();
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    return 0;
}
