#include <gtest/gtest.h>

#include <cmath>

#include "qpt/analysis.hpp"

using namespace qpt;

namespace {

// mean = A sin(N phi / c), variance fixed.
PhaseRunner synthetic(double amplitude, double c, int n, double variance) {
    return [=](double phi) {
        const double mean = amplitude * std::sin(n * phi / c);
        return detail::make_outcome(mean, variance + mean * mean);
    };
}

std::vector<PhaseScanRecord> synthetic_records(double amplitude, double c, int n, double window, int points) {
    ScanOptions o;
    o.with_uncertainty = false;
    return scan_phase(synthetic(amplitude, c, n, 1.0), linear_grid(-window, window, points), o);
}

} // namespace

TEST(PhaseUncertainty, HeisenbergAndStandardClosures) {
    for (int n : {4, 16, 100}) {
        // GHZ-like: slope N/2, sigma 1/2 -> 1/N
        const auto heisenberg = [n](double phi) {
            const double mean = 0.5 * std::sin(n * phi);
            return detail::make_outcome(mean, 0.25);
        };
        EXPECT_NEAR(phase_uncertainty(heisenberg, 0.0, 1e-5), 1.0 / n, 1e-8);
        // Coherent: slope N/2, sigma sqrt(N)/2 -> 1/sqrt(N)
        const auto standard = [n](double phi) {
            const double mean = 0.5 * n * phi;
            return detail::make_outcome(mean, 0.25 * n + mean * mean);
        };
        EXPECT_NEAR(phase_uncertainty(standard, 0.0, 1e-3), 1.0 / std::sqrt(n), 1e-10);
    }
}

TEST(PhaseUncertainty, FlatSignalIsInfinite) {
    const PhaseRunner flat = [](double) { return detail::make_outcome(0.3, 1.0); };
    EXPECT_TRUE(std::isinf(phase_uncertainty(flat, 0.0, 1e-3)));
    EXPECT_THROW(phase_uncertainty(flat, 0.0, 0.0), InvalidArgument);
    EXPECT_DOUBLE_EQ(default_phase_step(5), 1e-3);
    EXPECT_DOUBLE_EQ(default_phase_step(100), 1e-4);
    EXPECT_DOUBLE_EQ(default_derivative_floor(100), 1e-10);
}

TEST(ScanPhase, MarksFailuresAndKeepsOrder) {
    const PhaseRunner runner = [](double phi) {
        if (phi > 0.25 && phi < 0.35) throw IntegrationFailure(1e-3, 1e-8);
        return detail::make_outcome(phi, 1.0 + phi * phi);
    };
    const auto grid = linear_grid(0.0, 1.0, 11);
    const auto records = scan_phase(runner, grid);
    ASSERT_EQ(records.size(), 11u);
    for (std::size_t i = 0; i < records.size(); ++i) EXPECT_DOUBLE_EQ(records[i].phi, grid[i]);
    EXPECT_FALSE(records[3].ok());
    EXPECT_TRUE(records[3].numerical_failure);
    EXPECT_TRUE(records[5].ok());
    EXPECT_NEAR(records[5].delta_phi, 1.0, 1e-9);
}

TEST(ScanPhase, WorkerCountDoesNotChangeResults) {
    const auto runner = synthetic(3.0, 1.2, 10, 0.5);
    const auto grid = linear_grid(-0.3, 0.3, 31);
    ScanOptions one, four;
    four.workers = 4;
    const auto a = scan_phase(runner, grid, one), b = scan_phase(runner, grid, four);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mean, b[i].mean);
        EXPECT_EQ(a[i].delta_phi, b[i].delta_phi);
    }
}

TEST(ParallelMap, CapturesExceptionsPerIndex) {
    const auto out = parallel_map(20, 3, [](std::size_t i) {
        if (i == 7) throw ConvergenceFailure("seven");
        if (i == 9) throw std::runtime_error("nine");
        return static_cast<int>(i * i);
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i == 7 || i == 9) {
            EXPECT_FALSE(out[i].ok());
            EXPECT_EQ(out[i].numerical, i == 7);
        } else {
            EXPECT_EQ(*out[i].value, static_cast<int>(i * i));
        }
    }
}

TEST(Grids, LinearAndHalfOpen) {
    EXPECT_EQ(linear_grid(-1.0, 1.0, 5), (std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));
    EXPECT_EQ(linear_grid(0.0, 2.0, 1), std::vector<double>{1.0});
    EXPECT_EQ(half_open_grid(0.0, 1.0, 4), (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
    EXPECT_THROW(linear_grid(0.0, 1.0, 0), InvalidArgument);
}

TEST(SinusoidFit, RecoversSyntheticParameters) {
    struct Case {
        double amplitude, c;
        int n;
    };
    for (const Case k : {Case{50.0, 1.16, 100}, Case{-1.6, 1.0, 5}, Case{2.0, 1.58, 20}, Case{10.0, 0.7, 40}}) {
        const double w = kPi * k.c / (2.0 * k.n);
        const auto fit = fit_sinusoid(synthetic_records(k.amplitude, k.c, k.n, w, 21), k.n, w);
        EXPECT_NEAR(fit.amplitude, k.amplitude, 1e-8 * std::abs(k.amplitude));
        EXPECT_NEAR(fit.c, k.c, 1e-8);
        EXPECT_LT(fit.rms_residual, 1e-9);
        EXPECT_EQ(fit.points, 21u);
    }
}

TEST(SinusoidFit, WindowSelectionAndErrors) {
    const int n = 30;
    const auto records = synthetic_records(4.0, 1.1, n, 3 * kPi / n, 121);
    const auto fit = fit_sinusoid(records, n);
    EXPECT_DOUBLE_EQ(fit.window, kPi / (2.0 * n));
    EXPECT_NEAR(fit.c, 1.1, 1e-8);
    EXPECT_THROW(fit_sinusoid(synthetic_records(1.0, 1.0, n, 0.01, 3), n), InvalidArgument);
    EXPECT_THROW(fit_sinusoid(records, 0), InvalidArgument);
}

TEST(SinusoidFit, SkipsFailedPoints) {
    auto records = synthetic_records(2.0, 1.3, 10, kPi / 10, 21);
    records[4].mean = 1e6;
    records[4].error = "failed";
    const auto fit = fit_sinusoid(records, 10, kPi / 10);
    EXPECT_NEAR(fit.c, 1.3, 1e-8);
    EXPECT_EQ(fit.points, 20u);
}

TEST(MinUncertainty, Examples) {
    EXPECT_DOUBLE_EQ(min_uncertainty(50.0, 2500.0, 1.0, 100), 0.01);
    EXPECT_DOUBLE_EQ(min_uncertainty(1.0, 4.0, 1.5, 3), 1.0);
    EXPECT_THROW(min_uncertainty(0.0, 1.0, 1.0, 10), InvalidArgument);
    EXPECT_THROW(min_uncertainty(1.0, -1.0, 1.0, 10), InvalidArgument);
    EXPECT_THROW(min_uncertainty(1.0, 1.0, 0.0, 10), InvalidArgument);
    EXPECT_THROW(min_uncertainty(1.0, 1.0, 1.0, 0), InvalidArgument);
}

TEST(Optimizer, ConvexObjective) {
    int calls = 0;
    const auto f = [&](double x) {
        ++calls;
        return (x - 2.345) * (x - 2.345) + 1.0;
    };
    const auto out = minimize_on_bracket(f, 1.0, 11.0, 21, 1e-6);
    EXPECT_NEAR(out.x, 2.345, 1e-5);
    EXPECT_NEAR(out.value, 1.0, 1e-9);
    EXPECT_EQ(out.evaluations, calls);
    EXPECT_EQ(out.grid.size(), 21u);
    EXPECT_GT(out.grid.front().x, 1.0);
    EXPECT_DOUBLE_EQ(out.grid.back().x, 11.0);
}

TEST(Optimizer, MinimumAtUpperEdgeAndInfiniteObjective) {
    const auto edge = minimize_on_bracket([](double x) { return -x; }, 0.0, 1.0, 11, 1e-8);
    EXPECT_NEAR(edge.x, 1.0, 1e-7);
    EXPECT_THROW(minimize_on_bracket([](double) { return kInfinity; }, 0.0, 1.0), OptimizationFailure);
    EXPECT_THROW(minimize_on_bracket([](double x) { return x; }, 1.0, 1.0), InvalidArgument);
}

TEST(PowerLaw, SyntheticSlope) {
    std::vector<ScalingPoint> pts;
    for (int n : {20, 40, 60, 80, 100}) pts.push_back({n, 1.7 * std::pow(n, -0.93), 0, 0, 0, 0});
    const auto fit = fit_power_law(pts);
    EXPECT_NEAR(fit.slope, -0.93, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(1.7), 1e-12);
    EXPECT_NEAR(fit.slope_stderr, 0.0, 1e-10);
    EXPECT_EQ(fit.points.size(), 5u);
}

TEST(PowerLaw, Errors) {
    EXPECT_THROW(fit_power_law({{10, 0.1, 0, 0, 0, 0}, {20, 0.05, 0, 0, 0, 0}}), InvalidArgument);
    EXPECT_THROW(fit_power_law({{10, 0.1, 0, 0, 0, 0}, {20, kInfinity, 0, 0, 0, 0}, {30, 0.03, 0, 0, 0, 0}}), InvalidArgument);
    EXPECT_THROW(fit_power_law({{10, 0.1, 0, 0, 0, 0}, {10, 0.2, 0, 0, 0, 0}, {10, 0.3, 0, 0, 0, 0}}), InvalidArgument);
}

TEST(ScalingStudy, BjSmallSystemsMatchIndividualOptimization) {
    BjProtocolConfig base;
    base.beta1 = 0.5;
    base.beta2 = 0.05;
    const int ns[] = {4, 6, 8};
    ScalingOptions options;
    options.search.grid_points = 11;
    const auto fit = bj_scaling_study(base, ns, {}, options);
    ASSERT_EQ(fit.points.size(), 3u);
    for (const auto& p : fit.points) {
        BjProtocolConfig c = base;
        c.n = p.n;
        const BjInterferometer bj(c, {});
        const auto direct = optimize_recombination(bj, options.search);
        EXPECT_NEAR(p.control, direct.x, 1e-12);
        // different central-difference steps: O(step^2) apart
        EXPECT_NEAR(p.delta_phi_min, direct.value, 1e-4 * direct.value);
        EXPECT_GT(p.fit_c, 0.0);
    }
}

TEST(ScalingStudy, CheckpointedOptimizerMatchesDirectObjective) {
    IsingProtocolConfig c;
    c.n = 4;
    c.tau = 10.0;
    const IsingInterferometer ising(c, default_ising_settings(c));
    RecombinationSearch search;
    search.grid_points = 9;
    const auto out = optimize_recombination(ising, search);
    const double step = 0.01 / c.n;
    const auto direct = phase_uncertainty([&](double phi) { return ising.run_with(phi, out.x); }, 0.0, step,
                                          default_derivative_floor(c.n));
    EXPECT_NEAR(out.value, direct, 1e-7 * direct);
    for (const auto& g : out.grid) EXPECT_GE(g.value, out.value - 1e-12);
    EXPECT_THROW(optimize_recombination(ising, RecombinationSearch{4.0, 10.0}), InvalidArgument);
}
