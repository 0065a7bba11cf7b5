#include <gtest/gtest.h>

#include "qpt/schedule.hpp"

using namespace qpt;

TEST(Schedule, ConstantAndEvaluate) {
    const auto s = PiecewiseLinearSchedule::constant(2.5, 4.0);
    EXPECT_DOUBLE_EQ(s.evaluate(0.0), 2.5);
    EXPECT_DOUBLE_EQ(s.evaluate(4.0), 2.5);
    EXPECT_DOUBLE_EQ(s.total_duration(), 4.0);
    EXPECT_THROW(s.evaluate(4.0001), InvalidArgument);
    EXPECT_THROW(s.evaluate(-1e-9), InvalidArgument);
    EXPECT_THROW(s.evaluate(std::nan("")), InvalidArgument);
}

TEST(Schedule, Malformed) {
    EXPECT_THROW(PiecewiseLinearSchedule({}), InvalidArgument);
    EXPECT_THROW(PiecewiseLinearSchedule({{1.0, 2.0, 0.0, 1.0}}), InvalidArgument);
    EXPECT_THROW(PiecewiseLinearSchedule({{0.0, 1.0, 0.0, 1.0}, {1.5, 2.0, 1.0, 2.0}}), InvalidArgument);
    EXPECT_THROW(PiecewiseLinearSchedule({{0.0, 1.0, 0.0, 1.0}, {1.0, 2.0, 1.5, 2.0}}), InvalidArgument);
    EXPECT_THROW(PiecewiseLinearSchedule({{0.0, -1.0, 0.0, 1.0}}), InvalidArgument);
}

TEST(BjSplitting, DefaultDurations) {
    const auto s = bj_splitting(11.0, 1.0, 0.0, 0.1, 0.005);
    EXPECT_NEAR(s.total_duration(), 300.0, 1e-12);
    EXPECT_NEAR(s.breakpoints()[1], 100.0, 1e-12);
    EXPECT_DOUBLE_EQ(s.evaluate(0.0), 11.0);
    EXPECT_NEAR(s.evaluate(50.0), 6.0, 1e-12);
    EXPECT_NEAR(s.evaluate(100.0), 1.0, 1e-12);
    EXPECT_NEAR(s.evaluate(200.0), 0.5, 1e-12);
    EXPECT_NEAR(s.evaluate(300.0), 0.0, 1e-12);

    EXPECT_NEAR(bj_splitting(11.0, 1.0, 0.75, 0.1, 0.005).total_duration(), 150.0, 1e-12);
}

TEST(BjSplitting, TruncatedAndErrors) {
    const auto t = bj_splitting(11.0, 1.0, 5.0, 0.1, 0.005);
    EXPECT_NEAR(t.total_duration(), 60.0, 1e-12);
    EXPECT_EQ(t.segments().size(), 1u);
    EXPECT_THROW(bj_splitting(11.0, 1.0, 0.0, 0.0, 0.005), InvalidArgument);
    EXPECT_THROW(bj_splitting(11.0, 1.0, 0.0, 0.1, -1.0), InvalidArgument);
    EXPECT_THROW(bj_splitting(0.5, 1.0, 0.0, 0.1, 0.005), InvalidArgument);
    EXPECT_THROW(bj_splitting(11.0, 1.0, -0.1, 0.1, 0.005), InvalidArgument);
    EXPECT_THROW(bj_splitting(11.0, 1.0, 12.0, 0.1, 0.005), InvalidArgument);
}

TEST(BjRecombination, DurationAndValues) {
    const auto r = bj_recombination(0.0, 1.0, 4.0, 0.1, 0.005);
    EXPECT_NEAR(r.total_duration(), 230.0, 1e-12);
    EXPECT_NEAR(r.evaluate(200.0), 1.0, 1e-12);
    EXPECT_NEAR(r.evaluate(230.0), 4.0, 1e-12);
    EXPECT_NEAR(r.time_at_value(2.5), 215.0, 1e-12);
    EXPECT_THROW(r.time_at_value(5.0), InvalidArgument);
    EXPECT_THROW(bj_recombination(0.0, 1.0, 0.5, 0.1, 0.005), InvalidArgument);
    EXPECT_THROW(bj_recombination(1.0, 1.0, 4.0, 0.1, 0.005), InvalidArgument);
}

TEST(BjRecombination, FullReturnIsReversedSplitting) {
    for (double omega_f : {0.0, 0.25, 0.5, 0.75}) {
        const auto split = bj_splitting(11.0, 1.0, omega_f, 0.1, 0.005);
        const auto back = bj_recombination(omega_f, 1.0, 11.0, 0.1, 0.005);
        const auto rev = split.reversed();
        ASSERT_NEAR(back.total_duration(), split.total_duration(), 1e-9);
        for (int i = 0; i <= 200; ++i) {
            const double t = back.total_duration() * i / 200.0;
            EXPECT_NEAR(back.evaluate(t), rev.evaluate(t), 1e-10);
            EXPECT_NEAR(back.evaluate(t), split.evaluate(split.total_duration() - t), 1e-10);
        }
    }
}

TEST(Schedule, ReversedTwiceAndBreakpoints) {
    const auto s = bj_splitting(11.0, 1.0, 0.5, 0.1, 0.005);
    const auto rr = s.reversed().reversed();
    for (int i = 0; i <= 50; ++i) {
        const double t = s.total_duration() * i / 50.0;
        EXPECT_NEAR(rr.evaluate(t), s.evaluate(t), 1e-12);
    }
    EXPECT_EQ(s.breakpoints().size(), 3u);
    const auto merged = merge_breakpoints(s, PiecewiseLinearSchedule({{0.0, 7.0, 0.0, 1.0}, {7.0, 200.0, 1.0, 1.0}}));
    EXPECT_EQ(merged, (std::vector<double>{0.0, 7.0, 100.0, 200.0}));
}

TEST(IsingRamps, SplittingValues) {
    const auto r = ising_splitting(1.0, -1.0, 10.0);
    EXPECT_DOUBLE_EQ(r.duration(), 10.0);
    EXPECT_DOUBLE_EQ(r.field.evaluate(0.0), 1.0);
    EXPECT_DOUBLE_EQ(r.field.evaluate(5.0), 1.0);
    EXPECT_NEAR(r.field.evaluate(7.5), 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(r.field.evaluate(10.0), 0.0);
    EXPECT_DOUBLE_EQ(r.coupling.evaluate(0.0), 0.0);
    EXPECT_NEAR(r.coupling.evaluate(2.5), -0.5, 1e-15);
    EXPECT_DOUBLE_EQ(r.coupling.evaluate(5.0), -1.0);
    EXPECT_DOUBLE_EQ(r.coupling.evaluate(10.0), -1.0);
}

TEST(IsingRamps, RecombinationValues) {
    const auto full = ising_recombination(1.0, -1.0, 10.0, 10.0);
    EXPECT_DOUBLE_EQ(full.field.evaluate(0.0), 0.0);
    EXPECT_NEAR(full.field.evaluate(2.5), 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(full.field.evaluate(10.0), 1.0);
    EXPECT_DOUBLE_EQ(full.coupling.evaluate(5.0), -1.0);
    EXPECT_NEAR(full.coupling.evaluate(7.5), -0.5, 1e-15);
    EXPECT_DOUBLE_EQ(full.coupling.evaluate(10.0), 0.0);

    // Shorter recombination is a prefix of the full ramp.
    const auto part = ising_recombination(1.0, -1.0, 10.0, 7.0);
    EXPECT_DOUBLE_EQ(part.duration(), 7.0);
    for (int i = 0; i <= 70; ++i) {
        const double t = 0.1 * i;
        EXPECT_NEAR(part.field.evaluate(t), full.field.evaluate(t), 1e-14);
        EXPECT_NEAR(part.coupling.evaluate(t), full.coupling.evaluate(t), 1e-14);
    }
}

TEST(IsingRamps, Errors) {
    EXPECT_THROW(ising_splitting(0.0, -1.0, 10.0), InvalidArgument);
    EXPECT_THROW(ising_splitting(1.0, 1.0, 10.0), InvalidArgument);
    EXPECT_THROW(ising_splitting(1.0, -1.0, 0.0), InvalidArgument);
    EXPECT_THROW(ising_recombination(1.0, -1.0, 10.0, 4.9), InvalidArgument);
    EXPECT_THROW(ising_recombination(1.0, -1.0, 10.0, 10.1), InvalidArgument);
}
