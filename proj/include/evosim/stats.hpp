#pragma once

#include <cstddef>
#include <span>

namespace evosim {

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // n - 1 denominator
    double se = 0.0;
};

SampleSummary summarize(std::span<const double> xs);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

// Two-sided Student-t interval for the mean at `level` (e.g. 0.99).
Interval t_interval(std::span<const double> xs, double level);

enum class Tail { less, greater };

// One-sample t-test of the mean against mu0.
double t_test_p(std::span<const double> xs, double mu0, Tail tail);

// Exact binomial sign test: P(at least k successes in n fair trials).
double sign_test_p(std::size_t successes, std::size_t n);

}  // namespace evosim
