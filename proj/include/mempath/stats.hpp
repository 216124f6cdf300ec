#pragma once

#include <span>
#include <vector>

namespace mempath::stats {

double mean(std::span<const double> v);
double stdev(std::span<const double> v); // sample standard deviation, n-1

// Spearman rank correlation, average ranks on ties. Throws InsufficientData
// for fewer than three points or a constant input.
double spearman(std::span<const double> a, std::span<const double> b);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<long> counts;
    long underflow = 0;
    long overflow = 0;
};
Histogram histogram(std::span<const double> values, double lo, double hi, int bins);

} // namespace mempath::stats
