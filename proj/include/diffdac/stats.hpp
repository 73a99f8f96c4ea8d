#pragma once

#include <span>

namespace diffdac {

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

double mean(std::span<const double> xs);

/// Linear-interpolation quantile (the "type 7" rule), p in [0, 1].
double quantile(std::span<const double> xs, double p);

Quartiles quartiles(std::span<const double> xs);

} // namespace diffdac
