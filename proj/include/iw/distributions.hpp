#pragma once

#include <string>

#include "iw/rng.hpp"

namespace iw::sim {

/// Effect/shock distribution used by the Monte Carlo designs. All three
/// families are symmetric about their location so the random-effect mean can
/// be handled as a separate shift.
struct DistributionSpec {
    enum class Kind { Normal, Laplace, DoublePareto };

    Kind kind = Kind::Normal;
    // Normal: a = mean, b = variance.
    // Laplace: a = location, b = scale (variance = 2 b^2).
    // DoublePareto: a = shape theta (> 2 so the variance exists), b = scale beta.
    double a = 0.0;
    double b = 1.0;

    static DistributionSpec normal(double mean, double variance);
    static DistributionSpec laplace(double location, double scale);
    static DistributionSpec double_pareto(double shape, double scale);

    /// Population variance of the distribution.
    double variance() const;

    std::string to_string() const;
};

/// Draws one variate. Normal uses Box-Muller; Laplace and double Pareto
/// invert their CDFs.
double sample(const DistributionSpec& dist, RngStream& rng);

} // namespace iw::sim
