#include "iw/distributions.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace iw::sim {

DistributionSpec DistributionSpec::normal(double mean, double variance) {
    if (!(variance > 0.0)) {
        throw std::invalid_argument("normal distribution needs variance > 0");
    }
    return {Kind::Normal, mean, variance};
}

DistributionSpec DistributionSpec::laplace(double location, double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("laplace distribution needs scale > 0");
    }
    return {Kind::Laplace, location, scale};
}

DistributionSpec DistributionSpec::double_pareto(double shape, double scale) {
    if (!(shape > 2.0)) {
        throw std::invalid_argument(
            "double pareto needs shape > 2 for the variance to exist");
    }
    if (!(scale > 0.0)) {
        throw std::invalid_argument("double pareto needs scale > 0");
    }
    return {Kind::DoublePareto, shape, scale};
}

double DistributionSpec::variance() const {
    switch (kind) {
    case Kind::Normal:
        return b;
    case Kind::Laplace:
        return 2.0 * b * b;
    case Kind::DoublePareto:
        // |X| ~ Lomax(theta, beta): E[X^2] = 2 beta^2 / ((theta-1)(theta-2)).
        return 2.0 * b * b / ((a - 1.0) * (a - 2.0));
    }
    throw std::logic_error("unreachable distribution kind");
}

std::string DistributionSpec::to_string() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::Normal:
        os << "normal(mean=" << a << ",var=" << b << ")";
        break;
    case Kind::Laplace:
        os << "laplace(loc=" << a << ",scale=" << b << ")";
        break;
    case Kind::DoublePareto:
        os << "double-pareto(shape=" << a << ",scale=" << b << ")";
        break;
    }
    return os.str();
}

namespace {

// Symmetric double Pareto (two-sided Pareto II): each side of
// f(x) = theta/(2 beta) (1 + |x|/beta)^-(theta+1) carries mass 1/2, so
// |X| ~ Lomax(theta, beta) and the sign is an independent fair coin,
// both recovered from a single uniform.
double double_pareto_quantile(double u, double shape, double scale) {
    const double v = u - 0.5;
    const double sgn = v < 0.0 ? -1.0 : 1.0;
    const double p = 2.0 * std::abs(v); // P(|X| <= x) = 1 - (1 + x/beta)^-theta
    return sgn * scale * (std::pow(1.0 - p, -1.0 / shape) - 1.0);
}

double laplace_quantile(double u, double location, double scale) {
    const double v = u - 0.5;
    const double sgn = v < 0.0 ? -1.0 : 1.0;
    return location - sgn * scale * std::log1p(-2.0 * std::abs(v));
}

} // namespace

double sample(const DistributionSpec& dist, RngStream& rng) {
    switch (dist.kind) {
    case DistributionSpec::Kind::Normal:
        return dist.a + std::sqrt(dist.b) * rng.normal();
    case DistributionSpec::Kind::Laplace:
        return laplace_quantile(rng.uniform(), dist.a, dist.b);
    case DistributionSpec::Kind::DoublePareto:
        return double_pareto_quantile(rng.uniform(), dist.a, dist.b);
    }
    throw std::logic_error("unreachable distribution kind");
}

} // namespace iw::sim
