#include "iw/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace iw::eval {

ThetaGrid ThetaGrid::from_nu(double nu, double sigma2, int count) {
    if (nu < 0.0 || nu >= 1.0) {
        throw std::invalid_argument("nu must lie in [0, 1)");
    }
    if (!(sigma2 > 0.0)) {
        throw std::invalid_argument("sigma2 must be positive");
    }
    if (count < 1) {
        throw std::invalid_argument("grid needs at least one point");
    }
    ThetaGrid grid;
    grid.nu = nu;
    for (int i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
        const double ratio = (1.0 - nu) + 2.0 * nu * frac;
        grid.points.push_back({ratio * sigma2, sigma2});
    }
    return grid;
}

double msfe_closed_form(const std::string& method, const ThetaPoint& theta) {
    if (!(theta.sigma2 > 0.0) || theta.lambda2 < 0.0) {
        throw std::invalid_argument("invalid theta point");
    }
    if (method == "ts-last") {
        return 2.0 * theta.sigma2;
    }
    if (method == "pool") {
        return theta.lambda2 + theta.sigma2;
    }
    throw std::invalid_argument("no closed-form MSFE for method '" + method + "'");
}

double msfe_empirical(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) {
        throw std::invalid_argument("MSFE of an empty collection");
    }
    double s = 0.0;
    for (const auto& [forecast, realization] : pairs) {
        const double e = realization - forecast;
        s += e * e;
    }
    return s / static_cast<double>(pairs.size());
}

std::map<std::string, double> regret(const std::map<std::string, double>& msfes) {
    if (msfes.empty()) {
        throw std::invalid_argument("regret of an empty method set");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [_, v] : msfes) {
        best = std::min(best, v);
    }
    std::map<std::string, double> out;
    for (const auto& [m, v] : msfes) {
        out[m] = v - best;
    }
    return out;
}

std::vector<double> delta_sfe(std::span<const double> first_sq_errors,
                              std::span<const double> second_sq_errors) {
    if (first_sq_errors.size() != second_sq_errors.size()) {
        throw std::invalid_argument("delta SFE needs aligned error vectors");
    }
    std::vector<double> out(first_sq_errors.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = first_sq_errors[i] - second_sq_errors[i];
    }
    return out;
}

std::map<std::string, double>
group_msfe(const std::vector<forecast::Record>& records,
           const std::map<std::pair<std::string, long>, double>& realizations) {
    // method -> unit -> (sum of squared errors, count)
    std::map<std::string, std::map<std::string, std::pair<double, long>>> acc;
    for (const auto& r : records) {
        if (!r.skip_reason.empty() || !r.value) {
            continue;
        }
        const auto it = realizations.find({r.unit, r.origin});
        if (it == realizations.end()) {
            std::ostringstream os;
            os << "no realization for unit '" << r.unit << "' at origin " << r.origin;
            throw std::invalid_argument(os.str());
        }
        const double e = it->second - *r.value;
        auto& [sum, n] = acc[r.method][r.unit];
        sum += e * e;
        ++n;
    }
    std::map<std::string, double> out;
    for (const auto& [method, by_unit] : acc) {
        double total = 0.0;
        for (const auto& [_, sn] : by_unit) {
            total += sn.first / static_cast<double>(sn.second);
        }
        out[method] = total / static_cast<double>(by_unit.size());
    }
    return out;
}

double assumption2_cov(std::span<const std::pair<double, double>> draws) {
    const std::size_t n = draws.size();
    if (n < 2) {
        throw std::invalid_argument("covariance needs at least 2 draws");
    }
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : draws) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double s = 0.0;
    for (const auto& [x, y] : draws) {
        s += (x - mx) * (y - my);
    }
    return s / static_cast<double>(n - 1);
}

double quantile(std::span<const double> sample, double p) {
    if (sample.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("quantile level must lie in [0, 1]");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double crow_siddiqui(std::span<const double> sample) {
    if (sample.size() < 4) {
        throw std::invalid_argument("crow-siddiqui needs at least 4 observations");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double p) {
        const double h = static_cast<double>(sorted.size() - 1) * p;
        const std::size_t lo = static_cast<std::size_t>(h);
        if (lo + 1 >= sorted.size()) {
            return sorted.back();
        }
        return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
    };
    const double iqr = q(0.75) - q(0.25);
    if (!(iqr > 0.0)) {
        throw std::invalid_argument("crow-siddiqui needs a positive interquartile range");
    }
    return (q(0.975) - q(0.025)) / iqr;
}

double gini(std::span<const double> sample) {
    if (sample.empty()) {
        throw std::invalid_argument("gini of an empty sample");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += sorted[i];
        // sum_{i<j} (x_(j) - x_(i)) accumulated via rank weights
        weighted += (2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0) *
                    sorted[i];
    }
    const double mean = sum / static_cast<double>(n);
    if (mean == 0.0) {
        throw std::invalid_argument("gini undefined for a sample with zero mean");
    }
    // mean absolute difference = 2 * weighted / n^2; gini = MAD / (2 mean)
    return weighted / (static_cast<double>(n) * static_cast<double>(n) * mean);
}

DensityCurve kde(std::span<const double> sample, std::optional<double> bandwidth,
                 int grid_points) {
    const std::size_t n = sample.size();
    if (n < 2) {
        throw std::invalid_argument("kde needs at least 2 observations");
    }
    if (grid_points < 2) {
        throw std::invalid_argument("kde needs at least 2 grid points");
    }
    double mean = 0.0;
    for (const double v : sample) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const double v : sample) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);

    double h;
    if (bandwidth) {
        h = *bandwidth;
        if (!(h > 0.0)) {
            throw std::invalid_argument("kde bandwidth must be positive");
        }
    } else {
        // Silverman's rule of thumb; IQR = 0 falls back to the sd alone.
        double spread = sd;
        if (iqr > 0.0) {
            spread = std::min(sd, iqr / 1.34);
        }
        h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
        if (!(h > 0.0)) {
            throw std::invalid_argument("kde is undefined for a zero-spread sample");
        }
    }

    const double lo = sorted.front() - 3.0 * h;
    const double hi = sorted.back() + 3.0 * h;
    DensityCurve curve;
    curve.bandwidth = h;
    curve.x.resize(static_cast<std::size_t>(grid_points));
    curve.density.resize(static_cast<std::size_t>(grid_points));
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    const double norm =
        1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * std::numbers::pi));
    for (int g = 0; g < grid_points; ++g) {
        const double x = lo + step * static_cast<double>(g);
        double f = 0.0;
        for (const double v : sample) {
            const double z = (x - v) / h;
            f += std::exp(-0.5 * z * z);
        }
        curve.x[static_cast<std::size_t>(g)] = x;
        curve.density[static_cast<std::size_t>(g)] = f * norm;
    }
    return curve;
}

const MethodCurve& RegretReport::curve(const std::string& method) const {
    for (const auto& c : curves) {
        if (c.method == method) {
            return c;
        }
    }
    throw std::invalid_argument("no curve for method '" + method + "'");
}

void compute_regrets(RegretReport& report) {
    const std::size_t n = report.grid.points.size();
    for (auto& c : report.curves) {
        if (c.msfe_mc.size() != n || c.msfe_closed.size() != n) {
            throw std::invalid_argument("curve length does not match the grid");
        }
        c.regret.assign(n, 0.0);
    }
    auto effective = [](const MethodCurve& c, std::size_t i) {
        return std::isnan(c.msfe_closed[i]) ? c.msfe_mc[i] : c.msfe_closed[i];
    };
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : report.curves) {
            best = std::min(best, effective(c, i));
        }
        for (auto& c : report.curves) {
            c.regret[i] = effective(c, i) - best;
        }
    }
    for (auto& c : report.curves) {
        c.max_regret = 0.0;
        c.argmax_index = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (c.regret[i] > c.max_regret) {
                c.max_regret = c.regret[i];
                c.argmax_index = i;
            }
        }
    }
}

} // namespace iw::eval
