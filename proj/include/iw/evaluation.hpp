#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iw/forecast.hpp"

namespace iw::eval {

/// One point of the parameter space: effect variance and shock variance.
struct ThetaPoint {
    double lambda2 = 0.0;
    double sigma2 = 1.0;

    double ratio() const { return lambda2 / sigma2; }
};

/// Signal-to-noise grid. nu records the radius max |ratio - 1| of the grid;
/// grids built from an explicit nu stay inside [1-nu, 1+nu] with nu < 1.
struct ThetaGrid {
    double nu = 0.0;
    std::vector<ThetaPoint> points;

    /// Equally spaced ratios on [1-nu, 1+nu]; requires 0 <= nu < 1.
    static ThetaGrid from_nu(double nu, double sigma2, int count);
};

/// Closed-form MSFE for the simplified setting: "ts-last" -> 2 sigma^2,
/// "pool" -> lambda^2 + sigma^2. Any other method is a domain error (IW has
/// no distribution-free closed form).
double msfe_closed_form(const std::string& method, const ThetaPoint& theta);

/// Mean squared error over (forecast, realization) pairs.
double msfe_empirical(std::span<const std::pair<double, double>> pairs);

/// Each method's MSFE minus the minimum across methods.
std::map<std::string, double> regret(const std::map<std::string, double>& msfes);

/// Elementwise SFE(first) - SFE(second); negative values mean the first
/// method was more accurate.
std::vector<double> delta_sfe(std::span<const double> first_sq_errors,
                              std::span<const double> second_sq_errors);

/// Mean over units of the per-unit MSFE, per method. Skipped records are
/// ignored; a produced record without a matching realization is an error.
std::map<std::string, double>
group_msfe(const std::vector<forecast::Record>& records,
           const std::map<std::pair<std::string, long>, double>& realizations);

/// Sample covariance (divisor n-1) of draws of ((A-mu)^2, (1-W)^2). Weakly
/// negative values are what the weight rules are designed to deliver.
double assumption2_cov(std::span<const std::pair<double, double>> draws);

/// Linear-interpolation quantile (the common "type 7" convention) of an
/// unsorted sample.
double quantile(std::span<const double> sample, double p);

/// Robust tail-heaviness measure (Q.975 - Q.025) / (Q.75 - Q.25).
double crow_siddiqui(std::span<const double> sample);

/// Mean absolute difference / (2 * mean), on the sample as given.
double gini(std::span<const double> sample);

struct DensityCurve {
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth = 0.0;
};

/// Gaussian-kernel density on an even grid spanning [min - 3h, max + 3h].
/// Default bandwidth is Silverman's 0.9 min(sd, IQR/1.34) n^(-1/5).
DensityCurve kde(std::span<const double> sample,
                 std::optional<double> bandwidth = std::nullopt,
                 int grid_points = 512);

/// Per-method MSFE/regret curve over a ThetaGrid, with MC standard errors.
/// msfe_closed holds NaN where no closed form applies; regret is computed
/// from the closed form where available, the MC estimate otherwise.
struct MethodCurve {
    std::string method;
    std::vector<double> msfe_mc;
    std::vector<double> msfe_se;
    std::vector<double> msfe_closed;
    std::vector<double> regret;
    double max_regret = 0.0;
    std::size_t argmax_index = 0;
};

struct RegretReport {
    ThetaGrid grid;
    std::vector<MethodCurve> curves;

    const MethodCurve& curve(const std::string& method) const;
};

/// Fills the regret columns of a report whose MSFE columns are populated:
/// per point, each method's effective MSFE minus the pointwise minimum.
void compute_regrets(RegretReport& report);

} // namespace iw::eval
