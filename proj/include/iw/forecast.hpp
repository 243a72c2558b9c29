#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iw/panel.hpp"
#include "iw/weights.hpp"

namespace iw::forecast {

enum class TsVariant { Mean, Last };

/// Time-series forecast of a unit: its mean, or its last observation.
double ts_forecast(const panel::Series& series, TsVariant variant);

/// Pooled forecast: the shrink point itself.
double pool_forecast(double mu);

/// Weighted average of (value, weight) pairs. Weights must be nonnegative
/// and sum to 1 within 1e-9.
double combine(std::span<const std::pair<double, double>> forecasts);

/// A forecast method: TS (mean/last), Pool, feasible James-Stein (panel
/// estimated), or IW with a weight rule. Parses from "ts", "ts-last",
/// "pool", "js", or any weight-rule spec (which selects IW).
struct MethodSpec {
    enum class Base { Ts, Pool, Js, Iw };
    Base base = Base::Iw;
    TsVariant ts_variant = TsVariant::Mean;
    std::optional<weights::Rule> rule;

    static MethodSpec parse(const std::string& spec);
    std::string label() const;
};

struct SeriesForecast {
    double value = 0.0;
    std::optional<weights::WeightResult> weight;
};

/// Forecast of the next outcome of one series under a method. IW rules with
/// lagged timing see the history without its last observation and combine
/// with the last observation as TS base; current timing uses the mean.
/// The panel-estimated James-Stein method needs panel context and is
/// rejected here (forecast_panel handles it).
SeriesForecast forecast_one(const MethodSpec& method, std::span<const double> values,
                            double mu);

/// One forecast (or a skip notice) for a (unit, origin, method) triple.
struct Record {
    std::string unit;
    long origin = 0;
    std::string method;
    std::optional<double> value;
    std::optional<weights::WeightResult> weight;
    std::string skip_reason; // empty when the forecast was produced
};

enum class OriginPolicy {
    Latest, // one forecast per unit at max_period + 1
    All,    // every feasible origin (for out-of-sample evaluation)
};

struct ForecastOptions {
    OriginPolicy policy = OriginPolicy::Latest;
    std::optional<int> window;      // rolling window length; expanding when absent
    std::optional<double> mu;       // overrides the dataset's MuSpec
    std::optional<long> max_origin; // cap origins (evaluation stops at max_period)
};

/// Produces one record per (unit, origin, method), sorted by (unit, origin,
/// method). Shrink points and James-Stein estimates are recomputed per origin
/// from the data visible at that origin. Per-unit precondition failures are
/// reported as skipped records, not errors. Deterministic.
std::vector<Record> forecast_panel(const panel::PanelDataset& ds,
                                   const std::vector<MethodSpec>& methods,
                                   const ForecastOptions& options = {});

/// CSV schema: unit, origin, method, value, weight, zeta_bound, clipped,
/// skip_reason. Reals keep full precision.
void write_records_csv(std::ostream& out, const std::vector<Record>& records);
std::vector<Record> read_records_csv(std::istream& in);

} // namespace iw::forecast
