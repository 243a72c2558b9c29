#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>

#include "iw/panel.hpp"

namespace iw::weights {

/// Which information set a rule's formulas assume. Current-timing rules see
/// the full series and pair with the time-series mean; lagged-timing rules
/// see the history up to T-1 and pair with the last observation, so their
/// noise scale is sigma^2 rather than sigma^2/T.
enum class Timing { Current, Lagged };

enum class Kind {
    IwO,
    IwMr,
    IwMr2,
    IwMsfeIs,
    IwMsfeOos,
    Oracle,
    JamesStein,
    Constant,
};

/// A weight rule plus its parameters, constructible from a plain-text spec
/// "kind[:timing][:param=value]...", e.g. "iw-mr:lagged", "iw-msfe-oos:p=2",
/// "constant:0.5", "james-stein:lambda2=1:sigma2=1".
struct Rule {
    Kind kind = Kind::IwMr;
    Timing timing = Timing::Current;
    int p = 1;                    // IW-MSFE-OOS evaluation span
    std::optional<int> rolling;   // IW-MSFE-OOS rolling-window length (default expanding)
    double lambda2 = 0.0;         // Oracle / James-Stein
    double sigma2 = 1.0;          // Oracle / James-Stein
    double constant = 0.0;        // Constant

    static Rule parse(const std::string& spec);
    std::string to_string() const;

    /// Shortest history the rule can be evaluated on.
    std::size_t min_length() const;
};

/// Outcome of a weight rule: the weight on the time-series forecast, plus
/// diagnostics. zeta_bound is present exactly for the minimax-regret rules.
struct WeightResult {
    double w = 0.0; // in [0, 1]
    std::optional<double> zeta_bound;
    std::optional<double> sigma2_hat;
    bool clipped = false; // a positive part, clamp or degenerate rule fired
};

/// Unbiased variance estimate from first differences:
/// sum (v_t - v_{t+1})^2 / (2 (m-1)). Needs m >= 2.
double sigma2_hat_diff(std::span<const double> values);

/// Estimated oracle weight with positive-part guards. Current timing:
/// numerator (mean sq. deviation - sigma2_hat_diff)+, denominator
/// mean sq. deviation - sum diff^2 / (2T); lagged timing divides by the mean
/// squared deviation alone. The ratio is clamped to [0, 1].
WeightResult iw_o_weight(std::span<const double> values, double mu,
                         Timing timing = Timing::Current);
WeightResult iw_o_weight(const panel::Series& series, Timing timing = Timing::Current);

/// Heuristic bound on the conditional signal-to-noise ratio:
/// max (v_t - mu)^2 over an estimate of the forecast-noise scale
/// (sigma^2/T for current timing, sigma^2 for lagged). Returns +inf when the
/// noise estimate is zero but the numerator is not, 0 when both vanish.
double zeta_bound_hat(std::span<const double> values, double mu,
                      Timing timing = Timing::Current);
double zeta_bound_hat(const panel::Series& series, Timing timing = Timing::Current);

/// Minimax-regret weight for a bounded signal-to-noise ratio:
/// w = 1 - 1/sqrt(bound + 1). Strictly increasing, 0 at 0, 1 at +inf.
double minimax_weight_from_bound(double zeta_bound);

/// Composition of zeta_bound_hat and minimax_weight_from_bound.
WeightResult iw_mr_weight(std::span<const double> values, double mu,
                          Timing timing = Timing::Current);
WeightResult iw_mr_weight(const panel::Series& series, Timing timing = Timing::Current);

/// IW-MR with the alternative noise estimate sum (v_t - vbar)^2 / (T (T-1)).
WeightResult iw_mr2_weight(std::span<const double> values, double mu);
WeightResult iw_mr2_weight(const panel::Series& series);

/// In-sample inverse-MSFE weight: w = SSE_pool / (SSE_ts + SSE_pool) with
/// SSE_ts = sum (v_t - vbar)^2 and SSE_pool = sum (v_t - mu)^2.
WeightResult iw_msfe_is_weight(std::span<const double> values, double mu);
WeightResult iw_msfe_is_weight(const panel::Series& series);

/// Out-of-sample inverse-MSFE weight over the last P one-step origins.
/// The TS forecast at each origin is the expanding mean of the data before it
/// (or the mean of the last `rolling` observations when given); the pooled
/// forecast is mu throughout.
WeightResult iw_msfe_oos_weight(std::span<const double> values, double mu, int p,
                                std::optional<int> rolling = std::nullopt);
WeightResult iw_msfe_oos_weight(const panel::Series& series, int p,
                                std::optional<int> rolling = std::nullopt);

/// Oracle weight lambda^2 / (lambda^2 + sigma^2/T).
double oracle_weight(double lambda2, double sigma2, long t);

/// Same formula as oracle_weight, applied with cross-sectionally homogeneous
/// parameters (the James-Stein comparator).
double james_stein_weight(double lambda2, double sigma2, long t);

/// Feasible homogeneous (lambda^2, sigma^2) estimates for James-Stein on a
/// balanced panel: sigma^2 as the average first-difference estimate across
/// units, lambda^2 as (var across units of the unit means - sigma^2/T)+,
/// sample variance with divisor N-1.
std::pair<double, double> js_homogeneous_estimates(const panel::PanelDataset& ds);

/// Evaluates any rule on the information set it is allowed to see. Lagged
/// rules expect the caller to pass the T-1 history.
WeightResult evaluate(const Rule& rule, std::span<const double> values, double mu);
WeightResult evaluate(const Rule& rule, const panel::Series& series);

} // namespace iw::weights
