#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iw/distributions.hpp"
#include "iw/evaluation.hpp"
#include "iw/forecast.hpp"

namespace iw::sim {

struct McConfig {
    long replications = 10000;
    std::uint64_t seed = 1;
    int threads = 0; // 0 = hardware concurrency
};

/// One experiment point: an effect distribution (centered at mu) plus a
/// shock distribution. theta is set when the point sits on a parameter grid,
/// enabling closed-form MSFEs for the simplified TS/Pool forecasts.
struct PointSpec {
    std::string label;
    DistributionSpec effect;
    DistributionSpec shock = DistributionSpec::normal(0.0, 1.0);
    std::optional<eval::ThetaPoint> theta;
};

enum class Preset { RegretCurve, TailHeaviness, WeightComparison, Tyranny, Custom };

std::string preset_name(Preset p);
Preset preset_from_name(const std::string& name); // throws, message lists presets

/// A full Monte Carlo experiment: replications of a T-period unit, one
/// forecast per method, scored against the realized next outcome.
struct ExperimentConfig {
    Preset preset = Preset::Custom;
    std::string name = "custom"; // artifact file prefix
    int T = 3; // observed periods per replication; the target is period T+1
    long replications = 10000;
    std::uint64_t seed = 1;
    int threads = 0;
    double mu = 0.0;
    std::vector<forecast::MethodSpec> methods;
    std::vector<PointSpec> points;
    bool use_closed_forms = false;   // ts-last / pool regret from Lemma-type forms
    bool record_assumption2 = false; // cov((A-mu)^2, (1-W)^2) per IW method
    bool collect_effect_draws = false; // CS kurtosis + sample variance of A
    // ΔSFE scatter (A, SFE[first] - SFE[second]) per replication.
    std::optional<std::pair<std::string, std::string>> scatter;

    /// Rule/timing/length conflicts are config errors raised before sampling.
    void validate() const;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Canned experiment matching one of the named presets. seed/replications/
/// threads can be overridden afterwards. For Tyranny, design_filter selects
/// a single design ("normal1", "normal3", "laplace", "pareto").
ExperimentConfig make_preset(Preset preset,
                             const std::string& design_filter = std::string{});

/// The tyranny comparison, one config per design (all four when the filter
/// is empty): IW-MR against the fixed-parameter James-Stein forecast, with a
/// per-replication (A, ΔSFE) scatter.
std::vector<ExperimentConfig> make_tyranny_configs(const std::string& design_filter = {});

struct MethodStats {
    std::string method;
    double msfe = 0.0;
    double msfe_se = 0.0;
    std::optional<double> msfe_closed;
    std::optional<double> assumption2_cov;
    std::optional<double> assumption2_cov_se;
};

struct PointResult {
    std::string label;
    std::optional<eval::ThetaPoint> theta;
    std::vector<MethodStats> methods;
    std::optional<double> effect_sample_variance;
    std::optional<double> effect_cs_kurtosis;
    std::optional<double> effect_cs_se; // batch-means standard error
    std::vector<std::pair<double, double>> scatter; // (A, ΔSFE)

    const MethodStats& method(const std::string& name) const;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<PointResult> points;

    const PointResult& point(const std::string& label) const;

    /// Per-grid-point MSFE/regret curves; requires theta on every point.
    eval::RegretReport regret_report() const;

    /// One row per (point, method): label, lambda2, sigma2, ratio, method,
    /// msfe, msfe_se, msfe_closed, regret, cov, cov_se, effect stats.
    std::string curves_csv() const;

    /// Headline numbers: per-method max regret and argmax (grid runs),
    /// mean ΔSFE per point (scatter runs), covariances and CS diagnostics.
    nlohmann::json summary_json() const;
};

/// Runs the experiment. Deterministic: a fixed config yields byte-identical
/// results for any thread count (counter-based per-replication streams,
/// batch-ordered reduction).
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Points (ratio * sigma2, sigma2) for each requested signal-to-noise ratio.
eval::ThetaGrid theta_grid_from_ratios(double sigma2, const std::vector<double>& ratios);

/// Monte Carlo minimax-regret scan over a parameter grid: Normal effects and
/// shocks, simplified T-origin design by default (T observed periods, last
/// observation as TS base for lagged rules). Closed forms are used for the
/// ts-last and pool curves; everything else is simulated.
eval::RegretReport minimax_regret_scan(const eval::ThetaGrid& grid,
                                       const std::vector<forecast::MethodSpec>& methods,
                                       const McConfig& mc, int T = 3);

} // namespace iw::sim
