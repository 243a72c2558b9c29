#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace iw::panel {

/// One (unit, period) outcome, optionally with covariates and a group label.
struct Observation {
    std::string unit;
    long period = 0;
    double outcome = 0.0;
    std::vector<double> covariates; // empty when the panel carries none
    std::string group;              // empty when the panel carries none

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// How the shrink point mu is resolved when building per-unit series.
struct MuSpec {
    enum class Mode { Known, PooledEstimate, GroupPooled };
    Mode mode = Mode::PooledEstimate;
    double value = 0.0; // only meaningful for Known

    static MuSpec known(double v) { return {Mode::Known, v}; }
    static MuSpec pooled() { return {Mode::PooledEstimate, 0.0}; }
    static MuSpec group_pooled() { return {Mode::GroupPooled, 0.0}; }
};

/// One unit's ordered outcomes together with its shrink point.
struct Series {
    std::string unit;
    std::vector<double> values; // ordered by period, length >= 1
    double mu = 0.0;
};

/// Immutable, validated panel: observations sorted by (unit, period), no
/// duplicate (unit, period) pairs, finite outcomes. Safe to share across
/// threads; every transform returns a new dataset.
class PanelDataset {
  public:
    static PanelDataset from_observations(std::vector<Observation> obs,
                                          MuSpec mu = MuSpec::pooled(),
                                          std::vector<std::string> covariate_names = {});

    const std::vector<Observation>& observations() const { return obs_; }
    bool empty() const { return obs_.empty(); }
    std::size_t size() const { return obs_.size(); }

    bool balanced() const { return balanced_; }
    /// Common number of periods per unit; present only when balanced.
    std::optional<long> t_common() const { return t_common_; }

    const MuSpec& mu() const { return mu_; }
    PanelDataset with_mu(MuSpec mu) const;

    const std::vector<std::string>& units() const { return units_; }
    std::span<const Observation> unit_observations(std::size_t unit_index) const;
    std::span<const Observation> unit_observations(const std::string& unit) const;

    const std::vector<std::string>& covariate_names() const { return covariate_names_; }
    bool has_group() const { return has_group_; }

    long min_period() const;
    long max_period() const;

    /// Outcomes of one unit, ordered by period, with mu resolved per the
    /// dataset's MuSpec (or overridden).
    Series series(std::size_t unit_index,
                  std::optional<double> mu_override = std::nullopt) const;

    /// Per-unit shrink points implied by the MuSpec.
    std::map<std::string, double> shrink_points() const;

  private:
    std::vector<Observation> obs_;
    std::vector<std::string> units_;
    std::vector<std::size_t> unit_offsets_; // units_.size() + 1 entries
    std::vector<std::string> covariate_names_;
    bool has_group_ = false;
    bool balanced_ = false;
    std::optional<long> t_common_;
    MuSpec mu_;
};

/// Column mapping for CSV ingestion and serialization.
struct CsvSchema {
    std::string unit = "unit";
    std::string period = "period";
    std::string outcome = "outcome";
    std::vector<std::string> covariates;
    std::optional<std::string> group;
};

/// Parses a header+rows CSV stream into a validated panel. Parse failures
/// report the 1-based row number; duplicate (unit, period) pairs and
/// non-finite outcomes are validation errors naming the offender.
PanelDataset load_panel(std::istream& in, const CsvSchema& schema);

/// Writes the panel back out with the same schema; reals keep full precision
/// so load_panel(save_panel(ds)) reproduces ds exactly.
void save_panel(std::ostream& out, const PanelDataset& ds, const CsvSchema& schema);

/// Arithmetic mean of all outcomes.
double pooled_mean(const PanelDataset& ds);

/// Per-group pooled means; requires a group label on every observation.
std::map<std::string, double> group_pooled_means(const PanelDataset& ds);

/// Replaces outcomes by first-step residuals Y - X'beta. When beta is absent
/// it is estimated by pooled OLS with an intercept, the intercept is absorbed
/// into the residuals and the result carries mu = known(0). A supplied beta
/// is applied verbatim (no intercept) and the MuSpec is left unchanged.
PanelDataset residualize_panel(const PanelDataset& ds,
                               std::optional<std::vector<double>> beta = std::nullopt);

/// Raw subject-level record for value-added aggregation.
struct SubjectObservation {
    std::string unit;
    long period = 0;
    std::string subject;
    double outcome = 0.0;
    std::vector<double> covariates;
};

/// Collapses subject-level data to unit-period cells:
/// Y_it = mean_j outcome_ijt - (mean_j X_ijt)' beta.
PanelDataset aggregate_value_added(const std::vector<SubjectObservation>& raw,
                                   const std::vector<double>& beta);

struct Window {
    long origin = 0;   // forecast origin; the window covers [origin-R, origin-1]
    PanelDataset data; // units with every period of the window, restricted to it
};

/// One window per feasible origin (min_period + R .. max_period + 1). Units
/// missing any period inside a window are dropped from that window; windows
/// that retain no unit are skipped. Returns an empty list when the panel's
/// span is shorter than R.
std::vector<Window> rolling_windows(const PanelDataset& ds, int window_length);

/// Pooled OLS with intercept of y on X; returns (intercept, slopes...).
/// Throws on a rank-deficient design.
std::vector<double> pooled_ols(const std::vector<std::vector<double>>& x,
                               const std::vector<double>& y);

} // namespace iw::panel
