#include "iw/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "iw/csv.hpp"

namespace iw::panel {

PanelDataset PanelDataset::from_observations(std::vector<Observation> obs, MuSpec mu,
                                             std::vector<std::string> covariate_names) {
    std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
        return a.unit != b.unit ? a.unit < b.unit : a.period < b.period;
    });
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!std::isfinite(obs[i].outcome)) {
            std::ostringstream os;
            os << "non-finite outcome for unit '" << obs[i].unit << "' period "
               << obs[i].period;
            throw std::invalid_argument(os.str());
        }
        if (i > 0 && obs[i].unit == obs[i - 1].unit && obs[i].period == obs[i - 1].period) {
            std::ostringstream os;
            os << "duplicate observation for unit '" << obs[i].unit << "' period "
               << obs[i].period;
            throw std::invalid_argument(os.str());
        }
    }
    if (mu.mode == MuSpec::Mode::Known && !std::isfinite(mu.value)) {
        throw std::invalid_argument("known mu must be finite");
    }

    PanelDataset ds;
    ds.obs_ = std::move(obs);
    ds.mu_ = mu;
    for (std::size_t i = 0; i < ds.obs_.size(); ++i) {
        if (i == 0 || ds.obs_[i].unit != ds.obs_[i - 1].unit) {
            ds.units_.push_back(ds.obs_[i].unit);
            ds.unit_offsets_.push_back(i);
        }
    }
    ds.unit_offsets_.push_back(ds.obs_.size());

    ds.has_group_ = std::any_of(ds.obs_.begin(), ds.obs_.end(),
                                [](const Observation& o) { return !o.group.empty(); });

    std::size_t n_cov = 0;
    for (const auto& o : ds.obs_) {
        n_cov = std::max(n_cov, o.covariates.size());
    }
    if (covariate_names.empty() && n_cov > 0) {
        for (std::size_t k = 0; k < n_cov; ++k) {
            covariate_names.push_back("x" + std::to_string(k + 1));
        }
    }
    ds.covariate_names_ = std::move(covariate_names);

    // Balanced iff every unit has the first unit's period set.
    ds.balanced_ = !ds.obs_.empty();
    if (!ds.units_.empty()) {
        const auto first = ds.unit_observations(std::size_t{0});
        for (std::size_t u = 1; u < ds.units_.size() && ds.balanced_; ++u) {
            const auto span = ds.unit_observations(u);
            if (span.size() != first.size()) {
                ds.balanced_ = false;
                break;
            }
            for (std::size_t i = 0; i < span.size(); ++i) {
                if (span[i].period != first[i].period) {
                    ds.balanced_ = false;
                    break;
                }
            }
        }
        if (ds.balanced_) {
            ds.t_common_ = static_cast<long>(first.size());
        }
    }
    return ds;
}

PanelDataset PanelDataset::with_mu(MuSpec mu) const {
    PanelDataset copy = *this;
    if (mu.mode == MuSpec::Mode::Known && !std::isfinite(mu.value)) {
        throw std::invalid_argument("known mu must be finite");
    }
    copy.mu_ = mu;
    return copy;
}

std::span<const Observation> PanelDataset::unit_observations(std::size_t unit_index) const {
    if (unit_index >= units_.size()) {
        throw std::invalid_argument("unit index out of range");
    }
    const std::size_t lo = unit_offsets_[unit_index];
    const std::size_t hi = unit_offsets_[unit_index + 1];
    return {obs_.data() + lo, hi - lo};
}

std::span<const Observation> PanelDataset::unit_observations(const std::string& unit) const {
    const auto it = std::lower_bound(units_.begin(), units_.end(), unit);
    if (it == units_.end() || *it != unit) {
        throw std::invalid_argument("unknown unit '" + unit + "'");
    }
    return unit_observations(static_cast<std::size_t>(it - units_.begin()));
}

long PanelDataset::min_period() const {
    if (obs_.empty()) {
        throw std::invalid_argument("empty panel has no periods");
    }
    long m = obs_.front().period;
    for (const auto& o : obs_) {
        m = std::min(m, o.period);
    }
    return m;
}

long PanelDataset::max_period() const {
    if (obs_.empty()) {
        throw std::invalid_argument("empty panel has no periods");
    }
    long m = obs_.front().period;
    for (const auto& o : obs_) {
        m = std::max(m, o.period);
    }
    return m;
}

Series PanelDataset::series(std::size_t unit_index, std::optional<double> mu_override) const {
    const auto span = unit_observations(unit_index);
    Series s;
    s.unit = units_[unit_index];
    s.values.reserve(span.size());
    for (const auto& o : span) {
        s.values.push_back(o.outcome);
    }
    if (mu_override) {
        s.mu = *mu_override;
    } else {
        switch (mu_.mode) {
        case MuSpec::Mode::Known:
            s.mu = mu_.value;
            break;
        case MuSpec::Mode::PooledEstimate:
            s.mu = pooled_mean(*this);
            break;
        case MuSpec::Mode::GroupPooled: {
            const auto means = group_pooled_means(*this);
            s.mu = means.at(span.front().group);
            break;
        }
        }
    }
    return s;
}

std::map<std::string, double> PanelDataset::shrink_points() const {
    std::map<std::string, double> out;
    if (mu_.mode == MuSpec::Mode::Known) {
        for (const auto& u : units_) {
            out[u] = mu_.value;
        }
    } else if (mu_.mode == MuSpec::Mode::PooledEstimate) {
        const double m = pooled_mean(*this);
        for (const auto& u : units_) {
            out[u] = m;
        }
    } else {
        const auto means = group_pooled_means(*this);
        for (std::size_t u = 0; u < units_.size(); ++u) {
            out[units_[u]] = means.at(unit_observations(u).front().group);
        }
    }
    return out;
}

PanelDataset load_panel(std::istream& in, const CsvSchema& schema) {
    auto header = csv::read_record(in);
    if (!header) {
        throw std::runtime_error("empty CSV input: missing header row");
    }
    auto column = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header->begin(), header->end(), name);
        if (it == header->end()) {
            throw std::runtime_error("CSV header is missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header->begin());
    };
    const std::size_t c_unit = column(schema.unit);
    const std::size_t c_period = column(schema.period);
    const std::size_t c_outcome = column(schema.outcome);
    std::vector<std::size_t> c_cov;
    for (const auto& name : schema.covariates) {
        c_cov.push_back(column(name));
    }
    std::optional<std::size_t> c_group;
    if (schema.group) {
        c_group = column(*schema.group);
    }

    std::vector<Observation> obs;
    long row = 1; // header was row 1
    while (auto rec = csv::read_record(in)) {
        ++row;
        if (rec->size() == 1 && rec->front().empty()) {
            continue; // trailing blank line
        }
        if (rec->size() != header->size()) {
            std::ostringstream os;
            os << "row " << row << ": expected " << header->size() << " fields, got "
               << rec->size();
            throw std::runtime_error(os.str());
        }
        Observation o;
        o.unit = (*rec)[c_unit];
        try {
            o.period = csv::parse_long((*rec)[c_period]);
            o.outcome = csv::parse_double((*rec)[c_outcome]);
            for (const std::size_t c : c_cov) {
                o.covariates.push_back(csv::parse_double((*rec)[c]));
            }
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "row " << row << ": " << e.what();
            throw std::runtime_error(os.str());
        }
        if (o.unit.empty()) {
            std::ostringstream os;
            os << "row " << row << ": empty unit id";
            throw std::runtime_error(os.str());
        }
        if (c_group) {
            o.group = (*rec)[*c_group];
        }
        obs.push_back(std::move(o));
    }
    return PanelDataset::from_observations(std::move(obs), MuSpec::pooled(),
                                           schema.covariates);
}

void save_panel(std::ostream& out, const PanelDataset& ds, const CsvSchema& schema) {
    std::vector<std::string> header{schema.unit, schema.period, schema.outcome};
    for (const auto& name : schema.covariates) {
        header.push_back(name);
    }
    if (schema.group) {
        header.push_back(*schema.group);
    }
    csv::write_record(out, header);
    for (const auto& o : ds.observations()) {
        std::vector<std::string> rec{o.unit, std::to_string(o.period),
                                     csv::format_double(o.outcome)};
        for (std::size_t k = 0; k < schema.covariates.size(); ++k) {
            rec.push_back(k < o.covariates.size() ? csv::format_double(o.covariates[k])
                                                  : std::string{});
        }
        if (schema.group) {
            rec.push_back(o.group);
        }
        csv::write_record(out, rec);
    }
}

double pooled_mean(const PanelDataset& ds) {
    if (ds.empty()) {
        throw std::invalid_argument("pooled mean of an empty panel");
    }
    double sum = 0.0;
    for (const auto& o : ds.observations()) {
        sum += o.outcome;
    }
    return sum / static_cast<double>(ds.size());
}

std::map<std::string, double> group_pooled_means(const PanelDataset& ds) {
    if (ds.empty()) {
        throw std::invalid_argument("group means of an empty panel");
    }
    std::map<std::string, std::pair<double, long>> acc;
    for (const auto& o : ds.observations()) {
        if (o.group.empty()) {
            throw std::invalid_argument("observation for unit '" + o.unit +
                                        "' has no group label");
        }
        auto& [sum, n] = acc[o.group];
        sum += o.outcome;
        ++n;
    }
    std::map<std::string, double> out;
    for (const auto& [g, sn] : acc) {
        out[g] = sn.first / static_cast<double>(sn.second);
    }
    return out;
}

std::vector<double> pooled_ols(const std::vector<std::vector<double>>& x,
                               const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty()) {
        throw std::invalid_argument("pooled OLS needs matching, non-empty x and y");
    }
    const std::size_t k = x.front().size() + 1; // intercept + slopes
    for (const auto& row : x) {
        if (row.size() + 1 != k) {
            throw std::invalid_argument("covariate length mismatch across observations");
        }
    }
    // Normal equations (X'X) b = X'y with X = [1, covariates].
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> row(k);
        row[0] = 1.0;
        for (std::size_t j = 1; j < k; ++j) {
            row[j] = x[i][j - 1];
        }
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c < k; ++c) {
                a[r][c] += row[r] * row[c];
            }
            a[r][k] += row[r] * y[i];
        }
    }
    // Gaussian elimination with partial pivoting; a near-zero pivot relative
    // to the matrix scale marks a rank-deficient design.
    double scale = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        scale = std::max(scale, std::abs(a[r][r]));
    }
    const double tol = scale * 1e-12;
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < k; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        if (std::abs(a[pivot][col]) <= tol) {
            throw std::invalid_argument("rank-deficient design matrix in pooled OLS");
        }
        std::swap(a[col], a[pivot]);
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) {
                continue;
            }
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= k; ++c) {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    std::vector<double> beta(k);
    for (std::size_t r = 0; r < k; ++r) {
        beta[r] = a[r][k] / a[r][r];
    }
    return beta;
}

PanelDataset residualize_panel(const PanelDataset& ds,
                               std::optional<std::vector<double>> beta) {
    if (ds.empty()) {
        throw std::invalid_argument("residualize of an empty panel");
    }
    const std::size_t n_cov = ds.covariate_names().size();
    for (const auto& o : ds.observations()) {
        if (o.covariates.size() != n_cov || n_cov == 0) {
            throw std::invalid_argument(
                "residualize requires covariates on every observation");
        }
    }
    std::vector<Observation> out = ds.observations();
    if (beta) {
        if (beta->size() != n_cov) {
            throw std::invalid_argument("beta length does not match covariate count");
        }
        for (auto& o : out) {
            double fit = 0.0;
            for (std::size_t j = 0; j < n_cov; ++j) {
                fit += o.covariates[j] * (*beta)[j];
            }
            o.outcome -= fit;
        }
        return PanelDataset::from_observations(std::move(out), ds.mu(),
                                               ds.covariate_names());
    }
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    x.reserve(ds.size());
    y.reserve(ds.size());
    for (const auto& o : ds.observations()) {
        x.push_back(o.covariates);
        y.push_back(o.outcome);
    }
    const std::vector<double> b = pooled_ols(x, y); // (intercept, slopes)
    for (auto& o : out) {
        double fit = b[0];
        for (std::size_t j = 0; j < n_cov; ++j) {
            fit += o.covariates[j] * b[j + 1];
        }
        o.outcome -= fit;
    }
    // Intercept absorbed: residuals are centered, so mu is known to be zero.
    return PanelDataset::from_observations(std::move(out), MuSpec::known(0.0),
                                           ds.covariate_names());
}

PanelDataset aggregate_value_added(const std::vector<SubjectObservation>& raw,
                                   const std::vector<double>& beta) {
    if (raw.empty()) {
        throw std::invalid_argument("value-added aggregation of an empty collection");
    }
    struct Cell {
        double outcome_sum = 0.0;
        std::vector<double> covariate_sum;
        long n = 0;
    };
    std::map<std::pair<std::string, long>, Cell> cells;
    for (const auto& s : raw) {
        if (s.covariates.size() != beta.size()) {
            throw std::invalid_argument("covariate length does not match beta for unit '" +
                                        s.unit + "'");
        }
        auto& cell = cells[{s.unit, s.period}];
        cell.outcome_sum += s.outcome;
        if (cell.covariate_sum.empty()) {
            cell.covariate_sum.assign(beta.size(), 0.0);
        }
        for (std::size_t j = 0; j < beta.size(); ++j) {
            cell.covariate_sum[j] += s.covariates[j];
        }
        ++cell.n;
    }
    std::vector<Observation> obs;
    obs.reserve(cells.size());
    for (const auto& [key, cell] : cells) {
        const double n = static_cast<double>(cell.n);
        double y = cell.outcome_sum / n;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            y -= cell.covariate_sum[j] / n * beta[j];
        }
        obs.push_back({key.first, key.second, y, {}, {}});
    }
    return PanelDataset::from_observations(std::move(obs));
}

std::vector<Window> rolling_windows(const PanelDataset& ds, int window_length) {
    if (window_length < 1) {
        throw std::invalid_argument("window length must be >= 1");
    }
    std::vector<Window> out;
    if (ds.empty()) {
        return out;
    }
    const long lo = ds.min_period();
    const long hi = ds.max_period();
    if (hi - lo + 1 < window_length) {
        return out; // span shorter than the window: no feasible origin
    }
    for (long origin = lo + window_length; origin <= hi + 1; ++origin) {
        const long w_lo = origin - window_length;
        const long w_hi = origin - 1;
        std::vector<Observation> kept;
        for (std::size_t u = 0; u < ds.units().size(); ++u) {
            const auto span = ds.unit_observations(u);
            std::vector<const Observation*> in_window;
            for (const auto& o : span) {
                if (o.period >= w_lo && o.period <= w_hi) {
                    in_window.push_back(&o);
                }
            }
            // Contiguity: the unit must have every period of the window.
            if (static_cast<int>(in_window.size()) != window_length) {
                continue;
            }
            for (const auto* o : in_window) {
                kept.push_back(*o);
            }
        }
        if (kept.empty()) {
            continue;
        }
        out.push_back({origin, PanelDataset::from_observations(std::move(kept), ds.mu(),
                                                               ds.covariate_names())});
    }
    return out;
}

} // namespace iw::panel
