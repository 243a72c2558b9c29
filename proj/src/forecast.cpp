#include "iw/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "iw/csv.hpp"

namespace iw::forecast {

double ts_forecast(const panel::Series& series, TsVariant variant) {
    if (series.values.empty()) {
        throw std::invalid_argument("ts forecast of an empty series");
    }
    if (variant == TsVariant::Last) {
        return series.values.back();
    }
    double s = 0.0;
    for (const double v : series.values) {
        s += v;
    }
    return s / static_cast<double>(series.values.size());
}

double pool_forecast(double mu) {
    if (!std::isfinite(mu)) {
        throw std::invalid_argument("pool forecast needs a finite mu");
    }
    return mu;
}

double combine(std::span<const std::pair<double, double>> forecasts) {
    double wsum = 0.0;
    double value = 0.0;
    for (const auto& [v, w] : forecasts) {
        if (w < 0.0) {
            throw std::invalid_argument("combination weights must be nonnegative");
        }
        wsum += w;
        value += v * w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "combination weights sum to " << wsum << ", expected 1";
        throw std::invalid_argument(os.str());
    }
    return value;
}

MethodSpec MethodSpec::parse(const std::string& spec) {
    MethodSpec m;
    if (spec == "ts" || spec == "ts-mean") {
        m.base = Base::Ts;
        m.ts_variant = TsVariant::Mean;
        return m;
    }
    if (spec == "ts-last") {
        m.base = Base::Ts;
        m.ts_variant = TsVariant::Last;
        return m;
    }
    if (spec == "pool") {
        m.base = Base::Pool;
        return m;
    }
    if (spec == "js") {
        m.base = Base::Js;
        return m;
    }
    m.base = Base::Iw;
    m.rule = weights::Rule::parse(spec);
    m.ts_variant = m.rule->timing == weights::Timing::Lagged ? TsVariant::Last
                                                             : TsVariant::Mean;
    return m;
}

std::string MethodSpec::label() const {
    switch (base) {
    case Base::Ts:
        return ts_variant == TsVariant::Last ? "ts-last" : "ts-mean";
    case Base::Pool:
        return "pool";
    case Base::Js:
        return "js";
    case Base::Iw:
        return rule->to_string();
    }
    return "?";
}

SeriesForecast forecast_one(const MethodSpec& method, std::span<const double> values,
                            double mu) {
    if (values.empty()) {
        throw std::invalid_argument("forecast of an empty series");
    }
    SeriesForecast out;
    switch (method.base) {
    case MethodSpec::Base::Ts: {
        if (method.ts_variant == TsVariant::Last) {
            out.value = values.back();
        } else {
            double s = 0.0;
            for (const double v : values) {
                s += v;
            }
            out.value = s / static_cast<double>(values.size());
        }
        return out;
    }
    case MethodSpec::Base::Pool:
        out.value = pool_forecast(mu);
        return out;
    case MethodSpec::Base::Js:
        throw std::invalid_argument(
            "panel-estimated james-stein needs panel context; use "
            "james-stein:lambda2=..:sigma2=.. for fixed parameters");
    case MethodSpec::Base::Iw: {
        std::span<const double> info = values;
        double ts;
        if (method.rule->timing == weights::Timing::Lagged) {
            if (values.size() < method.rule->min_length() + 1) {
                std::ostringstream os;
                os << method.label() << " needs at least "
                   << method.rule->min_length() + 1 << " observations, got "
                   << values.size();
                throw std::invalid_argument(os.str());
            }
            info = values.first(values.size() - 1); // weight sees the T-1 history
            ts = values.back();
        } else {
            double s = 0.0;
            for (const double v : values) {
                s += v;
            }
            ts = s / static_cast<double>(values.size());
        }
        const weights::WeightResult wr = weights::evaluate(*method.rule, info, mu);
        out.value = ts * wr.w + mu * (1.0 - wr.w);
        out.weight = wr;
        return out;
    }
    }
    throw std::logic_error("unreachable method base");
}

namespace {

// Restriction of the panel to periods strictly before the origin.
panel::PanelDataset visible_before(const panel::PanelDataset& ds, long origin) {
    std::vector<panel::Observation> kept;
    for (const auto& o : ds.observations()) {
        if (o.period < origin) {
            kept.push_back(o);
        }
    }
    return panel::PanelDataset::from_observations(std::move(kept), ds.mu(),
                                                  ds.covariate_names());
}

struct JsEstimates {
    double lambda2 = 0.0;
    double sigma2 = 0.0;
    std::string error; // non-empty when estimation failed
};

Record make_record(const std::string& unit, long origin, const std::string& method) {
    Record r;
    r.unit = unit;
    r.origin = origin;
    r.method = method;
    return r;
}

} // namespace

std::vector<Record> forecast_panel(const panel::PanelDataset& ds,
                                   const std::vector<MethodSpec>& methods,
                                   const ForecastOptions& options) {
    if (ds.empty()) {
        throw std::invalid_argument("forecast of an empty panel");
    }
    if (methods.empty()) {
        throw std::invalid_argument("no forecast methods requested");
    }

    // Enumerate (origin, visible data) pairs.
    std::vector<std::pair<long, panel::PanelDataset>> views;
    const long last_origin = ds.max_period() + 1;
    if (options.window) {
        auto windows = panel::rolling_windows(ds, *options.window);
        for (auto& w : windows) {
            views.emplace_back(w.origin, std::move(w.data));
        }
        if (options.policy == OriginPolicy::Latest && !views.empty()) {
            views.erase(views.begin(), views.end() - 1);
        }
    } else if (options.policy == OriginPolicy::Latest) {
        views.emplace_back(last_origin, ds);
    } else {
        // Origins are the observed periods (each forecastable from the data
        // before it) plus one step past the panel's end.
        std::set<long> origins;
        for (const auto& o : ds.observations()) {
            origins.insert(o.period);
        }
        origins.erase(ds.min_period());
        origins.insert(last_origin);
        for (const long origin : origins) {
            auto visible = visible_before(ds, origin);
            if (!visible.empty()) {
                views.emplace_back(origin, std::move(visible));
            }
        }
    }
    if (options.max_origin) {
        std::erase_if(views, [&](const auto& v) { return v.first > *options.max_origin; });
    }

    const bool wants_js = std::any_of(methods.begin(), methods.end(), [](const auto& m) {
        return m.base == MethodSpec::Base::Js;
    });

    std::vector<Record> records;
    for (const auto& [origin, visible] : views) {
        // Shrink points from the data visible at this origin (no look-ahead).
        std::map<std::string, double> mu_by_unit;
        if (options.mu) {
            for (const auto& u : visible.units()) {
                mu_by_unit[u] = *options.mu;
            }
        } else {
            mu_by_unit = visible.shrink_points();
        }

        JsEstimates js;
        if (wants_js) {
            try {
                const auto [l2, s2] = weights::js_homogeneous_estimates(visible);
                js.lambda2 = l2;
                js.sigma2 = s2;
            } catch (const std::exception& e) {
                js.error = e.what();
            }
        }

        for (std::size_t u = 0; u < visible.units().size(); ++u) {
            const panel::Series series = visible.series(u, mu_by_unit.at(visible.units()[u]));
            for (const auto& method : methods) {
                Record rec = make_record(series.unit, origin, method.label());
                try {
                    if (method.base == MethodSpec::Base::Js) {
                        if (!js.error.empty()) {
                            throw std::invalid_argument(js.error);
                        }
                        const long t = static_cast<long>(series.values.size());
                        weights::WeightResult wr;
                        if (js.sigma2 > 0.0) {
                            wr.w = weights::james_stein_weight(js.lambda2, js.sigma2, t);
                        } else {
                            // No idiosyncratic noise estimated: weight on TS is
                            // all-or-nothing depending on the signal estimate.
                            wr.w = js.lambda2 > 0.0 ? 1.0 : 0.0;
                            wr.clipped = true;
                        }
                        const double ts = ts_forecast(series, TsVariant::Mean);
                        const std::pair<double, double> parts[] = {
                            {ts, wr.w}, {series.mu, 1.0 - wr.w}};
                        rec.value = combine(parts);
                        rec.weight = wr;
                    } else {
                        const SeriesForecast f =
                            forecast_one(method, series.values, series.mu);
                        rec.value = f.value;
                        rec.weight = f.weight;
                    }
                } catch (const std::invalid_argument& e) {
                    rec.value.reset();
                    rec.weight.reset();
                    rec.skip_reason = e.what();
                }
                records.push_back(std::move(rec));
            }
        }
    }

    std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
        if (a.unit != b.unit) return a.unit < b.unit;
        if (a.origin != b.origin) return a.origin < b.origin;
        return a.method < b.method;
    });
    return records;
}

void write_records_csv(std::ostream& out, const std::vector<Record>& records) {
    csv::write_record(out, {"unit", "origin", "method", "value", "weight", "zeta_bound",
                            "clipped", "skip_reason"});
    for (const auto& r : records) {
        std::vector<std::string> rec{r.unit, std::to_string(r.origin), r.method};
        rec.push_back(r.value ? csv::format_double(*r.value) : std::string{});
        rec.push_back(r.weight ? csv::format_double(r.weight->w) : std::string{});
        rec.push_back(r.weight && r.weight->zeta_bound
                          ? csv::format_double(*r.weight->zeta_bound)
                          : std::string{});
        rec.push_back(r.weight ? (r.weight->clipped ? "true" : "false") : std::string{});
        rec.push_back(r.skip_reason);
        csv::write_record(out, rec);
    }
}

std::vector<Record> read_records_csv(std::istream& in) {
    auto header = csv::read_record(in);
    const std::vector<std::string> expected{"unit",   "origin",     "method",
                                            "value",  "weight",     "zeta_bound",
                                            "clipped", "skip_reason"};
    if (!header || *header != expected) {
        throw std::runtime_error("not a forecast records CSV (unexpected header)");
    }
    std::vector<Record> out;
    long row = 1;
    while (auto rec = csv::read_record(in)) {
        ++row;
        if (rec->size() == 1 && rec->front().empty()) {
            continue;
        }
        if (rec->size() != expected.size()) {
            std::ostringstream os;
            os << "row " << row << ": expected " << expected.size() << " fields, got "
               << rec->size();
            throw std::runtime_error(os.str());
        }
        Record r;
        r.unit = (*rec)[0];
        r.origin = csv::parse_long((*rec)[1]);
        r.method = (*rec)[2];
        if (!(*rec)[3].empty()) {
            r.value = csv::parse_double((*rec)[3]);
        }
        if (!(*rec)[4].empty()) {
            weights::WeightResult wr;
            wr.w = csv::parse_double((*rec)[4]);
            if (!(*rec)[5].empty()) {
                wr.zeta_bound = csv::parse_double((*rec)[5]);
            }
            wr.clipped = (*rec)[6] == "true";
            r.weight = wr;
        }
        r.skip_reason = (*rec)[7];
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace iw::forecast
