#include "iw/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iw/csv.hpp"
#include "iw/evaluation.hpp"
#include "iw/forecast.hpp"
#include "iw/panel.hpp"
#include "iw/simulation.hpp"
#include "iw/weights.hpp"

namespace iw::cli {

namespace fs = std::filesystem;

namespace {

/// Collects output files and removes everything already written if a later
/// write fails, so a failed command leaves no partial artifacts behind.
class OutputWriter {
  public:
    explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec && !fs::is_directory(dir_)) {
            throw UsageError("cannot create output directory '" + dir_.string() + "'");
        }
    }

    fs::path write(const std::string& name, const std::string& content) {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            rollback();
            throw std::runtime_error("cannot write '" + path.string() + "'");
        }
        out << content;
        out.close();
        if (!out) {
            rollback();
            throw std::runtime_error("write failed for '" + path.string() + "'");
        }
        written_.push_back(path);
        return path;
    }

    void rollback() {
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        written_.clear();
    }

  private:
    fs::path dir_;
    std::vector<fs::path> written_;
};

std::string default_output_dir() {
    if (const char* env = std::getenv("IW_OUTPUT_DIR"); env && *env) {
        return env;
    }
    return ".";
}

struct PanelOptions {
    std::string input;
    std::string unit_col = "unit";
    std::string period_col = "period";
    std::string outcome_col = "outcome";
    std::vector<std::string> covariate_cols;
    std::string group_col;
    bool demeaned = false;
    bool residualize = false;
    std::optional<double> mu;
};

void add_panel_options(CLI::App* cmd, PanelOptions& opt) {
    cmd->add_option("--input", opt.input, "input panel CSV")->required();
    cmd->add_option("--unit-col", opt.unit_col, "unit id column (default: unit)");
    cmd->add_option("--period-col", opt.period_col, "period column (default: period)");
    cmd->add_option("--outcome-col", opt.outcome_col, "outcome column (default: outcome)");
    cmd->add_option("--covariate-col", opt.covariate_cols,
                    "covariate column (repeatable)");
    cmd->add_option("--group-col", opt.group_col,
                    "group column; sets group-pooled shrink points");
    cmd->add_flag("--demeaned", opt.demeaned, "outcomes are demeaned: mu = 0");
    cmd->add_flag("--residualize", opt.residualize,
                  "replace outcomes by pooled-OLS residuals on the covariates");
    cmd->add_option("--mu", opt.mu, "fixed shrink point (overrides everything)");
}

panel::PanelDataset load_with_options(const PanelOptions& opt) {
    std::ifstream in(opt.input, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open input '" + opt.input + "'");
    }
    panel::CsvSchema schema;
    schema.unit = opt.unit_col;
    schema.period = opt.period_col;
    schema.outcome = opt.outcome_col;
    schema.covariates = opt.covariate_cols;
    if (!opt.group_col.empty()) {
        schema.group = opt.group_col;
    }
    panel::PanelDataset ds = panel::load_panel(in, schema);
    if (opt.residualize) {
        ds = panel::residualize_panel(ds);
    }
    // Shrink-point resolution: --mu beats --demeaned beats group column beats
    // the pooled mean. Residualization already set mu = known(0).
    if (opt.mu) {
        ds = ds.with_mu(panel::MuSpec::known(*opt.mu));
    } else if (opt.demeaned) {
        ds = ds.with_mu(panel::MuSpec::known(0.0));
    } else if (!opt.group_col.empty()) {
        ds = ds.with_mu(panel::MuSpec::group_pooled());
    } else if (!opt.residualize) {
        ds = ds.with_mu(panel::MuSpec::pooled());
    }
    return ds;
}

std::vector<forecast::MethodSpec> parse_methods(const std::vector<std::string>& specs,
                                                const std::vector<std::string>& fallback) {
    std::vector<std::string> use = specs.empty() ? fallback : specs;
    std::vector<forecast::MethodSpec> methods;
    try {
        for (const auto& s : use) {
            methods.push_back(forecast::MethodSpec::parse(s));
        }
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    return methods;
}

std::string describe_headline(const sim::ExperimentResult& result) {
    std::ostringstream os;
    const auto summary = result.summary_json();
    if (summary.contains("max_regret") && result.points.size() > 1) {
        os << "max regret:";
        for (const auto& [method, value] : summary.at("max_regret").items()) {
            os << " " << method << "=" << value.get<double>();
        }
        os << "\n";
    }
    for (const auto& jp : summary.at("points")) {
        if (jp.contains("mean_delta_sfe")) {
            os << "mean dSFE (" << jp.at("label").get<std::string>()
               << "): " << jp.at("mean_delta_sfe").get<double>() << " +/- "
               << jp.at("mean_delta_sfe_se").get<double>() << "\n";
        } else if (jp.contains("effect_cs_kurtosis")) {
            os << jp.at("label").get<std::string>()
               << ": cs=" << jp.at("effect_cs_kurtosis").get<double>();
            const auto& methods = jp.at("methods");
            for (const auto& [name, jm] : methods.items()) {
                if (jm.contains("assumption2_cov")) {
                    os << " cov(" << name << ")=" << jm.at("assumption2_cov").get<double>();
                }
            }
            os << "\n";
        }
    }
    return os.str();
}

std::string scatter_csv(const sim::PointResult& point) {
    std::ostringstream os;
    csv::write_record(os, {"effect", "delta_sfe"});
    for (const auto& [a, d] : point.scatter) {
        csv::write_record(os, {csv::format_double(a), csv::format_double(d)});
    }
    return os.str();
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string preset;
    std::string config_file;
    std::string design;
    std::string output_dir = default_output_dir();
    std::optional<std::uint64_t> seed;
    std::optional<long> replications;
    int threads = 0;
};

int cmd_simulate(const SimulateOptions& opt) {
    std::vector<sim::ExperimentConfig> configs;
    std::vector<std::string> prefixes;
    try {
        if (!opt.config_file.empty()) {
            std::ifstream in(opt.config_file);
            if (!in) {
                throw UsageError("cannot open config '" + opt.config_file + "'");
            }
            nlohmann::json j;
            in >> j;
            configs.push_back(sim::ExperimentConfig::from_json(j));
        } else if (!opt.preset.empty()) {
            const sim::Preset preset = sim::preset_from_name(opt.preset);
            if (preset == sim::Preset::Tyranny) {
                for (auto& cfg : sim::make_tyranny_configs(opt.design)) {
                    configs.push_back(std::move(cfg));
                }
            } else {
                configs.push_back(sim::make_preset(preset, opt.design));
            }
        } else {
            throw UsageError("simulate needs --preset or --config");
        }
        for (const auto& cfg : configs) {
            prefixes.push_back(cfg.name);
        }
        for (auto& cfg : configs) {
            if (opt.seed) {
                cfg.seed = *opt.seed;
            }
            if (opt.replications) {
                cfg.replications = *opt.replications;
            }
            cfg.threads = opt.threads;
            cfg.validate(); // config errors precede any sampling
        }
    } catch (const UsageError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    OutputWriter out((fs::path(opt.output_dir)));
    try {
        for (std::size_t i = 0; i < configs.size(); ++i) {
            const auto result = sim::run_experiment(configs[i]);
            out.write(prefixes[i] + "_curves.csv", result.curves_csv());
            out.write(prefixes[i] + "_summary.json", result.summary_json().dump(2) + "\n");
            for (const auto& point : result.points) {
                if (!point.scatter.empty()) {
                    out.write(prefixes[i] + "_scatter.csv", scatter_csv(point));
                }
            }
            std::cout << describe_headline(result);
        }
    } catch (...) {
        out.rollback();
        throw;
    }
    return 0;
}

// ---------------------------------------------------------------- forecast

struct ForecastOptions {
    PanelOptions panel;
    std::vector<std::string> rules;
    std::string output_dir = default_output_dir();
    bool all_origins = false;
    std::optional<int> window;
};

int cmd_forecast(const ForecastOptions& opt) {
    const auto methods = parse_methods(opt.rules, {"iw-mr"});
    const panel::PanelDataset ds = load_with_options(opt.panel);

    forecast::ForecastOptions fo;
    fo.policy = opt.all_origins ? forecast::OriginPolicy::All
                                : forecast::OriginPolicy::Latest;
    fo.window = opt.window;
    const auto records = forecast::forecast_panel(ds, methods, fo);

    OutputWriter out((fs::path(opt.output_dir)));
    std::ostringstream os;
    forecast::write_records_csv(os, records);
    const fs::path path = out.write("forecasts.csv", os.str());

    const long skipped =
        std::count_if(records.begin(), records.end(),
                      [](const auto& r) { return !r.skip_reason.empty(); });
    std::cout << records.size() << " records (" << skipped << " skipped) -> "
              << path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
    PanelOptions panel;
    std::vector<std::string> rules;
    std::string output_dir = default_output_dir();
    std::optional<int> window;
    bool per_unit = false;
    std::string delta_sfe; // "methodA,methodB"
    bool quantile_weights = false;
};

int cmd_evaluate(const EvaluateOptions& opt) {
    const auto methods = parse_methods(opt.rules, {"ts", "pool", "iw-mr"});
    const panel::PanelDataset ds = load_with_options(opt.panel);

    const long span = ds.max_period() - ds.min_period() + 1;
    const long needed = opt.window ? *opt.window + 1 : 2;
    if (span < needed) {
        std::ostringstream os;
        os << "panel spans " << span << " period(s); out-of-sample evaluation needs "
           << needed;
        throw UsageError(os.str());
    }

    forecast::ForecastOptions fo;
    fo.policy = forecast::OriginPolicy::All;
    fo.window = opt.window;
    fo.max_origin = ds.max_period(); // every scored origin needs a realization
    const auto all_records = forecast::forecast_panel(ds, methods, fo);

    std::map<std::pair<std::string, long>, double> realizations;
    for (const auto& o : ds.observations()) {
        realizations[{o.unit, o.period}] = o.outcome;
    }
    // Unbalanced panels can have a forecastable origin without a realized
    // outcome for that unit; such records cannot be scored.
    std::vector<forecast::Record> records;
    records.reserve(all_records.size());
    for (const auto& r : all_records) {
        if (r.skip_reason.empty() && !realizations.contains({r.unit, r.origin})) {
            continue;
        }
        records.push_back(r);
    }
    const auto group = eval::group_msfe(records, realizations);
    if (group.empty()) {
        throw UsageError("no scorable forecasts (every record was skipped)");
    }

    OutputWriter out((fs::path(opt.output_dir)));
    try {
        // Group table: CSV + JSON.
        std::map<std::string, std::set<std::string>> units_by_method;
        std::map<std::string, std::map<std::string, std::pair<double, long>>> per_unit;
        for (const auto& r : records) {
            if (!r.skip_reason.empty() || !r.value) {
                continue;
            }
            const double e = realizations.at({r.unit, r.origin}) - *r.value;
            units_by_method[r.method].insert(r.unit);
            auto& [sum, n] = per_unit[r.method][r.unit];
            sum += e * e;
            ++n;
        }
        std::ostringstream gcsv;
        csv::write_record(gcsv, {"method", "group_msfe", "n_units"});
        nlohmann::json gjson;
        for (const auto& [method, msfe] : group) {
            csv::write_record(gcsv, {method, csv::format_double(msfe),
                                     std::to_string(units_by_method[method].size())});
            gjson["group_msfe"][method] = msfe;
            gjson["n_units"][method] = units_by_method[method].size();
        }
        out.write("group_msfe.csv", gcsv.str());
        out.write("group_msfe.json", gjson.dump(2) + "\n");

        if (opt.per_unit) {
            std::ostringstream os;
            csv::write_record(os, {"unit", "method", "msfe", "n_origins"});
            for (const auto& [method, by_unit] : per_unit) {
                for (const auto& [unit, sn] : by_unit) {
                    csv::write_record(
                        os, {unit, method,
                             csv::format_double(sn.first / static_cast<double>(sn.second)),
                             std::to_string(sn.second)});
                }
            }
            out.write("per_unit_msfe.csv", os.str());
        }

        if (!opt.delta_sfe.empty()) {
            const auto comma = opt.delta_sfe.find(',');
            if (comma == std::string::npos) {
                throw UsageError("--delta-sfe expects 'methodA,methodB'");
            }
            const std::string first = opt.delta_sfe.substr(0, comma);
            const std::string second = opt.delta_sfe.substr(comma + 1);
            std::map<std::pair<std::string, long>, double> sfe_first;
            std::map<std::pair<std::string, long>, double> sfe_second;
            for (const auto& r : records) {
                if (!r.value) {
                    continue;
                }
                const double e = realizations.at({r.unit, r.origin}) - *r.value;
                if (r.method == first) {
                    sfe_first[{r.unit, r.origin}] = e * e;
                } else if (r.method == second) {
                    sfe_second[{r.unit, r.origin}] = e * e;
                }
            }
            std::ostringstream os;
            csv::write_record(os, {"unit", "origin", "delta_sfe"});
            for (const auto& [key, sfe1] : sfe_first) {
                const auto it = sfe_second.find(key);
                if (it == sfe_second.end()) {
                    continue;
                }
                csv::write_record(os, {key.first, std::to_string(key.second),
                                       csv::format_double(sfe1 - it->second)});
            }
            out.write("delta_sfe.csv", os.str());
        }

        if (opt.quantile_weights) {
            // Average weight on Pool by origin and decile of the unit's
            // latest pre-origin outcome, for the first weight-bearing method.
            std::string weight_method;
            for (const auto& m : methods) {
                if (m.base == forecast::MethodSpec::Base::Iw ||
                    m.base == forecast::MethodSpec::Base::Js) {
                    weight_method = m.label();
                    break;
                }
            }
            if (weight_method.empty()) {
                throw UsageError("--quantile-weights needs at least one weighted rule");
            }
            std::map<long, std::vector<std::pair<double, double>>> by_origin;
            for (const auto& r : records) {
                if (r.method != weight_method || !r.weight) {
                    continue;
                }
                const auto span_obs = ds.unit_observations(r.unit);
                double lag = 0.0;
                bool found = false;
                for (const auto& o : span_obs) {
                    if (o.period < r.origin) {
                        lag = o.outcome;
                        found = true;
                    }
                }
                if (!found) {
                    continue;
                }
                by_origin[r.origin].push_back({lag, 1.0 - r.weight->w});
            }
            std::ostringstream os;
            csv::write_record(os, {"origin", "decile", "mean_pool_weight", "n_units"});
            for (auto& [origin, rows] : by_origin) {
                std::sort(rows.begin(), rows.end());
                const std::size_t n = rows.size();
                std::vector<double> sums(10, 0.0);
                std::vector<long> counts(10, 0);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t d = std::min<std::size_t>(9, i * 10 / n);
                    sums[d] += rows[i].second;
                    ++counts[d];
                }
                for (int d = 0; d < 10; ++d) {
                    if (counts[static_cast<std::size_t>(d)] == 0) {
                        continue;
                    }
                    csv::write_record(
                        os, {std::to_string(origin), std::to_string(d + 1),
                             csv::format_double(sums[static_cast<std::size_t>(d)] /
                                                static_cast<double>(
                                                    counts[static_cast<std::size_t>(d)])),
                             std::to_string(counts[static_cast<std::size_t>(d)])});
                }
            }
            out.write("quantile_weights.csv", os.str());
        }
    } catch (...) {
        out.rollback();
        throw;
    }

    for (const auto& [method, msfe] : group) {
        std::cout << method << " group MSFE: " << csv::format_double(msfe) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
    std::string input;
    std::string output_dir = default_output_dir();
    std::string method;
    std::optional<long> origin;
    double mu = 0.0;
    bool gini_min_shift = false;
    std::optional<double> bandwidth;
};

int cmd_report(const ReportOptions& opt) {
    std::ifstream in(opt.input, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open input '" + opt.input + "'");
    }
    const auto records = forecast::read_records_csv(in);

    std::string method = opt.method;
    if (method.empty()) {
        for (const auto& r : records) {
            if (r.value) {
                method = r.method;
                break;
            }
        }
        if (method.empty()) {
            throw UsageError("no produced forecasts in '" + opt.input + "'");
        }
    }
    long origin = 0;
    bool have_origin = false;
    for (const auto& r : records) {
        if (r.method == method && r.value) {
            if (opt.origin && r.origin != *opt.origin) {
                continue;
            }
            origin = have_origin ? std::max(origin, r.origin) : r.origin;
            have_origin = true;
        }
    }
    if (!have_origin) {
        throw UsageError("no forecasts for method '" + method + "'" +
                         (opt.origin ? " at origin " + std::to_string(*opt.origin) : ""));
    }
    std::vector<double> values;
    for (const auto& r : records) {
        if (r.method == method && r.origin == origin && r.value) {
            values.push_back(*r.value);
        }
    }

    nlohmann::json summary;
    summary["method"] = method;
    summary["origin"] = origin;
    summary["n"] = values.size();

    std::vector<double> gini_input = values;
    if (opt.gini_min_shift) {
        const double lo = *std::min_element(gini_input.begin(), gini_input.end());
        for (double& v : gini_input) {
            v -= lo;
        }
        summary["gini_min_shift"] = lo;
    }
    try {
        summary["gini"] = eval::gini(gini_input);
    } catch (const std::exception& e) {
        summary["gini_error"] = e.what();
    }

    long above = 0;
    long below = 0;
    for (const double v : values) {
        if (v > opt.mu) {
            ++above;
        } else if (v < opt.mu) {
            ++below;
        }
    }
    summary["mu"] = opt.mu;
    summary["share_above_mu"] = static_cast<double>(above) / values.size();
    summary["share_below_mu"] = static_cast<double>(below) / values.size();

    OutputWriter out((fs::path(opt.output_dir)));
    try {
        try {
            const auto curve = eval::kde(values, opt.bandwidth);
            std::ostringstream os;
            csv::write_record(os, {"x", "density"});
            for (std::size_t i = 0; i < curve.x.size(); ++i) {
                csv::write_record(os, {csv::format_double(curve.x[i]),
                                       csv::format_double(curve.density[i])});
            }
            out.write("report_kde.csv", os.str());
            summary["kde_bandwidth"] = curve.bandwidth;
        } catch (const std::exception& e) {
            summary["kde_error"] = e.what(); // degenerate sample: surfaced, not fatal
        }
        out.write("report_summary.json", summary.dump(2) + "\n");
    } catch (...) {
        out.rollback();
        throw;
    }

    std::cout << "method " << method << " at origin " << origin << ", n="
              << values.size() << "\n";
    if (summary.contains("gini")) {
        std::cout << "gini: " << summary["gini"].get<double>() << "\n";
    }
    std::cout << "share above mu: " << summary["share_above_mu"].get<double>()
              << ", below: " << summary["share_below_mu"].get<double>() << "\n";
    return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Individual-weighting forecasts for short panels"};
    app.require_subcommand(1);

    SimulateOptions sim_opt;
    auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo experiment");
    simulate->add_option("--preset", sim_opt.preset,
                         "regret-curve, tail-heaviness, weight-comparison or tyranny");
    simulate->add_option("--config", sim_opt.config_file, "custom experiment JSON");
    simulate->add_option("--design", sim_opt.design,
                         "tyranny design: normal1, normal3, laplace, pareto");
    simulate->add_option("--seed", sim_opt.seed, "RNG seed");
    simulate->add_option("--replications", sim_opt.replications, "replication count");
    simulate->add_option("--threads", sim_opt.threads, "worker threads (0 = auto)");
    simulate->add_option("--output-dir", sim_opt.output_dir,
                         "output directory (default: $IW_OUTPUT_DIR or .)");

    ForecastOptions fc_opt;
    auto* fc = app.add_subcommand("forecast", "forecast a panel CSV");
    add_panel_options(fc, fc_opt.panel);
    fc->add_option("--rule", fc_opt.rules,
                   "method: ts, ts-last, pool, js, or a weight rule (repeatable; "
                   "default iw-mr)");
    fc->add_flag("--all-origins", fc_opt.all_origins, "forecast at every origin");
    fc->add_option("--window", fc_opt.window, "rolling window length");
    fc->add_option("--output-dir", fc_opt.output_dir,
                   "output directory (default: $IW_OUTPUT_DIR or .)");

    EvaluateOptions ev_opt;
    auto* ev = app.add_subcommand("evaluate", "out-of-sample accuracy of a panel CSV");
    add_panel_options(ev, ev_opt.panel);
    ev->add_option("--rule", ev_opt.rules,
                   "methods to compare (repeatable; default ts, pool, iw-mr)");
    ev->add_option("--window", ev_opt.window, "rolling window length (default expanding)");
    ev->add_flag("--per-unit", ev_opt.per_unit, "write per-unit MSFEs");
    ev->add_option("--delta-sfe", ev_opt.delta_sfe,
                   "write per-(unit,origin) SFE differences: 'methodA,methodB'");
    ev->add_flag("--quantile-weights", ev_opt.quantile_weights,
                 "write mean pool weight by origin and lagged-outcome decile");
    ev->add_option("--output-dir", ev_opt.output_dir,
                   "output directory (default: $IW_OUTPUT_DIR or .)");

    ReportOptions rp_opt;
    auto* rp = app.add_subcommand("report", "distribution summaries of forecasts");
    rp->add_option("--input", rp_opt.input, "forecast records CSV")->required();
    rp->add_option("--method", rp_opt.method, "method to summarize (default: first)");
    rp->add_option("--origin", rp_opt.origin, "origin to summarize (default: latest)");
    rp->add_option("--mu", rp_opt.mu, "reference point for above/below shares");
    rp->add_flag("--gini-min-shift", rp_opt.gini_min_shift,
                 "shift the sample to min 0 before the gini computation");
    rp->add_option("--bandwidth", rp_opt.bandwidth, "KDE bandwidth override");
    rp->add_option("--output-dir", rp_opt.output_dir,
                   "output directory (default: $IW_OUTPUT_DIR or .)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(sim_opt);
        }
        if (fc->parsed()) {
            return cmd_forecast(fc_opt);
        }
        if (ev->parsed()) {
            return cmd_evaluate(ev_opt);
        }
        return cmd_report(rp_opt);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace iw::cli
