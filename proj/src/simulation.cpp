#include "iw/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "iw/csv.hpp"

namespace iw::sim {

namespace {

constexpr int kBatches = 20; // batch-means blocks for MC standard errors
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json dist_to_json(const DistributionSpec& d) {
    switch (d.kind) {
    case DistributionSpec::Kind::Normal:
        return {{"kind", "normal"}, {"mean", d.a}, {"variance", d.b}};
    case DistributionSpec::Kind::Laplace:
        return {{"kind", "laplace"}, {"location", d.a}, {"scale", d.b}};
    case DistributionSpec::Kind::DoublePareto:
        return {{"kind", "double-pareto"}, {"shape", d.a}, {"scale", d.b}};
    }
    throw std::logic_error("unreachable distribution kind");
}

DistributionSpec dist_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "normal") {
        return DistributionSpec::normal(j.value("mean", 0.0), j.at("variance").get<double>());
    }
    if (kind == "laplace") {
        return DistributionSpec::laplace(j.value("location", 0.0),
                                         j.at("scale").get<double>());
    }
    if (kind == "double-pareto") {
        return DistributionSpec::double_pareto(j.at("shape").get<double>(),
                                               j.at("scale").get<double>());
    }
    throw std::invalid_argument("unknown distribution kind '" + kind +
                                "' (expected normal, laplace or double-pareto)");
}

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
        out.push_back(lo + (hi - lo) * frac);
    }
    return out;
}

std::string ratio_label(double ratio) {
    return "ratio=" + csv::format_double(ratio);
}

} // namespace

std::string preset_name(Preset p) {
    switch (p) {
    case Preset::RegretCurve: return "regret-curve";
    case Preset::TailHeaviness: return "tail-heaviness";
    case Preset::WeightComparison: return "weight-comparison";
    case Preset::Tyranny: return "tyranny";
    case Preset::Custom: return "custom";
    }
    return "?";
}

Preset preset_from_name(const std::string& name) {
    if (name == "regret-curve") return Preset::RegretCurve;
    if (name == "tail-heaviness") return Preset::TailHeaviness;
    if (name == "weight-comparison") return Preset::WeightComparison;
    if (name == "tyranny") return Preset::Tyranny;
    if (name == "custom") return Preset::Custom;
    throw std::invalid_argument("unknown preset '" + name +
                                "'; valid presets: regret-curve, tail-heaviness, "
                                "weight-comparison, tyranny, custom");
}

void ExperimentConfig::validate() const {
    if (replications < 1) {
        throw std::invalid_argument("replications must be >= 1");
    }
    if (T < 1) {
        throw std::invalid_argument("T must be >= 1");
    }
    if (!std::isfinite(mu)) {
        throw std::invalid_argument("mu must be finite");
    }
    if (methods.empty()) {
        throw std::invalid_argument("experiment needs at least one method");
    }
    if (points.empty()) {
        throw std::invalid_argument("experiment needs at least one point");
    }
    for (const auto& m : methods) {
        if (m.base == forecast::MethodSpec::Base::Js) {
            throw std::invalid_argument(
                "panel-estimated 'js' is not available in simulations; use "
                "james-stein:lambda2=..:sigma2=..");
        }
        if (m.base == forecast::MethodSpec::Base::Iw) {
            const std::size_t need =
                m.rule->timing == weights::Timing::Lagged ? m.rule->min_length() + 1
                                                          : m.rule->min_length();
            if (static_cast<std::size_t>(T) < need) {
                std::ostringstream os;
                os << "method " << m.label() << " needs T >= " << need << ", got T=" << T;
                throw std::invalid_argument(os.str());
            }
        }
    }
    std::set<std::string> labels;
    for (const auto& m : methods) {
        if (!labels.insert(m.label()).second) {
            throw std::invalid_argument("duplicate method '" + m.label() + "'");
        }
    }
    if (scatter) {
        for (const std::string& name : {scatter->first, scatter->second}) {
            if (!labels.contains(name)) {
                throw std::invalid_argument("scatter method '" + name +
                                            "' is not among the experiment's methods");
            }
        }
    }
    for (const auto& p : points) {
        (void)p.effect.variance(); // parameter sanity
        (void)p.shock.variance();
    }
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["preset"] = preset_name(preset);
    j["name"] = name;
    j["T"] = T;
    j["replications"] = replications;
    j["seed"] = seed;
    j["mu"] = mu;
    j["methods"] = nlohmann::json::array();
    for (const auto& m : methods) {
        j["methods"].push_back(m.label());
    }
    j["points"] = nlohmann::json::array();
    for (const auto& p : points) {
        nlohmann::json jp;
        jp["label"] = p.label;
        jp["effect"] = dist_to_json(p.effect);
        jp["shock"] = dist_to_json(p.shock);
        if (p.theta) {
            jp["lambda2"] = p.theta->lambda2;
            jp["sigma2"] = p.theta->sigma2;
        }
        j["points"].push_back(std::move(jp));
    }
    j["use_closed_forms"] = use_closed_forms;
    j["record_assumption2"] = record_assumption2;
    j["collect_effect_draws"] = collect_effect_draws;
    if (scatter) {
        j["scatter"] = {{"first", scatter->first}, {"second", scatter->second}};
    }
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.preset = preset_from_name(j.value("preset", "custom"));
    cfg.name = j.value("name", preset_name(cfg.preset));
    cfg.T = j.value("T", 3);
    cfg.replications = j.value("replications", 10000L);
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.threads = j.value("threads", 0);
    cfg.mu = j.value("mu", 0.0);
    if (!j.contains("methods")) {
        throw std::invalid_argument("config needs a 'methods' array");
    }
    for (const auto& m : j.at("methods")) {
        cfg.methods.push_back(forecast::MethodSpec::parse(m.get<std::string>()));
    }
    const DistributionSpec default_shock =
        j.contains("shock") ? dist_from_json(j.at("shock"))
                            : DistributionSpec::normal(0.0, 1.0);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        const double sigma2 = g.value("sigma2", 1.0);
        std::vector<double> ratios;
        if (g.contains("ratios")) {
            ratios = g.at("ratios").get<std::vector<double>>();
        } else {
            ratios = linspace(g.value("min", 0.001), g.value("max", 2.0),
                              g.value("count", 50));
        }
        for (const double r : ratios) {
            if (!(r > 0.0)) {
                throw std::invalid_argument("grid ratios must be positive");
            }
            PointSpec p;
            p.label = ratio_label(r);
            p.effect = DistributionSpec::normal(0.0, r * sigma2);
            p.shock = default_shock;
            p.theta = eval::ThetaPoint{r * sigma2, sigma2};
            cfg.points.push_back(std::move(p));
        }
    }
    if (j.contains("points")) {
        for (const auto& jp : j.at("points")) {
            PointSpec p;
            p.effect = dist_from_json(jp.at("effect"));
            p.shock = jp.contains("shock") ? dist_from_json(jp.at("shock")) : default_shock;
            p.label = jp.value("label", p.effect.to_string());
            const double lambda2 = jp.value("lambda2", p.effect.variance());
            const double sigma2 = jp.value("sigma2", p.shock.variance());
            p.theta = eval::ThetaPoint{lambda2, sigma2};
            cfg.points.push_back(std::move(p));
        }
    }
    cfg.use_closed_forms = j.value("use_closed_forms", false);
    cfg.record_assumption2 = j.value("record_assumption2", false);
    cfg.collect_effect_draws = j.value("collect_effect_draws", false);
    if (j.contains("scatter")) {
        cfg.scatter = {j.at("scatter").at("first").get<std::string>(),
                       j.at("scatter").at("second").get<std::string>()};
    }
    return cfg;
}

namespace {

ExperimentConfig grid_config(int t, long reps, std::vector<std::string> method_specs,
                             bool closed_forms) {
    ExperimentConfig cfg;
    cfg.T = t;
    cfg.replications = reps;
    for (const auto& s : method_specs) {
        cfg.methods.push_back(forecast::MethodSpec::parse(s));
    }
    for (const double r : linspace(0.001, 2.0, 50)) {
        PointSpec p;
        p.label = ratio_label(r);
        p.effect = DistributionSpec::normal(0.0, r);
        p.shock = DistributionSpec::normal(0.0, 1.0);
        p.theta = eval::ThetaPoint{r, 1.0};
        cfg.points.push_back(std::move(p));
    }
    cfg.use_closed_forms = closed_forms;
    return cfg;
}

struct TyrannyDesign {
    const char* name;
    const char* label;
    DistributionSpec effect;
    double lambda2;
};

std::vector<TyrannyDesign> tyranny_designs() {
    return {
        {"normal1", "normal lambda2=1", DistributionSpec::normal(0.0, 1.0), 1.0},
        {"normal3", "normal lambda2=3", DistributionSpec::normal(0.0, 3.0), 3.0},
        {"laplace", "laplace(0,1)", DistributionSpec::laplace(0.0, 1.0), 2.0},
        {"pareto", "double-pareto(3,1)", DistributionSpec::double_pareto(3.0, 1.0), 1.0},
    };
}

ExperimentConfig tyranny_config(const TyrannyDesign& d) {
    ExperimentConfig cfg;
    cfg.preset = Preset::Tyranny;
    cfg.name = std::string("tyranny-") + d.name;
    cfg.T = 3;
    cfg.replications = 10000;
    std::ostringstream js;
    js << "james-stein:lambda2=" << d.lambda2 << ":sigma2=1";
    cfg.methods.push_back(forecast::MethodSpec::parse("iw-mr"));
    cfg.methods.push_back(forecast::MethodSpec::parse(js.str()));
    PointSpec p;
    p.label = d.label;
    p.effect = d.effect;
    p.shock = DistributionSpec::normal(0.0, 1.0);
    p.theta = eval::ThetaPoint{d.lambda2, 1.0};
    cfg.points.push_back(std::move(p));
    cfg.scatter = {std::string("iw-mr"), cfg.methods[1].label()};
    return cfg;
}

} // namespace

ExperimentConfig make_preset(Preset preset, const std::string& design_filter) {
    switch (preset) {
    case Preset::RegretCurve: {
        auto cfg = grid_config(3, 100000, {"ts-last", "pool", "iw-mr:lagged"}, true);
        cfg.preset = Preset::RegretCurve;
        cfg.name = preset_name(cfg.preset);
        return cfg;
    }
    case Preset::WeightComparison: {
        auto cfg =
            grid_config(2, 10000, {"iw-mr", "iw-o", "iw-msfe-is", "iw-msfe-oos"}, false);
        cfg.preset = Preset::WeightComparison;
        cfg.name = preset_name(cfg.preset);
        cfg.record_assumption2 = true;
        return cfg;
    }
    case Preset::TailHeaviness: {
        ExperimentConfig cfg;
        cfg.preset = Preset::TailHeaviness;
        cfg.name = preset_name(cfg.preset);
        cfg.T = 3;
        cfg.replications = 1000000;
        for (const auto& s : {"ts-last", "pool", "iw-mr:lagged"}) {
            cfg.methods.push_back(forecast::MethodSpec::parse(s));
        }
        // Ordered by increasing tail heaviness (decreasing shape).
        const std::pair<double, double> params[] = {
            {50.0, 34.5}, {5.0, 2.45}, {3.0, 1.0}, {2.3, 0.5}};
        for (const auto& [shape, scale] : params) {
            PointSpec p;
            p.effect = DistributionSpec::double_pareto(shape, scale);
            p.shock = DistributionSpec::normal(0.0, 1.0);
            p.label = p.effect.to_string();
            p.theta = eval::ThetaPoint{p.effect.variance(), 1.0};
            cfg.points.push_back(std::move(p));
        }
        cfg.record_assumption2 = true;
        cfg.collect_effect_draws = true;
        return cfg;
    }
    case Preset::Tyranny: {
        const auto designs = make_tyranny_configs(design_filter);
        if (designs.size() != 1) {
            throw std::invalid_argument(
                "tyranny preset needs a single design; pass one of normal1, "
                "normal3, laplace, pareto");
        }
        return designs.front();
    }
    case Preset::Custom:
        throw std::invalid_argument("custom experiments are built from a config file");
    }
    throw std::logic_error("unreachable preset");
}

std::vector<ExperimentConfig> make_tyranny_configs(const std::string& design_filter) {
    std::vector<ExperimentConfig> out;
    for (const auto& d : tyranny_designs()) {
        if (design_filter.empty() || design_filter == d.name) {
            out.push_back(tyranny_config(d));
        }
    }
    if (out.empty()) {
        throw std::invalid_argument("unknown tyranny design '" + design_filter +
                                    "'; valid designs: normal1, normal3, laplace, "
                                    "pareto");
    }
    return out;
}

namespace {

struct CovAccum {
    double sx = 0.0;
    double sy = 0.0;
    double sxy = 0.0;

    void add(double x, double y) {
        sx += x;
        sy += y;
        sxy += x * y;
    }
};

struct BatchAccum {
    std::vector<double> sfe_sum; // per method
    std::vector<CovAccum> cov;   // per method; filled for IW methods only
    long n = 0;
};

double batch_cov(const CovAccum& c, long n) {
    if (n < 2) {
        return kNaN;
    }
    const double nn = static_cast<double>(n);
    return (c.sxy - c.sx * c.sy / nn) / (nn - 1.0);
}

// Standard error of the overall mean from near-equal batch means.
double batch_se(std::span<const double> batch_means) {
    std::vector<double> finite;
    for (const double b : batch_means) {
        if (std::isfinite(b)) {
            finite.push_back(b);
        }
    }
    const std::size_t b = finite.size();
    if (b < 2) {
        return 0.0;
    }
    double mean = 0.0;
    for (const double v : finite) {
        mean += v;
    }
    mean /= static_cast<double>(b);
    double ss = 0.0;
    for (const double v : finite) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
}

void parallel_for(std::size_t n_tasks, int threads, const std::function<void(std::size_t)>& fn) {
    unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_tasks));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();

    const std::size_t n_points = config.points.size();
    const std::size_t n_methods = config.methods.size();
    const long reps = config.replications;
    const int batches = static_cast<int>(std::min<long>(kBatches, reps));

    // Replication ranges per batch (sizes differ by at most one).
    std::vector<long> batch_lo(static_cast<std::size_t>(batches) + 1, 0);
    for (int b = 0; b < batches; ++b) {
        const long size = reps / batches + (b < reps % batches ? 1 : 0);
        batch_lo[static_cast<std::size_t>(b) + 1] = batch_lo[static_cast<std::size_t>(b)] + size;
    }

    std::vector<bool> is_iw(n_methods);
    for (std::size_t m = 0; m < n_methods; ++m) {
        is_iw[m] = config.methods[m].base == forecast::MethodSpec::Base::Iw;
    }
    std::size_t scatter_first = 0;
    std::size_t scatter_second = 0;
    if (config.scatter) {
        for (std::size_t m = 0; m < n_methods; ++m) {
            if (config.methods[m].label() == config.scatter->first) {
                scatter_first = m;
            }
            if (config.methods[m].label() == config.scatter->second) {
                scatter_second = m;
            }
        }
    }

    std::vector<std::vector<BatchAccum>> accum(n_points);
    for (auto& per_point : accum) {
        per_point.resize(static_cast<std::size_t>(batches));
        for (auto& b : per_point) {
            b.sfe_sum.assign(n_methods, 0.0);
            if (config.record_assumption2) {
                b.cov.assign(n_methods, CovAccum{});
            }
        }
    }
    std::vector<std::vector<double>> effect_draws(
        config.collect_effect_draws ? n_points : 0);
    for (auto& d : effect_draws) {
        d.assign(static_cast<std::size_t>(reps), 0.0);
    }
    std::vector<std::vector<std::pair<double, double>>> scatter(
        config.scatter ? n_points : 0);
    for (auto& s : scatter) {
        s.assign(static_cast<std::size_t>(reps), {0.0, 0.0});
    }

    const std::size_t n_tasks = n_points * static_cast<std::size_t>(batches);
    parallel_for(n_tasks, config.threads, [&](std::size_t task) {
        const std::size_t p = task / static_cast<std::size_t>(batches);
        const int b = static_cast<int>(task % static_cast<std::size_t>(batches));
        const PointSpec& point = config.points[p];
        BatchAccum& acc = accum[p][static_cast<std::size_t>(b)];

        std::vector<double> values(static_cast<std::size_t>(config.T));
        std::vector<double> sfe(n_methods);
        const auto preset_code = static_cast<std::uint64_t>(config.preset);
        for (long r = batch_lo[static_cast<std::size_t>(b)];
             r < batch_lo[static_cast<std::size_t>(b) + 1]; ++r) {
            RngStream rng(
                stream_key(config.seed, preset_code, p, static_cast<std::uint64_t>(r)));
            const double effect = sample(point.effect, rng);
            for (int t = 0; t < config.T; ++t) {
                values[static_cast<std::size_t>(t)] =
                    config.mu + effect + sample(point.shock, rng);
            }
            const double target = config.mu + effect + sample(point.shock, rng);

            for (std::size_t m = 0; m < n_methods; ++m) {
                const forecast::SeriesForecast f =
                    forecast::forecast_one(config.methods[m], values, config.mu);
                const double e = target - f.value;
                sfe[m] = e * e;
                acc.sfe_sum[m] += sfe[m];
                if (config.record_assumption2 && is_iw[m] && f.weight) {
                    const double x = effect * effect;
                    const double y = (1.0 - f.weight->w) * (1.0 - f.weight->w);
                    acc.cov[m].add(x, y);
                }
            }
            ++acc.n;
            if (config.collect_effect_draws) {
                effect_draws[p][static_cast<std::size_t>(r)] = effect;
            }
            if (config.scatter) {
                scatter[p][static_cast<std::size_t>(r)] = {
                    effect, sfe[scatter_first] - sfe[scatter_second]};
            }
        }
    });

    ExperimentResult result;
    result.config = config;
    result.points.resize(n_points);
    for (std::size_t p = 0; p < n_points; ++p) {
        PointResult& pr = result.points[p];
        pr.label = config.points[p].label;
        pr.theta = config.points[p].theta;
        pr.methods.resize(n_methods);
        for (std::size_t m = 0; m < n_methods; ++m) {
            MethodStats& ms = pr.methods[m];
            ms.method = config.methods[m].label();
            double total = 0.0;
            std::vector<double> means;
            means.reserve(static_cast<std::size_t>(batches));
            for (int b = 0; b < batches; ++b) {
                const auto& acc = accum[p][static_cast<std::size_t>(b)];
                total += acc.sfe_sum[m];
                if (acc.n > 0) {
                    means.push_back(acc.sfe_sum[m] / static_cast<double>(acc.n));
                }
            }
            ms.msfe = total / static_cast<double>(reps);
            ms.msfe_se = batch_se(means);
            if (config.use_closed_forms && pr.theta &&
                (ms.method == "ts-last" || ms.method == "pool")) {
                ms.msfe_closed = eval::msfe_closed_form(ms.method, *pr.theta);
            }
            if (config.record_assumption2 && is_iw[m]) {
                CovAccum full;
                std::vector<double> covs;
                covs.reserve(static_cast<std::size_t>(batches));
                for (int b = 0; b < batches; ++b) {
                    const auto& acc = accum[p][static_cast<std::size_t>(b)];
                    full.sx += acc.cov[m].sx;
                    full.sy += acc.cov[m].sy;
                    full.sxy += acc.cov[m].sxy;
                    const double c = batch_cov(acc.cov[m], acc.n);
                    if (std::isfinite(c)) {
                        covs.push_back(c);
                    }
                }
                ms.assumption2_cov = batch_cov(full, reps);
                ms.assumption2_cov_se = batch_se(covs);
            }
        }
        if (config.collect_effect_draws) {
            const auto& draws = effect_draws[p];
            double mean = 0.0;
            for (const double v : draws) {
                mean += v;
            }
            mean /= static_cast<double>(draws.size());
            double ss = 0.0;
            for (const double v : draws) {
                ss += (v - mean) * (v - mean);
            }
            pr.effect_sample_variance =
                draws.size() > 1 ? ss / static_cast<double>(draws.size() - 1) : 0.0;
            if (draws.size() >= 4) {
                pr.effect_cs_kurtosis = eval::crow_siddiqui(draws);
                std::vector<double> batch_cs;
                for (int b = 0; b < batches; ++b) {
                    const auto lo = static_cast<std::size_t>(batch_lo[static_cast<std::size_t>(b)]);
                    const auto hi = static_cast<std::size_t>(batch_lo[static_cast<std::size_t>(b) + 1]);
                    if (hi - lo >= 4) {
                        batch_cs.push_back(eval::crow_siddiqui(
                            std::span<const double>(draws.data() + lo, hi - lo)));
                    }
                }
                pr.effect_cs_se = batch_se(batch_cs);
            }
        }
        if (config.scatter) {
            pr.scatter = std::move(scatter[p]);
        }
    }
    return result;
}

const MethodStats& PointResult::method(const std::string& name) const {
    for (const auto& m : methods) {
        if (m.method == name) {
            return m;
        }
    }
    throw std::invalid_argument("no stats for method '" + name + "'");
}

const PointResult& ExperimentResult::point(const std::string& label) const {
    for (const auto& p : points) {
        if (p.label == label) {
            return p;
        }
    }
    throw std::invalid_argument("no point labelled '" + label + "'");
}

eval::RegretReport ExperimentResult::regret_report() const {
    eval::RegretReport report;
    double nu = 0.0;
    for (const auto& p : points) {
        if (!p.theta) {
            throw std::invalid_argument("regret report needs theta on every point");
        }
        report.grid.points.push_back(*p.theta);
        nu = std::max(nu, std::abs(p.theta->ratio() - 1.0));
    }
    report.grid.nu = nu;
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
        eval::MethodCurve c;
        c.method = config.methods[m].label();
        for (const auto& p : points) {
            const auto& ms = p.methods[m];
            c.msfe_mc.push_back(ms.msfe);
            c.msfe_se.push_back(ms.msfe_se);
            c.msfe_closed.push_back(ms.msfe_closed ? *ms.msfe_closed : kNaN);
        }
        report.curves.push_back(std::move(c));
    }
    eval::compute_regrets(report);
    return report;
}

std::string ExperimentResult::curves_csv() const {
    // Per-point regret: closed-form MSFE where recorded, MC otherwise.
    const std::size_t n_methods = config.methods.size();
    std::vector<std::vector<double>> regrets(points.size(),
                                             std::vector<double>(n_methods, 0.0));
    for (std::size_t p = 0; p < points.size(); ++p) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& ms : points[p].methods) {
            best = std::min(best, ms.msfe_closed ? *ms.msfe_closed : ms.msfe);
        }
        for (std::size_t m = 0; m < n_methods; ++m) {
            const auto& ms = points[p].methods[m];
            regrets[p][m] = (ms.msfe_closed ? *ms.msfe_closed : ms.msfe) - best;
        }
    }

    std::ostringstream os;
    csv::write_record(os, {"point", "label", "lambda2", "sigma2", "ratio", "method",
                           "msfe", "msfe_se", "msfe_closed", "regret",
                           "assumption2_cov", "assumption2_cov_se",
                           "effect_sample_variance", "effect_cs_kurtosis"});
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto& pr = points[p];
        for (std::size_t m = 0; m < n_methods; ++m) {
            const auto& ms = pr.methods[m];
            std::vector<std::string> rec;
            rec.push_back(std::to_string(p));
            rec.push_back(pr.label);
            rec.push_back(pr.theta ? csv::format_double(pr.theta->lambda2) : "");
            rec.push_back(pr.theta ? csv::format_double(pr.theta->sigma2) : "");
            rec.push_back(pr.theta ? csv::format_double(pr.theta->ratio()) : "");
            rec.push_back(ms.method);
            rec.push_back(csv::format_double(ms.msfe));
            rec.push_back(csv::format_double(ms.msfe_se));
            rec.push_back(ms.msfe_closed ? csv::format_double(*ms.msfe_closed) : "");
            rec.push_back(csv::format_double(regrets[p][m]));
            rec.push_back(ms.assumption2_cov ? csv::format_double(*ms.assumption2_cov)
                                             : "");
            rec.push_back(ms.assumption2_cov_se
                              ? csv::format_double(*ms.assumption2_cov_se)
                              : "");
            rec.push_back(pr.effect_sample_variance
                              ? csv::format_double(*pr.effect_sample_variance)
                              : "");
            rec.push_back(pr.effect_cs_kurtosis
                              ? csv::format_double(*pr.effect_cs_kurtosis)
                              : "");
            csv::write_record(os, rec);
        }
    }
    return os.str();
}

nlohmann::json ExperimentResult::summary_json() const {
    nlohmann::json j;
    j["config"] = config.to_json();

    bool all_theta = !points.empty();
    for (const auto& p : points) {
        all_theta = all_theta && p.theta.has_value();
    }
    if (all_theta) {
        const auto report = regret_report();
        nlohmann::json max_regret;
        nlohmann::json argmax_ratio;
        for (const auto& c : report.curves) {
            max_regret[c.method] = c.max_regret;
            argmax_ratio[c.method] = report.grid.points[c.argmax_index].ratio();
        }
        j["max_regret"] = std::move(max_regret);
        j["argmax_ratio"] = std::move(argmax_ratio);
    }

    j["points"] = nlohmann::json::array();
    for (const auto& p : points) {
        nlohmann::json jp;
        jp["label"] = p.label;
        if (p.theta) {
            jp["lambda2"] = p.theta->lambda2;
            jp["sigma2"] = p.theta->sigma2;
            jp["ratio"] = p.theta->ratio();
        }
        for (const auto& ms : p.methods) {
            nlohmann::json jm;
            jm["msfe"] = ms.msfe;
            jm["msfe_se"] = ms.msfe_se;
            if (ms.msfe_closed) {
                jm["msfe_closed"] = *ms.msfe_closed;
            }
            if (ms.assumption2_cov) {
                jm["assumption2_cov"] = *ms.assumption2_cov;
                jm["assumption2_cov_se"] = *ms.assumption2_cov_se;
            }
            jp["methods"][ms.method] = std::move(jm);
        }
        if (p.effect_sample_variance) {
            jp["effect_sample_variance"] = *p.effect_sample_variance;
        }
        if (p.effect_cs_kurtosis) {
            jp["effect_cs_kurtosis"] = *p.effect_cs_kurtosis;
        }
        if (p.effect_cs_se) {
            jp["effect_cs_se"] = *p.effect_cs_se;
        }
        if (!p.scatter.empty()) {
            double mean = 0.0;
            for (const auto& [_, d] : p.scatter) {
                mean += d;
            }
            mean /= static_cast<double>(p.scatter.size());
            double ss = 0.0;
            for (const auto& [_, d] : p.scatter) {
                ss += (d - mean) * (d - mean);
            }
            const double se =
                p.scatter.size() > 1
                    ? std::sqrt(ss / static_cast<double>(p.scatter.size() - 1) /
                                static_cast<double>(p.scatter.size()))
                    : 0.0;
            jp["mean_delta_sfe"] = mean;
            jp["mean_delta_sfe_se"] = se;
        }
        j["points"].push_back(std::move(jp));
    }
    return j;
}

eval::ThetaGrid theta_grid_from_ratios(double sigma2, const std::vector<double>& ratios) {
    if (!(sigma2 > 0.0)) {
        throw std::invalid_argument("sigma2 must be positive");
    }
    eval::ThetaGrid grid;
    double nu = 0.0;
    for (const double r : ratios) {
        if (!(r > 0.0)) {
            throw std::invalid_argument("signal-to-noise ratios must be positive");
        }
        grid.points.push_back({r * sigma2, sigma2});
        nu = std::max(nu, std::abs(r - 1.0));
    }
    grid.nu = nu;
    return grid;
}

eval::RegretReport minimax_regret_scan(const eval::ThetaGrid& grid,
                                       const std::vector<forecast::MethodSpec>& methods,
                                       const McConfig& mc, int T) {
    ExperimentConfig cfg;
    cfg.T = T;
    cfg.replications = mc.replications;
    cfg.seed = mc.seed;
    cfg.threads = mc.threads;
    cfg.methods = methods;
    cfg.use_closed_forms = true;
    for (const auto& theta : grid.points) {
        PointSpec p;
        p.label = ratio_label(theta.ratio());
        p.effect = DistributionSpec::normal(0.0, theta.lambda2);
        p.shock = DistributionSpec::normal(0.0, theta.sigma2);
        p.theta = theta;
        cfg.points.push_back(std::move(p));
    }
    return run_experiment(cfg).regret_report();
}

} // namespace iw::sim
