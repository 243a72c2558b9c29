#include "iw/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace iw::weights {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_length(std::span<const double> v, double mu, std::size_t m,
                    const char* rule) {
    if (v.size() < m) {
        std::ostringstream os;
        os << rule << " needs at least " << m << " observations, got " << v.size();
        throw std::invalid_argument(os.str());
    }
    for (const double x : v) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument(std::string(rule) +
                                        ": non-finite value in series");
        }
    }
    if (!std::isfinite(mu)) {
        throw std::invalid_argument(std::string(rule) + ": non-finite mu");
    }
}

double sum_sq_diff(std::span<const double> v) {
    double s = 0.0;
    for (std::size_t t = 0; t + 1 < v.size(); ++t) {
        const double d = v[t] - v[t + 1];
        s += d * d;
    }
    return s;
}

double max_sq_dev(std::span<const double> v, double mu) {
    double m = 0.0;
    for (const double x : v) {
        const double d = x - mu;
        m = std::max(m, d * d);
    }
    return m;
}

double sum_sq_dev(std::span<const double> v, double mu) {
    double s = 0.0;
    for (const double x : v) {
        const double d = x - mu;
        s += d * d;
    }
    return s;
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double clamp01(double w) { return std::clamp(w, 0.0, 1.0); }

// w = (1/sse_ts) / (1/sse_ts + 1/sse_pool), rearranged to avoid the
// divisions; the zero-SSE degenerate rules fall out of the same expression.
WeightResult inverse_sse_weight(double sse_ts, double sse_pool) {
    WeightResult r;
    if (sse_ts == 0.0 && sse_pool == 0.0) {
        r.w = 0.0; // forecasts coincide; any weight is equivalent
        r.clipped = true;
        return r;
    }
    if (sse_ts == 0.0 || sse_pool == 0.0) {
        r.w = sse_ts == 0.0 ? 1.0 : 0.0;
        r.clipped = true;
        return r;
    }
    r.w = clamp01(sse_pool / (sse_ts + sse_pool));
    return r;
}

} // namespace

double sigma2_hat_diff(std::span<const double> values) {
    if (values.size() < 2) {
        throw std::invalid_argument("sigma2_hat_diff needs at least 2 observations");
    }
    return sum_sq_diff(values) / (2.0 * static_cast<double>(values.size() - 1));
}

WeightResult iw_o_weight(std::span<const double> values, double mu, Timing timing) {
    require_length(values, mu, 2, "iw-o");
    const double m = static_cast<double>(values.size());
    const double m2 = sum_sq_dev(values, mu) / m;
    const double s2h = sigma2_hat_diff(values);

    const double num_raw = m2 - s2h;
    const double den = timing == Timing::Current ? m2 - s2h * (m - 1.0) / m : m2;

    WeightResult r;
    r.sigma2_hat = s2h;
    const double num = std::max(num_raw, 0.0);
    if (num == 0.0) {
        // Covers the coincident-forecast case (all values equal mu) and any
        // nonpositive denominator, which forces a nonpositive ratio.
        r.w = 0.0;
        r.clipped = true;
        return r;
    }
    if (den <= 0.0) {
        // Unreachable for these estimators (den - num_raw >= 0), kept as the
        // vanishing-denominator rule: infinite estimated signal-to-noise.
        r.w = 1.0;
        r.clipped = true;
        return r;
    }
    const double ratio = num / den;
    r.w = clamp01(ratio);
    r.clipped = num_raw < 0.0 || ratio > 1.0;
    return r;
}

WeightResult iw_o_weight(const panel::Series& series, Timing timing) {
    return iw_o_weight(series.values, series.mu, timing);
}

double zeta_bound_hat(std::span<const double> values, double mu, Timing timing) {
    require_length(values, mu, 2, "zeta_bound_hat");
    const double m = static_cast<double>(values.size());
    const double num = max_sq_dev(values, mu);
    const double scale =
        timing == Timing::Current ? 2.0 * m * (m - 1.0) : 2.0 * (m - 1.0);
    const double den = sum_sq_diff(values) / scale;
    if (den == 0.0) {
        return num > 0.0 ? kInf : 0.0;
    }
    return num / den;
}

double zeta_bound_hat(const panel::Series& series, Timing timing) {
    return zeta_bound_hat(series.values, series.mu, timing);
}

double minimax_weight_from_bound(double zeta_bound) {
    if (std::isnan(zeta_bound) || zeta_bound < 0.0) {
        throw std::invalid_argument("zeta bound must be nonnegative");
    }
    if (std::isinf(zeta_bound)) {
        return 1.0;
    }
    return 1.0 - 1.0 / std::sqrt(zeta_bound + 1.0);
}

WeightResult iw_mr_weight(std::span<const double> values, double mu, Timing timing) {
    const double zeta = zeta_bound_hat(values, mu, timing);
    WeightResult r;
    r.zeta_bound = zeta;
    r.sigma2_hat = sigma2_hat_diff(values);
    r.w = minimax_weight_from_bound(zeta);
    if (zeta == 0.0 && *r.sigma2_hat == 0.0) {
        r.clipped = true; // all values equal mu: forecasts coincide
    }
    return r;
}

WeightResult iw_mr_weight(const panel::Series& series, Timing timing) {
    return iw_mr_weight(series.values, series.mu, timing);
}

WeightResult iw_mr2_weight(std::span<const double> values, double mu) {
    require_length(values, mu, 2, "iw-mr2");
    const double m = static_cast<double>(values.size());
    const double num = max_sq_dev(values, mu);
    const double ss_centered = sum_sq_dev(values, mean(values));
    const double den = ss_centered / (m * (m - 1.0));

    WeightResult r;
    r.sigma2_hat = ss_centered / (m - 1.0);
    double zeta;
    if (den == 0.0) {
        zeta = num > 0.0 ? kInf : 0.0;
        r.clipped = num == 0.0; // all values equal mu
    } else {
        zeta = num / den;
    }
    r.zeta_bound = zeta;
    r.w = minimax_weight_from_bound(zeta);
    return r;
}

WeightResult iw_mr2_weight(const panel::Series& series) {
    return iw_mr2_weight(series.values, series.mu);
}

WeightResult iw_msfe_is_weight(std::span<const double> values, double mu) {
    require_length(values, mu, 2, "iw-msfe-is");
    const double sse_ts = sum_sq_dev(values, mean(values));
    const double sse_pool = sum_sq_dev(values, mu);
    return inverse_sse_weight(sse_ts, sse_pool);
}

WeightResult iw_msfe_is_weight(const panel::Series& series) {
    return iw_msfe_is_weight(series.values, series.mu);
}

WeightResult iw_msfe_oos_weight(std::span<const double> values, double mu, int p,
                                std::optional<int> rolling) {
    require_length(values, mu, 2, "iw-msfe-oos");
    const int m = static_cast<int>(values.size());
    if (p < 1 || p > m - 1) {
        std::ostringstream os;
        os << "iw-msfe-oos needs 1 <= P <= T-1; got P=" << p << " with T=" << m;
        throw std::invalid_argument(os.str());
    }
    if (rolling && *rolling < 1) {
        throw std::invalid_argument("iw-msfe-oos rolling window must be >= 1");
    }
    double sse_ts = 0.0;
    double sse_pool = 0.0;
    for (int t = m - p; t < m; ++t) {
        int lo = 0;
        if (rolling) {
            lo = std::max(0, t - *rolling);
        }
        const double ts_fc = mean(values.subspan(static_cast<std::size_t>(lo),
                                                 static_cast<std::size_t>(t - lo)));
        const double e_ts = values[static_cast<std::size_t>(t)] - ts_fc;
        const double e_pool = values[static_cast<std::size_t>(t)] - mu;
        sse_ts += e_ts * e_ts;
        sse_pool += e_pool * e_pool;
    }
    return inverse_sse_weight(sse_ts, sse_pool);
}

WeightResult iw_msfe_oos_weight(const panel::Series& series, int p,
                                std::optional<int> rolling) {
    return iw_msfe_oos_weight(series.values, series.mu, p, rolling);
}

double oracle_weight(double lambda2, double sigma2, long t) {
    if (!(sigma2 > 0.0)) {
        throw std::invalid_argument("oracle weight needs sigma2 > 0");
    }
    if (lambda2 < 0.0) {
        throw std::invalid_argument("oracle weight needs lambda2 >= 0");
    }
    if (t < 1) {
        throw std::invalid_argument("oracle weight needs T >= 1");
    }
    return lambda2 / (lambda2 + sigma2 / static_cast<double>(t));
}

double james_stein_weight(double lambda2, double sigma2, long t) {
    return oracle_weight(lambda2, sigma2, t);
}

std::pair<double, double> js_homogeneous_estimates(const panel::PanelDataset& ds) {
    if (!ds.balanced() || !ds.t_common() || *ds.t_common() < 2) {
        throw std::invalid_argument(
            "james-stein estimates need a balanced panel with T >= 2");
    }
    const std::size_t n = ds.units().size();
    if (n < 2) {
        throw std::invalid_argument("james-stein estimates need at least 2 units");
    }
    const double t = static_cast<double>(*ds.t_common());

    double sigma2_sum = 0.0;
    std::vector<double> unit_means;
    unit_means.reserve(n);
    std::vector<double> vals;
    for (std::size_t u = 0; u < n; ++u) {
        const auto span = ds.unit_observations(u);
        vals.clear();
        for (const auto& o : span) {
            vals.push_back(o.outcome);
        }
        sigma2_sum += sigma2_hat_diff(vals);
        unit_means.push_back(mean(vals));
    }
    const double sigma2_hat = sigma2_sum / static_cast<double>(n);

    const double grand = mean(unit_means);
    double var_means = 0.0;
    for (const double m : unit_means) {
        var_means += (m - grand) * (m - grand);
    }
    var_means /= static_cast<double>(n - 1);

    const double lambda2_hat = std::max(0.0, var_means - sigma2_hat / t);
    return {lambda2_hat, sigma2_hat};
}

WeightResult evaluate(const Rule& rule, std::span<const double> values, double mu) {
    switch (rule.kind) {
    case Kind::IwO:
        return iw_o_weight(values, mu, rule.timing);
    case Kind::IwMr:
        return iw_mr_weight(values, mu, rule.timing);
    case Kind::IwMr2:
        return iw_mr2_weight(values, mu);
    case Kind::IwMsfeIs:
        return iw_msfe_is_weight(values, mu);
    case Kind::IwMsfeOos:
        return iw_msfe_oos_weight(values, mu, rule.p, rule.rolling);
    case Kind::Oracle:
        return {oracle_weight(rule.lambda2, rule.sigma2,
                              static_cast<long>(values.size())),
                std::nullopt, std::nullopt, false};
    case Kind::JamesStein:
        return {james_stein_weight(rule.lambda2, rule.sigma2,
                                   static_cast<long>(values.size())),
                std::nullopt, std::nullopt, false};
    case Kind::Constant:
        if (rule.constant < 0.0 || rule.constant > 1.0) {
            throw std::invalid_argument("constant weight must lie in [0, 1]");
        }
        return {rule.constant, std::nullopt, std::nullopt, false};
    }
    throw std::logic_error("unreachable rule kind");
}

WeightResult evaluate(const Rule& rule, const panel::Series& series) {
    return evaluate(rule, series.values, series.mu);
}

std::size_t Rule::min_length() const {
    switch (kind) {
    case Kind::IwMsfeOos:
        return static_cast<std::size_t>(p) + 1;
    case Kind::Oracle:
    case Kind::JamesStein:
    case Kind::Constant:
        return 1;
    default:
        return 2;
    }
}

namespace {

Kind kind_from_name(const std::string& name) {
    if (name == "iw-o") return Kind::IwO;
    if (name == "iw-mr") return Kind::IwMr;
    if (name == "iw-mr2") return Kind::IwMr2;
    if (name == "iw-msfe-is") return Kind::IwMsfeIs;
    if (name == "iw-msfe-oos") return Kind::IwMsfeOos;
    if (name == "oracle") return Kind::Oracle;
    if (name == "james-stein") return Kind::JamesStein;
    if (name == "constant") return Kind::Constant;
    throw std::invalid_argument(
        "unknown weight rule '" + name +
        "' (expected iw-o, iw-mr, iw-mr2, iw-msfe-is, iw-msfe-oos, oracle, "
        "james-stein or constant)");
}

const char* kind_name(Kind k) {
    switch (k) {
    case Kind::IwO: return "iw-o";
    case Kind::IwMr: return "iw-mr";
    case Kind::IwMr2: return "iw-mr2";
    case Kind::IwMsfeIs: return "iw-msfe-is";
    case Kind::IwMsfeOos: return "iw-msfe-oos";
    case Kind::Oracle: return "oracle";
    case Kind::JamesStein: return "james-stein";
    case Kind::Constant: return "constant";
    }
    return "?";
}

} // namespace

Rule Rule::parse(const std::string& spec) {
    std::vector<std::string> tokens;
    std::string cur;
    for (const char c : spec) {
        if (c == ':') {
            tokens.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    tokens.push_back(cur);
    if (tokens.front().empty()) {
        throw std::invalid_argument("empty weight rule spec");
    }

    Rule rule;
    rule.kind = kind_from_name(tokens.front());
    bool have_lambda2 = false;
    bool have_sigma2 = false;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        if (tok == "current") {
            rule.timing = Timing::Current;
            continue;
        }
        if (tok == "lagged") {
            rule.timing = Timing::Lagged;
            continue;
        }
        const auto eq = tok.find('=');
        std::string key;
        std::string val;
        if (eq == std::string::npos) {
            // Bare value: the kind's natural parameter.
            val = tok;
            if (rule.kind == Kind::Constant) {
                key = "c";
            } else if (rule.kind == Kind::IwMsfeOos) {
                key = "p";
            } else {
                throw std::invalid_argument("unexpected token '" + tok + "' in rule '" +
                                            spec + "'");
            }
        } else {
            key = tok.substr(0, eq);
            val = tok.substr(eq + 1);
        }
        if (key != "p" && key != "r" && key != "rolling" && key != "c" &&
            key != "lambda2" && key != "sigma2") {
            throw std::invalid_argument("unknown parameter '" + key + "' in rule '" +
                                        spec + "'");
        }
        try {
            if (key == "p") {
                rule.p = static_cast<int>(std::stol(val));
            } else if (key == "r" || key == "rolling") {
                rule.rolling = static_cast<int>(std::stol(val));
            } else if (key == "c") {
                rule.constant = std::stod(val);
            } else if (key == "lambda2") {
                rule.lambda2 = std::stod(val);
                have_lambda2 = true;
            } else {
                rule.sigma2 = std::stod(val);
                have_sigma2 = true;
            }
        } catch (const std::exception&) {
            throw std::invalid_argument("bad parameter '" + tok + "' in rule '" + spec +
                                        "'");
        }
    }
    if (rule.kind == Kind::Constant && (rule.constant < 0.0 || rule.constant > 1.0)) {
        throw std::invalid_argument("constant weight must lie in [0, 1]");
    }
    if (rule.kind == Kind::IwMsfeOos && rule.p < 1) {
        throw std::invalid_argument("iw-msfe-oos needs p >= 1");
    }
    if ((rule.kind == Kind::Oracle || rule.kind == Kind::JamesStein) &&
        (!have_lambda2 || !have_sigma2)) {
        throw std::invalid_argument(std::string(kind_name(rule.kind)) +
                                    " needs lambda2=<v>:sigma2=<v>");
    }
    if ((rule.kind == Kind::Oracle || rule.kind == Kind::JamesStein) &&
        (rule.lambda2 < 0.0 || !(rule.sigma2 > 0.0))) {
        throw std::invalid_argument(std::string(kind_name(rule.kind)) +
                                    " needs lambda2 >= 0 and sigma2 > 0");
    }
    return rule;
}

std::string Rule::to_string() const {
    std::ostringstream os;
    os << kind_name(kind);
    if (timing == Timing::Lagged) {
        os << ":lagged";
    }
    if (kind == Kind::IwMsfeOos) {
        if (p != 1) {
            os << ":p=" << p;
        }
        if (rolling) {
            os << ":r=" << *rolling;
        }
    } else if (kind == Kind::Constant) {
        os << ":c=" << constant;
    } else if (kind == Kind::Oracle || kind == Kind::JamesStein) {
        os << ":lambda2=" << lambda2 << ":sigma2=" << sigma2;
    }
    return os.str();
}

} // namespace iw::weights
