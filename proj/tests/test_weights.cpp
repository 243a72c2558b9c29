#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "iw/evaluation.hpp"
#include "iw/rng.hpp"
#include "iw/weights.hpp"

using namespace iw;
using weights::Timing;

namespace {

panel::Series series(std::vector<double> values, double mu) {
    return {"u", std::move(values), mu};
}

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

TEST_CASE("sigma2_hat_diff") {
    CHECK(weights::sigma2_hat_diff(std::vector<double>{7.0, 7.0, 7.0}) == 0.0);
    CHECK(weights::sigma2_hat_diff(std::vector<double>{1.0, 2.0, 3.0}) ==
          doctest::Approx(0.5));
    CHECK(weights::sigma2_hat_diff(std::vector<double>{0.0, 2.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS((void)weights::sigma2_hat_diff(std::vector<double>{1.0}),
                    std::invalid_argument);
}

TEST_CASE("iw_o_weight") {
    SUBCASE("current timing on 1,2,3") {
        const auto r = weights::iw_o_weight(series({1, 2, 3}, 0.0));
        CHECK(r.w == doctest::Approx(25.0 / 26.0).epsilon(1e-12));
        CHECK_FALSE(r.clipped);
        CHECK_FALSE(r.zeta_bound.has_value());
        REQUIRE(r.sigma2_hat.has_value());
        CHECK(*r.sigma2_hat == doctest::Approx(0.5));
    }
    SUBCASE("degenerate all-zero series") {
        const auto r = weights::iw_o_weight(series({0, 0, 0}, 0.0));
        CHECK(r.w == 0.0);
        CHECK(r.clipped);
    }
    SUBCASE("positive part fires when the noise estimate dominates") {
        // alternating series: mean square 1, diff-based estimate 2
        const auto r = weights::iw_o_weight(series({1, -1, 1, -1}, 0.0));
        CHECK(r.w == 0.0);
        CHECK(r.clipped);
    }
    SUBCASE("lagged timing uses the plain mean-square denominator") {
        // values {1,-1}: numerator (1 - 2)+ = 0
        const auto r = weights::iw_o_weight(series({1, -1}, 0.0), Timing::Lagged);
        CHECK(r.w == 0.0);
        // values {2,1}: m2 = 2.5, s2h = 0.5 -> (2.5-0.5)/2.5 = 0.8
        const auto r2 = weights::iw_o_weight(series({2, 1}, 0.0), Timing::Lagged);
        CHECK(r2.w == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS((void)weights::iw_o_weight(series({1}, 0.0)),
                        std::invalid_argument);
    }
}

TEST_CASE("zeta_bound_hat") {
    CHECK(weights::zeta_bound_hat(series({1, 2, 3}, 0.0)) == doctest::Approx(54.0));
    CHECK(weights::zeta_bound_hat(series({1, -1}, 0.0), Timing::Lagged) ==
          doctest::Approx(0.5));
    CHECK(weights::zeta_bound_hat(series({4, 4, 4}, 4.0)) == 0.0);
    CHECK(weights::zeta_bound_hat(series({4, 4}, 0.0)) == kInf);
    CHECK_THROWS_AS((void)weights::zeta_bound_hat(series({1}, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("minimax_weight_from_bound") {
    CHECK(weights::minimax_weight_from_bound(0.0) == 0.0);
    CHECK(weights::minimax_weight_from_bound(3.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(weights::minimax_weight_from_bound(54.0) ==
          doctest::Approx(1.0 - 1.0 / std::sqrt(55.0)).epsilon(1e-15));
    CHECK(weights::minimax_weight_from_bound(kInf) == 1.0);
    CHECK_THROWS_AS((void)weights::minimax_weight_from_bound(-1e-9),
                    std::invalid_argument);

    // strictly increasing on [0, inf)
    double prev = -1.0;
    for (double z = 0.0; z <= 64.0; z += 0.5) {
        const double w = weights::minimax_weight_from_bound(z);
        CHECK(w > prev);
        prev = w;
    }
}

TEST_CASE("iw_mr_weight") {
    SUBCASE("current timing composes bound and weight") {
        const auto r = weights::iw_mr_weight(series({1, 2, 3}, 0.0));
        CHECK(r.w == doctest::Approx(1.0 - 1.0 / std::sqrt(55.0)).epsilon(1e-12));
        REQUIRE(r.zeta_bound.has_value());
        CHECK(*r.zeta_bound == doctest::Approx(54.0));
    }
    SUBCASE("lagged timing on a length-2 history") {
        const auto r = weights::iw_mr_weight(series({1, -1}, 0.0), Timing::Lagged);
        CHECK(r.w == doctest::Approx(1.0 - 1.0 / std::sqrt(1.5)).epsilon(1e-12));
    }
    SUBCASE("degenerate rule when the forecasts coincide") {
        const auto r = weights::iw_mr_weight(series({2, 2, 2}, 2.0));
        CHECK(r.w == 0.0);
        CHECK(r.clipped);
    }
    SUBCASE("constant series away from mu gets full weight") {
        const auto r = weights::iw_mr_weight(series({2, 2, 2}, 0.0));
        CHECK(r.w == 1.0);
        CHECK(*r.zeta_bound == kInf);
    }
}

TEST_CASE("footnote-style closed form matches the lagged rule exactly") {
    sim::RngStream rng(sim::stream_key(99, 1));
    for (int i = 0; i < 200; ++i) {
        const double y1 = 3.0 * rng.normal();
        const double y2 = 3.0 * rng.normal();
        const double d = y1 - y2;
        if (d == 0.0) {
            continue;
        }
        const double closed =
            1.0 - 1.0 / std::sqrt(std::max(y1 * y1, y2 * y2) / (0.5 * d * d) + 1.0);
        const auto r = weights::iw_mr_weight(series({y1, y2}, 0.0), Timing::Lagged);
        CHECK(r.w == closed);
    }
}

TEST_CASE("iw_mr2_weight") {
    const auto r = weights::iw_mr2_weight(series({1, 2, 3}, 0.0));
    CHECK(r.w == doctest::Approx(1.0 - 1.0 / std::sqrt(28.0)).epsilon(1e-12));
    const auto degenerate = weights::iw_mr2_weight(series({5, 5, 5}, 5.0));
    CHECK(degenerate.w == 0.0);
    const auto full = weights::iw_mr2_weight(series({5, 5, 5}, 0.0));
    CHECK(full.w == 1.0);
}

TEST_CASE("iw_msfe_is_weight") {
    CHECK(weights::iw_msfe_is_weight(series({1, 2, 3}, 0.0)).w ==
          doctest::Approx(0.875).epsilon(1e-12));
    // series mean equals mu: equal SSEs, equal weights
    CHECK(weights::iw_msfe_is_weight(series({1, -1}, 0.0)).w == doctest::Approx(0.5));
    // constant series away from mu: zero TS error
    const auto r = weights::iw_msfe_is_weight(series({3, 3, 3}, 0.0));
    CHECK(r.w == 1.0);
    CHECK(r.clipped);
    // both SSEs zero
    const auto tie = weights::iw_msfe_is_weight(series({0, 0}, 0.0));
    CHECK(tie.w == 0.0);
    CHECK(tie.clipped);
}

TEST_CASE("iw_msfe_oos_weight") {
    SUBCASE("single-origin form on 1,2,3") {
        const auto r = weights::iw_msfe_oos_weight(series({1, 2, 3}, 0.0), 1);
        CHECK(r.w == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("zero TS error gives full weight") {
        const auto r = weights::iw_msfe_oos_weight(series({1, 1, 1}, 0.0), 1);
        CHECK(r.w == 1.0);
    }
    SUBCASE("zero pool error gives zero weight") {
        const auto r = weights::iw_msfe_oos_weight(series({1, 2, 0}, 0.0), 1);
        CHECK(r.w == 0.0);
    }
    SUBCASE("P out of range") {
        CHECK_THROWS_AS((void)weights::iw_msfe_oos_weight(series({1, 2, 3}, 0.0), 3),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)weights::iw_msfe_oos_weight(series({1, 2, 3}, 0.0), 0),
                        std::invalid_argument);
    }
    SUBCASE("multi-origin expanding windows") {
        // P=2 on {1,2,3}: origins forecast Y2 from {1} and Y3 from {1,2}.
        const auto r = weights::iw_msfe_oos_weight(series({1, 2, 3}, 0.0), 2);
        const double sse_ts = 1.0 + 2.25;
        const double sse_pool = 4.0 + 9.0;
        CHECK(r.w == doctest::Approx(sse_pool / (sse_ts + sse_pool)).epsilon(1e-12));
    }
}

TEST_CASE("oracle and james-stein weights") {
    CHECK(weights::oracle_weight(1.0, 1.0, 1) == doctest::Approx(0.5));
    CHECK(weights::oracle_weight(0.0, 2.0, 5) == 0.0);
    CHECK(weights::oracle_weight(1.0, 1.0, 4) == doctest::Approx(0.8));
    CHECK(weights::james_stein_weight(1.0, 1.0, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(weights::james_stein_weight(9.0, 1.0, 2) ==
          doctest::Approx(9.0 / 9.5).epsilon(1e-12));
    CHECK(weights::james_stein_weight(0.0, 1.0, 3) == 0.0);
    CHECK_THROWS_AS((void)weights::oracle_weight(1.0, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)weights::james_stein_weight(1.0, -1.0, 1),
                    std::invalid_argument);
}

TEST_CASE("js_homogeneous_estimates") {
    using panel::Observation;
    using panel::PanelDataset;
    SUBCASE("identical constant units give zero estimates") {
        std::vector<Observation> obs{
            {"a", 1, 2.0, {}, {}}, {"a", 2, 2.0, {}, {}},
            {"b", 1, 2.0, {}, {}}, {"b", 2, 2.0, {}, {}},
        };
        const auto [l2, s2] =
            weights::js_homogeneous_estimates(PanelDataset::from_observations(obs));
        CHECK(l2 == 0.0);
        CHECK(s2 == 0.0);
    }
    SUBCASE("pure cross-sectional spread shows up in lambda2") {
        std::vector<Observation> obs{
            {"a", 1, -1.0, {}, {}}, {"a", 2, -1.0, {}, {}},
            {"b", 1, 1.0, {}, {}},  {"b", 2, 1.0, {}, {}},
        };
        const auto [l2, s2] =
            weights::js_homogeneous_estimates(PanelDataset::from_observations(obs));
        CHECK(s2 == 0.0);
        CHECK(l2 == doctest::Approx(2.0)); // variance of {-1, 1} with divisor N-1
    }
    SUBCASE("positive part clamps lambda2 at zero") {
        std::vector<Observation> obs{
            {"a", 1, 0.0, {}, {}}, {"a", 2, 2.0, {}, {}},
            {"b", 1, 2.0, {}, {}}, {"b", 2, 0.0, {}, {}},
        };
        const auto [l2, s2] =
            weights::js_homogeneous_estimates(PanelDataset::from_observations(obs));
        CHECK(s2 == doctest::Approx(2.0));
        CHECK(l2 == 0.0);
    }
    SUBCASE("preconditions") {
        std::vector<Observation> unbalanced{
            {"a", 1, 0.0, {}, {}}, {"a", 2, 1.0, {}, {}}, {"b", 1, 0.0, {}, {}}};
        CHECK_THROWS_AS((void)weights::js_homogeneous_estimates(
                            panel::PanelDataset::from_observations(unbalanced)),
                        std::invalid_argument);
        std::vector<Observation> single{{"a", 1, 0.0, {}, {}}, {"a", 2, 1.0, {}, {}}};
        CHECK_THROWS_AS((void)weights::js_homogeneous_estimates(
                            panel::PanelDataset::from_observations(single)),
                        std::invalid_argument);
    }
}

TEST_CASE("rule parsing round trips") {
    const auto mr = weights::Rule::parse("iw-mr:lagged");
    CHECK(mr.kind == weights::Kind::IwMr);
    CHECK(mr.timing == Timing::Lagged);
    CHECK(mr.to_string() == "iw-mr:lagged");

    const auto oos = weights::Rule::parse("iw-msfe-oos:p=2:r=3");
    CHECK(oos.p == 2);
    REQUIRE(oos.rolling.has_value());
    CHECK(*oos.rolling == 3);

    const auto c = weights::Rule::parse("constant:0.5");
    CHECK(c.constant == 0.5);

    const auto js = weights::Rule::parse("james-stein:lambda2=2:sigma2=1");
    CHECK(js.lambda2 == 2.0);

    CHECK_THROWS_AS((void)weights::Rule::parse("nonsense"), std::invalid_argument);
    CHECK_THROWS_AS((void)weights::Rule::parse("constant:1.5"), std::invalid_argument);
    CHECK_THROWS_AS((void)weights::Rule::parse("oracle:lambda2=1"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)weights::Rule::parse("iw-mr:bogus=1"), std::invalid_argument);
}

namespace {

std::vector<weights::Rule> estimated_rules() {
    return {weights::Rule::parse("iw-o"), weights::Rule::parse("iw-mr"),
            weights::Rule::parse("iw-mr2"), weights::Rule::parse("iw-msfe-is"),
            weights::Rule::parse("iw-msfe-oos")};
}

} // namespace

TEST_CASE("every weight stays in [0,1] under fuzzing") {
    sim::RngStream rng(sim::stream_key(7, 0));
    const auto rules = estimated_rules();
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t len = 2 + static_cast<std::size_t>(rng.next_u64() % 7);
        const double scale = std::exp(10.0 * (rng.uniform() - 0.5));
        std::vector<double> v(len);
        for (auto& x : v) {
            x = scale * rng.normal();
        }
        const double mu = scale * rng.normal();
        for (const auto& rule : rules) {
            const auto r = weights::evaluate(rule, v, mu);
            CHECK(std::isfinite(r.w));
            CHECK(r.w >= 0.0);
            CHECK(r.w <= 1.0);
        }
    }
}

TEST_CASE("scale invariance at mu = 0") {
    sim::RngStream rng(sim::stream_key(8, 0));
    const auto rules = estimated_rules();
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(4);
        for (auto& x : v) {
            x = rng.normal();
        }
        for (const double s : {1e-6, 3.0, -2.0, 1e6}) {
            std::vector<double> scaled = v;
            for (auto& x : scaled) {
                x *= s;
            }
            for (const auto& rule : rules) {
                const double w0 = weights::evaluate(rule, v, 0.0).w;
                const double w1 = weights::evaluate(rule, scaled, 0.0).w;
                CHECK(w1 == doctest::Approx(w0).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("translation covariance") {
    sim::RngStream rng(sim::stream_key(9, 0));
    const auto rules = estimated_rules();
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(3);
        for (auto& x : v) {
            x = rng.normal();
        }
        const double mu = rng.normal();
        for (const double c : {1.0, -3.5, 100.0}) {
            std::vector<double> shifted = v;
            for (auto& x : shifted) {
                x += c;
            }
            for (const auto& rule : rules) {
                const double w0 = weights::evaluate(rule, v, mu).w;
                const double w1 = weights::evaluate(rule, shifted, mu + c).w;
                CHECK(w1 == doctest::Approx(w0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("zeta bound is reported exactly for the minimax rules") {
    const auto mr = weights::iw_mr_weight(series({1, 2, 3}, 0.0));
    CHECK(mr.zeta_bound.has_value());
    const auto o = weights::iw_o_weight(series({1, 2, 3}, 0.0));
    CHECK_FALSE(o.zeta_bound.has_value());
    const auto is = weights::iw_msfe_is_weight(series({1, 2, 3}, 0.0));
    CHECK_FALSE(is.zeta_bound.has_value());
}

TEST_CASE("estimated weights are negatively associated with outlying effects") {
    // Normal designs: cov((A - mu)^2, (1 - W)^2) below zero by > 3 MC SEs.
    const auto rules = estimated_rules();
    for (const double lambda2 : {1.0, 3.0}) {
        for (std::size_t k = 0; k + 1 < rules.size(); ++k) { // OOS not required
            const auto& rule = rules[k];
            constexpr int n = 20000;
            constexpr int batches = 20;
            std::vector<std::pair<double, double>> draws;
            draws.reserve(n);
            for (int i = 0; i < n; ++i) {
                sim::RngStream rng(sim::stream_key(11, lambda2 == 1.0 ? 0 : 1,
                                                   static_cast<std::uint64_t>(i)));
                const double a = std::sqrt(lambda2) * rng.normal();
                std::vector<double> v{a + rng.normal(), a + rng.normal(),
                                      a + rng.normal()};
                const double w = weights::evaluate(rule, v, 0.0).w;
                draws.push_back({a * a, (1.0 - w) * (1.0 - w)});
            }
            const double cov = eval::assumption2_cov(draws);
            std::vector<double> batch_covs;
            for (int b = 0; b < batches; ++b) {
                const auto lo = static_cast<std::size_t>(b) * n / batches;
                const auto hi = static_cast<std::size_t>(b + 1) * n / batches;
                batch_covs.push_back(eval::assumption2_cov(
                    std::span<const std::pair<double, double>>(draws.data() + lo,
                                                               hi - lo)));
            }
            double mean = 0.0;
            for (const double c : batch_covs) {
                mean += c;
            }
            mean /= batches;
            double ss = 0.0;
            for (const double c : batch_covs) {
                ss += (c - mean) * (c - mean);
            }
            const double se = std::sqrt(ss / (batches - 1) / batches);
            INFO("rule ", rule.to_string(), " lambda2 ", lambda2, " cov ", cov, " se ",
                 se);
            CHECK(cov < -3.0 * se);
        }
    }
}
