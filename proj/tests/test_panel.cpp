#include <doctest.h>

#include <cmath>
#include <sstream>

#include "iw/panel.hpp"

using namespace iw;
using panel::CsvSchema;
using panel::MuSpec;
using panel::Observation;
using panel::PanelDataset;

namespace {

PanelDataset load(const std::string& text, CsvSchema schema = {}) {
    std::istringstream in(text);
    return panel::load_panel(in, schema);
}

} // namespace

TEST_CASE("load_panel parses a balanced two-period panel") {
    CsvSchema schema;
    schema.unit = "id";
    schema.period = "t";
    schema.outcome = "y";
    const auto ds = load("id,t,y\na,1,2.0\na,2,4.0\n", schema);
    CHECK(ds.units().size() == 1);
    CHECK(ds.balanced());
    REQUIRE(ds.t_common().has_value());
    CHECK(*ds.t_common() == 2);
    CHECK(panel::pooled_mean(ds) == doctest::Approx(3.0));
}

TEST_CASE("load_panel flags duplicates naming the pair") {
    CsvSchema schema;
    schema.unit = "id";
    schema.period = "t";
    schema.outcome = "y";
    std::istringstream in("id,t,y\na,1,2.0\na,1,3.0\n");
    try {
        (void)panel::load_panel(in, schema);
        FAIL("expected a validation error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("'a'") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
    }
}

TEST_CASE("load_panel detects unbalanced panels") {
    CsvSchema schema;
    schema.unit = "id";
    schema.period = "t";
    schema.outcome = "y";
    const auto ds = load("id,t,y\na,1,1\nb,1,5\nb,2,7\n", schema);
    CHECK(ds.units().size() == 2);
    CHECK_FALSE(ds.balanced());
    CHECK_FALSE(ds.t_common().has_value());
}

TEST_CASE("load_panel reports malformed rows by number") {
    std::istringstream in("unit,period,outcome\na,1,2.0\na,two,3.0\n");
    try {
        (void)panel::load_panel(in, CsvSchema{});
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("load_panel rejects non-finite outcomes") {
    std::istringstream in("unit,period,outcome\na,1,nan\n");
    CHECK_THROWS_AS((void)panel::load_panel(in, CsvSchema{}), std::invalid_argument);
}

TEST_CASE("save/load round trip preserves the dataset") {
    CsvSchema schema;
    schema.covariates = {"x1"};
    schema.group = "g";
    std::vector<Observation> obs{
        {"a", 1, 0.1234567890123456, {1.5}, "g1"},
        {"a", 2, -2.25, {0.5}, "g1"},
        {"b", 1, 1e-17, {2.0}, "g2"},
        {"b", 2, 3.0, {2.5}, "g2"},
    };
    const auto ds = PanelDataset::from_observations(obs, MuSpec::pooled(), {"x1"});
    std::ostringstream out;
    panel::save_panel(out, ds, schema);
    std::istringstream in(out.str());
    const auto back = panel::load_panel(in, schema);
    CHECK(back.observations() == ds.observations());
    CHECK(back.balanced() == ds.balanced());
}

TEST_CASE("pooled_mean basics") {
    std::vector<Observation> obs;
    for (long t = 1; t <= 3; ++t) {
        obs.push_back({"a", t, static_cast<double>(t), {}, {}});
        obs.push_back({"b", t, static_cast<double>(t + 3), {}, {}});
    }
    const auto ds = PanelDataset::from_observations(obs);
    CHECK(panel::pooled_mean(ds) == doctest::Approx(3.5)); // mean of 1..6
    CHECK_THROWS_AS((void)panel::pooled_mean(PanelDataset::from_observations({})),
                    std::invalid_argument);

    std::vector<Observation> constant{{"a", 1, 2.5, {}, {}}, {"b", 1, 2.5, {}, {}}};
    CHECK(panel::pooled_mean(PanelDataset::from_observations(constant)) == 2.5);
}

TEST_CASE("pooled mean of a demeaned dataset is zero") {
    std::vector<Observation> obs;
    double vals[] = {0.3, -1.7, 2.4, 5.5, -0.2, 1.1};
    int i = 0;
    for (const char* u : {"a", "b", "c"}) {
        for (long t = 1; t <= 2; ++t) {
            obs.push_back({u, t, vals[i++], {}, {}});
        }
    }
    auto ds = PanelDataset::from_observations(obs);
    const double mu = panel::pooled_mean(ds);
    std::vector<Observation> demeaned = ds.observations();
    for (auto& o : demeaned) {
        o.outcome -= mu;
    }
    const auto dd = PanelDataset::from_observations(demeaned);
    CHECK(std::abs(panel::pooled_mean(dd)) < 1e-12);
}

TEST_CASE("group pooled means follow the group column") {
    std::vector<Observation> obs{
        {"a", 1, 1.0, {}, "low"},  {"a", 2, 3.0, {}, "low"},
        {"b", 1, 10.0, {}, "high"}, {"b", 2, 30.0, {}, "high"},
    };
    const auto ds =
        PanelDataset::from_observations(obs, MuSpec::group_pooled());
    const auto means = panel::group_pooled_means(ds);
    CHECK(means.at("low") == doctest::Approx(2.0));
    CHECK(means.at("high") == doctest::Approx(20.0));
    const auto points = ds.shrink_points();
    CHECK(points.at("a") == doctest::Approx(2.0));
    CHECK(points.at("b") == doctest::Approx(20.0));
}

TEST_CASE("residualize with supplied zero beta is the identity") {
    std::vector<Observation> obs{
        {"a", 1, 1.0, {2.0}, {}},
        {"a", 2, 4.0, {3.0}, {}},
    };
    const auto ds = PanelDataset::from_observations(obs);
    const auto res = panel::residualize_panel(ds, std::vector<double>{0.0});
    CHECK(res.observations()[0].outcome == 1.0);
    CHECK(res.observations()[1].outcome == 4.0);
}

TEST_CASE("residualize with a supplied beta that fits exactly") {
    std::vector<Observation> obs{
        {"a", 1, 3.0, {1.0, 2.0}, {}},
        {"a", 2, 8.0, {2.0, 6.0}, {}},
    };
    const auto ds = PanelDataset::from_observations(obs);
    const auto res = panel::residualize_panel(ds, std::vector<double>{1.0, 1.0});
    for (const auto& o : res.observations()) {
        CHECK(o.outcome == 0.0);
    }
    // supplied beta leaves the shrink-point choice to the caller
    CHECK(res.mu().mode == ds.mu().mode);
}

TEST_CASE("residualize recovers an exact linear model") {
    // y = 2 t with x = t: pooled OLS with intercept gives beta = 2, residuals 0.
    std::vector<Observation> obs;
    for (const char* u : {"a", "b"}) {
        for (long t = 1; t <= 4; ++t) {
            obs.push_back({u, t, 2.0 * static_cast<double>(t),
                           {static_cast<double>(t)}, {}});
        }
    }
    const auto res = panel::residualize_panel(PanelDataset::from_observations(obs));
    for (const auto& o : res.observations()) {
        CHECK(std::abs(o.outcome) < 1e-12);
    }
    CHECK(res.mu().mode == MuSpec::Mode::Known);
    CHECK(res.mu().value == 0.0);
}

TEST_CASE("residualized outcomes have zero pooled mean") {
    // Deterministic non-linear outcomes; intercept absorbs the mean.
    std::vector<Observation> obs;
    for (int u = 0; u < 5; ++u) {
        for (long t = 1; t <= 3; ++t) {
            const double x = 0.7 * u - 0.3 * static_cast<double>(t);
            const double y = 1.5 + 0.4 * x + 0.1 * u * u - 0.05 * t * t;
            obs.push_back({std::string(1, static_cast<char>('a' + u)), t, y, {x}, {}});
        }
    }
    const auto res = panel::residualize_panel(PanelDataset::from_observations(obs));
    CHECK(std::abs(panel::pooled_mean(res)) < 1e-10);
}

TEST_CASE("residualize errors") {
    std::vector<Observation> no_cov{{"a", 1, 1.0, {}, {}}};
    CHECK_THROWS_AS(
        (void)panel::residualize_panel(PanelDataset::from_observations(no_cov)),
        std::invalid_argument);

    // Constant covariate collides with the intercept: rank deficient.
    std::vector<Observation> collinear{
        {"a", 1, 1.0, {1.0}, {}},
        {"a", 2, 2.0, {1.0}, {}},
        {"b", 1, 3.0, {1.0}, {}},
    };
    CHECK_THROWS_AS(
        (void)panel::residualize_panel(PanelDataset::from_observations(collinear)),
        std::invalid_argument);

    std::vector<Observation> mismatched{{"a", 1, 1.0, {1.0}, {}}};
    CHECK_THROWS_AS((void)panel::residualize_panel(
                        PanelDataset::from_observations(mismatched),
                        std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("aggregate_value_added averages cells") {
    using panel::SubjectObservation;
    SUBCASE("single subject, zero beta, passes through") {
        std::vector<SubjectObservation> raw{{"a", 1, "s1", 5.0, {}}};
        const auto ds = panel::aggregate_value_added(raw, {});
        CHECK(ds.observations()[0].outcome == doctest::Approx(5.0));
    }
    SUBCASE("two subjects average") {
        std::vector<SubjectObservation> raw{{"a", 1, "s1", 1.0, {}},
                                            {"a", 1, "s2", 3.0, {}}};
        const auto ds = panel::aggregate_value_added(raw, {});
        CHECK(ds.observations()[0].outcome == doctest::Approx(2.0));
    }
    SUBCASE("covariate adjustment") {
        std::vector<SubjectObservation> raw{{"a", 1, "s1", 1.0, {2.0}},
                                            {"a", 1, "s2", 3.0, {4.0}}};
        const auto ds = panel::aggregate_value_added(raw, {0.5});
        // mean outcome 2 minus mean covariate 3 times beta 0.5
        CHECK(ds.observations()[0].outcome == doctest::Approx(0.5));
    }
    SUBCASE("n=1 everywhere with beta 0 equals raw outcomes exactly") {
        std::vector<SubjectObservation> raw{{"a", 1, "s", 1.25, {9.0}},
                                            {"a", 2, "s", -0.5, {1.0}},
                                            {"b", 1, "s", 3.75, {2.0}}};
        const auto ds = panel::aggregate_value_added(raw, {0.0});
        CHECK(ds.observations()[0].outcome == 1.25);
        CHECK(ds.observations()[1].outcome == -0.5);
        CHECK(ds.observations()[2].outcome == 3.75);
    }
}

TEST_CASE("rolling_windows enumerates feasible origins") {
    std::vector<Observation> obs;
    for (long t = 1; t <= 4; ++t) {
        obs.push_back({"a", t, static_cast<double>(t), {}, {}});
    }
    const auto ds = PanelDataset::from_observations(obs);

    SUBCASE("window 2 over periods 1..4") {
        const auto windows = panel::rolling_windows(ds, 2);
        REQUIRE(windows.size() == 3);
        CHECK(windows[0].origin == 3);
        CHECK(windows[1].origin == 4);
        CHECK(windows[2].origin == 5);
        CHECK(windows[0].data.size() == 2);
    }
    SUBCASE("window 1 gives single-period windows") {
        const auto windows = panel::rolling_windows(ds, 1);
        REQUIRE(windows.size() == 4);
        for (const auto& w : windows) {
            CHECK(w.data.size() == 1);
        }
    }
    SUBCASE("window longer than the span yields nothing") {
        CHECK(panel::rolling_windows(ds, 9).empty());
    }
}

TEST_CASE("rolling_windows drops units missing a period") {
    std::vector<Observation> obs{
        {"a", 1, 1.0, {}, {}}, {"a", 2, 2.0, {}, {}}, {"a", 3, 3.0, {}, {}},
        {"b", 1, 1.0, {}, {}}, {"b", 3, 3.0, {}, {}}, // b misses period 2
    };
    const auto ds = PanelDataset::from_observations(obs);
    const auto windows = panel::rolling_windows(ds, 2);
    std::size_t total = 0;
    for (const auto& w : windows) {
        total += w.data.size();
        CHECK(w.data.size() <= ds.size()); // restriction property
        if (w.origin == 4) {               // window {2,3}: unit b dropped
            CHECK(w.data.units() == std::vector<std::string>{"a"});
        }
    }
    CHECK(total <= ds.size() * windows.size());
}

TEST_CASE("series resolves mu per the dataset MuSpec") {
    std::vector<Observation> obs{
        {"a", 1, 1.0, {}, {}}, {"a", 2, 3.0, {}, {}},
        {"b", 1, 5.0, {}, {}}, {"b", 2, 7.0, {}, {}},
    };
    const auto pooled = PanelDataset::from_observations(obs);
    CHECK(pooled.series(0).mu == doctest::Approx(4.0));
    const auto known = pooled.with_mu(MuSpec::known(0.25));
    CHECK(known.series(1).mu == 0.25);
    CHECK(known.series(1).values == std::vector<double>{5.0, 7.0});
}
