#include <gtest/gtest.h>

#include "mmdesign/config.hpp"
#include "mmdesign/io.hpp"

using namespace mmdesign;
using hrf::HrfParams;

TEST(DesignText, RoundTrip) {
    const Design d = random_design(3, 50, 4);
    const Design back = io::parse_design(io::design_text(d), 3, 4.0);
    EXPECT_EQ(back, d);
    EXPECT_EQ(io::design_text(Design({1, 0, 2}, 2, 4.0)), "1 0 2\n");
}

TEST(DesignText, CommentsAndLines) {
    const Design d = io::parse_design("# header\n0 1 1\n\n1 0  # tail\n", 1, 4.0);
    EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 1, 1, 0}));
}

TEST(DesignText, ParseErrorsCarryLine) {
    try {
        io::parse_design("0 1\n1 x 0\n", 1, 4.0);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
    }
    EXPECT_THROW(io::parse_design("0 -1", 1, 4.0), ParseError);
    EXPECT_THROW(io::parse_design("0 1.5", 1, 4.0), ParseError);
    EXPECT_THROW(io::parse_design("\n  \n", 1, 4.0), ParseError);
    // valid integers outside 0..Q are a configuration problem
    EXPECT_THROW(io::parse_design("0 3", 2, 4.0), ConfigError);
}

TEST(DesignJson, RoundTrip) {
    const Design d({0, 2, 1, 3}, 3, 2.5);
    const auto j = io::design_to_json(d);
    EXPECT_EQ(j.at("q"), 3);
    EXPECT_EQ(io::parse_design(j.dump(), 1, 4.0), d);
    try {
        io::parse_design("{\n \"q\": 1,\n \"labels\": [0, 1,]\n}", 1, 4.0);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    EXPECT_THROW(io::parse_design("{\"labels\": [0, 1]}", 1, 4.0), ParseError);
}

TEST(TableJson, RoundTrip) {
    LocalOptTable t;
    t.merge({Eigen::Vector2d(0.6, 0.8), HrfParams(6.2, 0.4), 12.5, {1, 0, 2}});
    t.merge({Eigen::Vector2d(0, 0), HrfParams(9, 2), 0.1 + 0.2, {0, 1, 1}});
    const auto j = io::table_to_json(t);
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(j[0].at("design"), "0 1 1");
    const LocalOptTable back = io::table_from_json(nlohmann::json::parse(j.dump()));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.at(Eigen::Vector2d(3, 4), HrfParams(6.2, 0.4)).design, (std::vector<int>{1, 0, 2}));
    EXPECT_EQ(back.at(Eigen::Vector2d(0, 0), HrfParams(9, 2)).phi_a, 0.1 + 0.2);
    EXPECT_EQ(io::table_to_json(back).dump(), j.dump());
    EXPECT_THROW(io::table_from_json(nlohmann::json::object()), ParseError);
    EXPECT_THROW(io::table_from_json(nlohmann::json::parse(R"([{"theta":[1],"p":[6],"phi_a":1,"design":"1"}])")),
                 ParseError);
}

TEST(SearchResultJson, Fields) {
    SearchResult r;
    r.best_design = Design({1, 0}, 1, 4.0);
    r.best_objective = 3.5;
    r.trace = {1.0, 3.5};
    r.evaluations = 42;
    const auto j = io::search_result_to_json(r);
    EXPECT_EQ(j.at("design"), "1 0");
    EXPECT_EQ(j.at("objective"), 3.5);
    EXPECT_EQ(j.at("trace").size(), 2u);
}

TEST(NumberFormat, ShortestRoundTrip) {
    EXPECT_EQ(io::format_number(0.1), "0.1");
    EXPECT_EQ(io::format_number(6.0), "6");
    const double x = 75.34123456789012;
    EXPECT_EQ(std::stod(io::format_number(x)), x);
}

TEST(GridCsv, HeaderAndAngles) {
    io::GridCsv csv(3, true);
    const ThetaVector t = angles_to_theta({0.3, -1.1});
    csv.row(HrfParams(6, 0), t, 1.5, 0.75);
    const std::string s = csv.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "p1,p6,phi_1,phi_2,theta_1,theta_2,theta_3,phi_a,re");
    const auto phi = io::GridCsv::theta_angles(t);
    EXPECT_NEAR(phi[0], 0.3, 1e-12);
    EXPECT_NEAR(phi[1], -1.1, 1e-12);
    for (const auto& th : full_theta_grid(3, 0.1 * kPi)) {
        const auto a = io::GridCsv::theta_angles(th);
        EXPECT_LT((angles_to_theta(a) - th).cwiseAbs().maxCoeff(), 1e-9);
    }
    io::GridCsv plain(1, false);
    plain.row(HrfParams(6, 0), Eigen::VectorXd::Ones(1), 2.0, 0.0);
    EXPECT_EQ(plain.str(), "p1,p6,theta_1,phi_a,re\n6,0,1,2,\n");
}

TEST(Config, DefaultsAndOverrides) {
    const auto c = parse_config(R"({"q": 2, "length": 242, "grid": "comparison", "theta": "reduced",
                                    "space": "xi0", "seeds": [1, 2, 3], "ga": {"budget": 500}})");
    EXPECT_EQ(c.experiment.q_types, 2);
    EXPECT_EQ(c.experiment.length, 242u);
    EXPECT_EQ(c.grid.p_step, 0.1);
    EXPECT_TRUE(c.reduced_theta);
    EXPECT_EQ(c.space, SpaceKind::restricted);
    EXPECT_EQ(c.seeds.size(), 3u);
    EXPECT_EQ(c.ga.evaluation_budget, 500u);
    EXPECT_EQ(c.ga.population_size, 20u);
    EXPECT_EQ(c.experiment.noise.rho, 0.3);
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.p_points().size(), 651u);
    const auto again = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(again).dump(), config_to_json(c).dump());
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config("{\"q\": 1,\n \"bogus\": 2}"), ConfigError);
    EXPECT_THROW(parse_config("{\"q\": \"one\"}"), ConfigError);
    EXPECT_THROW(parse_config("{\"grid\": \"medium\"}"), ConfigError);
    EXPECT_THROW(parse_config("{\"q\": 1,\n"), ParseError);
    auto bad = parse_config(R"({"rho": 1.5})");
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = parse_config(R"({"q": 4, "theta": "reduced"})");
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = parse_config(R"({"ga": {"budget": 0}})");
    EXPECT_THROW(bad.validate(), ConfigError);
}
