#include <gtest/gtest.h>

#include <random>

#include "mmdesign/criteria.hpp"

using namespace mmdesign;
using hrf::HrfParams;

namespace {

Experiment small(int q, std::size_t length) {
    Experiment ex;
    ex.q_types = q;
    ex.length = length;
    return ex;
}

}  // namespace

TEST(Angles, Examples) {
    EXPECT_TRUE(angles_to_theta({0.0}).isApprox(Eigen::Vector2d(1, 0)));
    EXPECT_TRUE(angles_to_theta({kPi / 4}).isApprox(Eigen::Vector2d(std::sqrt(0.5), std::sqrt(0.5))));
    EXPECT_LT((angles_to_theta({kPi / 2, kPi / 2}) - Eigen::Vector3d(0, 0, 1)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(angles_to_theta({}).size(), 1);
}

TEST(Angles, UnitNorm) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-kPi / 2, kPi / 2);
    for (int q = 2; q <= 6; ++q)
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> phi(static_cast<std::size_t>(q - 1));
            for (double& a : phi) a = u(rng);
            EXPECT_NEAR(angles_to_theta(phi).norm(), 1.0, 1e-12);
        }
}

TEST(ThetaGrid, FullGridQ1AndCounts) {
    const auto g1 = full_theta_grid(1, 0.1 * kPi);
    ASSERT_EQ(g1.size(), 1u);
    EXPECT_EQ(g1[0][0], 1.0);
    // phi in (-pi/2, pi/2] at 0.1 pi: 10 directions
    EXPECT_EQ(full_theta_grid(2, 0.1 * kPi).size(), 10u);
    for (const auto& t : full_theta_grid(3, 0.1 * kPi)) EXPECT_NEAR(t.norm(), 1.0, 1e-12);
}

TEST(ThetaGrid, ReducedQ2) {
    const auto g = theta0_grid(2, 0.1 * kPi);
    // 0, +-0.1pi, +-0.2pi and the endpoints +-pi/4
    EXPECT_EQ(g.size(), 7u);
    for (const auto& t : g) {
        EXPECT_GE(t[0] + 1e-12, std::abs(t[1]));
        EXPECT_LE(std::abs(std::atan2(t[1], t[0])), kPi / 4 + 1e-12);
    }
    bool has_end = false;
    for (const auto& t : g) has_end = has_end || std::abs(std::atan2(t[1], t[0]) - kPi / 4) < 1e-12;
    EXPECT_TRUE(has_end);
    EXPECT_THROW(theta0_grid(4, 0.1 * kPi), ConfigError);
    EXPECT_THROW(theta0_grid(1, 0.1 * kPi), ConfigError);
}

TEST(ThetaGrid, ReducedQ3Region) {
    for (const auto& t : theta0_grid(3, 0.05 * kPi)) {
        EXPECT_NEAR(t.norm(), 1.0, 1e-12);
        // theta_1 is the largest coordinate in absolute value
        EXPECT_GE(t[0] + 1e-12, std::abs(t[1]));
        EXPECT_GE(t[0] + 1e-12, std::abs(t[2]));
    }
}

TEST(ThetaGrid, PermutationImagesCoverHemisphere) {
    // Q = 2: the images land on the full grid exactly. Q = 3: the images form
    // a rotated 2-D angular lattice, whose covering radius is step / sqrt(2).
    for (int q : {2, 3}) {
        const double step = 0.05 * kPi;
        const auto base = theta0_grid(q, step);
        ThetaList images;
        for (const auto& perm : all_permutations(q))
            for (const auto& t : permuted_region(base, perm)) {
                images.push_back(t);
                images.push_back(-t);
            }
        for (const auto& t : full_theta_grid(q, step)) {
            double best = kPi;
            for (const auto& s : images) best = std::min(best, 2.0 * std::asin(std::min(1.0, (t - s).norm() / 2.0)));
            EXPECT_LE(best, (q == 2 ? 1e-9 : step / std::sqrt(2.0) + 1e-9)) << "Q=" << q;
        }
    }
}

TEST(PGrid, CountsAndBounds) {
    EXPECT_EQ(p_grid(0.2).size(), 176u);
    EXPECT_EQ(p_grid(0.1).size(), 651u);
    for (const auto& p : p_grid(0.1)) {
        EXPECT_GE(p.p1, 6.0);
        EXPECT_LE(p.p1, 9.0);
        EXPECT_GE(p.p6, 0.0);
        EXPECT_LE(p.p6, 2.0);
    }
    EXPECT_EQ(p_grid(0.2).back(), HrfParams(9.0, 2.0));
    EXPECT_EQ(p_grid_counts(5, 5).size(), 25u);
    EXPECT_EQ(p_grid(0.7).size(), 6u * 4u);  // endpoints appended
    EXPECT_THROW(p_grid(0.0), ConfigError);
}

TEST(PGrid, Deterministic) {
    const auto a = p_grid(0.1), b = p_grid(0.1);
    EXPECT_TRUE(a == b);
    const auto ta = theta0_grid(3, 0.05 * kPi), tb = theta0_grid(3, 0.05 * kPi);
    ASSERT_EQ(ta.size(), tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_TRUE(ta[i] == tb[i]);
}

TEST(MinPhiA, AllRestAndSingleton) {
    const Experiment ex = small(1, 30);
    const Evaluator ev(ex, {HrfParams(7, 1)});
    const ThetaList one{Eigen::VectorXd::Ones(1)};
    EXPECT_EQ(min_phi_a(ev, Design(std::vector<int>(30, 0), 1, 4.0), one).value, 0.0);
    const Design d = random_design(1, 30, 3);
    const double single = phi_a(d, one[0], HrfParams(7, 1), ex);
    EXPECT_NEAR(min_phi_a(ev, d, one).value, single, 1e-12 * single);
    EXPECT_THROW(min_phi_a(ev, d, ThetaList{}), ConfigError);
}

TEST(MinPhiA, IsTheGridMinimumWithFirstArgmin) {
    const Experiment ex = small(2, 40);
    const Evaluator ev(ex, p_grid(0.5));
    const auto thetas = full_theta_grid(2, 0.25 * kPi);
    const Design d = random_design(2, 40, 9);
    const auto r = min_phi_a(ev, d, thetas);
    double brute = std::numeric_limits<double>::infinity();
    std::size_t at = 0, idx = 0;
    for (std::size_t i = 0; i < ev.point_count(); ++i)
        for (const auto& t : thetas) {
            const double v = phi_a(d, t, ev.points()[i], ex);
            if (v < brute) brute = v, at = idx;
            ++idx;
        }
    EXPECT_NEAR(r.value, brute, 1e-9 * brute);
    EXPECT_EQ(r.at.p_index * thetas.size() + r.at.theta_index, at);
}

namespace {

LocalOptTable table_of(const Evaluator& ev, const ThetaList& thetas, const Design& d) {
    LocalOptTable t;
    const auto pd = ev.prepare(d);
    for (std::size_t i = 0; i < ev.point_count(); ++i)
        for (const auto& th : thetas) t.merge({th, ev.points()[i], ev.phi_a(pd, ev.moments(pd, i), th, i), d.labels});
    return t;
}

}  // namespace

TEST(RelativeEfficiency, BasicIdentities) {
    const Experiment ex = small(2, 30);
    const Evaluator ev(ex, p_grid(1.0));
    ThetaList thetas = theta0_grid(2, 0.25 * kPi);
    thetas.push_back(Eigen::Vector2d::Zero());
    const Design best = random_design(2, 30, 1);
    const LocalOptTable table = table_of(ev, thetas, best);
    const auto pd = ev.prepare(best);
    for (std::size_t i = 0; i < ev.point_count(); ++i)
        for (const auto& t : thetas) EXPECT_NEAR(relative_efficiency(ev, pd, t, i, table), 1.0, 1e-12);
    const auto rest = ev.prepare(Design(std::vector<int>(30, 0), 2, 4.0));
    EXPECT_EQ(relative_efficiency(ev, rest, thetas[0], 0, table), 0.0);
    // scaled directions hit the same entries
    const Design other = random_design(2, 30, 2);
    const auto po = ev.prepare(other);
    for (const auto& t : thetas)
        for (double c : {-2.0, 0.5, 7.0})
            EXPECT_LT(std::abs(relative_efficiency(ev, po, c * t, 3, table) - relative_efficiency(ev, po, t, 3, table)),
                      1e-10);
    const auto mr = min_re(ev, po, thetas, table);
    for (std::size_t i = 0; i < ev.point_count(); ++i)
        for (const auto& t : thetas) EXPECT_LE(mr.value, relative_efficiency(ev, po, t, i, table));
    EXPECT_NEAR(min_re(ev, pd, thetas, table).value, 1.0, 1e-12);
}

TEST(RelativeEfficiency, MissingEntryIsLookupError) {
    const Experiment ex = small(1, 30);
    const Evaluator ev(ex, p_grid(1.0));
    const ThetaList one{Eigen::VectorXd::Ones(1)};
    LocalOptTable t;
    EXPECT_THROW(relative_efficiency(ev, ev.prepare(random_design(1, 30, 1)), one[0], 0, t), LookupError);
    EXPECT_THROW(min_re(ev, ev.prepare(random_design(1, 30, 1)), one, t), LookupError);
}

TEST(LocalOptTable, MergeKeepsLarger) {
    LocalOptTable t;
    const Eigen::Vector2d th(0.6, 0.8);
    EXPECT_TRUE(t.merge({th, HrfParams(6, 0), 1.0, {1, 0}}));
    EXPECT_FALSE(t.merge({-2 * th, HrfParams(6, 0), 0.5, {0, 1}}));
    EXPECT_EQ(t.size(), 1u);
    EXPECT_TRUE(t.merge({3 * th, HrfParams(6, 0), 2.0, {0, 1}}));
    EXPECT_EQ(t.at(th, HrfParams(6, 0)).phi_a, 2.0);
    EXPECT_TRUE(t.merge({th, HrfParams(6, 0.2), 1.0, {1, 0}}));
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.find(Eigen::Vector2d(0.8, 0.6), HrfParams(6, 0)), nullptr);
    EXPECT_THROW(t.at(Eigen::Vector2d(0.8, 0.6), HrfParams(6, 0)), LookupError);
}

TEST(Rg, IdentityIsOneAndRelabelingTransports) {
    for (int q : {2, 3}) {
        const Experiment ex = small(q, 36);
        const Evaluator ev(ex, p_grid(1.0));
        const auto base = theta0_grid(q, 0.1 * kPi);
        const Design d = random_design(q, 36, 40 + static_cast<unsigned>(q));
        const auto r = rg_ratios(ev, ev.prepare(d), base);
        EXPECT_EQ(r.ratios[0], 1.0);
        EXPECT_LE(r.min_ratio(), 1.0);
        // min over the sigma-image of Phi_A(relabel(d, sigma)) = min over the base of Phi_A(d)
        for (const auto& perm : all_permutations(q)) {
            const auto moved = ev.prepare(relabel(d, perm));
            const double lhs = min_phi_a(ev, moved, permuted_region(base, perm)).value;
            EXPECT_NEAR(lhs, r.base_min, 1e-9 * r.base_min);
        }
    }
}

TEST(Rg, NeverAboveOneForReducedMaximin) {
    // the best of a handful of designs on Theta_0 x P has R_g <= 1 relative to itself
    const Experiment ex = small(2, 30);
    const Evaluator ev(ex, p_grid(1.0));
    const auto base = theta0_grid(2, 0.1 * kPi);
    double best = -1;
    Design arg;
    for (unsigned s = 0; s < 20; ++s) {
        const Design d = random_design(2, 30, s);
        const double v = min_phi_a(ev, d, base).value;
        if (v > best) best = v, arg = d;
    }
    EXPECT_LE(min_rg(ev, ev.prepare(arg), base), 1.0);
    EXPECT_DOUBLE_EQ(rg_ratio(ev, ev.prepare(arg), base, 0), 1.0);
    EXPECT_THROW(rg_ratio(ev, ev.prepare(arg), base, 5), ConfigError);
}
