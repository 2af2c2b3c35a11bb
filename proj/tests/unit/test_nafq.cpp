#include <cmath>

#include <gtest/gtest.h>

#include "nafdrive/error.hpp"
#include "nafdrive/gradcheck.hpp"
#include "nafdrive/nafq.hpp"
#include "nafdrive/rng.hpp"

using namespace nafdrive;
using namespace nafdrive::nafq;

namespace {

NafParams random_params(std::uint64_t seed) {
    RngStream rng(seed, "nafq-test");
    return naf_init(NafConstants{}, rng);
}

// Zero weights everywhere; each head's output equals its output-layer bias.
NafParams constant_heads(double amax, double beta, double ttrans, double m, double v) {
    NafParams p = random_params(0);
    const double raw[kHeadCount] = {amax, beta, ttrans, m, v};
    for (Head h : kAllHeads) {
        auto& n = p[h];
        for (auto& w : n.weights) w.setZero();
        for (auto& b : n.biases) b.setZero();
        n.biases.back()(0) = raw[static_cast<std::size_t>(h)];
    }
    return p;
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double inv_softplus(double y) { return std::log(std::expm1(y)); }

RlState state_with(double v, double delta_d, double theta) {
    RlState s;
    s.v = v;
    s.delta_d_lat = delta_d;
    s.theta = theta;
    return s;
}

}  // namespace

TEST(DeviationFeatures, StraightHeadingHasNoLateralSpeed) {
    const auto f = deviation_features(state_with(25.0, 1.0, 0.0));
    EXPECT_EQ(f.delta_v, 0.0);
    EXPECT_EQ(f.delta_d, 1.0);
}

TEST(DeviationFeatures, ZeroState) {
    const auto f = deviation_features(RlState{});
    EXPECT_EQ(f.delta_d, 0.0);
    EXPECT_EQ(f.delta_v, 0.0);
    EXPECT_EQ(f.delta_phi, 0.0);
}

TEST(DeviationFeatures, HandEvaluated) {
    const auto f = deviation_features(state_with(20.0, 1.875, 0.05));
    EXPECT_NEAR(f.delta_v, 0.9995833854135666, 1e-15);
    EXPECT_EQ(f.delta_phi, 0.05);
    EXPECT_EQ(f.delta_d, 1.875);
}

TEST(MuAction, ZeroDeviationGivesZero) {
    const auto p = random_params(4);
    EXPECT_EQ(mu_action(RlState{.v = 20.0}, p).action, 0.0);
    EXPECT_EQ(greedy_action(RlState{.v = 20.0}, p), 0.0);
}

TEST(MuAction, HandEvaluated) {
    // T = 2, a_max = 0.5, beta = 1
    const auto p = constant_heads(logit(0.5 / 0.6), inv_softplus(1.0), logit(1.5 / 9.5), 0.0, 0.0);
    const auto mu = mu_action(state_with(20.0, 1.875, 0.0), p);
    EXPECT_NEAR(mu.t_trns, 2.0, 1e-14);
    EXPECT_NEAR(mu.a_max, 0.5, 1e-14);
    EXPECT_NEAR(mu.beta_sen, 1.0, 1e-14);
    EXPECT_NEAR(mu.a_tmp, 0.46875, 1e-14);
    EXPECT_NEAR(mu.action, 0.21859439257085614, 1e-13);
}

TEST(MuAction, BoundedByAmaxAndCap) {
    RngStream rng(77, "states");
    for (int i = 0; i < 500; ++i) {
        const auto p = random_params(static_cast<std::uint64_t>(i));
        const auto s = gradcheck::random_state(rng);
        const auto mu = mu_action(s, p);
        EXPECT_LE(std::abs(mu.action), mu.a_max);
        EXPECT_LT(mu.a_max, p.constants.a_cap);
        EXPECT_GE(mu.t_trns, p.constants.t_min);
        EXPECT_LE(mu.t_trns, p.constants.t_max);
        EXPECT_GE(mu.beta_sen, 0.0);
    }
}

TEST(MuAction, OddInDeviationWithStraightHeading) {
    // Head outputs held fixed (state-independent), as the symmetry is stated for fixed heads.
    const auto p = constant_heads(0.4, -0.2, 0.7, 0.1, -0.5);
    for (double dd : {0.3, 1.875, 3.75}) {
        EXPECT_EQ(mu_action(state_with(22.0, dd, 0.0), p).action, -mu_action(state_with(22.0, -dd, 0.0), p).action);
    }
}

TEST(MuAction, HeadingTermIsEvenInTheta) {
    // Δv·Δφ = v·sinθ·θ does not change sign with θ; mirroring the state therefore
    // does not mirror a_tmp unless θ = 0.
    const DeviationFeatures left{1.0, 20.0 * std::sin(0.05), 0.05};
    const DeviationFeatures right{-1.0, 20.0 * std::sin(-0.05), -0.05};
    EXPECT_EQ(a_tmp_of(left, 2.0) - 1.0 / 4.0, a_tmp_of(right, 2.0) + 1.0 / 4.0);
}

TEST(MuAction, NonFiniteHeadOutputNamesHead) {
    auto p = random_params(1);
    p[Head::beta].biases.back()(0) = std::nan("");
    try {
        mu_action(state_with(20.0, 1.0, 0.0), p);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos) << e.what();
    }
}

TEST(MValue, RawZero) {
    const auto p = constant_heads(0, 0, 0, 0.0, 0);
    EXPECT_NEAR(m_value(RlState{}, p), -0.6941471805599453, 1e-15);
}

TEST(MValue, AlwaysNegativeAndLimit) {
    EXPECT_EQ(transform_m(-1000.0, NafConstants{}), -1e-3);
    EXPECT_GT(transform_m(1000.0, NafConstants{}), -1000.01);
    RngStream rng(5, "states");
    for (int i = 0; i < 200; ++i) {
        EXPECT_LT(m_value(gradcheck::random_state(rng), random_params(static_cast<std::uint64_t>(i))), 0.0);
    }
}

TEST(VValue, ZeroAndBiasOnly) {
    EXPECT_EQ(v_value(RlState{.v = 10.0}, constant_heads(0, 0, 0, 0, 0.0)), 0.0);
    EXPECT_EQ(v_value(RlState{.v = 10.0}, constant_heads(0, 0, 0, 0, -2.5)), -2.5);
}

TEST(VValue, EqualsNetworkForward) {
    const auto p = random_params(8);
    RngStream rng(2, "states");
    const auto s = gradcheck::random_state(rng);
    const auto x = network_input(s, p.constants);
    EXPECT_EQ(v_value(s, p), net::net_forward(p[Head::v], x).y(0));
    EXPECT_EQ(x[0], s.v / 30.0);
}

TEST(QValue, VertexEqualsValue) {
    const auto p = random_params(3);
    RngStream rng(3, "states");
    for (int i = 0; i < 50; ++i) {
        const auto s = gradcheck::random_state(rng);
        EXPECT_EQ(q_value(s, greedy_action(s, p), p), v_value(s, p));
    }
}

TEST(QValue, HandEvaluated) {
    // m = -1, V = -1, zero deviation so mu = 0; a = -0.3
    const auto p = constant_heads(0, 0, 0, inv_softplus(1.0 - 1e-3), -1.0);
    EXPECT_NEAR(m_value(RlState{}, p), -1.0, 1e-14);
    EXPECT_NEAR(q_value(RlState{}, -0.3, p), -1.09, 1e-14);
}

TEST(QValue, OffVertexIsBelowValue) {
    const auto p = random_params(6);
    RngStream rng(6, "states");
    for (int i = 0; i < 100; ++i) {
        const auto s = gradcheck::random_state(rng);
        const double mu = greedy_action(s, p);
        const double a = rng.uniform(-0.6, 0.6);
        if (a != mu) {
            EXPECT_LT(q_value(s, a, p), v_value(s, p));
        }
    }
}

TEST(GreedyAction, BeatsNeighbours) {
    RngStream rng(9, "states");
    for (int i = 0; i < 100; ++i) {
        const auto p = random_params(100 + static_cast<std::uint64_t>(i));
        const auto s = gradcheck::random_state(rng);
        const double mu = greedy_action(s, p);
        const double q = q_value(s, mu, p);
        EXPECT_GE(q, q_value(s, mu + 0.01, p));
        EXPECT_GE(q, q_value(s, mu - 0.01, p));
    }
}

TEST(ExploreAction, ZeroSigmaIsGreedy) {
    const auto p = random_params(2);
    RngStream rng(1, "exploration");
    const auto s = state_with(20.0, 2.0, 0.02);
    EXPECT_EQ(explore_action(s, p, 0.0, rng), greedy_action(s, p));
}

TEST(ExploreAction, AlwaysClipped) {
    const auto p = random_params(2);
    RngStream rng(1, "exploration");
    const auto s = state_with(20.0, 2.0, 0.02);
    for (int i = 0; i < 2000; ++i) {
        const double a = explore_action(s, p, 5.0, rng);
        EXPECT_LE(std::abs(a), 0.6);
    }
}

TEST(ExploreAction, MonteCarloMean) {
    const auto p = random_params(2);
    RngStream rng(1, "exploration");
    const auto s = state_with(20.0, 0.5, 0.0);
    const double mu = greedy_action(s, p);
    ASSERT_LT(std::abs(mu) + 0.5, 0.6 + 0.5);  // far enough from the clip that truncation is negligible
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += explore_action(s, p, 0.1, rng);
    EXPECT_NEAR(sum / n, mu, 0.003);
}

TEST(QGradients, AtVertexOnlyValueHeadContributes) {
    const auto p = random_params(10);
    RngStream rng(10, "states");
    const auto s = gradcheck::random_state(rng);
    const auto g = q_gradients(s, greedy_action(s, p), p);
    const auto x = network_input(s, p.constants);
    auto f = net::net_forward(p[Head::v], x);
    const double one[1] = {1.0};
    const auto expect = net::net_backward(p[Head::v], f.cache, one).grads;
    for (std::size_t l = 0; l < expect.weights.size(); ++l) {
        EXPECT_EQ(g[Head::v].weights[l], expect.weights[l]);
        EXPECT_EQ(g[Head::v].biases[l], expect.biases[l]);
    }
    for (Head h : {Head::amax, Head::beta, Head::ttrans, Head::m}) {
        for (const auto& w : g[h].weights) EXPECT_TRUE(w.isZero(0.0)) << head_name(h);
    }
}

TEST(QGradients, ZeroATmpKillsAmaxGradient) {
    const auto p = random_params(10);
    const auto g = q_gradients(RlState{.v = 15.0}, 0.2, p);
    for (const auto& w : g[Head::amax].weights) EXPECT_TRUE(w.isZero(0.0));
    for (const auto& b : g[Head::amax].biases) EXPECT_TRUE(b.isZero(0.0));
}

TEST(QGradients, MatchFiniteDifferences) {
    RngStream rng(31, "gradcheck");
    for (int i = 0; i < 5; ++i) {
        auto p = random_params(200 + static_cast<std::uint64_t>(i));
        const auto s = gradcheck::random_state(rng);
        const double a = rng.uniform(-0.6, 0.6);
        const auto g = q_gradients(s, a, p);
        EXPECT_LT(gradcheck::q_gradient_error(s, a, p, 1e-4, g), 1e-4);
    }
}

TEST(Batch, MatchesSingleSampleEvaluation) {
    const auto p = random_params(14);
    RngStream rng(14, "states");
    std::vector<RlState> states;
    std::vector<double> actions;
    for (int i = 0; i < 9; ++i) {
        states.push_back(gradcheck::random_state(rng));
        actions.push_back(rng.uniform(-0.6, 0.6));
    }
    const auto q = q_values_batch(p, states, actions);
    const auto v = v_values_batch(p, states);
    for (std::size_t i = 0; i < states.size(); ++i) {
        EXPECT_NEAR(q(static_cast<Eigen::Index>(i)), q_value(states[i], actions[i], p), 1e-13);
        EXPECT_NEAR(v(static_cast<Eigen::Index>(i)), v_value(states[i], p), 1e-13);
    }
}

TEST(Init, HeadsDrawIndependentSeeds) {
    const auto p = random_params(1);
    EXPECT_FALSE(p[Head::amax] == p[Head::beta]);
    EXPECT_TRUE(random_params(1) == p);
    EXPECT_EQ(p[Head::m].parameter_count(), 4673u);
}

TEST(Constants, ValidateRejectsNonsense) {
    NafConstants k;
    k.t_min = 0.0;
    EXPECT_THROW(k.validate(), ConfigError);
    k = NafConstants{};
    k.m_eps = 0.0;
    EXPECT_THROW(k.validate(), ConfigError);
}
