#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nafdrive/netcore.hpp"
#include "nafdrive/rng.hpp"

namespace nafdrive::nafq {

inline constexpr int kStateDim = 6;

/// Observation fed to every head: (v, a_lng, delta_d_lat, theta, omega, c).
struct RlState {
    double v = 0.0;            // m/s
    double a_lng = 0.0;        // m/s^2
    double delta_d_lat = 0.0;  // m, signed offset to the target lane center (positive = target is to the left)
    double theta = 0.0;        // rad, heading relative to road tangent
    double omega = 0.0;        // rad/s
    double c = 0.0;            // 1/m

    std::array<double, kStateDim> as_array() const { return {v, a_lng, delta_d_lat, theta, omega, c}; }
    bool valid() const;
    bool operator==(const RlState&) const = default;
};

struct DeviationFeatures {
    double delta_d = 0.0;    // m
    double delta_v = 0.0;    // m/s, lateral velocity v*sin(theta)
    double delta_phi = 0.0;  // rad
};

/// Output transforms of the heads and the exploration clip.
struct NafConstants {
    double a_cap = 0.6;   // rad/s^2, upper bound of a_max
    double t_min = 0.5;   // s
    double t_max = 10.0;  // s
    double m_eps = 1e-3;  // curvature margin, m <= -m_eps
    double a_clip = 0.6;  // rad/s^2, explored actions are clipped to +-a_clip
    std::vector<int> hidden_layers{64, 64};
    // Each state component is divided by its scale before entering the networks, so that
    // speed (tens of m/s) and curvature (1e-3 1/m) reach the first layer at similar magnitudes.
    std::array<double, kStateDim> input_scale{30.0, 2.0, 3.75, 0.1, 0.1, 0.001};

    void validate() const;
    bool operator==(const NafConstants&) const = default;
};

enum class Head : std::size_t { amax = 0, beta = 1, ttrans = 2, m = 3, v = 4 };
inline constexpr std::size_t kHeadCount = 5;
inline constexpr std::array<Head, kHeadCount> kAllHeads{Head::amax, Head::beta, Head::ttrans, Head::m, Head::v};
inline constexpr std::array<Head, 3> kMuHeads{Head::amax, Head::beta, Head::ttrans};

std::string_view head_name(Head head);

/// The five small networks of the quadratic Q-function plus their transform constants.
/// Online and target parameters are two instances of this type.
struct NafParams {
    std::array<net::Network, kHeadCount> nets;
    NafConstants constants;

    net::Network& operator[](Head h) { return nets[static_cast<std::size_t>(h)]; }
    const net::Network& operator[](Head h) const { return nets[static_cast<std::size_t>(h)]; }

    void validate() const;
    bool operator==(const NafParams&) const = default;
};

/// Draws one seed per head from `init_rng` and initializes each (6 -> hidden... -> 1) network.
NafParams naf_init(const NafConstants& constants, RngStream& init_rng);

DeviationFeatures deviation_features(const RlState& state);

/// Greedy head evaluation with every intermediate exposed.
struct MuResult {
    double action = 0.0;
    double raw_amax = 0.0;
    double raw_beta = 0.0;
    double raw_ttrans = 0.0;
    double a_max = 0.0;
    double beta_sen = 0.0;
    double t_trns = 0.0;
    double a_tmp = 0.0;
    DeviationFeatures deviation;
};

MuResult mu_action(const RlState& state, const NafParams& params);
double m_value(const RlState& state, const NafParams& params);
double v_value(const RlState& state, const NafParams& params);
double q_value(const RlState& state, double action, const NafParams& params);
double greedy_action(const RlState& state, const NafParams& params);
double explore_action(const RlState& state, const NafParams& params, double sigma, RngStream& rng);

/// Head transforms, exposed so tests can construct exact head values.
double sigmoid(double x);
double softplus(double x);
double transform_amax(double raw, const NafConstants& k);
double transform_beta(double raw);
double transform_ttrans(double raw, const NafConstants& k);
double transform_m(double raw, const NafConstants& k);
double a_tmp_of(const DeviationFeatures& dev, double t_trns);

/// Q and its derivatives with respect to the five raw head outputs, at one (state, action).
struct QParts {
    double q = 0.0;
    double mu = 0.0;
    double m = 0.0;
    double v = 0.0;
    std::array<double, kHeadCount> dq_draw{};
};

QParts q_from_raw(const DeviationFeatures& dev, const std::array<double, kHeadCount>& raw, double action,
                  const NafConstants& k);

/// d Q / d(parameter) for every network, one gradient set per head.
struct QGradients {
    std::array<net::GradientSet, kHeadCount> heads;

    net::GradientSet& operator[](Head h) { return heads[static_cast<std::size_t>(h)]; }
    const net::GradientSet& operator[](Head h) const { return heads[static_cast<std::size_t>(h)]; }
};

QGradients q_gradients(const RlState& state, double action, const NafParams& params);

/// Scaled network input of one state.
std::array<double, kStateDim> network_input(const RlState& state, const NafConstants& k);
/// Packs scaled network inputs as columns of a (6 x N) matrix.
Eigen::MatrixXd pack_states(std::span<const RlState> states, const NafConstants& k);

Eigen::VectorXd q_values_batch(const NafParams& params, std::span<const RlState> states,
                               std::span<const double> actions);
Eigen::VectorXd v_values_batch(const NafParams& params, std::span<const RlState> states);

/// Batched forward pass over all five heads, keeping caches for a later backward pass.
struct BatchEvaluation {
    std::array<net::ForwardCache, kHeadCount> caches;
    std::vector<QParts> parts;
    Eigen::VectorXd q;
};

BatchEvaluation evaluate_batch(const NafParams& params, std::span<const RlState> states,
                               std::span<const double> actions);

/// Sum over i of weight_i * dQ(s_i, a_i)/d(theta).
/// When `include_mu` is false the three greedy-head gradient sets are left empty.
QGradients backward_batch(const NafParams& params, const BatchEvaluation& eval, std::span<const double> weights,
                          bool include_mu);

}  // namespace nafdrive::nafq
