#include "nafdrive/nafq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nafdrive/error.hpp"

namespace nafdrive::nafq {

namespace {

void require_finite(double value, Head head, const char* what) {
    if (!std::isfinite(value)) {
        throw NumericError(std::string("non-finite ") + what + " in head '" + std::string(head_name(head)) + "'");
    }
}

double raw_output(const net::Network& net, const RlState& state, const NafConstants& k) {
    const auto x = network_input(state, k);
    return net::net_forward(net, x).y(0);
}

void check_state(const RlState& state) {
    if (!state.valid()) {
        throw ContractError("RlState must be finite with v >= 0");
    }
}

}  // namespace

bool RlState::valid() const {
    return std::isfinite(v) && std::isfinite(a_lng) && std::isfinite(delta_d_lat) && std::isfinite(theta) &&
           std::isfinite(omega) && std::isfinite(c) && v >= 0.0;
}

void NafConstants::validate() const {
    if (!(a_cap > 0.0) || !(t_min > 0.0) || !(t_max > 0.0) || !(m_eps > 0.0) || !(a_clip > 0.0)) {
        throw ConfigError("nafq constants must be strictly positive");
    }
    if (!(t_min < t_max)) {
        throw ConfigError("nafq constants require t_min < t_max");
    }
    for (double scale : input_scale) {
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            throw ConfigError("nafq input_scale entries must be finite and > 0");
        }
    }
    for (int h : hidden_layers) {
        if (h < 1) {
            throw ConfigError("nafq hidden layer width must be >= 1");
        }
    }
}

std::string_view head_name(Head head) {
    switch (head) {
        case Head::amax: return "amax";
        case Head::beta: return "beta";
        case Head::ttrans: return "ttrans";
        case Head::m: return "m";
        case Head::v: return "v";
    }
    return "?";
}

void NafParams::validate() const {
    constants.validate();
    for (Head h : kAllHeads) {
        const auto& net = (*this)[h];
        net.validate();
        if (net.input_dim() != kStateDim || net.output_dim() != 1) {
            throw ContractError("head '" + std::string(head_name(h)) + "' must map 6 inputs to 1 output");
        }
    }
}

NafParams naf_init(const NafConstants& constants, RngStream& init_rng) {
    constants.validate();
    std::vector<int> dims;
    dims.push_back(kStateDim);
    dims.insert(dims.end(), constants.hidden_layers.begin(), constants.hidden_layers.end());
    dims.push_back(1);
    NafParams params;
    params.constants = constants;
    for (Head h : kAllHeads) {
        params[h] = net::net_init(dims, init_rng.next_u64());
    }
    return params;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double transform_amax(double raw, const NafConstants& k) { return k.a_cap * sigmoid(raw); }
double transform_beta(double raw) { return softplus(raw); }
double transform_ttrans(double raw, const NafConstants& k) { return k.t_min + (k.t_max - k.t_min) * sigmoid(raw); }
double transform_m(double raw, const NafConstants& k) { return -softplus(raw) - k.m_eps; }

double a_tmp_of(const DeviationFeatures& dev, double t_trns) {
    return dev.delta_d / (t_trns * t_trns) + dev.delta_v * dev.delta_phi / t_trns;
}

DeviationFeatures deviation_features(const RlState& state) {
    return DeviationFeatures{state.delta_d_lat, state.v * std::sin(state.theta), state.theta};
}

MuResult mu_action(const RlState& state, const NafParams& params) {
    check_state(state);
    const auto& k = params.constants;
    MuResult r;
    r.deviation = deviation_features(state);
    r.raw_amax = raw_output(params[Head::amax], state, params.constants);
    r.raw_beta = raw_output(params[Head::beta], state, params.constants);
    r.raw_ttrans = raw_output(params[Head::ttrans], state, params.constants);
    r.a_max = transform_amax(r.raw_amax, k);
    require_finite(r.a_max, Head::amax, "a_max");
    r.beta_sen = transform_beta(r.raw_beta);
    require_finite(r.beta_sen, Head::beta, "beta_sen");
    r.t_trns = transform_ttrans(r.raw_ttrans, k);
    require_finite(r.t_trns, Head::ttrans, "t_trns");
    r.a_tmp = a_tmp_of(r.deviation, r.t_trns);
    require_finite(r.a_tmp, Head::ttrans, "a_tmp");
    r.action = r.a_max * std::tanh(r.beta_sen * r.a_tmp);
    return r;
}

double m_value(const RlState& state, const NafParams& params) {
    check_state(state);
    return transform_m(raw_output(params[Head::m], state, params.constants), params.constants);
}

double v_value(const RlState& state, const NafParams& params) {
    check_state(state);
    return raw_output(params[Head::v], state, params.constants);
}

double q_value(const RlState& state, double action, const NafParams& params) {
    const double mu = mu_action(state, params).action;
    const double m = m_value(state, params);
    const double v = v_value(state, params);
    const double diff = mu - action;
    return m * diff * diff + v;
}

double greedy_action(const RlState& state, const NafParams& params) { return mu_action(state, params).action; }

double explore_action(const RlState& state, const NafParams& params, double sigma, RngStream& rng) {
    if (!(sigma >= 0.0)) {
        throw ContractError("explore_action: sigma must be >= 0");
    }
    const double mu = greedy_action(state, params);
    const double noise = rng.normal(0.0, 1.0);
    const double clip = params.constants.a_clip;
    return std::clamp(mu + sigma * noise, -clip, clip);
}

QParts q_from_raw(const DeviationFeatures& dev, const std::array<double, kHeadCount>& raw, double action,
                  const NafConstants& k) {
    const double o1 = raw[static_cast<std::size_t>(Head::amax)];
    const double o2 = raw[static_cast<std::size_t>(Head::beta)];
    const double o3 = raw[static_cast<std::size_t>(Head::ttrans)];
    const double om = raw[static_cast<std::size_t>(Head::m)];
    const double ov = raw[static_cast<std::size_t>(Head::v)];

    const double s1 = sigmoid(o1);
    const double s3 = sigmoid(o3);
    const double a_max = k.a_cap * s1;
    const double beta = softplus(o2);
    const double t = k.t_min + (k.t_max - k.t_min) * s3;
    const double product = dev.delta_v * dev.delta_phi;
    const double a_tmp = dev.delta_d / (t * t) + product / t;
    const double th = std::tanh(beta * a_tmp);
    const double sech2 = 1.0 - th * th;

    QParts p;
    p.mu = a_max * th;
    p.m = -softplus(om) - k.m_eps;
    p.v = ov;
    const double diff = p.mu - action;
    p.q = p.m * diff * diff + p.v;

    const double dq_dmu = 2.0 * p.m * diff;
    const double dmu_datmp = a_max * sech2 * beta;
    const double datmp_dt = -2.0 * dev.delta_d / (t * t * t) - product / (t * t);

    p.dq_draw[static_cast<std::size_t>(Head::amax)] = dq_dmu * th * k.a_cap * s1 * (1.0 - s1);
    p.dq_draw[static_cast<std::size_t>(Head::beta)] = dq_dmu * a_max * sech2 * a_tmp * sigmoid(o2);
    p.dq_draw[static_cast<std::size_t>(Head::ttrans)] =
        dq_dmu * dmu_datmp * datmp_dt * (k.t_max - k.t_min) * s3 * (1.0 - s3);
    p.dq_draw[static_cast<std::size_t>(Head::m)] = -diff * diff * sigmoid(om);
    p.dq_draw[static_cast<std::size_t>(Head::v)] = 1.0;
    return p;
}

std::array<double, kStateDim> network_input(const RlState& state, const NafConstants& k) {
    auto x = state.as_array();
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] /= k.input_scale[i];
    }
    return x;
}

Eigen::MatrixXd pack_states(std::span<const RlState> states, const NafConstants& k) {
    Eigen::MatrixXd x(kStateDim, static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto a = network_input(states[i], k);
        for (int r = 0; r < kStateDim; ++r) {
            x(r, static_cast<Eigen::Index>(i)) = a[static_cast<std::size_t>(r)];
        }
    }
    return x;
}

BatchEvaluation evaluate_batch(const NafParams& params, std::span<const RlState> states,
                               std::span<const double> actions) {
    if (states.size() != actions.size() || states.empty()) {
        throw ContractError("evaluate_batch: need one action per state and a nonempty batch");
    }
    for (const auto& s : states) {
        check_state(s);
    }
    const Eigen::MatrixXd x = pack_states(states, params.constants);
    BatchEvaluation eval;
    std::array<Eigen::MatrixXd, kHeadCount> raw;
    for (Head h : kAllHeads) {
        const auto idx = static_cast<std::size_t>(h);
        raw[idx] = net::net_forward_batch(params[h], x, &eval.caches[idx]);
    }
    eval.parts.resize(states.size());
    eval.q.resize(static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        std::array<double, kHeadCount> r{};
        for (std::size_t k = 0; k < kHeadCount; ++k) {
            r[k] = raw[k](0, static_cast<Eigen::Index>(i));
        }
        eval.parts[i] = q_from_raw(deviation_features(states[i]), r, actions[i], params.constants);
        eval.q(static_cast<Eigen::Index>(i)) = eval.parts[i].q;
    }
    return eval;
}

QGradients backward_batch(const NafParams& params, const BatchEvaluation& eval, std::span<const double> weights,
                          bool include_mu) {
    if (weights.size() != eval.parts.size()) {
        throw ContractError("backward_batch: need one weight per batch item");
    }
    QGradients out;
    const auto n = static_cast<Eigen::Index>(weights.size());
    for (Head h : kAllHeads) {
        const bool is_mu = h == Head::amax || h == Head::beta || h == Head::ttrans;
        if (is_mu && !include_mu) {
            continue;
        }
        const auto idx = static_cast<std::size_t>(h);
        Eigen::MatrixXd upstream(1, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            upstream(0, i) = weights[static_cast<std::size_t>(i)] * eval.parts[static_cast<std::size_t>(i)].dq_draw[idx];
        }
        out.heads[idx] = net::net_backward(params[h], eval.caches[idx], upstream).grads;
        if (!out.heads[idx].all_finite()) {
            throw NumericError("non-finite gradient in head '" + std::string(head_name(h)) + "'");
        }
    }
    return out;
}

QGradients q_gradients(const RlState& state, double action, const NafParams& params) {
    const RlState states[1] = {state};
    const double actions[1] = {action};
    const double weights[1] = {1.0};
    const auto eval = evaluate_batch(params, states, actions);
    return backward_batch(params, eval, weights, true);
}

Eigen::VectorXd q_values_batch(const NafParams& params, std::span<const RlState> states,
                               std::span<const double> actions) {
    return evaluate_batch(params, states, actions).q;
}

Eigen::VectorXd v_values_batch(const NafParams& params, std::span<const RlState> states) {
    for (const auto& s : states) {
        check_state(s);
    }
    return net::net_forward_batch(params[Head::v], pack_states(states, params.constants)).row(0).transpose();
}

}  // namespace nafdrive::nafq
