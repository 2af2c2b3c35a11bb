#include "nafdrive/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nafdrive/error.hpp"

namespace nafdrive::gradcheck {

namespace {

using nafq::Head;
using nafq::kHeadCount;

// Raw outputs of every head for each state (kHeadCount x N).
Eigen::MatrixXd raw_outputs(const nafq::NafParams& params, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(kHeadCount), x.cols());
    for (Head h : nafq::kAllHeads) {
        raw.row(static_cast<Eigen::Index>(h)) = net::net_forward_batch(params[h], x).row(0);
    }
    return raw;
}

// Perturbs each parameter of each head in turn and calls `objective(raw)` with the
// head's recomputed outputs; compares the central difference against `analytic`.
template <typename Objective>
double sweep(const nafq::NafParams& params, const Eigen::MatrixXd& x, double h, const nafq::QGradients& analytic,
             Objective&& objective) {
    if (!(h > 0.0)) {
        throw ContractError("finite-difference step must be positive");
    }
    const Eigen::MatrixXd base = raw_outputs(params, x);
    double worst = 0.0;
    for (Head head : nafq::kAllHeads) {
        const auto idx = static_cast<Eigen::Index>(head);
        const auto& grads = analytic[head];
        if (!grads.congruent_with(params[head])) {
            throw ContractError("analytic gradient missing or misshapen for head " +
                                std::string(nafq::head_name(head)));
        }
        net::Network probe = params[head];
        auto eval_at = [&](double& slot, double value) {
            const double saved = slot;
            slot = value;
            Eigen::MatrixXd raw = base;
            raw.row(idx) = net::net_forward_batch(probe, x).row(0);
            slot = saved;
            return objective(raw);
        };
        auto check = [&](double& slot, double grad) {
            const double p = slot;
            const double numeric = net::central_difference([&](double value) { return eval_at(slot, value); }, p, h);
            worst = std::max(worst, net::relative_error(grad, numeric));
        };
        for (std::size_t l = 0; l < probe.layer_count(); ++l) {
            for (Eigen::Index c = 0; c < probe.weights[l].cols(); ++c) {
                for (Eigen::Index r = 0; r < probe.weights[l].rows(); ++r) {
                    check(probe.weights[l](r, c), grads.weights[l](r, c));
                }
            }
            for (Eigen::Index r = 0; r < probe.biases[l].size(); ++r) {
                check(probe.biases[l](r), grads.biases[l](r));
            }
        }
    }
    return worst;
}

std::array<double, kHeadCount> column(const Eigen::MatrixXd& raw, Eigen::Index i) {
    std::array<double, kHeadCount> out{};
    for (std::size_t k = 0; k < kHeadCount; ++k) {
        out[k] = raw(static_cast<Eigen::Index>(k), i);
    }
    return out;
}

void corrupt(net::GradientSet& g) {
    // +10% on the first weight of the last layer, which is never zero for tanh hidden units.
    auto& w = g.weights.back();
    w(0, 0) = w(0, 0) * 1.1 + (w(0, 0) == 0.0 ? 1e-3 : 0.0);
}

nafq::NafParams random_params(RngStream& rng) {
    nafq::NafConstants k;
    nafq::NafParams p = nafq::naf_init(k, rng);
    // Non-zero biases so every transform is exercised away from its symmetric point.
    for (Head h : nafq::kAllHeads) {
        for (auto& b : p[h].biases) {
            for (Eigen::Index i = 0; i < b.size(); ++i) {
                b(i) = rng.uniform(-0.5, 0.5);
            }
        }
    }
    return p;
}

}  // namespace

nafq::RlState random_state(RngStream& rng) {
    nafq::RlState s;
    s.v = rng.uniform(5.0, 33.0);
    s.a_lng = rng.uniform(-3.0, 2.0);
    s.delta_d_lat = rng.uniform(-4.0, 4.0);
    s.theta = rng.uniform(-0.15, 0.15);
    s.omega = rng.uniform(-0.3, 0.3);
    s.c = rng.uniform(-0.002, 0.002);
    return s;
}

learn::Transition random_transition(RngStream& rng) {
    learn::Transition t;
    t.s = random_state(rng);
    t.a = rng.uniform(-0.6, 0.6);
    t.s_next = random_state(rng);
    t.r = -rng.uniform(0.0, 2.0);
    t.terminal = rng.uniform(0.0, 1.0) < 0.2;
    return t;
}

double q_gradient_error(const nafq::RlState& state, double action, const nafq::NafParams& params, double h,
                        const nafq::QGradients& analytic) {
    const nafq::RlState states[1] = {state};
    const Eigen::MatrixXd x = nafq::pack_states(states, params.constants);
    const auto dev = nafq::deviation_features(state);
    return sweep(params, x, h, analytic, [&](const Eigen::MatrixXd& raw) {
        return nafq::q_from_raw(dev, column(raw, 0), action, params.constants).q;
    });
}

double loss_gradient_error(std::span<const learn::Transition> batch, const nafq::NafParams& params,
                           const nafq::NafParams& target_params, double gamma, double h,
                           const nafq::QGradients& analytic) {
    std::vector<nafq::RlState> states;
    std::vector<nafq::DeviationFeatures> devs;
    std::vector<double> targets;
    for (const auto& t : batch) {
        states.push_back(t.s);
        devs.push_back(nafq::deviation_features(t.s));
        targets.push_back(learn::td_target(t, target_params, gamma));
    }
    const Eigen::MatrixXd x = nafq::pack_states(states, params.constants);
    return sweep(params, x, h, analytic, [&](const Eigen::MatrixXd& raw) {
        double sum = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double q =
                nafq::q_from_raw(devs[i], column(raw, static_cast<Eigen::Index>(i)), batch[i].a, params.constants).q;
            const double e = targets[i] - q;
            sum += e * e;
        }
        return sum / static_cast<double>(batch.size());
    });
}

std::vector<SuiteResult> run_suites(const GradcheckOptions& options) {
    RngStream rng(options.seed, "gradcheck");
    std::vector<SuiteResult> results;

    {
        const net::Network mlp = net::net_init({6, 64, 64, 1}, rng.next_u64());
        net::Network shifted = mlp;
        for (auto& b : shifted.biases) {
            for (Eigen::Index i = 0; i < b.size(); ++i) {
                b(i) = rng.uniform(-0.5, 0.5);
            }
        }
        const auto s = random_state(rng).as_array();
        auto fwd = net::net_forward(shifted, s);
        const double one[1] = {1.0};
        auto grads = net::net_backward(shifted, fwd.cache, one).grads;
        if (options.inject_fault) {
            corrupt(grads);
        }
        results.push_back({"netcore", net::finite_diff_compare(shifted, s, options.h, grads)});
    }
    {
        const auto params = random_params(rng);
        const auto state = random_state(rng);
        const double action = rng.uniform(-0.6, 0.6);
        auto grads = nafq::q_gradients(state, action, params);
        if (options.inject_fault) {
            corrupt(grads[Head::ttrans]);
        }
        results.push_back({"q_gradients", q_gradient_error(state, action, params, options.h, grads)});
    }
    {
        const auto params = random_params(rng);
        const auto target = random_params(rng);
        std::vector<learn::Transition> batch;
        for (int i = 0; i < 8; ++i) {
            batch.push_back(random_transition(rng));
        }
        const double gamma = 0.95;
        auto grads = learn::batch_loss_gradients(batch, params, target, gamma, true);
        if (options.inject_fault) {
            corrupt(grads[Head::m]);
        }
        results.push_back({"batch_loss", loss_gradient_error(batch, params, target, gamma, options.h, grads)});
    }
    return results;
}

}  // namespace nafdrive::gradcheck
