#include "nafdrive/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nafdrive/error.hpp"
#include "nafdrive/rng.hpp"

namespace nafdrive::net {

namespace {

bool finite(const Eigen::MatrixXd& m) { return m.allFinite(); }
bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

void check_dims(std::span<const int> dims) {
    if (dims.size() < 2) {
        throw ConfigError("network needs at least an input and an output layer");
    }
    for (int d : dims) {
        if (d < 1) {
            throw ConfigError("network layer dimension must be >= 1, got " + std::to_string(d));
        }
    }
}

// Visits every parameter together with its slot in a congruent gradient set.
template <typename Fn>
void for_each_parameter(Network& net, const GradientSet& grads, Fn&& fn) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto& w = net.weights[l];
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                fn(w(r, c), grads.weights[l](r, c));
            }
        }
        auto& b = net.biases[l];
        for (Eigen::Index r = 0; r < b.size(); ++r) {
            fn(b(r), grads.biases[l](r));
        }
    }
}

double output_sum(const Network& net, std::span<const double> x) {
    Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
    return net_forward_batch(net, in).sum();
}

}  // namespace

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

void Network::validate() const {
    if (layer_dims.size() < 2) {
        throw ContractError("network has fewer than two layers");
    }
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size()) {
        throw ContractError("network weight/bias count does not match layer_dims");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l] ||
            biases[l].size() != layer_dims[l + 1]) {
            throw ContractError("network layer " + std::to_string(l) + " has inconsistent shape");
        }
        if (!finite(weights[l]) || !finite(biases[l])) {
            throw ContractError("network layer " + std::to_string(l) + " has non-finite parameters");
        }
    }
}

bool Network::operator==(const Network& other) const {
    if (layer_dims != other.layer_dims) {
        return false;
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) {
            return false;
        }
    }
    return true;
}

GradientSet GradientSet::zeros_like(const Network& net) {
    GradientSet g;
    g.weights.reserve(net.layer_count());
    g.biases.reserve(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
    if (other.weights.size() != weights.size()) {
        throw ContractError("GradientSet += with mismatched layer count");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        biases[l] += other.biases[l];
    }
    return *this;
}

GradientSet& GradientSet::operator*=(double factor) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] *= factor;
        biases[l] *= factor;
    }
    return *this;
}

bool GradientSet::congruent_with(const Network& net) const {
    if (weights.size() != net.layer_count() || biases.size() != net.layer_count()) {
        return false;
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != net.weights[l].rows() || weights[l].cols() != net.weights[l].cols() ||
            biases[l].size() != net.biases[l].size()) {
            return false;
        }
    }
    return true;
}

bool GradientSet::all_finite() const {
    return std::all_of(weights.begin(), weights.end(), [](const auto& w) { return finite(w); }) &&
           std::all_of(biases.begin(), biases.end(), [](const auto& b) { return finite(b); });
}

std::size_t GradientSet::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

AdamState AdamState::for_network(const Network& net) {
    return AdamState{GradientSet::zeros_like(net), GradientSet::zeros_like(net), 0};
}

bool AdamState::operator==(const AdamState& other) const {
    if (step != other.step || first_moment.weights.size() != other.first_moment.weights.size()) {
        return false;
    }
    for (std::size_t l = 0; l < first_moment.weights.size(); ++l) {
        if (first_moment.weights[l] != other.first_moment.weights[l] ||
            first_moment.biases[l] != other.first_moment.biases[l] ||
            second_moment.weights[l] != other.second_moment.weights[l] ||
            second_moment.biases[l] != other.second_moment.biases[l]) {
            return false;
        }
    }
    return true;
}

Network net_init(std::span<const int> layer_dims, std::uint64_t seed) {
    check_dims(layer_dims);
    RngStream rng(seed, "net-init");
    Network net;
    net.layer_dims.assign(layer_dims.begin(), layer_dims.end());
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                w(r, c) = rng.uniform(-limit, limit);
            }
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

Network net_init(std::initializer_list<int> layer_dims, std::uint64_t seed) {
    return net_init(std::span<const int>(layer_dims.begin(), layer_dims.size()), seed);
}

Eigen::MatrixXd net_forward_batch(const Network& net, const Eigen::MatrixXd& x, ForwardCache* cache) {
    if (x.rows() != net.input_dim()) {
        throw ContractError("net_forward: input has " + std::to_string(x.rows()) + " rows, network expects " +
                            std::to_string(net.input_dim()));
    }
    if (cache != nullptr) {
        cache->layer_dims = net.layer_dims;
        cache->batch = x.cols();
        cache->inputs.clear();
        cache->preactivations.clear();
    }
    Eigen::MatrixXd activation = x;
    const std::size_t last = net.layer_count() - 1;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Eigen::MatrixXd z = net.weights[l] * activation;
        z.colwise() += net.biases[l];
        if (cache != nullptr) {
            cache->inputs.push_back(std::move(activation));
            cache->preactivations.push_back(z);
        }
        activation = (l == last) ? std::move(z) : Eigen::MatrixXd(z.array().tanh().matrix());
    }
    return activation;
}

ForwardResult net_forward(const Network& net, std::span<const double> x) {
    if (static_cast<int>(x.size()) != net.input_dim()) {
        throw ContractError("net_forward: input has " + std::to_string(x.size()) + " values, network expects " +
                            std::to_string(net.input_dim()));
    }
    ForwardResult result;
    Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::MatrixXd y = net_forward_batch(net, in, &result.cache);
    result.y = y.col(0);
    return result;
}

BackwardResult net_backward(const Network& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream) {
    if (cache.layer_dims != net.layer_dims || cache.inputs.size() != net.layer_count() ||
        cache.preactivations.size() != net.layer_count()) {
        throw ContractError("net_backward: cache does not belong to this network");
    }
    if (upstream.rows() != net.output_dim() || upstream.cols() != cache.batch) {
        throw ContractError("net_backward: upstream shape does not match network output and batch");
    }
    BackwardResult result;
    result.grads.weights.resize(net.layer_count());
    result.grads.biases.resize(net.layer_count());

    Eigen::MatrixXd delta = upstream;  // d(objective)/d(preactivation) of the current layer
    for (std::size_t i = net.layer_count(); i-- > 0;) {
        if (i != net.layer_count() - 1) {
            const auto t = cache.preactivations[i].array().tanh();
            delta = (delta.array() * (1.0 - t.square())).matrix();
        }
        result.grads.weights[i] = delta * cache.inputs[i].transpose();
        result.grads.biases[i] = delta.rowwise().sum();
        delta = net.weights[i].transpose() * delta;
    }
    result.input_grad = std::move(delta);
    return result;
}

BackwardResult net_backward(const Network& net, const ForwardCache& cache, std::span<const double> upstream) {
    Eigen::Map<const Eigen::VectorXd> up(upstream.data(), static_cast<Eigen::Index>(upstream.size()));
    return net_backward(net, cache, Eigen::MatrixXd(up));
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
}

double finite_diff_compare(const Network& net, std::span<const double> x, double h, const GradientSet& analytic) {
    if (!(h > 0.0)) {
        throw ContractError("finite_diff_check: step h must be positive");
    }
    if (!analytic.congruent_with(net)) {
        throw ContractError("finite_diff_check: analytic gradient is not shaped like the network");
    }
    Network probe = net;
    double worst = 0.0;
    for_each_parameter(probe, analytic, [&](double& param, double grad) {
        const double saved = param;
        const double numeric = central_difference(
            [&](double value) {
                param = value;
                return output_sum(probe, x);
            },
            saved, h);
        param = saved;
        worst = std::max(worst, relative_error(grad, numeric));
    });
    return worst;
}

double finite_diff_check(const Network& net, std::span<const double> x, double h) {
    auto fwd = net_forward(net, x);
    const std::vector<double> ones(static_cast<std::size_t>(net.output_dim()), 1.0);
    auto back = net_backward(net, fwd.cache, ones);
    return finite_diff_compare(net, x, h, back.grads);
}

void adaptive_update(Network& net, const GradientSet& grads, AdamState& state, double lr) {
    if (!(lr >= 0.0)) {
        throw ContractError("adaptive_update: learning rate must be >= 0");
    }
    if (!grads.congruent_with(net) || !state.first_moment.congruent_with(net) ||
        !state.second_moment.congruent_with(net)) {
        throw ContractError("adaptive_update: gradient or optimizer state not shaped like the network");
    }
    if (!grads.all_finite()) {
        throw NumericError("adaptive_update: non-finite gradient rejected");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
    const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto step_block = [&](auto& param, const auto& g, auto& m, auto& v) {
            m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
            v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
            if (lr == 0.0) {
                return;
            }
            param.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + kAdamEpsilon);
        };
        step_block(net.weights[l], grads.weights[l], state.first_moment.weights[l], state.second_moment.weights[l]);
        step_block(net.biases[l], grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l]);
    }
}

}  // namespace nafdrive::net
