#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nafdrive::net {

/// Dense feed-forward network: tanh on hidden layers, linear output.
///
/// Weights of layer l are (layer_dims[l+1] x layer_dims[l]); inputs are
/// column vectors, and batched calls stack samples as columns.
struct Network {
    std::vector<int> layer_dims;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;

    /// Throws ContractError if the shape invariants or finiteness are violated.
    void validate() const;

    bool operator==(const Network& other) const;
};

/// One gradient per network parameter, shaped like the network.
struct GradientSet {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static GradientSet zeros_like(const Network& net);

    GradientSet& operator+=(const GradientSet& other);
    GradientSet& operator*=(double factor);

    bool congruent_with(const Network& net) const;
    bool all_finite() const;
    std::size_t parameter_count() const;
};

/// Per-layer inputs and pre-activations recorded by a forward pass.
struct ForwardCache {
    std::vector<int> layer_dims;
    Eigen::Index batch = 0;
    std::vector<Eigen::MatrixXd> inputs;          // input to layer l
    std::vector<Eigen::MatrixXd> preactivations;  // W_l * input + b_l
};

struct ForwardResult {
    Eigen::VectorXd y;
    ForwardCache cache;
};

struct BackwardResult {
    GradientSet grads;
    Eigen::MatrixXd input_grad;  // (input_dim x batch)
};

/// Adaptive-moment optimizer state (decay 0.9 / 0.999, epsilon 1e-8).
struct AdamState {
    GradientSet first_moment;
    GradientSet second_moment;
    std::int64_t step = 0;

    static AdamState for_network(const Network& net);
    bool operator==(const AdamState& other) const;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// Uniform fan-based init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
Network net_init(std::span<const int> layer_dims, std::uint64_t seed);
Network net_init(std::initializer_list<int> layer_dims, std::uint64_t seed);

ForwardResult net_forward(const Network& net, std::span<const double> x);

/// Batched forward; columns of `x` are samples. Returns (output_dim x batch).
Eigen::MatrixXd net_forward_batch(const Network& net, const Eigen::MatrixXd& x, ForwardCache* cache = nullptr);

/// Gradients of sum(upstream .* y) over the batch, with respect to all parameters and the input.
BackwardResult net_backward(const Network& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream);
BackwardResult net_backward(const Network& net, const ForwardCache& cache, std::span<const double> upstream);

/// Central differences at h = 1e-4 carry roundoff near 1e-12 * |f|, so entries smaller than
/// the floor are effectively compared on an absolute scale.
inline constexpr double kRelErrorFloor = 1e-6;

double relative_error(double analytic, double numeric);

/// Five-point central difference of f at p with step h (truncation error O(h^4)).
template <typename F>
double central_difference(F&& f, double p, double h) {
    return (8.0 * (f(p + h) - f(p - h)) - (f(p + 2.0 * h) - f(p - 2.0 * h))) / (12.0 * h);
}

/// Largest relative_error over all parameters,
/// for the scalar sum of outputs, using central differences of step h.
double finite_diff_check(const Network& net, std::span<const double> x, double h);

/// Same comparison against a supplied analytic gradient (used for fault injection).
double finite_diff_compare(const Network& net, std::span<const double> x, double h, const GradientSet& analytic);

/// One Adam step with bias correction. Rejects non-finite gradients without modifying anything.
void adaptive_update(Network& net, const GradientSet& grads, AdamState& state, double lr);

}  // namespace nafdrive::net
