#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nafdrive/learner.hpp"
#include "nafdrive/nafq.hpp"

namespace nafdrive::gradcheck {

/// Central-difference oracle for dQ/d(theta), compared against `analytic`.
/// Returns max |analytic - numeric| / max(|analytic|, |numeric|, floor) over every parameter of every head.
double q_gradient_error(const nafq::RlState& state, double action, const nafq::NafParams& params, double h,
                        const nafq::QGradients& analytic);

/// Same for the mini-batch loss with targets held fixed.
double loss_gradient_error(std::span<const learn::Transition> batch, const nafq::NafParams& params,
                           const nafq::NafParams& target_params, double gamma, double h,
                           const nafq::QGradients& analytic);

struct SuiteResult {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradcheckOptions {
    std::uint64_t seed = 0;
    double h = 1e-4;
    bool inject_fault = false;  // corrupt one analytic gradient by +10% in every suite
};

/// Random network, Q-function and mini-batch loss suites at fresh random parameters.
std::vector<SuiteResult> run_suites(const GradcheckOptions& options);

/// Random valid state for tests and gradient checks.
nafq::RlState random_state(RngStream& rng);
learn::Transition random_transition(RngStream& rng);

}  // namespace nafdrive::gradcheck
