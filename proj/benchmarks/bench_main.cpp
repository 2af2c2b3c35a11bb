#include <vector>

#include <benchmark/benchmark.h>

#include "nafdrive/gradcheck.hpp"
#include "nafdrive/learner.hpp"
#include "nafdrive/nafq.hpp"
#include "nafdrive/netcore.hpp"
#include "nafdrive/simworld.hpp"

using namespace nafdrive;

namespace {

nafq::NafParams fresh_params() {
    RngStream rng(1, "init");
    return nafq::naf_init(nafq::NafConstants{}, rng);
}

std::vector<learn::Transition> batch_of(int n) {
    RngStream rng(2, "batch");
    std::vector<learn::Transition> b;
    for (int i = 0; i < n; ++i) b.push_back(gradcheck::random_transition(rng));
    return b;
}

void BM_NetForward(benchmark::State& state) {
    const auto net = net::net_init({6, 64, 64, 1}, 1);
    const double x[6] = {20.0, 0.1, 1.0, 0.02, 0.01, 0.0};
    for (auto _ : state) benchmark::DoNotOptimize(net::net_forward(net, x).y);
}
BENCHMARK(BM_NetForward);

void BM_NetForwardBackwardBatch(benchmark::State& state) {
    const auto net = net::net_init({6, 64, 64, 1}, 1);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, state.range(0));
    const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(1, state.range(0));
    for (auto _ : state) {
        net::ForwardCache cache;
        net::net_forward_batch(net, x, &cache);
        benchmark::DoNotOptimize(net::net_backward(net, cache, up).grads);
    }
}
BENCHMARK(BM_NetForwardBackwardBatch)->Arg(1)->Arg(64);

void BM_GreedyAction(benchmark::State& state) {
    const auto p = fresh_params();
    RngStream rng(3, "states");
    const auto s = gradcheck::random_state(rng);
    for (auto _ : state) benchmark::DoNotOptimize(nafq::greedy_action(s, p));
}
BENCHMARK(BM_GreedyAction);

void BM_TrainStep(benchmark::State& state) {
    auto p = fresh_params();
    const auto target = p;
    auto opt = learn::make_opt_states(p);
    const auto batch = batch_of(64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(learn::train_step(p, target, batch, learn::Stage::joint, opt, 5e-4, 0.95));
    }
}
BENCHMARK(BM_TrainStep);

class Greedy final : public sim::LateralPolicy {
public:
    explicit Greedy(const nafq::NafParams& p) : p_(p) {}
    double act(const nafq::RlState& s, int) override { return nafq::greedy_action(s, p_); }

private:
    const nafq::NafParams& p_;
};

void BM_WorldStep(benchmark::State& state) {
    const auto p = fresh_params();
    Greedy policy(p);
    sim::World world(sim::WorldConfig{}, 4);
    for (int k = 0; k < 600; ++k) world.step(policy);  // fill the road
    for (auto _ : state) benchmark::DoNotOptimize(world.step(policy));
}
BENCHMARK(BM_WorldStep);

}  // namespace
BENCHMARK_MAIN();
