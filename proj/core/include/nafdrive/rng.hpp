#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace nafdrive {

/// Deterministic random stream with a serializable state.
///
/// Uniform draws construct their distribution per call, so the only
/// state carried between draws is the engine and the cached normal.
class RngStream {
public:
    RngStream() : RngStream(0, "default") {}
    RngStream(std::uint64_t master_seed, std::string_view stream_name);

    double uniform(double lo, double hi);
    double normal(double mean, double stddev);
    std::size_t index(std::size_t n);  // uniform in [0, n)
    std::uint64_t next_u64();

    std::string serialize() const;
    void deserialize(const std::string& state);

    bool operator==(const RngStream& other) const;

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Named substreams split from one master seed.
struct SeedStreams {
    explicit SeedStreams(std::uint64_t master_seed)
        : spawn(master_seed, "spawn"),
          trigger(master_seed, "trigger"),
          exploration(master_seed, "exploration"),
          replay(master_seed, "replay-sampling"),
          init(master_seed, "init") {}

    RngStream spawn;
    RngStream trigger;
    RngStream exploration;
    RngStream replay;
    RngStream init;
};

/// 64-bit FNV-1a; stable across platforms, used for config digests and stream ids.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace nafdrive
