#include "nafdrive/rng.hpp"

#include <sstream>

#include "nafdrive/error.hpp"

namespace nafdrive {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view stream_name) {
    const std::uint64_t tag = fnv1a64(stream_name);
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    engine_.seed(seq);
}

double RngStream::uniform(double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(engine_);
}

double RngStream::normal(double mean, double stddev) {
    return mean + stddev * normal_(engine_);
}

std::size_t RngStream::index(std::size_t n) {
    if (n == 0) {
        throw ContractError("RngStream::index: empty range");
    }
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
}

std::uint64_t RngStream::next_u64() { return engine_(); }

std::string RngStream::serialize() const {
    std::ostringstream out;
    out << engine_ << ' ' << normal_;
    return out.str();
}

void RngStream::deserialize(const std::string& state) {
    std::istringstream in(state);
    in >> engine_ >> normal_;
    if (!in) {
        throw IoError("RngStream: malformed serialized state");
    }
}

bool RngStream::operator==(const RngStream& other) const {
    return engine_ == other.engine_ && normal_ == other.normal_;
}

}  // namespace nafdrive
