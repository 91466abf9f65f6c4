#pragma once

#include <cstdint>
#include <random>

namespace eatem {

/// Seeded random stream. Streams are derived from (master seed, stream id)
/// with a splitmix64 mix so any trial can be regenerated independently of
/// the order in which trials are executed.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    /// Child stream for sub-task `id`; does not advance this stream.
    RandomStream derive(std::uint64_t id) const;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t poisson(double mean);

    std::uint64_t key() const { return m_key; }

private:
    std::uint64_t m_key;
    std::mt19937_64 m_engine;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace eatem
