#include "eatem/random.hpp"

namespace eatem {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : m_key(splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL))),
      m_engine(m_key) {}

RandomStream RandomStream::derive(std::uint64_t id) const {
    return RandomStream(m_key, id);
}

std::uint64_t RandomStream::poisson(double mean) {
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(m_engine);
}

}  // namespace eatem
