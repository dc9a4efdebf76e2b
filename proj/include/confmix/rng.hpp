#pragma once

#include <array>
#include <cstdint>

namespace confmix {

// Philox4x32-10 block: a keyed bijection of 128-bit counters.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

// Counter-based stream. Stream `id` under a master seed is independent of the
// order in which streams are created or consumed: the k-th block of stream id
// is philox(counter = (k, id), key = seed).
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    // Child stream derived from (seed, stream, index); used to split work.
    CounterRng split(std::uint64_t index) const;

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> out_{};
    int used_ = 4;
};

// SplitMix64 finalizer, used to derive seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace confmix
