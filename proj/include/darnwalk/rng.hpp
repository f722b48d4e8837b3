#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace darnwalk {

/// Philox4x32-10 block function: encrypts a 128-bit counter under a 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// SplitMix64 finalizer; used to derive keys from (seed, tag) pairs.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// A sequential random stream: xoshiro256++ started from a state that the
/// Philox block function derives from (key, index), so any stream can be
/// recreated from those two numbers alone.
class Stream {
public:
    Stream(std::uint64_t key, std::uint64_t index) noexcept;

    std::uint64_t next_u64() noexcept
    {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }
    std::uint32_t next_u32() noexcept { return static_cast<std::uint32_t>(next_u64() >> 32); }
    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53; }
    /// Uniform on (0, 1) with 32 bits of resolution.
    double uniform32() noexcept { return (static_cast<double>(next_u32()) + 0.5) * 0x1p-32; }
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

/// Handle naming a family of independent streams: sample i of an operation
/// draws from `key.stream(i)`, independent of execution order or worker count.
class StreamKey {
public:
    explicit StreamKey(std::uint64_t seed = 0) noexcept;

    /// Key for a sub-operation. Distinct tags give unrelated families.
    StreamKey derive(std::uint64_t tag) const noexcept;
    StreamKey derive(std::string_view tag) const noexcept;

    Stream stream(std::uint64_t index) const noexcept { return Stream(value_, index); }
    std::uint64_t value() const noexcept { return value_; }

private:
    struct Raw {};
    StreamKey(Raw, std::uint64_t value) noexcept : value_(value) {}

    std::uint64_t value_;
};

}  // namespace darnwalk
