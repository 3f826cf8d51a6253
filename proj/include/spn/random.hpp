#pragma once

#include <cstdint>
#include <limits>

namespace spn {

// Counter-based generator: output i of stream (key, stream) is a SplitMix64
// hash of (key, stream, i), so any draw can be reproduced without replaying
// earlier ones and independent streams can be handed to parallel workers.
// Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    // Standard normal via Box-Muller.
    double normal() noexcept;
    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept;

    // Independent child generator.
    Rng split(std::uint64_t stream) const noexcept;

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Deterministic seed derivation for experiment jobs.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) noexcept;

} // namespace spn
