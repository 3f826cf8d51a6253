#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "spn/bitstream.hpp"

namespace spn {

struct LeafLayout {
    std::size_t points = 0;
    std::size_t bits = 0;

    friend bool operator==(const LeafLayout&, const LeafLayout&) = default;
};

struct SumLayout {
    std::size_t fan_in = 0;
    std::size_t bits_per_weight = 0;

    // Only the first fan_in - 1 indices are stored; the last is implied.
    std::size_t bits() const noexcept { return fan_in > 0 ? (fan_in - 1) * bits_per_weight : 0; }

    friend bool operator==(const SumLayout&, const SumLayout&) = default;
};

// Leaves in depth-first order, then sum nodes in pre-order.
struct Manifest {
    std::vector<LeafLayout> leaves;
    std::vector<SumLayout> sums;

    std::size_t total_points() const noexcept;
    std::size_t total_bits() const noexcept;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

// Sample points (each of length n) followed by leaf blocks in the bit
// payload, then one block per sum node. The manifest is not serialized; a
// decoder recomputes it from the structure.
struct CompressedMessage {
    int n = 0;
    std::vector<std::vector<double>> points;
    BitString bits;
    std::optional<Manifest> manifest;
};

// "SPNC", version 1, u32 point count, u32 n, f64 points row-major, u32 bit
// length, bits MSB-first zero-padded to a byte. All integers little-endian.
std::vector<std::uint8_t> serialize_message(const CompressedMessage& message);
// Throws BitstreamError on a bad magic or version, truncation, trailing
// bytes, or nonzero padding.
CompressedMessage deserialize_message(std::span<const std::uint8_t> bytes);

void write_message(const CompressedMessage& message, const std::filesystem::path& path);
CompressedMessage read_message(const std::filesystem::path& path);

} // namespace spn
