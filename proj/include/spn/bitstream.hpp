#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace spn {

using BitString = std::vector<bool>;

// Appends unsigned fields most significant bit first.
class BitWriter {
public:
    void write(std::uint64_t value, unsigned width);
    void append(const BitString& bits);
    const BitString& bits() const noexcept { return bits_; }
    BitString take() noexcept { return std::move(bits_); }

private:
    BitString bits_;
};

// Reads fields written by BitWriter. Throws BitstreamError when a read runs
// past the end.
class BitReader {
public:
    explicit BitReader(const BitString& bits, std::size_t offset = 0) : bits_(&bits), position_(offset) {}

    std::uint64_t read(unsigned width);
    BitString read_bits(std::size_t count);
    std::size_t position() const noexcept { return position_; }
    std::size_t remaining() const noexcept { return bits_->size() - position_; }

private:
    const BitString* bits_;
    std::size_t position_;
};

// Smallest width with 2^width >= count; 0 for count <= 1.
unsigned bit_width_for(std::uint64_t count) noexcept;

} // namespace spn
