#include "spn/bitstream.hpp"

#include "spn/errors.hpp"

namespace spn {

void BitWriter::write(std::uint64_t value, unsigned width)
{
    if (width > 64) throw BitstreamError("field width above 64 bits");
    if (width < 64 && (value >> width) != 0)
        throw BitstreamError("value " + std::to_string(value) + " does not fit in " + std::to_string(width) + " bits");
    for (unsigned i = width; i-- > 0;) bits_.push_back(((value >> i) & 1U) != 0);
}

void BitWriter::append(const BitString& bits)
{
    bits_.insert(bits_.end(), bits.begin(), bits.end());
}

std::uint64_t BitReader::read(unsigned width)
{
    if (width > 64) throw BitstreamError("field width above 64 bits");
    if (remaining() < width)
        throw BitstreamError("bit payload truncated: need " + std::to_string(width) + " bits at offset " +
                             std::to_string(position_) + ", have " + std::to_string(remaining()));
    std::uint64_t value = 0;
    for (unsigned i = 0; i < width; ++i) value = (value << 1) | ((*bits_)[position_++] ? 1U : 0U);
    return value;
}

BitString BitReader::read_bits(std::size_t count)
{
    if (remaining() < count)
        throw BitstreamError("bit payload truncated: need " + std::to_string(count) + " bits at offset " +
                             std::to_string(position_) + ", have " + std::to_string(remaining()));
    BitString out(bits_->begin() + static_cast<std::ptrdiff_t>(position_),
                  bits_->begin() + static_cast<std::ptrdiff_t>(position_ + count));
    position_ += count;
    return out;
}

unsigned bit_width_for(std::uint64_t count) noexcept
{
    unsigned width = 0;
    while (width < 64 && (std::uint64_t{1} << width) < count) ++width;
    return width;
}

} // namespace spn
