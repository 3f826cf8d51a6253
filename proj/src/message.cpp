#include "spn/message.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "spn/errors.hpp"

namespace spn {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'P', 'N', 'C'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::size_t value)
{
    if (value > std::numeric_limits<std::uint32_t>::max()) throw BitstreamError("field exceeds 32 bits");
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFFU));
}

void put_f64(std::vector<std::uint8_t>& out, double value)
{
    const auto raw = std::bit_cast<std::uint64_t>(value);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((raw >> (8 * i)) & 0xFFU));
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::span<const std::uint8_t> take(std::size_t count, const char* what)
    {
        if (bytes_.size() - position_ < count) throw BitstreamError(std::string("message truncated in ") + what);
        auto out = bytes_.subspan(position_, count);
        position_ += count;
        return out;
    }

    std::uint32_t u32(const char* what)
    {
        auto b = take(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return v;
    }

    double f64(const char* what)
    {
        auto b = take(8, what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return std::bit_cast<double>(v);
    }

    std::size_t remaining() const noexcept { return bytes_.size() - position_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t position_ = 0;
};

} // namespace

std::size_t Manifest::total_points() const noexcept
{
    std::size_t total = 0;
    for (const auto& l : leaves) total += l.points;
    return total;
}

std::size_t Manifest::total_bits() const noexcept
{
    std::size_t total = 0;
    for (const auto& l : leaves) total += l.bits;
    for (const auto& s : sums) total += s.bits();
    return total;
}

std::vector<std::uint8_t> serialize_message(const CompressedMessage& message)
{
    if (message.n <= 0) throw BitstreamError("message dimension must be positive");
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(kVersion);
    put_u32(out, message.points.size());
    put_u32(out, static_cast<std::size_t>(message.n));
    for (const auto& p : message.points) {
        if (p.size() != static_cast<std::size_t>(message.n)) throw BitstreamError("point length differs from n");
        for (double v : p) put_f64(out, v);
    }
    put_u32(out, message.bits.size());
    std::uint8_t current = 0;
    for (std::size_t i = 0; i < message.bits.size(); ++i) {
        current = static_cast<std::uint8_t>((current << 1) | (message.bits[i] ? 1U : 0U));
        if (i % 8 == 7) {
            out.push_back(current);
            current = 0;
        }
    }
    if (const auto tail = message.bits.size() % 8; tail != 0) out.push_back(static_cast<std::uint8_t>(current << (8 - tail)));
    return out;
}

CompressedMessage deserialize_message(std::span<const std::uint8_t> bytes)
{
    ByteReader reader(bytes);
    auto magic = reader.take(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw BitstreamError("not a compressed message (bad magic)");
    const auto version = reader.take(1, "version")[0];
    if (version != kVersion) throw BitstreamError("unsupported message version " + std::to_string(version));
    CompressedMessage message;
    const auto count = reader.u32("point count");
    const auto n = reader.u32("dimension");
    if (n == 0 || n > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
        throw BitstreamError("message dimension must be positive");
    message.n = static_cast<int>(n);
    if (static_cast<std::uint64_t>(count) * n * 8 > reader.remaining()) throw BitstreamError("message truncated in points");
    message.points.assign(count, std::vector<double>(n));
    for (auto& p : message.points)
        for (auto& v : p) v = reader.f64("points");
    const auto bit_count = reader.u32("bit length");
    const auto payload = reader.take((static_cast<std::size_t>(bit_count) + 7) / 8, "bit payload");
    message.bits.resize(bit_count);
    for (std::size_t i = 0; i < bit_count; ++i) message.bits[i] = ((payload[i / 8] >> (7 - i % 8)) & 1U) != 0;
    if (const auto tail = bit_count % 8; tail != 0) {
        const auto mask = static_cast<std::uint8_t>((1U << (8 - tail)) - 1U);
        if ((payload.back() & mask) != 0) throw BitstreamError("nonzero padding bits");
    }
    if (reader.remaining() != 0) throw BitstreamError("trailing bytes after the bit payload");
    return message;
}

void write_message(const CompressedMessage& message, const std::filesystem::path& path)
{
    const auto bytes = serialize_message(message);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BitstreamError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw BitstreamError("failed writing " + path.string());
}

CompressedMessage read_message(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BitstreamError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_message(bytes);
}

} // namespace spn
