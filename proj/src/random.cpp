#include "spn/random.hpp"

#include <cmath>
#include <numbers>

namespace spn {

std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t key, std::uint64_t stream) noexcept
    : key_(mix64(mix64(key) ^ (stream * 0xD1B54A32D192ED03ULL)))
{
}

Rng::result_type Rng::operator()() noexcept
{
    return mix64(key_ ^ mix64(counter_++));
}

double Rng::uniform() noexcept
{
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    double u1 = 1.0 - uniform(); // (0, 1]
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept
{
    if (bound <= 1)
        return 0;
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
        x = (*this)();
    } while (x >= limit);
    return x % bound;
}

Rng Rng::split(std::uint64_t stream) const noexcept
{
    return Rng(key_ ^ 0x5851F42D4C957F2DULL, stream);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept
{
    std::uint64_t h = mix64(base);
    h = mix64(h ^ a);
    h = mix64(h ^ (b + 0x632BE59BD9B4E019ULL));
    return mix64(h ^ (c + 0x8CB92BA72F3D8DD7ULL));
}

} // namespace spn
