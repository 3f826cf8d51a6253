#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spn {

// Root of every domain error raised by the library. The CLI maps these to
// exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SPN_DEFINE_ERROR(Name)                    \
    class Name : public Error {                   \
    public:                                       \
        using Error::Error;                       \
    }

// signature
SPN_DEFINE_ERROR(SyntaxError);
SPN_DEFINE_ERROR(ScopeError);
SPN_DEFINE_ERROR(WeightError);

// model
SPN_DEFINE_ERROR(ModelError);
SPN_DEFINE_ERROR(DimensionError);
SPN_DEFINE_ERROR(IndexError);

// metrics
SPN_DEFINE_ERROR(SupportError);
SPN_DEFINE_ERROR(SizeError);
SPN_DEFINE_ERROR(NumericalError);
SPN_DEFINE_ERROR(StructureError);

// codec
SPN_DEFINE_ERROR(SimplexError);
SPN_DEFINE_ERROR(InsufficientSamples);
SPN_DEFINE_ERROR(DegenerateSample);
SPN_DEFINE_ERROR(LeafEncodeFailure);
SPN_DEFINE_ERROR(LayoutError);
SPN_DEFINE_ERROR(BitstreamError);

// learner
SPN_DEFINE_ERROR(EmptyCandidateSet);
SPN_DEFINE_ERROR(ConfigError);

// cli
SPN_DEFINE_ERROR(InputError);

#undef SPN_DEFINE_ERROR

class CapExceeded : public Error {
public:
    // count saturates at UINT64_MAX when the true count does not fit.
    CapExceeded(std::uint64_t count, std::uint64_t cap)
        : Error("candidate count " + std::to_string(count) + " exceeds cap " + std::to_string(cap)),
          count_(count), cap_(cap)
    {
    }

    std::uint64_t count() const noexcept { return count_; }
    std::uint64_t cap() const noexcept { return cap_; }

private:
    std::uint64_t count_;
    std::uint64_t cap_;
};

} // namespace spn
