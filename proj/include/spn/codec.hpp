#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spn/bitstream.hpp"
#include "spn/gaussian_codec.hpp"
#include "spn/message.hpp"
#include "spn/model.hpp"

namespace spn {

// Ceiling that ignores floating error below 1e-9 relative, so that e.g.
// 1 / (2 * 0.3 / 12) counts as 20 levels rather than 21.
double tolerant_ceil(double x) noexcept;

// Number of grid intervals for a step-s net on [0, 1]; the net has levels+1 points.
std::uint64_t grid_levels(double step);
// Bits per stored grid index.
unsigned index_width(std::uint64_t levels) noexcept;

struct QuantizedSimplex {
    std::vector<std::uint64_t> indices; // sum to levels
    std::vector<double> values;         // indices / levels
    std::uint64_t levels = 0;
    BitString bits; // first size-1 indices at index_width(levels) bits each
};

// Largest-remainder rounding onto the grid {0, 1/L, ..., 1} with
// L = grid_levels(step). Every coordinate moves by less than 1/L <= step.
// Throws SimplexError when weights are not a simplex point within 1e-9 or
// step is outside (0, 1].
QuantizedSimplex quantize_simplex(std::span<const double> weights, double step);
QuantizedSimplex quantize_simplex_levels(std::span<const double> weights, std::uint64_t levels);
// Inverse of the bits of quantize_simplex_levels. Throws BitstreamError when
// the stored indices exceed levels.
std::vector<double> decode_simplex(BitReader& reader, std::size_t size, std::uint64_t levels);

// Discrete leaves: a pmf over `cells` points is stored as its rounding onto
// the (eps/cells)-grid, which keeps the leaf within eps/2 in total variation.
std::uint64_t categorical_levels(std::size_t cells, double eps);
std::size_t categorical_bit_budget(std::size_t cells, double eps);

enum class CodecVariant {
    strong, // leaves at eps/3n, weights on a 2eps/3k grid, negligible leaves replaced by filler
    weak    // leaves at eps/2n, weights on an eps/k grid, every leaf must be encoded
};

struct CodecConfig {
    SignatureNode structure;
    LeafFamily family = LeafFamily::categorical;
    std::vector<std::size_t> leaf_support; // categorical: per-dimension support of each leaf, leaf order
    double eps = 0.1;
    CodecVariant variant = CodecVariant::strong;
    GaussianCodecOptions gaussian;
    // Explicit grid sizes override the ones implied by eps.
    std::optional<std::uint64_t> leaf_levels;
    std::optional<std::uint64_t> weight_levels;
};

CodecConfig codec_config_for(const SpnModel& model, double eps, CodecVariant variant = CodecVariant::strong,
                             const GaussianCodecOptions& gaussian = {});

struct CompressionBudget {
    std::size_t tau = 0;           // points per leaf
    std::size_t t = 0;             // bits per leaf
    std::size_t m = 0;             // samples per leaf
    double eps_leaf = 0.0;
    double eps_weight_step = 0.0;
    double m0 = 0.0;               // total samples the encoder needs
    std::size_t weight_bits_per_index = 0;
    std::size_t point_budget = 0;  // e * tau
    std::size_t bit_budget = 0;    // e * t + sum over sum nodes of fan_in * weight_bits_per_index
};

class SpnCodec {
public:
    explicit SpnCodec(CodecConfig config);

    const CodecConfig& config() const noexcept { return config_; }
    const Manifest& manifest() const noexcept { return manifest_; }
    const CompressionBudget& budget() const noexcept { return budget_; }
    std::uint64_t leaf_levels(std::size_t leaf) const;
    std::uint64_t weight_levels() const noexcept { return weight_levels_; }

    // Samples must carry the labels produced by SpnModel::sample. Throws
    // InsufficientSamples below the budget's m0 and LeafEncodeFailure when a
    // leaf that has to be encoded received too few samples or could not be
    // encoded to accuracy.
    CompressedMessage encode(const SpnModel& truth, std::span<const LabeledSample> samples, std::uint64_t seed) const;

    // Deterministic in the message alone. Throws LayoutError when the message
    // does not fit this codec's layout and BitstreamError on a short payload
    // or an invalid weight block.
    SpnModel decode(const CompressedMessage& message) const;

private:
    CodecConfig config_;
    std::vector<std::size_t> leaf_cells_;
    std::vector<std::uint64_t> leaf_levels_;
    std::uint64_t weight_levels_ = 0;
    Manifest manifest_;
    CompressionBudget budget_;
};

} // namespace spn
