#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spn/bitstream.hpp"
#include "spn/model.hpp"

namespace spn {

// The encoder keeps d+1 sample points as anchors. Their centroid and scatter
// define an affine frame; the true mean and Cholesky factor are expressed in
// that frame and rounded to a uniform grid on [-range, range].
struct GaussianCodecOptions {
    double sample_factor = 8.0;     // m = max(d+1, ceil(sample_factor * d * ln(2d)))
    double range = 16.0;            // grid half-width in frame units
    double resolution_factor = 4.0; // grid step = eps / (resolution_factor * d)
    std::size_t max_anchor_trials = 256;
};

struct GaussianCodecBudget {
    std::size_t tau = 0;    // anchor points
    std::size_t t = 0;      // bits
    std::size_t m = 0;      // samples the encoder needs
    double step = 0.0;      // grid spacing
    std::uint64_t levels = 0; // grid indices run over [0, levels]
    unsigned width = 0;     // bits per grid index
};

GaussianCodecBudget gaussian_budget(std::size_t dimension, double eps, const GaussianCodecOptions& options = {});

struct GaussianCode {
    std::vector<std::size_t> anchors; // indices into the encoder's samples
    BitString bits;
};

// Throws InsufficientSamples below the budget's m, DegenerateSample when no
// tried anchor set is affinely independent, and LeafEncodeFailure when no
// anchor set yields a decoded leaf within eps of truth. The accuracy check
// uses the exact distance for d = 1 and a KL-based upper bound otherwise.
GaussianCode gaussian_encode(std::span<const std::vector<double>> samples, const GaussianLeaf& truth, double eps,
                             std::uint64_t seed, const GaussianCodecOptions& options = {});

// Total function of (anchors, bits): out-of-range values are clamped and a
// degenerate anchor set falls back to the identity frame. Reads exactly the
// budget's t bits.
GaussianLeaf gaussian_decode(std::span<const std::vector<double>> anchors, BitReader& bits, double eps,
                             const GaussianCodecOptions& options = {});

// Upper bound on the total variation distance, sqrt(KL(a || b) / 2).
double gaussian_tv_upper_bound(const GaussianLeaf& a, const GaussianLeaf& b);

} // namespace spn
