#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spn/codec.hpp"
#include "spn/metrics.hpp"
#include "spn/model.hpp"

namespace spn {

// Every model the decoder can produce for a categorical codec: the Cartesian
// product of the per-leaf grids and the per-sum-node weight grids.
struct CandidateSet {
    SignatureNode structure;
    std::vector<SpnModel> candidates;
    // Grid indices behind each candidate: leaf blocks in leaf order, then
    // weight blocks in sum-node order, each listing all of its indices.
    std::vector<std::vector<std::uint64_t>> provenance;
};

// Candidate count for the codec's grids, saturating at UINT64_MAX.
std::uint64_t count_candidates(const SpnCodec& codec);

// Throws ConfigError for Gaussian leaves and CapExceeded when the count is
// above cap.
CandidateSet enumerate_candidates(const CodecConfig& config, std::uint64_t cap);

struct LearnResult {
    std::size_t chosen_index = 0;
    std::optional<SpnModel> chosen;
    std::vector<std::size_t> wins; // per candidate
    std::size_t sample_count = 0;
    double eps_target = 0.0;
    double delta_target = 0.0;
    std::uint64_t theoretical_sample_size = 0;
};

// Scheffe tournament. For every pair (i, j) the set A = {x : f_i(x) > f_j(x)}
// is compared against the empirical mass of the sample; the candidate whose
// mass on A is closer wins the contest and exact ties award nothing. The
// most wins is chosen, ties going to the lowest index. Points off the joint
// grid count towards no cell. Throws EmptyCandidateSet.
LearnResult select_min_distance(const CandidateSet& candidates, std::span<const std::vector<double>> sample);

// Same tournament over precomputed joint tables (cells of one shared grid).
// Returns per-table wins.
std::vector<std::size_t> scheffe_wins(std::span<const std::vector<double>> tables, std::span<const double> empirical);

// Empirical pmf of the sample over the grid.
std::vector<double> empirical_pmf(const std::vector<std::size_t>& grid, std::span<const std::vector<double>> sample);

// m0 + ceil((bits + points) / eps^2) for the given codec at the learning
// accuracy eps / 6.
std::uint64_t theoretical_sample_size(const SpnCodec& codec_at_sixth, double eps);

// Enumerates at eps / 6 with the strong codec (base supplies structure and
// leaf supports) and runs the tournament.
LearnResult pac_learn(const CodecConfig& base, std::span<const std::vector<double>> sample, double eps, double delta,
                      std::uint64_t cap);

} // namespace spn
