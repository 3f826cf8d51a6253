#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "spn/model.hpp"

namespace spn {

inline constexpr std::size_t kMaxJointCells = 10'000'000;

// Full joint pmf of a categorical model. Cells are row-major over grid with
// dimension 1 most significant.
struct JointTable {
    std::vector<std::size_t> grid;
    std::vector<double> cells;
};

// Throws SizeError when the grid exceeds max_cells.
JointTable joint_table(const SpnModel& model, std::size_t max_cells = kMaxJointCells);

// Half the L1 distance over the joint grid. Both models must be categorical
// with the same per-dimension support (SupportError) and the grid must fit
// in kMaxJointCells (SizeError).
double tv_exact(const SpnModel& a, const SpnModel& b);

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

// Draws from the equal mixture of a and b and averages |a-b|/(a+b), which is
// an unbiased estimate of the total variation distance. Throws
// NumericalError when both densities vanish at a drawn point.
MonteCarloEstimate tv_monte_carlo(const SpnModel& a, const SpnModel& b, std::size_t samples, std::uint64_t seed);

// Total variation between two univariate normals, from the crossing points
// of their densities.
double gaussian_tv_1d(double mean_a, double sd_a, double mean_b, double sd_b);

struct LeafTvOptions {
    std::size_t mc_samples = 100'000;
    std::uint64_t seed = 0;
};

// Exact for categorical pairs and univariate Gaussians, Monte Carlo for
// multivariate Gaussians, 1 for a categorical/Gaussian pair.
double leaf_tv(const LeafDistribution& a, const LeafDistribution& b, const LeafTvOptions& options = {});

struct SimilarityReport {
    bool is_same_structure = false;
    std::vector<double> leaf_eps;     // leaf order
    std::vector<double> weight_alpha; // sum nodes in pre-order, flattened
    double eps = 0.0;
    double alpha = 0.0;
};

SimilarityReport similarity(const SpnModel& a, const SpnModel& b, const LeafTvOptions& options = {});

// n*eps + k*alpha/2. Throws StructureError when the report is not for a
// same-structure pair.
double tv_bound_similar(const SimilarityReport& report, int n, std::size_t k);
// The same bound stated for the L1 distance: 2*n*eps + k*alpha.
double l1_bound_similar(const SimilarityReport& report, int n, std::size_t k);

// lhs = ||prod p_i - prod q_i||_1 on the joint grid, rhs = sum ||p_i - q_i||_1.
// Pmfs of a pair may differ in length; the shorter one is padded with zeros.
std::pair<double, double> product_l1_check(std::span<const std::vector<double>> ps,
                                           std::span<const std::vector<double>> qs);

struct SubtreeBound {
    std::size_t node = 0; // pre-order index
    double lhs = 0.0;     // L1 distance between the two subtree distributions
    double rhs = 0.0;
};

// Per-node check of the reconstruction bound for a decoded model against the
// truth: at every node, the L1 distance is at most twice the relative path
// mass of the truth's negligible leaves below it plus 2*n'*eps/(3n) +
// 2*k'*eps/(3k), where n' and k' are the node's scope size and weight count.
// Both models must be categorical and share their structure.
std::vector<SubtreeBound> subtree_bounds(const SpnModel& truth, const SpnModel& decoded, double epsilon);

} // namespace spn
