#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "spn/random.hpp"
#include "spn/signature.hpp"

namespace spn {

// pmf over the grid {0,...,support-1}^s for a leaf with scope size s, stored
// flat in row-major order (lowest scope dimension most significant).
struct CategoricalLeaf {
    std::size_t support = 0;
    std::vector<double> probs;

    friend bool operator==(const CategoricalLeaf&, const CategoricalLeaf&) = default;
};

// Validates probs and infers support from probs.size() = support^scope_size.
CategoricalLeaf make_categorical(std::vector<double> probs, std::size_t scope_size = 1);

class GaussianLeaf {
public:
    // Throws ModelError unless the covariance is symmetric (1e-9) and positive definite.
    GaussianLeaf(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(mean_.size()); }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }
    const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
    // Lower Cholesky factor of the covariance.
    const Eigen::MatrixXd& cholesky() const noexcept { return cholesky_; }

    double log_density(std::span<const double> x) const;
    void sample(Rng& rng, std::span<double> out) const;

    friend bool operator==(const GaussianLeaf& a, const GaussianLeaf& b)
    {
        return a.mean_ == b.mean_ && a.covariance_ == b.covariance_;
    }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::MatrixXd cholesky_;
    double log_normalizer_ = 0.0;
};

using LeafDistribution = std::variant<CategoricalLeaf, GaussianLeaf>;

enum class LeafFamily { categorical, gaussian };

LeafFamily family_of(const LeafDistribution& leaf);

struct LabeledSample {
    std::vector<double> point;          // length n
    std::vector<std::size_t> leaf_path; // indices of the leaves that produced the point, ascending
};

// A signature bound to concrete leaf distributions. Immutable; all queries
// are reentrant.
class SpnModel {
public:
    // Every leaf symbol must be distinct and bound, each bound leaf must match
    // its scope size, all leaves must share one family, and the root must
    // cover every dimension 1..n.
    SpnModel(SignatureNode structure, std::map<std::string, LeafDistribution> bindings);

    const SignatureNode& structure() const noexcept { return structure_; }
    int dimension() const noexcept { return n_; }
    std::size_t leaf_count() const noexcept { return leaves_.size(); }
    LeafFamily family() const noexcept { return family_; }
    const std::vector<std::string>& leaf_order() const noexcept { return leaf_order_; }
    const LeafDistribution& leaf(std::size_t i) const;
    const Scope& leaf_scope(std::size_t i) const;
    std::map<std::string, LeafDistribution> bindings() const;

    // Per-dimension support of the joint grid (categorical models only): the
    // largest leaf support covering each dimension.
    const std::vector<std::size_t>& grid_support() const;

    double log_density(std::span<const double> x) const;
    double density(std::span<const double> x) const;

    LabeledSample draw(Rng& rng) const;
    // Sample i uses stream i of the generator keyed by seed.
    std::vector<LabeledSample> sample(std::uint64_t seed, std::size_t count) const;

    double path_weight(std::size_t leaf_index) const;
    const std::vector<double>& path_weights() const noexcept { return path_weights_; }
    std::set<std::size_t> negligible_leaves(double epsilon) const;

    struct FlatNode {
        NodeKind kind = NodeKind::leaf;
        std::vector<std::size_t> children;
        std::vector<double> weights;
        std::size_t leaf = 0;
        std::vector<std::size_t> dims; // 0-based, ascending
        Scope scope;
    };
    // Pre-order flattening; node 0 is the root.
    const std::vector<FlatNode>& nodes() const noexcept { return nodes_; }

private:
    std::size_t flatten(const SignatureNode& node, std::size_t& next_leaf);
    double log_density_at(std::size_t node, std::span<const double> x) const;
    void draw_at(std::size_t node, Rng& rng, LabeledSample& out) const;

    SignatureNode structure_;
    int n_ = 0;
    LeafFamily family_ = LeafFamily::categorical;
    std::vector<std::string> leaf_order_;
    std::vector<LeafDistribution> leaves_;
    std::vector<std::size_t> leaf_nodes_;
    std::vector<FlatNode> nodes_;
    std::vector<double> path_weights_;
    std::vector<std::size_t> grid_support_;
};

// Same structure as model with the given per-sum-node weights (pre-order) and
// per-leaf distributions (leaf order).
SpnModel rebind(const SpnModel& model, const std::vector<std::vector<double>>& sum_weights,
                const std::vector<LeafDistribution>& leaves);

std::vector<std::vector<double>> sum_weights_of(const SpnModel& model);

} // namespace spn
