#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spn/model.hpp"
#include "spn/random.hpp"
#include "spn/signature.hpp"

namespace testing {

inline const std::string kNestedMixture =
    "((0.7(((0.4(f1,{1})+0.6(f2,{1})))x(f3,{2}))+0.3((f4,{1})x(f5,{2}))),{1,2})";

struct ShapeLimits {
    int n = 3;
    int max_depth = 4;
    int max_fan_in = 3;
    bool multi_dim_leaves = false;
};

// Random valid signature over dims 1..limits.n with unique leaf symbols f1, f2, ...
spn::SignatureNode random_signature(spn::Rng& rng, const ShapeLimits& limits);

// Random point on the simplex with the given number of entries; with
// sparse set some entries may be exactly zero.
std::vector<double> random_simplex(spn::Rng& rng, std::size_t size, bool sparse = false);

// Categorical model on the given structure with per-leaf support and random parameters.
spn::SpnModel random_categorical_model(spn::Rng& rng, const spn::SignatureNode& structure, std::size_t support);

// Gaussian model with random means in [-2,2] and well-conditioned covariances.
spn::SpnModel random_gaussian_model(spn::Rng& rng, const spn::SignatureNode& structure);

// Same structure and weights as the nested-mixture signature, categorical leaves.
spn::SpnModel nested_mixture_model(const std::vector<std::vector<double>>& leaf_probs);

// Joint pmf over the grid by expanding the model into its induced trees
// (one child per sum node) and summing weight times the product of leaf pmfs.
// Cells are row-major with dimension 1 most significant.
std::vector<double> induced_tree_joint(const spn::SpnModel& model, const std::vector<std::size_t>& grid);

// Bitwise equality of structure, weights, and leaf parameters.
bool model_equal_bits(const spn::SpnModel& a, const spn::SpnModel& b);

// Count of weight tokens in a rendered signature.
std::size_t count_weight_tokens(const std::string& text);

// Independent check of the construction rules on an AST.
bool satisfies_construction_rules(const spn::SignatureNode& node);

} // namespace testing
