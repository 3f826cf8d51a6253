#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace spn {

// Tolerance used for simplex membership of mixing weights and pmfs.
inline constexpr double kSimplexTolerance = 1e-9;

// A non-empty set of dimension indices drawn from [1, n], kept sorted.
class Scope {
public:
    Scope() = default;
    // Throws ScopeError on an empty set, duplicates, or indices outside [1, n].
    Scope(std::vector<int> dims, int ambient);

    const std::vector<int>& dims() const noexcept { return dims_; }
    int ambient() const noexcept { return ambient_; }
    std::size_t size() const noexcept { return dims_.size(); }
    bool contains(int dim) const;
    bool disjoint(const Scope& other) const;

    friend bool operator==(const Scope&, const Scope&) = default;

private:
    std::vector<int> dims_;
    int ambient_ = 0;
};

enum class NodeKind { leaf, product, sum };

// One node of a tree-shaped SPN signature. Children are owned by value.
//
// Build nodes through make_leaf / make_product / make_sum, which enforce the
// construction rules: product children have pairwise disjoint scopes, sum
// children share one scope and carry simplex weights, composite nodes have at
// least two children.
struct SignatureNode {
    NodeKind kind = NodeKind::leaf;
    std::string symbol;          // leaf only
    std::vector<double> weights; // sum only, one per child
    std::vector<SignatureNode> children;
    Scope scope;

    bool is_leaf() const noexcept { return kind == NodeKind::leaf; }
    bool is_sum() const noexcept { return kind == NodeKind::sum; }
    bool is_product() const noexcept { return kind == NodeKind::product; }

    // Exact equality, including weights and leaf symbols.
    friend bool operator==(const SignatureNode&, const SignatureNode&) = default;
};

SignatureNode make_leaf(std::string symbol, Scope scope);
SignatureNode make_product(std::vector<SignatureNode> children);
SignatureNode make_sum(std::vector<double> weights, std::vector<SignatureNode> children);

struct StructureStats {
    std::size_t e = 0;     // leaves
    std::size_t k = 0;     // mixing weights, summed fan-in of all sum nodes
    int n = 0;             // ambient dimension
    std::size_t depth = 0; // height of the root
    std::size_t sum_nodes = 0;

    friend bool operator==(const StructureStats&, const StructureStats&) = default;
};

// Parses a signature such as
//   ((0.7(((0.4(f1,{1})+0.6(f2,{1})))x(f3,{2}))+0.3((f4,{1})x(f5,{2}))),{1,2})
// Composite nodes may omit their scope annotation; when present it must
// equal the scope computed from the children. "x" and the UTF-8 "×" both
// denote a product.
SignatureNode parse_signature(std::string_view text, int n);

// Canonical text: every node carries its scope, weights use at most 12
// significant digits.
std::string render_signature(const SignatureNode& node);

// (1,1)-similarity: same shape, same child order, same scopes at
// corresponding nodes. Weights and leaf symbols are ignored.
bool same_structure(const SignatureNode& a, const SignatureNode& b);

StructureStats structure_stats(const SignatureNode& node);

// Shape, scopes, and symbols equal; weights equal within weight_tolerance.
bool structurally_equal(const SignatureNode& a, const SignatureNode& b, double weight_tolerance = 0.0);

// Leaves in depth-first, left-to-right order. This order defines leaf indices.
std::vector<const SignatureNode*> leaves_of(const SignatureNode& node);

// Sum nodes in pre-order. This order defines sum-node indices.
std::vector<const SignatureNode*> sum_nodes_of(const SignatureNode& node);

// Copy of node whose j-th sum node (pre-order) carries weights[j].
SignatureNode with_sum_weights(const SignatureNode& node, const std::vector<std::vector<double>>& weights);

} // namespace spn
