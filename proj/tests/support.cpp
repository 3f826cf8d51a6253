#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

namespace testing {

namespace {

struct Builder {
    spn::Rng& rng;
    const ShapeLimits& limits;
    int next_symbol = 1;

    spn::SignatureNode leaf(const std::vector<int>& dims)
    {
        return spn::make_leaf("f" + std::to_string(next_symbol++), spn::Scope(dims, limits.n));
    }

    spn::SignatureNode singletons(const std::vector<int>& dims)
    {
        if (dims.size() == 1) return leaf(dims);
        std::vector<spn::SignatureNode> children;
        for (int d : dims) children.push_back(leaf({d}));
        return spn::make_product(std::move(children));
    }

    spn::SignatureNode node(std::vector<int> dims, int depth)
    {
        const bool leaf_allowed = dims.size() == 1 || limits.multi_dim_leaves;
        if (depth <= 0) return leaf_allowed ? leaf(dims) : singletons(dims);
        // 0 leaf, 1 product, 2 sum
        std::vector<int> kinds;
        if (leaf_allowed) kinds.push_back(0);
        if (dims.size() >= 2) kinds.push_back(1);
        kinds.push_back(2);
        kinds.push_back(2);
        const int kind = kinds[rng.below(kinds.size())];
        if (kind == 0) return leaf(dims);
        const auto fan_in = static_cast<std::size_t>(2 + rng.below(static_cast<std::uint64_t>(limits.max_fan_in - 1)));
        if (kind == 1) {
            std::shuffle(dims.begin(), dims.end(), rng);
            const std::size_t parts = std::min(fan_in, dims.size());
            std::vector<std::vector<int>> groups(parts);
            for (std::size_t i = 0; i < dims.size(); ++i) groups[i < parts ? i : rng.below(parts)].push_back(dims[i]);
            std::vector<spn::SignatureNode> children;
            for (auto& g : groups) {
                std::sort(g.begin(), g.end());
                children.push_back(node(g, depth - 1));
            }
            return spn::make_product(std::move(children));
        }
        std::vector<spn::SignatureNode> children;
        for (std::size_t i = 0; i < fan_in; ++i) children.push_back(node(dims, depth - 1));
        return spn::make_sum(random_simplex(rng, fan_in), std::move(children));
    }
};

void enumerate_induced(const spn::SignatureNode& node, double weight, std::vector<const spn::SignatureNode*> leaves,
                       std::vector<const spn::SignatureNode*> pending,
                       const std::function<void(double, const std::vector<const spn::SignatureNode*>&)>& emit)
{
    if (node.is_leaf()) {
        leaves.push_back(&node);
    } else if (node.is_product()) {
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) pending.push_back(&*it);
    } else {
        for (std::size_t c = 0; c < node.children.size(); ++c)
            enumerate_induced(node.children[c], weight * node.weights[c], leaves, pending, emit);
        return;
    }
    if (pending.empty()) {
        emit(weight, leaves);
        return;
    }
    const auto* next = pending.back();
    pending.pop_back();
    enumerate_induced(*next, weight, std::move(leaves), std::move(pending), emit);
}

} // namespace

std::vector<double> random_simplex(spn::Rng& rng, std::size_t size, bool sparse)
{
    std::vector<double> w(size);
    double total = 0.0;
    for (auto& v : w) {
        v = sparse && rng.uniform() < 0.25 ? 0.0 : -std::log(1.0 - rng.uniform());
        total += v;
    }
    if (total == 0.0) {
        w[rng.below(size)] = 1.0;
        return w;
    }
    for (auto& v : w) v /= total;
    return w;
}

spn::SignatureNode random_signature(spn::Rng& rng, const ShapeLimits& limits)
{
    Builder builder{rng, limits};
    std::vector<int> dims(static_cast<std::size_t>(limits.n));
    std::iota(dims.begin(), dims.end(), 1);
    return builder.node(dims, limits.max_depth);
}

spn::SpnModel random_categorical_model(spn::Rng& rng, const spn::SignatureNode& structure, std::size_t support)
{
    std::map<std::string, spn::LeafDistribution> bindings;
    for (const auto* leaf : spn::leaves_of(structure)) {
        std::size_t cells = 1;
        for (std::size_t i = 0; i < leaf->scope.size(); ++i) cells *= support;
        bindings.emplace(leaf->symbol, spn::make_categorical(random_simplex(rng, cells, true), leaf->scope.size()));
    }
    return spn::SpnModel(structure, std::move(bindings));
}

spn::SpnModel random_gaussian_model(spn::Rng& rng, const spn::SignatureNode& structure)
{
    std::map<std::string, spn::LeafDistribution> bindings;
    for (const auto* leaf : spn::leaves_of(structure)) {
        const auto d = static_cast<Eigen::Index>(leaf->scope.size());
        Eigen::VectorXd mean(d);
        Eigen::MatrixXd a(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            mean(i) = 4.0 * rng.uniform() - 2.0;
            for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rng.normal() * 0.5;
        }
        Eigen::MatrixXd cov = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
        bindings.emplace(leaf->symbol, spn::GaussianLeaf(mean, cov));
    }
    return spn::SpnModel(structure, std::move(bindings));
}

spn::SpnModel nested_mixture_model(const std::vector<std::vector<double>>& leaf_probs)
{
    auto structure = spn::parse_signature(kNestedMixture, 2);
    std::map<std::string, spn::LeafDistribution> bindings;
    for (std::size_t i = 0; i < leaf_probs.size(); ++i)
        bindings.emplace("f" + std::to_string(i + 1), spn::make_categorical(leaf_probs[i]));
    return spn::SpnModel(std::move(structure), std::move(bindings));
}

std::vector<double> induced_tree_joint(const spn::SpnModel& model, const std::vector<std::size_t>& grid)
{
    std::size_t cells = 1;
    for (auto g : grid) cells *= g;
    std::vector<double> joint(cells, 0.0);
    std::map<const spn::SignatureNode*, std::size_t> leaf_index;
    auto leaves = spn::leaves_of(model.structure());
    for (std::size_t i = 0; i < leaves.size(); ++i) leaf_index[leaves[i]] = i;

    enumerate_induced(model.structure(), 1.0, {}, {}, [&](double weight, const std::vector<const spn::SignatureNode*>& active) {
        if (weight == 0.0) return;
        for (std::size_t cell = 0; cell < cells; ++cell) {
            std::vector<std::size_t> coord(grid.size());
            std::size_t rest = cell;
            for (std::size_t d = grid.size(); d-- > 0;) {
                coord[d] = rest % grid[d];
                rest /= grid[d];
            }
            double p = weight;
            for (const auto* leaf : active) {
                const auto& c = std::get<spn::CategoricalLeaf>(model.leaf(leaf_index[leaf]));
                std::size_t local = 0;
                bool inside = true;
                for (int d : leaf->scope.dims()) {
                    const auto v = coord[static_cast<std::size_t>(d - 1)];
                    if (v >= c.support) inside = false;
                    local = local * c.support + v;
                }
                p *= inside ? c.probs[local] : 0.0;
            }
            joint[cell] += p;
        }
    });
    return joint;
}

bool model_equal_bits(const spn::SpnModel& a, const spn::SpnModel& b)
{
    return a.structure() == b.structure() && a.bindings() == b.bindings();
}

std::size_t count_weight_tokens(const std::string& text)
{
    // A weight token is a number that directly follows "(" or "+".
    std::size_t count = 0;
    for (std::size_t i = 1; i < text.size(); ++i) {
        const char prev = text[i - 1];
        const char c = text[i];
        if ((prev == '(' || prev == '+') && (std::isdigit(static_cast<unsigned char>(c)) || c == '.')) ++count;
    }
    return count;
}

bool satisfies_construction_rules(const spn::SignatureNode& node)
{
    if (node.scope.size() == 0) return false;
    if (node.is_leaf()) return node.children.empty() && !node.symbol.empty();
    if (node.children.size() < 2) return false;
    for (const auto& child : node.children)
        if (!satisfies_construction_rules(child)) return false;
    if (node.is_product()) {
        std::set<int> seen;
        std::size_t total = 0;
        for (const auto& child : node.children) {
            total += child.scope.size();
            seen.insert(child.scope.dims().begin(), child.scope.dims().end());
        }
        std::set<int> own(node.scope.dims().begin(), node.scope.dims().end());
        return seen.size() == total && seen == own;
    }
    if (node.weights.size() != node.children.size()) return false;
    double total = 0.0;
    for (std::size_t c = 0; c < node.children.size(); ++c) {
        if (node.weights[c] < 0.0 || node.weights[c] > 1.0) return false;
        if (!(node.children[c].scope == node.scope)) return false;
        total += node.weights[c];
    }
    return std::abs(total - 1.0) <= 1e-9;
}

} // namespace testing
