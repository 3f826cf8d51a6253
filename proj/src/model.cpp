#include "spn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

#include "spn/errors.hpp"

namespace spn {

namespace {

double log_sum_exp(std::span<const double> terms)
{
    double peak = -std::numeric_limits<double>::infinity();
    for (double t : terms) peak = std::max(peak, t);
    if (!std::isfinite(peak)) return peak;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - peak);
    return peak + std::log(acc);
}

std::size_t integer_root(std::size_t value, std::size_t degree)
{
    if (degree == 1) return value;
    auto guess = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(value), 1.0 / static_cast<double>(degree))));
    for (std::size_t c = guess > 0 ? guess - 1 : 0; c <= guess + 1; ++c) {
        std::size_t p = 1;
        for (std::size_t i = 0; i < degree; ++i) p *= c;
        if (p == value) return c;
    }
    return 0;
}

// Grid cell of an integer-valued point, or nullopt when any coordinate is off the grid.
std::optional<std::size_t> categorical_cell(const CategoricalLeaf& leaf, std::span<const double> x)
{
    std::size_t cell = 0;
    for (double v : x) {
        if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(leaf.support)) return std::nullopt;
        cell = cell * leaf.support + static_cast<std::size_t>(v);
    }
    return cell;
}

// Zero-probability entries are never returned; rounding that leaves the
// cumulative sum below u falls back to the last positive entry.
std::size_t inverse_cdf(std::span<const double> probs, double u)
{
    double cdf = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (probs[j] <= 0.0) continue;
        last_positive = j;
        cdf += probs[j];
        if (u < cdf) return j;
    }
    return last_positive;
}

} // namespace

CategoricalLeaf make_categorical(std::vector<double> probs, std::size_t scope_size)
{
    if (probs.empty()) throw ModelError("categorical leaf needs at least one probability");
    if (scope_size == 0) throw ModelError("categorical leaf scope size must be positive");
    double total = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) throw ModelError("categorical probabilities must be finite and non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) throw ModelError("categorical probabilities must sum to 1");
    std::size_t support = integer_root(probs.size(), scope_size);
    if (support == 0)
        throw ModelError("categorical pmf length " + std::to_string(probs.size()) + " is not a power " +
                         std::to_string(scope_size) + " of an integer support");
    return CategoricalLeaf{support, std::move(probs)};
}

GaussianLeaf::GaussianLeaf(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance))
{
    const auto d = mean_.size();
    if (d == 0) throw ModelError("gaussian leaf needs a non-empty mean");
    if (covariance_.rows() != d || covariance_.cols() != d)
        throw ModelError("gaussian covariance must be " + std::to_string(d) + "x" + std::to_string(d));
    if (!mean_.allFinite() || !covariance_.allFinite()) throw ModelError("gaussian parameters must be finite");
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j)
            if (std::abs(covariance_(i, j) - covariance_(j, i)) > 1e-9)
                throw ModelError("gaussian covariance is not symmetric");
    Eigen::MatrixXd sym = 0.5 * (covariance_ + covariance_.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
        throw ModelError("gaussian covariance is not positive definite");
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success) throw ModelError("gaussian covariance is not positive definite");
    cholesky_ = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(cholesky_(i, i));
    log_normalizer_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianLeaf::log_density(std::span<const double> x) const
{
    const auto d = mean_.size();
    if (static_cast<Eigen::Index>(x.size()) != d) throw DimensionError("gaussian leaf dimension mismatch");
    Eigen::VectorXd z(d);
    // Forward substitution L z = x - mean.
    for (Eigen::Index i = 0; i < d; ++i) {
        double acc = x[static_cast<std::size_t>(i)] - mean_(i);
        for (Eigen::Index j = 0; j < i; ++j) acc -= cholesky_(i, j) * z(j);
        z(i) = acc / cholesky_(i, i);
    }
    return log_normalizer_ - 0.5 * z.squaredNorm();
}

void GaussianLeaf::sample(Rng& rng, std::span<double> out) const
{
    const auto d = mean_.size();
    std::vector<double> z(static_cast<std::size_t>(d));
    for (auto& v : z) v = rng.normal();
    for (Eigen::Index i = 0; i < d; ++i) {
        double acc = mean_(i);
        for (Eigen::Index j = 0; j <= i; ++j) acc += cholesky_(i, j) * z[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
}

LeafFamily family_of(const LeafDistribution& leaf)
{
    return std::holds_alternative<CategoricalLeaf>(leaf) ? LeafFamily::categorical : LeafFamily::gaussian;
}

namespace {

bool leaf_fits_scope(const LeafDistribution& leaf, std::size_t scope_size)
{
    if (const auto* g = std::get_if<GaussianLeaf>(&leaf)) return g->dimension() == scope_size;
    const auto& c = std::get<CategoricalLeaf>(leaf);
    std::size_t cells = 1;
    for (std::size_t i = 0; i < scope_size; ++i) cells *= c.support;
    return cells == c.probs.size();
}

} // namespace

SpnModel::SpnModel(SignatureNode structure, std::map<std::string, LeafDistribution> bindings)
    : structure_(std::move(structure))
{
    n_ = structure_.scope.ambient();
    if (static_cast<int>(structure_.scope.size()) != n_)
        throw ModelError("root scope must cover all " + std::to_string(n_) + " dimensions");

    auto leaves = leaves_of(structure_);
    for (const auto* leaf : leaves) {
        if (std::find(leaf_order_.begin(), leaf_order_.end(), leaf->symbol) != leaf_order_.end())
            throw ModelError("leaf symbol '" + leaf->symbol + "' appears more than once");
        auto it = bindings.find(leaf->symbol);
        if (it == bindings.end()) throw ModelError("leaf '" + leaf->symbol + "' has no binding");
        if (!leaf_fits_scope(it->second, leaf->scope.size()))
            throw ModelError("leaf '" + leaf->symbol + "' dimension does not match its scope size " +
                             std::to_string(leaf->scope.size()));
        leaf_order_.push_back(leaf->symbol);
        leaves_.push_back(it->second);
    }
    if (bindings.size() != leaves_.size()) {
        for (const auto& [symbol, _] : bindings)
            if (std::find(leaf_order_.begin(), leaf_order_.end(), symbol) == leaf_order_.end())
                throw ModelError("binding '" + symbol + "' does not name a leaf");
    }
    family_ = family_of(leaves_.front());
    for (const auto& leaf : leaves_)
        if (family_of(leaf) != family_) throw ModelError("categorical and gaussian leaves cannot be mixed");

    leaf_nodes_.resize(leaves_.size());
    std::size_t next_leaf = 0;
    flatten(structure_, next_leaf);

    path_weights_.assign(leaves_.size(), 0.0);
    std::vector<double> prefix(nodes_.size(), 0.0);
    prefix[0] = 1.0;
    // Pre-order guarantees parents precede children.
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const auto& node = nodes_[id];
        for (std::size_t c = 0; c < node.children.size(); ++c)
            prefix[node.children[c]] = prefix[id] * (node.kind == NodeKind::sum ? node.weights[c] : 1.0);
        if (node.kind == NodeKind::leaf) path_weights_[node.leaf] = prefix[id];
    }

    if (family_ == LeafFamily::categorical) {
        grid_support_.assign(static_cast<std::size_t>(n_), 0);
        for (std::size_t i = 0; i < leaves_.size(); ++i) {
            const auto support = std::get<CategoricalLeaf>(leaves_[i]).support;
            for (int d : leaves[i]->scope.dims()) {
                auto& s = grid_support_[static_cast<std::size_t>(d - 1)];
                s = std::max(s, support);
            }
        }
    }
}

std::size_t SpnModel::flatten(const SignatureNode& node, std::size_t& next_leaf)
{
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    FlatNode flat;
    flat.kind = node.kind;
    flat.weights = node.weights;
    flat.scope = node.scope;
    for (int d : node.scope.dims()) flat.dims.push_back(static_cast<std::size_t>(d - 1));
    if (node.is_leaf()) {
        // Leaves are visited in the same order as leaves_of.
        flat.leaf = next_leaf++;
        leaf_nodes_[flat.leaf] = id;
    }
    for (const auto& child : node.children) flat.children.push_back(flatten(child, next_leaf));
    nodes_[id] = std::move(flat);
    return id;
}

const LeafDistribution& SpnModel::leaf(std::size_t i) const
{
    if (i >= leaves_.size()) throw IndexError("leaf index " + std::to_string(i) + " out of range");
    return leaves_[i];
}

const Scope& SpnModel::leaf_scope(std::size_t i) const
{
    if (i >= leaves_.size()) throw IndexError("leaf index " + std::to_string(i) + " out of range");
    return nodes_[leaf_nodes_[i]].scope;
}

std::map<std::string, LeafDistribution> SpnModel::bindings() const
{
    std::map<std::string, LeafDistribution> out;
    for (std::size_t i = 0; i < leaves_.size(); ++i) out.emplace(leaf_order_[i], leaves_[i]);
    return out;
}

const std::vector<std::size_t>& SpnModel::grid_support() const
{
    if (family_ != LeafFamily::categorical) throw ModelError("grid support is defined only for categorical models");
    return grid_support_;
}

double SpnModel::log_density_at(std::size_t id, std::span<const double> x) const
{
    const auto& node = nodes_[id];
    switch (node.kind) {
    case NodeKind::leaf: {
        std::vector<double> local(node.dims.size());
        for (std::size_t i = 0; i < node.dims.size(); ++i) local[i] = x[node.dims[i]];
        const auto& leaf = leaves_[node.leaf];
        if (const auto* g = std::get_if<GaussianLeaf>(&leaf)) return g->log_density(local);
        const auto& c = std::get<CategoricalLeaf>(leaf);
        auto cell = categorical_cell(c, local);
        if (!cell) return -std::numeric_limits<double>::infinity();
        return std::log(c.probs[*cell]);
    }
    case NodeKind::product: {
        double acc = 0.0;
        for (auto child : node.children) {
            acc += log_density_at(child, x);
            if (acc == -std::numeric_limits<double>::infinity()) break;
        }
        return acc;
    }
    case NodeKind::sum: {
        std::vector<double> terms;
        terms.reserve(node.children.size());
        for (std::size_t c = 0; c < node.children.size(); ++c) {
            if (node.weights[c] <= 0.0) continue;
            terms.push_back(std::log(node.weights[c]) + log_density_at(node.children[c], x));
        }
        return log_sum_exp(terms);
    }
    }
    return -std::numeric_limits<double>::infinity();
}

double SpnModel::log_density(std::span<const double> x) const
{
    if (x.size() != static_cast<std::size_t>(n_))
        throw DimensionError("point has " + std::to_string(x.size()) + " coordinates, model has " + std::to_string(n_));
    for (double v : x)
        if (!std::isfinite(v)) throw DimensionError("point coordinates must be finite");
    return log_density_at(0, x);
}

double SpnModel::density(std::span<const double> x) const
{
    return std::exp(log_density(x));
}

void SpnModel::draw_at(std::size_t id, Rng& rng, LabeledSample& out) const
{
    const auto& node = nodes_[id];
    switch (node.kind) {
    case NodeKind::leaf: {
        out.leaf_path.push_back(node.leaf);
        const auto& leaf = leaves_[node.leaf];
        if (const auto* g = std::get_if<GaussianLeaf>(&leaf)) {
            std::vector<double> local(node.dims.size());
            g->sample(rng, local);
            for (std::size_t i = 0; i < node.dims.size(); ++i) out.point[node.dims[i]] = local[i];
            return;
        }
        const auto& c = std::get<CategoricalLeaf>(leaf);
        std::size_t cell = inverse_cdf(c.probs, rng.uniform());
        for (std::size_t i = node.dims.size(); i-- > 0;) {
            out.point[node.dims[i]] = static_cast<double>(cell % c.support);
            cell /= c.support;
        }
        return;
    }
    case NodeKind::product:
        for (auto child : node.children) draw_at(child, rng, out);
        return;
    case NodeKind::sum: {
        const std::size_t pick = inverse_cdf(node.weights, rng.uniform());
        draw_at(node.children[pick], rng, out);
        return;
    }
    }
}

LabeledSample SpnModel::draw(Rng& rng) const
{
    LabeledSample out;
    out.point.assign(static_cast<std::size_t>(n_), 0.0);
    draw_at(0, rng, out);
    std::sort(out.leaf_path.begin(), out.leaf_path.end());
    return out;
}

std::vector<LabeledSample> SpnModel::sample(std::uint64_t seed, std::size_t count) const
{
    std::vector<LabeledSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(seed, i);
        out.push_back(draw(rng));
    }
    return out;
}

double SpnModel::path_weight(std::size_t leaf_index) const
{
    if (leaf_index >= path_weights_.size())
        throw IndexError("leaf index " + std::to_string(leaf_index) + " out of range [0, " +
                         std::to_string(path_weights_.size()) + ")");
    return path_weights_[leaf_index];
}

std::set<std::size_t> SpnModel::negligible_leaves(double epsilon) const
{
    const double threshold = epsilon / (3.0 * static_cast<double>(leaves_.size()));
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < path_weights_.size(); ++i)
        if (path_weights_[i] < threshold) out.insert(i);
    return out;
}

SpnModel rebind(const SpnModel& model, const std::vector<std::vector<double>>& sum_weights,
                const std::vector<LeafDistribution>& leaves)
{
    if (leaves.size() != model.leaf_count())
        throw ModelError("expected " + std::to_string(model.leaf_count()) + " leaves, got " + std::to_string(leaves.size()));
    std::map<std::string, LeafDistribution> bindings;
    for (std::size_t i = 0; i < leaves.size(); ++i) bindings.emplace(model.leaf_order()[i], leaves[i]);
    return SpnModel(with_sum_weights(model.structure(), sum_weights), std::move(bindings));
}

std::vector<std::vector<double>> sum_weights_of(const SpnModel& model)
{
    std::vector<std::vector<double>> out;
    for (const auto* node : sum_nodes_of(model.structure())) out.push_back(node->weights);
    return out;
}

} // namespace spn
