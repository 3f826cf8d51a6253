#include "spn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spn/errors.hpp"

namespace spn {

namespace {

// Table over a subset of dimensions (0-based, ascending), row-major.
struct LocalTable {
    std::vector<std::size_t> dims;
    std::vector<double> cells;
};

std::size_t checked_cells(const std::vector<std::size_t>& grid, const std::vector<std::size_t>& dims, std::size_t max_cells)
{
    std::size_t cells = 1;
    for (auto d : dims) {
        if (grid[d] != 0 && cells > max_cells / grid[d])
            throw SizeError("joint grid exceeds " + std::to_string(max_cells) + " cells");
        cells *= grid[d];
    }
    if (cells > max_cells) throw SizeError("joint grid exceeds " + std::to_string(max_cells) + " cells");
    return cells;
}

// Embeds a leaf pmf with its own support into the (possibly larger) grid.
LocalTable leaf_table(const CategoricalLeaf& leaf, const std::vector<std::size_t>& dims,
                      const std::vector<std::size_t>& grid)
{
    LocalTable out{dims, {}};
    std::size_t cells = 1;
    for (auto d : dims) cells *= grid[d];
    out.cells.assign(cells, 0.0);
    for (std::size_t src = 0; src < leaf.probs.size(); ++src) {
        std::size_t rest = src;
        std::size_t dst = 0;
        std::size_t stride = 1;
        for (std::size_t i = dims.size(); i-- > 0;) {
            dst += (rest % leaf.support) * stride;
            rest /= leaf.support;
            stride *= grid[dims[i]];
        }
        out.cells[dst] = leaf.probs[src];
    }
    return out;
}

LocalTable outer_product(const std::vector<LocalTable>& parts, const std::vector<std::size_t>& dims,
                         const std::vector<std::size_t>& grid)
{
    std::size_t cells = 1;
    for (auto d : dims) cells *= grid[d];
    // stride of each union dimension inside each part (0 when absent)
    std::vector<std::vector<std::size_t>> strides(parts.size(), std::vector<std::size_t>(dims.size(), 0));
    for (std::size_t p = 0; p < parts.size(); ++p) {
        std::size_t stride = 1;
        for (std::size_t i = parts[p].dims.size(); i-- > 0;) {
            const auto pos = static_cast<std::size_t>(std::lower_bound(dims.begin(), dims.end(), parts[p].dims[i]) - dims.begin());
            strides[p][pos] = stride;
            stride *= grid[parts[p].dims[i]];
        }
    }
    LocalTable out{dims, std::vector<double>(cells, 0.0)};
    std::vector<std::size_t> coord(dims.size(), 0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        double value = 1.0;
        for (std::size_t p = 0; p < parts.size() && value != 0.0; ++p) {
            std::size_t index = 0;
            for (std::size_t i = 0; i < dims.size(); ++i) index += coord[i] * strides[p][i];
            value *= parts[p].cells[index];
        }
        out.cells[cell] = value;
        for (std::size_t i = dims.size(); i-- > 0;) {
            if (++coord[i] < grid[dims[i]]) break;
            coord[i] = 0;
        }
    }
    return out;
}

// Tables for every node, computed bottom-up over the pre-order flattening.
std::vector<LocalTable> node_tables(const SpnModel& model, const std::vector<std::size_t>& grid, std::size_t max_cells)
{
    const auto& nodes = model.nodes();
    checked_cells(grid, nodes[0].dims, max_cells);
    std::vector<LocalTable> tables(nodes.size());
    for (std::size_t id = nodes.size(); id-- > 0;) {
        const auto& node = nodes[id];
        switch (node.kind) {
        case NodeKind::leaf:
            tables[id] = leaf_table(std::get<CategoricalLeaf>(model.leaf(node.leaf)), node.dims, grid);
            break;
        case NodeKind::product: {
            std::vector<LocalTable> parts;
            for (auto c : node.children) parts.push_back(tables[c]);
            tables[id] = outer_product(parts, node.dims, grid);
            break;
        }
        case NodeKind::sum: {
            LocalTable out{node.dims, std::vector<double>(tables[node.children[0]].cells.size(), 0.0)};
            for (std::size_t c = 0; c < node.children.size(); ++c) {
                const auto& child = tables[node.children[c]].cells;
                for (std::size_t i = 0; i < child.size(); ++i) out.cells[i] += node.weights[c] * child[i];
            }
            tables[id] = std::move(out);
            break;
        }
        }
    }
    return tables;
}

void require_categorical(const SpnModel& model)
{
    if (model.family() != LeafFamily::categorical) throw SupportError("exact distances need categorical leaves");
}

double l1(std::span<const double> a, std::span<const double> b)
{
    double total = 0.0;
    const auto size = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < size; ++i) {
        const double x = i < a.size() ? a[i] : 0.0;
        const double y = i < b.size() ? b[i] : 0.0;
        total += std::abs(x - y);
    }
    return total;
}

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// Re-embeds a pmf into a grid with a larger per-dimension support.
std::vector<double> widen(const CategoricalLeaf& leaf, std::size_t dims, std::size_t support)
{
    if (leaf.support == support) return leaf.probs;
    std::vector<std::size_t> grid(dims, support);
    std::vector<std::size_t> order(dims);
    for (std::size_t i = 0; i < dims; ++i) order[i] = i;
    return leaf_table(leaf, order, grid).cells;
}

double categorical_leaf_tv(const CategoricalLeaf& a, const CategoricalLeaf& b)
{
    if (a.support == b.support) return 0.5 * l1(a.probs, b.probs);
    // Scope size from whichever leaf has support above one.
    std::size_t dims = 1;
    const auto& ref = a.support > 1 ? a : b;
    if (ref.support > 1)
        for (std::size_t size = ref.support; size < ref.probs.size(); size *= ref.support) ++dims;
    const auto support = std::max(a.support, b.support);
    return 0.5 * l1(widen(a, dims, support), widen(b, dims, support));
}

} // namespace

JointTable joint_table(const SpnModel& model, std::size_t max_cells)
{
    require_categorical(model);
    const auto& grid = model.grid_support();
    auto tables = node_tables(model, grid, max_cells);
    return JointTable{grid, std::move(tables[0].cells)};
}

double tv_exact(const SpnModel& a, const SpnModel& b)
{
    require_categorical(a);
    require_categorical(b);
    if (a.dimension() != b.dimension()) throw SupportError("models have different dimensions");
    if (a.grid_support() != b.grid_support()) throw SupportError("models have different joint support grids");
    const auto ta = joint_table(a);
    const auto tb = joint_table(b);
    return std::min(1.0, 0.5 * l1(ta.cells, tb.cells));
}

MonteCarloEstimate tv_monte_carlo(const SpnModel& a, const SpnModel& b, std::size_t samples, std::uint64_t seed)
{
    if (samples == 0) throw NumericalError("monte carlo needs at least one sample");
    if (a.dimension() != b.dimension()) throw DimensionError("models have different dimensions");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        Rng rng(seed, i);
        const bool from_a = rng.uniform() < 0.5;
        const auto draw = from_a ? a.draw(rng) : b.draw(rng);
        const double la = a.log_density(draw.point);
        const double lb = b.log_density(draw.point);
        if (la == -std::numeric_limits<double>::infinity() && lb == -std::numeric_limits<double>::infinity())
            throw NumericalError("both densities vanish at a drawn point");
        // |a-b|/(a+b) = |tanh((log a - log b)/2)|
        double value = 1.0;
        if (std::isfinite(la) && std::isfinite(lb)) value = std::abs(std::tanh(0.5 * (la - lb)));
        sum += value;
        sum_sq += value * value;
    }
    const double count = static_cast<double>(samples);
    const double mean = sum / count;
    const double variance = samples > 1 ? std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0)) : 0.0;
    return {mean, std::sqrt(variance / count)};
}

double gaussian_tv_1d(double mean_a, double sd_a, double mean_b, double sd_b)
{
    if (!(sd_a > 0.0) || !(sd_b > 0.0)) throw NumericalError("standard deviations must be positive");
    if (sd_a == sd_b) return std::erf(std::abs(mean_a - mean_b) / (2.0 * std::numbers::sqrt2 * sd_a));
    // log a(x) - log b(x) = qa x^2 + qb x + qc
    const double va = sd_a * sd_a;
    const double vb = sd_b * sd_b;
    const double qa = 0.5 / vb - 0.5 / va;
    const double qb = mean_a / va - mean_b / vb;
    const double qc = mean_b * mean_b / (2.0 * vb) - mean_a * mean_a / (2.0 * va) + std::log(sd_b / sd_a);
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) return 0.0;
    const double root = std::sqrt(disc);
    const double q = -0.5 * (qb + std::copysign(root, qb));
    double r1 = q / qa;
    double r2 = q != 0.0 ? qc / q : r1;
    if (r1 > r2) std::swap(r1, r2);
    auto diff = [&](double x) {
        return normal_cdf((x - mean_a) / sd_a) - normal_cdf((x - mean_b) / sd_b);
    };
    return std::min(1.0, std::abs(diff(r2) - diff(r1)));
}

double leaf_tv(const LeafDistribution& a, const LeafDistribution& b, const LeafTvOptions& options)
{
    const auto* ca = std::get_if<CategoricalLeaf>(&a);
    const auto* cb = std::get_if<CategoricalLeaf>(&b);
    if (ca && cb) return std::min(1.0, categorical_leaf_tv(*ca, *cb));
    if (ca || cb) return 1.0;
    const auto& ga = std::get<GaussianLeaf>(a);
    const auto& gb = std::get<GaussianLeaf>(b);
    if (ga.dimension() != gb.dimension()) throw DimensionError("gaussian leaves have different dimensions");
    if (ga == gb) return 0.0;
    if (ga.dimension() == 1)
        return gaussian_tv_1d(ga.mean()(0), std::sqrt(ga.covariance()(0, 0)), gb.mean()(0), std::sqrt(gb.covariance()(0, 0)));
    const auto d = static_cast<int>(ga.dimension());
    std::vector<int> dims(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) dims[static_cast<std::size_t>(i)] = i + 1;
    std::vector<int> all = dims;
    auto wrap = [&](const GaussianLeaf& g) {
        return SpnModel(make_leaf("g", Scope(all, d)), {{"g", g}});
    };
    return tv_monte_carlo(wrap(ga), wrap(gb), options.mc_samples, options.seed).estimate;
}

SimilarityReport similarity(const SpnModel& a, const SpnModel& b, const LeafTvOptions& options)
{
    SimilarityReport report;
    report.is_same_structure = a.dimension() == b.dimension() && same_structure(a.structure(), b.structure());
    if (!report.is_same_structure) return report;
    for (std::size_t i = 0; i < a.leaf_count(); ++i) {
        LeafTvOptions leaf_options = options;
        leaf_options.seed = options.seed + i;
        report.leaf_eps.push_back(leaf_tv(a.leaf(i), b.leaf(i), leaf_options));
    }
    const auto wa = sum_nodes_of(a.structure());
    const auto wb = sum_nodes_of(b.structure());
    for (std::size_t j = 0; j < wa.size(); ++j)
        for (std::size_t c = 0; c < wa[j]->weights.size(); ++c)
            report.weight_alpha.push_back(std::abs(wa[j]->weights[c] - wb[j]->weights[c]));
    for (double e : report.leaf_eps) report.eps = std::max(report.eps, e);
    for (double w : report.weight_alpha) report.alpha = std::max(report.alpha, w);
    return report;
}

double tv_bound_similar(const SimilarityReport& report, int n, std::size_t k)
{
    if (!report.is_same_structure) throw StructureError("bound applies only to models with the same structure");
    return static_cast<double>(n) * report.eps + static_cast<double>(k) * report.alpha / 2.0;
}

double l1_bound_similar(const SimilarityReport& report, int n, std::size_t k)
{
    return 2.0 * tv_bound_similar(report, n, k);
}

std::pair<double, double> product_l1_check(std::span<const std::vector<double>> ps, std::span<const std::vector<double>> qs)
{
    if (ps.size() != qs.size()) throw SizeError("factor lists have different lengths");
    std::vector<std::size_t> sizes;
    double rhs = 0.0;
    std::size_t cells = 1;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto size = std::max(ps[i].size(), qs[i].size());
        if (size == 0) throw SizeError("empty factor");
        if (cells > kMaxJointCells / size) throw SizeError("joint grid exceeds " + std::to_string(kMaxJointCells) + " cells");
        cells *= size;
        sizes.push_back(size);
        rhs += l1(ps[i], qs[i]);
    }
    double lhs = 0.0;
    std::vector<std::size_t> coord(sizes.size(), 0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        double p = 1.0;
        double q = 1.0;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            p *= coord[i] < ps[i].size() ? ps[i][coord[i]] : 0.0;
            q *= coord[i] < qs[i].size() ? qs[i][coord[i]] : 0.0;
        }
        lhs += std::abs(p - q);
        for (std::size_t i = sizes.size(); i-- > 0;) {
            if (++coord[i] < sizes[i]) break;
            coord[i] = 0;
        }
    }
    return {lhs, rhs};
}

std::vector<SubtreeBound> subtree_bounds(const SpnModel& truth, const SpnModel& decoded, double epsilon)
{
    require_categorical(truth);
    require_categorical(decoded);
    if (!same_structure(truth.structure(), decoded.structure()))
        throw StructureError("subtree bounds need models with the same structure");
    std::vector<std::size_t> grid = truth.grid_support();
    const auto& other = decoded.grid_support();
    for (std::size_t d = 0; d < grid.size(); ++d) grid[d] = std::max(grid[d], other[d]);

    const auto ta = node_tables(truth, grid, kMaxJointCells);
    const auto tb = node_tables(decoded, grid, kMaxJointCells);
    const auto negligible = truth.negligible_leaves(epsilon);
    const auto stats = structure_stats(truth.structure());
    const double n = static_cast<double>(stats.n);
    const double k = static_cast<double>(std::max<std::size_t>(stats.k, 1));

    const auto& nodes = truth.nodes();
    // Relative path mass of negligible leaves and weight count below each node.
    std::vector<double> negligible_mass(nodes.size(), 0.0);
    std::vector<std::size_t> weights_below(nodes.size(), 0);
    for (std::size_t id = nodes.size(); id-- > 0;) {
        const auto& node = nodes[id];
        if (node.kind == NodeKind::leaf) {
            negligible_mass[id] = negligible.contains(node.leaf) ? 1.0 : 0.0;
            continue;
        }
        for (std::size_t c = 0; c < node.children.size(); ++c) {
            const auto child = node.children[c];
            negligible_mass[id] += (node.kind == NodeKind::sum ? node.weights[c] : 1.0) * negligible_mass[child];
            weights_below[id] += weights_below[child];
        }
        if (node.kind == NodeKind::sum) weights_below[id] += node.children.size();
    }

    std::vector<SubtreeBound> out;
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        const double scope = static_cast<double>(nodes[id].dims.size());
        const double rhs = 2.0 * negligible_mass[id] + 2.0 * scope * epsilon / (3.0 * n) +
                           2.0 * static_cast<double>(weights_below[id]) * epsilon / (3.0 * k);
        out.push_back({id, l1(ta[id].cells, tb[id].cells), rhs});
    }
    return out;
}

} // namespace spn
