#include "spn/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spn/errors.hpp"

namespace spn {

namespace {

constexpr std::size_t kMaxLeafCells = std::size_t{1} << 24;

} // namespace

double tolerant_ceil(double x) noexcept
{
    return std::ceil(x - 1e-9 * std::max(1.0, std::abs(x)));
}

std::uint64_t grid_levels(double step)
{
    if (!(step > 0.0) || !(step <= 1.0)) throw SimplexError("grid step must lie in (0, 1]");
    const double levels = tolerant_ceil(1.0 / step);
    if (levels > 1e15) throw SimplexError("grid step too small");
    return static_cast<std::uint64_t>(std::max(1.0, levels));
}

unsigned index_width(std::uint64_t levels) noexcept
{
    return bit_width_for(levels + 1);
}

QuantizedSimplex quantize_simplex_levels(std::span<const double> weights, std::uint64_t levels)
{
    if (weights.empty()) throw SimplexError("empty weight vector");
    if (levels == 0) throw SimplexError("grid needs at least one interval");
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < -kSimplexTolerance || w > 1.0 + kSimplexTolerance)
            throw SimplexError("weights must lie in [0, 1]");
        total += w;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) throw SimplexError("weights must sum to 1");

    const auto size = weights.size();
    const double scale = static_cast<double>(levels);
    std::vector<std::uint64_t> indices(size);
    std::vector<double> fraction(size);
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < size; ++i) {
        const double target = std::max(0.0, weights[i]) / total * scale;
        const double floor = std::floor(target);
        indices[i] = static_cast<std::uint64_t>(floor);
        fraction[i] = target - floor;
        assigned += indices[i];
    }
    // Hand the missing steps to the largest remainders, ties to the lower index.
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fraction[a] > fraction[b]; });
    for (std::size_t r = 0; assigned < levels; ++r, ++assigned) ++indices[order[r % size]];
    // Floating error can leave the floors a step above the total.
    while (assigned > levels) {
        --*std::max_element(indices.begin(), indices.end());
        --assigned;
    }

    QuantizedSimplex out;
    out.levels = levels;
    out.indices = indices;
    out.values.resize(size);
    for (std::size_t i = 0; i < size; ++i) out.values[i] = static_cast<double>(indices[i]) / scale;
    BitWriter writer;
    const auto width = index_width(levels);
    for (std::size_t i = 0; i + 1 < size; ++i) writer.write(indices[i], width);
    out.bits = writer.take();
    return out;
}

QuantizedSimplex quantize_simplex(std::span<const double> weights, double step)
{
    return quantize_simplex_levels(weights, grid_levels(step));
}

std::vector<double> decode_simplex(BitReader& reader, std::size_t size, std::uint64_t levels)
{
    if (size == 0) throw SimplexError("empty weight vector");
    const auto width = index_width(levels);
    const double scale = static_cast<double>(levels);
    std::vector<double> values(size);
    std::uint64_t used = 0;
    for (std::size_t i = 0; i + 1 < size; ++i) {
        const auto index = reader.read(width);
        if (index > levels - used) throw BitstreamError("weight indices exceed the grid total");
        used += index;
        values[i] = static_cast<double>(index) / scale;
    }
    values[size - 1] = static_cast<double>(levels - used) / scale;
    return values;
}

std::uint64_t categorical_levels(std::size_t cells, double eps)
{
    if (!(eps > 0.0) || !(eps <= 1.0)) throw SimplexError("accuracy must lie in (0, 1]");
    return static_cast<std::uint64_t>(std::max(1.0, tolerant_ceil(static_cast<double>(cells) / eps)));
}

std::size_t categorical_bit_budget(std::size_t cells, double eps)
{
    return cells * index_width(categorical_levels(cells, eps));
}

CodecConfig codec_config_for(const SpnModel& model, double eps, CodecVariant variant, const GaussianCodecOptions& gaussian)
{
    CodecConfig config;
    config.structure = model.structure();
    config.family = model.family();
    config.eps = eps;
    config.variant = variant;
    config.gaussian = gaussian;
    if (model.family() == LeafFamily::categorical)
        for (std::size_t i = 0; i < model.leaf_count(); ++i)
            config.leaf_support.push_back(std::get<CategoricalLeaf>(model.leaf(i)).support);
    return config;
}

SpnCodec::SpnCodec(CodecConfig config) : config_(std::move(config))
{
    const double eps = config_.eps;
    if (!(eps > 0.0) || !(eps <= 1.0)) throw ConfigError("eps must lie in (0, 1]");
    const auto stats = structure_stats(config_.structure);
    const auto leaves = leaves_of(config_.structure);
    const auto sums = sum_nodes_of(config_.structure);
    const double n = static_cast<double>(stats.n);
    const double e = static_cast<double>(stats.e);
    const bool strong = config_.variant == CodecVariant::strong;

    budget_.eps_leaf = strong ? eps / (3.0 * n) : eps / (2.0 * n);
    if (stats.k > 0) budget_.eps_weight_step = strong ? 2.0 * eps / (3.0 * static_cast<double>(stats.k)) : eps / static_cast<double>(stats.k);
    else budget_.eps_weight_step = 1.0;
    weight_levels_ = config_.weight_levels ? *config_.weight_levels : grid_levels(std::min(1.0, budget_.eps_weight_step));
    if (weight_levels_ == 0) throw ConfigError("weight grid needs at least one interval");
    budget_.weight_bits_per_index = index_width(weight_levels_);

    if (config_.family == LeafFamily::categorical) {
        if (config_.leaf_support.size() != leaves.size())
            throw ConfigError("expected a support for each of the " + std::to_string(leaves.size()) + " leaves");
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            const auto support = config_.leaf_support[i];
            if (support == 0) throw ConfigError("leaf support must be positive");
            std::size_t cells = 1;
            for (std::size_t s = 0; s < leaves[i]->scope.size(); ++s) {
                if (cells > kMaxLeafCells / support) throw ConfigError("leaf grid too large");
                cells *= support;
            }
            const auto levels = config_.leaf_levels ? *config_.leaf_levels : categorical_levels(cells, budget_.eps_leaf);
            if (levels == 0) throw ConfigError("leaf grid needs at least one interval");
            leaf_cells_.push_back(cells);
            leaf_levels_.push_back(levels);
            manifest_.leaves.push_back({0, (cells - 1) * index_width(levels)});
            budget_.t = std::max<std::size_t>(budget_.t, cells * index_width(levels));
        }
    } else {
        for (const auto* leaf : leaves) {
            const auto gb = gaussian_budget(leaf->scope.size(), budget_.eps_leaf, config_.gaussian);
            leaf_cells_.push_back(leaf->scope.size());
            leaf_levels_.push_back(gb.levels);
            manifest_.leaves.push_back({gb.tau, gb.t});
            budget_.tau = std::max(budget_.tau, gb.tau);
            budget_.t = std::max(budget_.t, gb.t);
            budget_.m = std::max(budget_.m, gb.m);
        }
    }
    std::size_t weight_budget = 0;
    for (const auto* node : sums) {
        manifest_.sums.push_back({node->children.size(), budget_.weight_bits_per_index});
        weight_budget += node->children.size() * budget_.weight_bits_per_index;
    }
    budget_.m0 = 48.0 * static_cast<double>(budget_.m) * e * std::log(6.0 * e) / eps;
    budget_.point_budget = stats.e * budget_.tau;
    budget_.bit_budget = stats.e * budget_.t + weight_budget;
}

std::uint64_t SpnCodec::leaf_levels(std::size_t leaf) const
{
    if (leaf >= leaf_levels_.size()) throw IndexError("leaf index out of range");
    return leaf_levels_[leaf];
}

CompressedMessage SpnCodec::encode(const SpnModel& truth, std::span<const LabeledSample> samples, std::uint64_t seed) const
{
    if (!same_structure(truth.structure(), config_.structure)) throw StructureError("model does not match the codec structure");
    if (truth.family() != config_.family) throw ModelError("model leaf family does not match the codec");
    const auto required = static_cast<std::size_t>(tolerant_ceil(budget_.m0));
    if (samples.size() < required)
        throw InsufficientSamples("encoder needs " + std::to_string(required) + " samples, got " + std::to_string(samples.size()));

    const int n = truth.dimension();
    const auto leaf_count = truth.leaf_count();
    std::vector<std::vector<std::size_t>> routed(leaf_count);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (samples[s].point.size() != static_cast<std::size_t>(n)) throw DimensionError("sample length differs from n");
        for (auto leaf : samples[s].leaf_path) {
            if (leaf >= leaf_count) throw IndexError("sample label names a missing leaf");
            routed[leaf].push_back(s);
        }
    }

    const bool strong = config_.variant == CodecVariant::strong;
    const auto negligible = strong ? truth.negligible_leaves(config_.eps) : std::set<std::size_t>{};

    std::vector<std::size_t> filler_points;
    auto filler = [&]() -> const std::vector<std::size_t>& {
        if (filler_points.empty() && !samples.empty()) {
            filler_points.resize(samples.size());
            std::iota(filler_points.begin(), filler_points.end(), std::size_t{0});
            std::stable_sort(filler_points.begin(), filler_points.end(),
                             [&](std::size_t a, std::size_t b) { return samples[a].point < samples[b].point; });
        }
        return filler_points;
    };

    CompressedMessage message;
    message.n = n;
    message.manifest = manifest_;
    BitWriter leaf_bits;
    for (std::size_t i = 0; i < leaf_count; ++i) {
        const auto& layout = manifest_.leaves[i];
        if (negligible.contains(i)) {
            const auto& order = filler();
            if (order.size() < layout.points) throw InsufficientSamples("too few samples to fill a negligible leaf");
            for (std::size_t p = 0; p < layout.points; ++p) message.points.push_back(samples[order[p]].point);
            leaf_bits.append(BitString(layout.bits, false));
            continue;
        }
        const auto& leaf = truth.leaf(i);
        if (const auto* c = std::get_if<CategoricalLeaf>(&leaf)) {
            if (c->probs.size() != leaf_cells_[i]) throw ModelError("leaf support does not match the codec");
            leaf_bits.append(quantize_simplex_levels(c->probs, leaf_levels_[i]).bits);
            continue;
        }
        const auto& g = std::get<GaussianLeaf>(leaf);
        const auto& dims = truth.leaf_scope(i).dims();
        std::vector<std::vector<double>> local;
        local.reserve(routed[i].size());
        for (auto s : routed[i]) {
            std::vector<double> x;
            for (int d : dims) x.push_back(samples[s].point[static_cast<std::size_t>(d - 1)]);
            local.push_back(std::move(x));
        }
        const auto gb = gaussian_budget(dims.size(), budget_.eps_leaf, config_.gaussian);
        if (local.size() < gb.m)
            throw LeafEncodeFailure("leaf '" + truth.leaf_order()[i] + "' received " + std::to_string(local.size()) +
                                    " samples, needs " + std::to_string(gb.m));
        GaussianCode code;
        try {
            code = gaussian_encode(local, g, budget_.eps_leaf, derive_seed(seed, i), config_.gaussian);
        } catch (const DegenerateSample& err) {
            throw LeafEncodeFailure("leaf '" + truth.leaf_order()[i] + "': " + err.what());
        } catch (const LeafEncodeFailure& err) {
            throw LeafEncodeFailure("leaf '" + truth.leaf_order()[i] + "': " + err.what());
        }
        for (auto a : code.anchors) message.points.push_back(samples[routed[i][a]].point);
        leaf_bits.append(code.bits);
    }
    auto bits = leaf_bits.take();
    BitWriter weight_bits;
    for (const auto& weights : sum_weights_of(truth)) weight_bits.append(quantize_simplex_levels(weights, weight_levels_).bits);
    const auto& tail = weight_bits.bits();
    bits.insert(bits.end(), tail.begin(), tail.end());
    message.bits = std::move(bits);
    return message;
}

SpnModel SpnCodec::decode(const CompressedMessage& message) const
{
    const int n = config_.structure.scope.ambient();
    if (message.manifest && !(*message.manifest == manifest_)) throw LayoutError("message manifest does not match the structure");
    if (message.n != n)
        throw LayoutError("message dimension " + std::to_string(message.n) + " differs from the structure's " + std::to_string(n));
    if (message.points.size() != manifest_.total_points())
        throw LayoutError("message has " + std::to_string(message.points.size()) + " points, layout needs " +
                          std::to_string(manifest_.total_points()));
    for (const auto& p : message.points)
        if (p.size() != static_cast<std::size_t>(n)) throw LayoutError("message point length differs from n");
    const auto expected_bits = manifest_.total_bits();
    if (message.bits.size() < expected_bits)
        throw BitstreamError("bit payload truncated: have " + std::to_string(message.bits.size()) + " bits, need " +
                             std::to_string(expected_bits));
    if (message.bits.size() > expected_bits)
        throw LayoutError("bit payload has " + std::to_string(message.bits.size() - expected_bits) + " extra bits");

    const auto leaves = leaves_of(config_.structure);
    BitReader reader(message.bits);
    std::size_t next_point = 0;
    std::map<std::string, LeafDistribution> bindings;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto& dims = leaves[i]->scope.dims();
        if (config_.family == LeafFamily::categorical) {
            auto probs = decode_simplex(reader, leaf_cells_[i], leaf_levels_[i]);
            bindings.emplace(leaves[i]->symbol, CategoricalLeaf{config_.leaf_support[i], std::move(probs)});
            continue;
        }
        std::vector<std::vector<double>> anchors;
        for (std::size_t p = 0; p < manifest_.leaves[i].points; ++p) {
            const auto& full = message.points[next_point++];
            std::vector<double> x;
            for (int d : dims) x.push_back(full[static_cast<std::size_t>(d - 1)]);
            anchors.push_back(std::move(x));
        }
        bindings.emplace(leaves[i]->symbol, gaussian_decode(anchors, reader, budget_.eps_leaf, config_.gaussian));
    }
    std::vector<std::vector<double>> weights;
    for (const auto& layout : manifest_.sums) weights.push_back(decode_simplex(reader, layout.fan_in, weight_levels_));
    return SpnModel(with_sum_weights(config_.structure, weights), std::move(bindings));
}

} // namespace spn
