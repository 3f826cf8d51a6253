#include "spn/learner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "spn/errors.hpp"

namespace spn {

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b)
{
    if (a != 0 && b > UINT64_MAX / a) return UINT64_MAX;
    return a * b;
}

// C(levels + parts - 1, parts - 1), saturating.
std::uint64_t compositions(std::uint64_t levels, std::size_t parts)
{
    std::uint64_t result = 1;
    const std::uint64_t k = parts - 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // result * (levels + i) / i stays integral at every step
        const auto numerator = levels + i;
        const auto g = std::gcd(result, i);
        const auto reduced = saturating_mul(result / g, numerator / (i / g));
        if (reduced == UINT64_MAX) return UINT64_MAX;
        result = reduced;
    }
    return result;
}

// All compositions of levels into parts non-negative integers, lexicographic.
std::vector<std::vector<std::uint64_t>> all_compositions(std::uint64_t levels, std::size_t parts)
{
    std::vector<std::vector<std::uint64_t>> out;
    std::vector<std::uint64_t> current(parts, 0);
    auto fill = [&](auto&& self, std::size_t index, std::uint64_t left) -> void {
        if (index + 1 == parts) {
            current[index] = left;
            out.push_back(current);
            return;
        }
        for (std::uint64_t v = 0; v <= left; ++v) {
            current[index] = v;
            self(self, index + 1, left - v);
        }
    };
    fill(fill, 0, levels);
    return out;
}

} // namespace

std::uint64_t count_candidates(const SpnCodec& codec)
{
    const auto& config = codec.config();
    if (config.family != LeafFamily::categorical) throw ConfigError("candidate enumeration needs categorical leaves");
    std::uint64_t total = 1;
    const auto leaves = leaves_of(config.structure);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        std::size_t cells = 1;
        for (std::size_t s = 0; s < leaves[i]->scope.size(); ++s) cells *= config.leaf_support[i];
        total = saturating_mul(total, compositions(codec.leaf_levels(i), cells));
    }
    for (const auto& sum : codec.manifest().sums) total = saturating_mul(total, compositions(codec.weight_levels(), sum.fan_in));
    return total;
}

CandidateSet enumerate_candidates(const CodecConfig& config, std::uint64_t cap)
{
    if (config.family != LeafFamily::categorical) throw ConfigError("candidate enumeration needs categorical leaves");
    SpnCodec codec(config);
    const auto count = count_candidates(codec);
    if (count > cap) throw CapExceeded(count, cap);

    // One list of index blocks per axis: leaves, then sum nodes.
    std::vector<std::vector<std::vector<std::uint64_t>>> axes;
    std::vector<std::uint64_t> axis_levels;
    const auto leaves = leaves_of(config.structure);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        std::size_t cells = 1;
        for (std::size_t s = 0; s < leaves[i]->scope.size(); ++s) cells *= config.leaf_support[i];
        axes.push_back(all_compositions(codec.leaf_levels(i), cells));
        axis_levels.push_back(codec.leaf_levels(i));
    }
    for (const auto& sum : codec.manifest().sums) {
        axes.push_back(all_compositions(codec.weight_levels(), sum.fan_in));
        axis_levels.push_back(codec.weight_levels());
    }

    CandidateSet set;
    set.structure = config.structure;
    set.candidates.reserve(static_cast<std::size_t>(count));
    set.provenance.reserve(static_cast<std::size_t>(count));
    std::vector<std::size_t> choice(axes.size(), 0);
    CompressedMessage message;
    message.n = config.structure.scope.ambient();
    for (std::uint64_t c = 0; c < count; ++c) {
        BitWriter writer;
        std::vector<std::uint64_t> provenance;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& block = axes[a][choice[a]];
            const auto width = index_width(axis_levels[a]);
            for (std::size_t i = 0; i + 1 < block.size(); ++i) writer.write(block[i], width);
            provenance.insert(provenance.end(), block.begin(), block.end());
        }
        message.bits = writer.take();
        set.candidates.push_back(codec.decode(message));
        set.provenance.push_back(std::move(provenance));
        for (std::size_t a = axes.size(); a-- > 0;) {
            if (++choice[a] < axes[a].size()) break;
            choice[a] = 0;
        }
    }
    return set;
}

std::vector<double> empirical_pmf(const std::vector<std::size_t>& grid, std::span<const std::vector<double>> sample)
{
    std::size_t cells = 1;
    for (auto g : grid) cells *= g;
    std::vector<double> pmf(cells, 0.0);
    if (sample.empty()) return pmf;
    for (const auto& x : sample) {
        if (x.size() != grid.size()) throw DimensionError("sample point length differs from the grid");
        std::size_t cell = 0;
        bool inside = true;
        for (std::size_t d = 0; d < grid.size(); ++d) {
            const double v = x[d];
            if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(grid[d])) {
                inside = false;
                break;
            }
            cell = cell * grid[d] + static_cast<std::size_t>(v);
        }
        if (inside) pmf[cell] += 1.0;
    }
    for (auto& p : pmf) p /= static_cast<double>(sample.size());
    return pmf;
}

std::vector<std::size_t> scheffe_wins(std::span<const std::vector<double>> tables, std::span<const double> empirical)
{
    std::vector<std::size_t> wins(tables.size(), 0);
    for (std::size_t i = 0; i < tables.size(); ++i) {
        const auto& fi = tables[i];
        for (std::size_t j = i + 1; j < tables.size(); ++j) {
            const auto& fj = tables[j];
            double mass_i = 0.0;
            double mass_j = 0.0;
            double mass_emp = 0.0;
            for (std::size_t x = 0; x < fi.size(); ++x) {
                if (fi[x] > fj[x]) {
                    mass_i += fi[x];
                    mass_j += fj[x];
                    mass_emp += empirical[x];
                }
            }
            const double gap_i = std::abs(mass_i - mass_emp);
            const double gap_j = std::abs(mass_j - mass_emp);
            if (gap_i < gap_j) ++wins[i];
            else if (gap_j < gap_i) ++wins[j];
        }
    }
    return wins;
}

LearnResult select_min_distance(const CandidateSet& candidates, std::span<const std::vector<double>> sample)
{
    if (candidates.candidates.empty()) throw EmptyCandidateSet("no candidates to select from");
    const auto& first = candidates.candidates.front();
    const auto grid = first.grid_support();
    // Identical tables tie against each other and score the same against
    // everything else, so the tournament runs over distinct tables only.
    std::vector<std::vector<double>> tables;
    std::vector<std::size_t> table_of(candidates.candidates.size());
    std::map<std::vector<double>, std::size_t> seen;
    for (std::size_t c = 0; c < candidates.candidates.size(); ++c) {
        const auto& model = candidates.candidates[c];
        if (model.grid_support() != grid) throw SupportError("candidates have different joint grids");
        auto table = joint_table(model).cells;
        auto [it, inserted] = seen.emplace(std::move(table), tables.size());
        if (inserted) tables.push_back(it->first);
        table_of[c] = it->second;
    }
    const auto empirical = empirical_pmf(grid, sample);
    const auto table_wins = scheffe_wins(tables, empirical);

    LearnResult result;
    result.sample_count = sample.size();
    result.wins.resize(candidates.candidates.size());
    for (std::size_t c = 0; c < candidates.candidates.size(); ++c) result.wins[c] = table_wins[table_of[c]];
    result.chosen_index = static_cast<std::size_t>(std::max_element(result.wins.begin(), result.wins.end()) - result.wins.begin());
    result.chosen = candidates.candidates[result.chosen_index];
    return result;
}

std::uint64_t theoretical_sample_size(const SpnCodec& codec_at_sixth, double eps)
{
    const auto& b = codec_at_sixth.budget();
    const auto m0 = static_cast<std::uint64_t>(tolerant_ceil(b.m0));
    const double payload = static_cast<double>(b.bit_budget + b.point_budget);
    return m0 + static_cast<std::uint64_t>(tolerant_ceil(payload / (eps * eps)));
}

LearnResult pac_learn(const CodecConfig& base, std::span<const std::vector<double>> sample, double eps, double delta,
                      std::uint64_t cap)
{
    if (!(eps > 0.0) || !(eps <= 1.0)) throw ConfigError("eps must lie in (0, 1]");
    if (!(delta > 0.0) || !(delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    CodecConfig config = base;
    config.eps = eps / 6.0;
    config.variant = CodecVariant::strong;
    config.leaf_levels.reset();
    config.weight_levels.reset();
    const SpnCodec codec(config);
    auto candidates = enumerate_candidates(config, cap);
    auto result = select_min_distance(candidates, sample);
    result.eps_target = eps;
    result.delta_target = delta;
    result.theoretical_sample_size = theoretical_sample_size(codec, eps);
    return result;
}

} // namespace spn
