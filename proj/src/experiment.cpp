#include "spn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "spn/codec.hpp"
#include "spn/errors.hpp"
#include "spn/learner.hpp"
#include "spn/metrics.hpp"
#include "spn/model_io.hpp"

namespace spn {

namespace {

using Json = nlohmann::json;

template <typename T>
T positive_integer(const Json& doc, const char* key)
{
    if (!doc.contains(key)) throw ConfigError(std::string("experiment config: missing \"") + key + "\"");
    const auto& v = doc.at(key);
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
        throw ConfigError(std::string("experiment config: \"") + key + "\" must be a positive integer");
    return static_cast<T>(v.get<std::uint64_t>());
}

} // namespace

ExperimentConfig experiment_from_json(std::string_view text)
{
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("experiment config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("experiment config must be an object");
    ExperimentConfig config;
    if (!doc.contains("structures") || !doc["structures"].is_array() || doc["structures"].empty())
        throw ConfigError("experiment config: \"structures\" must be a non-empty list");
    for (const auto& entry : doc["structures"]) {
        if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string() || !entry.contains("model"))
            throw ConfigError("experiment config: each structure needs \"id\" and \"model\"");
        std::optional<std::uint64_t> leaf_levels;
        std::optional<std::uint64_t> weight_levels;
        if (entry.contains("levels")) {
            const auto& levels = entry["levels"];
            leaf_levels = positive_integer<std::uint64_t>(levels, "leaf");
            weight_levels = positive_integer<std::uint64_t>(levels, "weight");
        }
        auto truth = [&] {
            try {
                return model_from_json(entry["model"].dump());
            } catch (const Error& e) {
                throw ConfigError("experiment config: structure '" + entry["id"].get<std::string>() + "': " + e.what());
            }
        }();
        if (truth.family() != LeafFamily::categorical)
            throw ConfigError("experiment config: structure '" + entry["id"].get<std::string>() + "' needs categorical leaves");
        config.structures.push_back({entry["id"].get<std::string>(), std::move(truth), leaf_levels, weight_levels});
    }
    for (const char* key : {"eps_grid", "m_grid"})
        if (!doc.contains(key) || !doc[key].is_array() || doc[key].empty())
            throw ConfigError(std::string("experiment config: \"") + key + "\" must be a non-empty list");
    for (const auto& v : doc["eps_grid"]) {
        if (!v.is_number() || !(v.get<double>() > 0.0) || v.get<double>() > 1.0)
            throw ConfigError("experiment config: eps values must lie in (0, 1]");
        config.eps_grid.push_back(v.get<double>());
    }
    for (const auto& v : doc["m_grid"]) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
            throw ConfigError("experiment config: m values must be positive integers");
        config.m_grid.push_back(v.get<std::size_t>());
    }
    config.trials = positive_integer<std::size_t>(doc, "trials");
    if (!doc.contains("seed_base") || !doc["seed_base"].is_number_unsigned())
        throw ConfigError("experiment config: \"seed_base\" must be a non-negative integer");
    config.seed_base = doc["seed_base"].get<std::uint64_t>();
    config.cap = positive_integer<std::uint64_t>(doc, "cap");
    if (doc.contains("threads")) {
        if (!doc["threads"].is_number_unsigned()) throw ConfigError("experiment config: \"threads\" must be a non-negative integer");
        config.threads = doc["threads"].get<std::size_t>();
    }
    return config;
}

std::vector<ExperimentRow> run_scaling_experiment(const ExperimentConfig& config)
{
    if (config.structures.empty() || config.eps_grid.empty() || config.m_grid.empty() || config.trials == 0)
        throw ConfigError("experiment needs structures, eps values, sample sizes, and trials");

    // Candidate tables and their distance to the truth, per (structure, eps).
    // With explicit levels the candidate set does not depend on eps.
    struct Pool {
        std::vector<std::vector<double>> tables;
        std::vector<double> tv_to_truth;
        std::vector<std::size_t> grid;
    };
    std::vector<std::vector<std::shared_ptr<const Pool>>> pools(config.structures.size());
    for (std::size_t s = 0; s < config.structures.size(); ++s) {
        const auto& entry = config.structures[s];
        std::shared_ptr<const Pool> shared;
        for (double eps : config.eps_grid) {
            if (shared && entry.leaf_levels) {
                pools[s].push_back(shared);
                continue;
            }
            auto codec_config = codec_config_for(entry.truth, eps / 6.0);
            codec_config.leaf_levels = entry.leaf_levels;
            codec_config.weight_levels = entry.weight_levels;
            const auto set = enumerate_candidates(codec_config, config.cap);
            auto pool = std::make_shared<Pool>();
            pool->grid = entry.truth.grid_support();
            const auto truth_table = joint_table(entry.truth).cells;
            std::map<std::vector<double>, bool> seen;
            for (const auto& candidate : set.candidates) {
                auto table = joint_table(candidate).cells;
                if (!seen.emplace(table, true).second) continue;
                double distance = 0.0;
                for (std::size_t x = 0; x < table.size(); ++x) distance += std::abs(table[x] - truth_table[x]);
                pool->tables.push_back(std::move(table));
                pool->tv_to_truth.push_back(std::min(1.0, 0.5 * distance));
            }
            shared = pool;
            pools[s].push_back(shared);
        }
    }

    struct Job {
        std::size_t structure, m_index, trial;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < config.structures.size(); ++s)
        for (std::size_t mi = 0; mi < config.m_grid.size(); ++mi)
            for (std::size_t t = 0; t < config.trials; ++t) jobs.push_back({s, mi, t});

    // result[job][eps]
    std::vector<std::vector<double>> errors(jobs.size(), std::vector<double>(config.eps_grid.size(), 0.0));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                const auto& job = jobs[j];
                const auto& entry = config.structures[job.structure];
                const auto m = config.m_grid[job.m_index];
                const auto seed = derive_seed(config.seed_base, job.structure, m, job.trial);
                const auto draws = entry.truth.sample(seed, m);
                std::vector<std::vector<double>> points;
                points.reserve(draws.size());
                for (const auto& d : draws) points.push_back(d.point);
                const Pool* last = nullptr;
                std::size_t last_choice = 0;
                for (std::size_t e = 0; e < config.eps_grid.size(); ++e) {
                    const auto& pool = *pools[job.structure][e];
                    if (&pool != last) {
                        const auto empirical = empirical_pmf(pool.grid, points);
                        const auto wins = scheffe_wins(pool.tables, empirical);
                        last_choice = static_cast<std::size_t>(std::max_element(wins.begin(), wins.end()) - wins.begin());
                        last = &pool;
                    }
                    errors[j][e] = pool.tv_to_truth[last_choice];
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<ExperimentRow> rows;
    for (std::size_t s = 0; s < config.structures.size(); ++s) {
        const auto& entry = config.structures[s];
        const auto stats = structure_stats(entry.truth.structure());
        for (std::size_t e = 0; e < config.eps_grid.size(); ++e)
            for (std::size_t j = 0; j < jobs.size(); ++j) {
                if (jobs[j].structure != s) continue;
                ExperimentRow row;
                row.structure_id = entry.id;
                row.e = stats.e;
                row.k = stats.k;
                row.n = stats.n;
                row.depth = stats.depth;
                row.eps = config.eps_grid[e];
                row.m = config.m_grid[jobs[j].m_index];
                row.trial = jobs[j].trial;
                row.tv_error = errors[j][e];
                row.success = row.tv_error <= row.eps;
                rows.push_back(std::move(row));
            }
    }
    return rows;
}

void write_rows_csv(std::ostream& out, const std::vector<ExperimentRow>& rows)
{
    out << "structure_id,e,k,n,depth,eps,m,trial,tv_error,success\n";
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << std::setprecision(17);
    for (const auto& r : rows)
        out << r.structure_id << ',' << r.e << ',' << r.k << ',' << r.n << ',' << r.depth << ',' << r.eps << ',' << r.m << ','
            << r.trial << ',' << r.tv_error << ',' << (r.success ? 1 : 0) << '\n';
    out.flags(flags);
    out.precision(precision);
}

std::vector<ExperimentSummary> summarize(const std::vector<ExperimentRow>& rows)
{
    std::vector<ExperimentSummary> out;
    std::map<std::tuple<std::string, double, std::size_t>, std::vector<const ExperimentRow*>> groups;
    std::vector<std::tuple<std::string, double, std::size_t>> order;
    for (const auto& r : rows) {
        auto key = std::make_tuple(r.structure_id, r.eps, r.m);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(&r);
    }
    for (const auto& key : order) {
        const auto& group = groups[key];
        std::vector<double> errors;
        std::size_t successes = 0;
        for (const auto* r : group) {
            errors.push_back(r->tv_error);
            successes += r->success ? 1 : 0;
        }
        std::sort(errors.begin(), errors.end());
        const auto mid = errors.size() / 2;
        const double median = errors.size() % 2 ? errors[mid] : 0.5 * (errors[mid - 1] + errors[mid]);
        out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), median,
                       static_cast<double>(successes) / static_cast<double>(group.size())});
    }
    return out;
}

LogLogFit fit_log_log(const std::vector<ExperimentSummary>& points)
{
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : points)
        if (p.median_tv > 0.0) xy.emplace_back(std::log(static_cast<double>(p.m)), std::log(p.median_tv));
    if (xy.size() < 2) throw NumericalError("log-log fit needs two points with positive error");
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : xy) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(xy.size());
    my /= static_cast<double>(xy.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : xy) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) throw NumericalError("log-log fit needs at least two distinct sample sizes");
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

double LogLogFit::required_m(double target) const
{
    if (!(target > 0.0)) throw NumericalError("target error must be positive");
    if (slope == 0.0) throw NumericalError("flat fit has no required sample size");
    return std::exp((std::log(target) - intercept) / slope);
}

} // namespace spn
