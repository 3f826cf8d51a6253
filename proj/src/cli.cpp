#include "spn/cli.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spn/codec.hpp"
#include "spn/errors.hpp"
#include "spn/experiment.hpp"
#include "spn/learner.hpp"
#include "spn/message.hpp"
#include "spn/metrics.hpp"
#include "spn/model_io.hpp"

namespace spn::cli {

namespace {

using json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush())
        throw InputError("cannot write " + path.string());
}

// A signature argument is either a path to a file holding the signature or
// the signature itself.
std::string signature_argument(const std::string& value)
{
    std::error_code ec;
    if (std::filesystem::is_regular_file(value, ec))
        return read_text(value);
    return value;
}

std::uint64_t default_seed()
{
    const char* env = std::getenv("SPN_SEED");
    if (env == nullptr || *env == '\0')
        return 0;
    std::string_view text(env);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw UsageError("SPN_SEED must be an unsigned 64-bit integer, got '" + std::string(text) + "'");
    return value;
}

std::string number_text(double x)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::vector<double> parse_row(std::string_view line, std::size_t line_number)
{
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t end = line.find(',', start);
        if (end == std::string_view::npos)
            end = line.size();
        std::string_view field = line.substr(start, end - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
            field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
            field.remove_suffix(1);
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
            throw InputError("line " + std::to_string(line_number) + ": '" + std::string(field) + "' is not a number");
        row.push_back(value);
        start = end + 1;
    }
    return row;
}

// Reads the first n columns of a CSV file. A first line starting with a
// letter is a header; a trailing "leaves" column from `sample --labels` is
// ignored.
std::vector<std::vector<double>> read_points(const std::filesystem::path& path, int n)
{
    std::istringstream in(read_text(path));
    std::vector<std::vector<double>> points;
    std::string line;
    std::size_t line_number = 0;
    bool labeled = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line == "\r")
            continue;
        if (line_number == 1 && std::isalpha(static_cast<unsigned char>(line.front()))) {
            labeled = line.find("leaves") != std::string::npos;
            continue;
        }
        std::string_view view(line);
        if (labeled)
            view = view.substr(0, view.rfind(','));
        auto row = parse_row(view, line_number);
        if (row.size() < static_cast<std::size_t>(n))
            throw DimensionError("line " + std::to_string(line_number) + " has " + std::to_string(row.size()) +
                                 " values, expected " + std::to_string(n));
        row.resize(static_cast<std::size_t>(n));
        points.push_back(std::move(row));
    }
    return points;
}

std::vector<double> parse_point(const std::string& text)
{
    return parse_row(text, 1);
}

json stats_json(const SignatureNode& structure)
{
    const auto stats = structure_stats(structure);
    return json{{"e", stats.e}, {"k", stats.k}, {"n", stats.n}, {"depth", stats.depth}};
}

std::string leaf_family_name(LeafFamily family)
{
    return family == LeafFamily::categorical ? "categorical" : "gaussian";
}

CodecVariant variant_of(bool weak)
{
    return weak ? CodecVariant::weak : CodecVariant::strong;
}

std::vector<std::size_t> leaf_supports(const std::string& text, std::size_t leaves)
{
    std::vector<std::size_t> out;
    for (double v : parse_row(text, 1)) {
        if (!(v >= 1.0) || v != std::floor(v))
            throw UsageError("--support expects positive integers, got '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.size() == 1)
        out.assign(leaves, out.front());
    if (out.size() != leaves)
        throw ConfigError("--support lists " + std::to_string(out.size()) + " values for " + std::to_string(leaves) +
                          " leaves");
    return out;
}

struct Options {
    std::string sig;
    int n = 0;
    std::string model;
    std::string a;
    std::string b;
    std::string in;
    std::string out;
    std::string data;
    std::string config;
    std::string support;
    std::string leaf_type = "categorical";
    std::vector<std::string> points_inline;
    std::string points_file;
    std::size_t count = 0;
    std::optional<std::size_t> samples;
    std::size_t mc_samples = 100'000;
    std::optional<double> eps;
    double delta = 0.1;
    std::uint64_t cap = 1'000'000;
    std::uint64_t seed = 0;
    std::optional<std::size_t> threads;
    bool exact = false;
    bool mc = false;
    bool weak = false;
    bool labels = false;
};

void cmd_validate(const Options& o, std::ostream& out)
{
    out << stats_json(parse_signature(signature_argument(o.sig), o.n)).dump() << '\n';
}

void cmd_stats(const Options& o, std::ostream& out)
{
    const SpnModel model = load_model(o.model);
    const auto stats = structure_stats(model.structure());
    json doc = stats_json(model.structure());
    doc["sum_nodes"] = stats.sum_nodes;
    doc["family"] = leaf_family_name(model.family());
    json leaves = json::array();
    for (std::size_t i = 0; i < model.leaf_count(); ++i)
        leaves.push_back({{"symbol", model.leaf_order()[i]},
                          {"scope", model.leaf_scope(i).dims()},
                          {"path_weight", model.path_weight(i)}});
    doc["leaves"] = std::move(leaves);
    if (o.eps) {
        json negligible = json::array();
        for (std::size_t i : model.negligible_leaves(*o.eps))
            negligible.push_back(model.leaf_order()[i]);
        doc["negligible"] = std::move(negligible);
    }
    out << doc.dump() << '\n';
}

void cmd_sample(const Options& o, std::ostream& out)
{
    const SpnModel model = load_model(o.model);
    std::ostringstream csv;
    for (int d = 1; d <= model.dimension(); ++d)
        csv << (d > 1 ? "," : "") << 'x' << d;
    if (o.labels)
        csv << ",leaves";
    csv << '\n';
    for (const auto& draw : model.sample(o.seed, o.count)) {
        for (std::size_t d = 0; d < draw.point.size(); ++d)
            csv << (d ? "," : "") << number_text(draw.point[d]);
        if (o.labels) {
            csv << ',';
            for (std::size_t j = 0; j < draw.leaf_path.size(); ++j)
                csv << (j ? ";" : "") << draw.leaf_path[j];
        }
        csv << '\n';
    }
    if (o.out.empty())
        out << csv.str();
    else
        write_text(o.out, csv.str());
}

void cmd_density(const Options& o, std::ostream& out)
{
    const SpnModel model = load_model(o.model);
    std::vector<std::vector<double>> points;
    for (const auto& p : o.points_inline)
        points.push_back(parse_point(p));
    if (!o.points_file.empty()) {
        auto more = read_points(o.points_file, model.dimension());
        points.insert(points.end(), more.begin(), more.end());
    }
    if (points.empty())
        throw UsageError("density needs --point or --points");
    json density = json::array();
    json log_density = json::array();
    for (const auto& p : points) {
        const double lp = model.log_density(p);
        density.push_back(std::exp(lp));
        // JSON has no infinity; an impossible point reports null.
        log_density.push_back(std::isfinite(lp) ? json(lp) : json(nullptr));
    }
    out << json{{"density", density}, {"log_density", log_density}}.dump() << '\n';
}

void cmd_tv(const Options& o, std::ostream& out)
{
    if (o.exact == o.mc)
        throw UsageError("tv needs exactly one of --exact or --mc");
    const SpnModel a = load_model(o.a);
    const SpnModel b = load_model(o.b);
    json doc;
    if (o.exact) {
        doc["estimate"] = tv_exact(a, b);
        doc["method"] = "exact";
    } else {
        const auto r = tv_monte_carlo(a, b, o.mc_samples, o.seed);
        doc["estimate"] = r.estimate;
        doc["std_error"] = r.std_error;
        doc["method"] = "monte_carlo";
    }
    out << doc.dump() << '\n';
}

void cmd_similarity(const Options& o, std::ostream& out)
{
    const SpnModel a = load_model(o.a);
    const SpnModel b = load_model(o.b);
    const auto report = similarity(a, b, LeafTvOptions{o.mc_samples, o.seed});
    json doc{{"same_structure", report.is_same_structure}};
    if (report.is_same_structure) {
        const auto stats = structure_stats(a.structure());
        doc["eps"] = report.eps;
        doc["alpha"] = report.alpha;
        doc["leaf_eps"] = report.leaf_eps;
        doc["weight_alpha"] = report.weight_alpha;
        doc["tv_bound"] = tv_bound_similar(report, stats.n, stats.k);
    }
    out << doc.dump() << '\n';
}

void cmd_compress(const Options& o, std::ostream& out)
{
    const SpnModel model = load_model(o.model);
    const SpnCodec codec(codec_config_for(model, *o.eps, variant_of(o.weak)));
    const std::size_t count = o.samples ? *o.samples : static_cast<std::size_t>(tolerant_ceil(codec.budget().m0));
    const auto draws = model.sample(o.seed, count);
    const CompressedMessage message = codec.encode(model, draws, o.seed);
    write_message(message, o.out);
    const auto& budget = codec.budget();
    out << json{{"samples", count},
                {"points", message.points.size()},
                {"bits", message.bits.size()},
                {"point_budget", budget.point_budget},
                {"bit_budget", budget.bit_budget}}
               .dump()
        << '\n';
}

void cmd_decompress(const Options& o, std::ostream&)
{
    const CompressedMessage message = read_message(o.in);
    CodecConfig config;
    config.structure = parse_signature(signature_argument(o.sig), message.n);
    config.eps = *o.eps;
    config.variant = variant_of(o.weak);
    const std::size_t leaves = structure_stats(config.structure).e;
    if (o.leaf_type == "gaussian") {
        config.family = LeafFamily::gaussian;
        config.leaf_support.assign(leaves, 0);
    } else {
        if (o.support.empty())
            throw UsageError("--support is required for categorical leaves");
        config.leaf_support = leaf_supports(o.support, leaves);
    }
    const SpnModel decoded = SpnCodec(std::move(config)).decode(message);
    save_model(decoded, o.out);
}

void cmd_learn(const Options& o, std::ostream& out)
{
    CodecConfig base;
    base.structure = parse_signature(signature_argument(o.sig), o.n);
    base.eps = *o.eps;
    base.leaf_support = leaf_supports(o.support, structure_stats(base.structure).e);
    const auto sample = read_points(o.data, o.n);
    const LearnResult result = pac_learn(base, sample, *o.eps, o.delta, o.cap);
    save_model(*result.chosen, o.out);
    out << json{{"chosen_index", result.chosen_index},
                {"candidates", result.wins.size()},
                {"wins", result.wins[result.chosen_index]},
                {"sample_count", result.sample_count},
                {"theoretical_sample_size", result.theoretical_sample_size},
                {"eps", result.eps_target},
                {"delta", result.delta_target}}
               .dump()
        << '\n';
}

void cmd_scaling(const Options& o, std::ostream&)
{
    ExperimentConfig config = experiment_from_json(read_text(o.config));
    if (o.threads)
        config.threads = *o.threads;
    const auto rows = run_scaling_experiment(config);
    std::ostringstream csv;
    write_rows_csv(csv, rows);
    write_text(o.out, csv.str());
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Options o;
    try {
        o.seed = default_seed();
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    CLI::App app{"Sum-product network toolkit", "spn"};
    app.require_subcommand(1);
    const auto eps_check = CLI::PositiveNumber & CLI::Range(0.0, 1.0);

    auto* validate = app.add_subcommand("validate", "Parse a signature and print its size statistics");
    validate->add_option("--sig", o.sig, "Signature text or a file holding it")->required();
    validate->add_option("--n", o.n, "Ambient dimension")->required()->check(CLI::PositiveNumber);

    auto* stats = app.add_subcommand("stats", "Structure statistics and path weights of a model");
    stats->add_option("--model", o.model, "Model JSON")->required();
    stats->add_option("--eps", o.eps, "Also list leaves negligible at this accuracy")->check(eps_check);

    auto* sample = app.add_subcommand("sample", "Draw samples as CSV");
    sample->add_option("--model", o.model, "Model JSON")->required();
    sample->add_option("--count", o.count, "Number of samples")->required();
    sample->add_option("--seed", o.seed, "Random seed (default SPN_SEED or 0)");
    sample->add_option("--out", o.out, "Output CSV (default standard output)");
    sample->add_flag("--labels", o.labels, "Append the generating leaves of each sample");

    auto* density = app.add_subcommand("density", "Evaluate the density at points");
    density->add_option("--model", o.model, "Model JSON")->required();
    density->add_option("--point", o.points_inline, "Comma-separated point; repeatable");
    density->add_option("--points", o.points_file, "CSV of points");

    auto* tv = app.add_subcommand("tv", "Total variation distance between two models");
    tv->add_option("--a", o.a, "First model JSON")->required();
    tv->add_option("--b", o.b, "Second model JSON")->required();
    auto* exact = tv->add_flag("--exact", o.exact, "Exact joint enumeration");
    auto* mc = tv->add_flag("--mc", o.mc, "Monte Carlo estimate");
    exact->excludes(mc);
    tv->add_option("--samples", o.mc_samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
    tv->add_option("--seed", o.seed, "Random seed (default SPN_SEED or 0)");

    auto* similar = app.add_subcommand("similarity", "Similarity certificate of two models");
    similar->add_option("--a", o.a, "First model JSON")->required();
    similar->add_option("--b", o.b, "Second model JSON")->required();
    similar->add_option("--samples", o.mc_samples, "Monte Carlo samples for multivariate Gaussian leaves")
        ->check(CLI::PositiveNumber);
    similar->add_option("--seed", o.seed, "Random seed (default SPN_SEED or 0)");

    auto* compress = app.add_subcommand("compress", "Encode a model from its own samples");
    compress->add_option("--model", o.model, "Model JSON")->required();
    compress->add_option("--eps", o.eps, "Target accuracy")->required()->check(eps_check);
    compress->add_option("--seed", o.seed, "Random seed (default SPN_SEED or 0)");
    compress->add_option("--out", o.out, "Output message file")->required();
    compress->add_option("--samples", o.samples, "Sample count (default the encoder's requirement)");
    compress->add_flag("--weak", o.weak, "Use the variant without negligible leaves");

    auto* decompress = app.add_subcommand("decompress", "Decode a message into a model");
    decompress->add_option("--structure", o.sig, "Signature text or a file holding it")->required();
    decompress->add_option("--in", o.in, "Message file")->required();
    decompress->add_option("--out", o.out, "Output model JSON")->required();
    decompress->add_option("--eps", o.eps, "Accuracy the message was encoded at")->required()->check(eps_check);
    decompress->add_option("--leaf-type", o.leaf_type, "Leaf family")
        ->check(CLI::IsMember({"categorical", "gaussian"}));
    decompress->add_option("--support", o.support, "Per-dimension leaf support, one value or one per leaf");
    decompress->add_flag("--weak", o.weak, "Message uses the variant without negligible leaves");

    auto* learn = app.add_subcommand("learn", "Learn a categorical model by tournament over the codec grid");
    learn->add_option("--structure", o.sig, "Signature text or a file holding it")->required();
    learn->add_option("--n", o.n, "Ambient dimension")->required()->check(CLI::PositiveNumber);
    learn->add_option("--support", o.support, "Per-dimension leaf support, one value or one per leaf")->required();
    learn->add_option("--data", o.data, "CSV of samples")->required();
    learn->add_option("--eps", o.eps, "Target accuracy")->required()->check(eps_check);
    learn->add_option("--delta", o.delta, "Failure probability")->check(CLI::Range(0.0, 1.0));
    learn->add_option("--cap", o.cap, "Maximum candidate count");
    learn->add_option("--out", o.out, "Output model JSON")->required();

    auto* experiment = app.add_subcommand("experiment", "Batch experiments");
    experiment->require_subcommand(1);
    auto* scaling = experiment->add_subcommand("scaling", "Sample-size scaling of the learner");
    scaling->add_option("--config", o.config, "Experiment JSON")->required();
    scaling->add_option("--out", o.out, "Output CSV")->required();
    scaling->add_option("--threads", o.threads, "Worker threads (0 for all cores)");

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    std::ostringstream data;
    try {
        if (*validate)
            cmd_validate(o, data);
        else if (*stats)
            cmd_stats(o, data);
        else if (*sample)
            cmd_sample(o, data);
        else if (*density)
            cmd_density(o, data);
        else if (*tv)
            cmd_tv(o, data);
        else if (*similar)
            cmd_similarity(o, data);
        else if (*compress)
            cmd_compress(o, data);
        else if (*decompress)
            cmd_decompress(o, data);
        else if (*learn)
            cmd_learn(o, data);
        else if (*scaling)
            cmd_scaling(o, data);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomainError;
    }
    out << data.str();
    return kExitOk;
}

} // namespace spn::cli
