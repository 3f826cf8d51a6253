#include "spn/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spn/errors.hpp"

namespace spn {

namespace {

using Json = nlohmann::ordered_json;

const Json& require(const Json& object, const char* key, const std::string& where)
{
    if (!object.is_object() || !object.contains(key))
        throw ModelError(where + ": missing field \"" + key + "\"");
    return object.at(key);
}

std::vector<double> number_list(const Json& value, const std::string& where)
{
    if (!value.is_array()) throw ModelError(where + ": expected a list of numbers");
    std::vector<double> out;
    out.reserve(value.size());
    for (const auto& v : value) {
        if (!v.is_number()) throw ModelError(where + ": expected a list of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

LeafDistribution leaf_from_json(const Json& doc, const std::string& symbol, std::size_t scope_size)
{
    const std::string where = "leaf '" + symbol + "'";
    const auto& type = require(doc, "type", where);
    const auto& params = require(doc, "params", where);
    if (!type.is_string()) throw ModelError(where + ": \"type\" must be a string");
    const auto kind = type.get<std::string>();
    if (kind == "categorical") {
        auto probs = number_list(require(params, "probs", where), where + " probs");
        auto leaf = make_categorical(std::move(probs), scope_size);
        if (params.contains("support")) {
            const auto& declared = params.at("support");
            if (!declared.is_number_unsigned() || declared.get<std::size_t>() != leaf.support)
                throw ModelError(where + ": declared support does not match the pmf length");
        }
        return leaf;
    }
    if (kind == "gaussian") {
        auto mean = number_list(require(params, "mean", where), where + " mean");
        auto cov = number_list(require(params, "covariance", where), where + " covariance");
        const auto d = static_cast<Eigen::Index>(mean.size());
        if (static_cast<Eigen::Index>(cov.size()) != d * d)
            throw ModelError(where + ": covariance needs " + std::to_string(d * d) + " entries");
        Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
        Eigen::MatrixXd sigma(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) sigma(i, j) = cov[static_cast<std::size_t>(i * d + j)];
        return GaussianLeaf(std::move(mu), std::move(sigma));
    }
    throw ModelError(where + ": unknown leaf type \"" + kind + "\"");
}

Json leaf_to_json(const LeafDistribution& leaf)
{
    Json out;
    if (const auto* c = std::get_if<CategoricalLeaf>(&leaf)) {
        out["type"] = "categorical";
        out["params"]["probs"] = c->probs;
        return out;
    }
    const auto& g = std::get<GaussianLeaf>(leaf);
    out["type"] = "gaussian";
    const auto d = g.mean().size();
    std::vector<double> mean(g.mean().data(), g.mean().data() + d);
    std::vector<double> cov;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) cov.push_back(g.covariance()(i, j));
    out["params"]["mean"] = mean;
    out["params"]["covariance"] = cov;
    return out;
}

} // namespace

SpnModel model_from_json(std::string_view text)
{
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ModelError(std::string("model document is not valid JSON: ") + e.what());
    }
    const auto& sig = require(doc, "signature", "model");
    const auto& n = require(doc, "n", "model");
    const auto& leaves = require(doc, "leaves", "model");
    if (!sig.is_string()) throw ModelError("model: \"signature\" must be a string");
    if (!n.is_number_integer() || n.get<long long>() < 1) throw ModelError("model: \"n\" must be a positive integer");
    if (!leaves.is_object()) throw ModelError("model: \"leaves\" must be an object");

    auto structure = parse_signature(sig.get<std::string>(), n.get<int>());
    std::map<std::string, std::size_t> scope_sizes;
    for (const auto* leaf : leaves_of(structure)) scope_sizes[leaf->symbol] = leaf->scope.size();

    std::map<std::string, LeafDistribution> bindings;
    for (const auto& [symbol, body] : leaves.items()) {
        auto it = scope_sizes.find(symbol);
        if (it == scope_sizes.end()) throw ModelError("binding '" + symbol + "' does not name a leaf");
        bindings.emplace(symbol, leaf_from_json(body, symbol, it->second));
    }
    return SpnModel(std::move(structure), std::move(bindings));
}

std::string model_to_json(const SpnModel& model)
{
    Json doc;
    doc["signature"] = render_signature(model.structure());
    doc["n"] = model.dimension();
    doc["leaves"] = Json::object();
    for (std::size_t i = 0; i < model.leaf_count(); ++i)
        doc["leaves"][model.leaf_order()[i]] = leaf_to_json(model.leaf(i));
    return doc.dump(2) + "\n";
}

SpnModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open model file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return model_from_json(buffer.str());
}

void save_model(const SpnModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError("cannot write model file " + path.string());
    out << model_to_json(model);
    if (!out) throw ModelError("failed writing model file " + path.string());
}

} // namespace spn
