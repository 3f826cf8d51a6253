#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "json.hpp"
#include "spn/cli.hpp"
#include "spn/metrics.hpp"
#include "spn/model_io.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using spn::cli::run;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args)
{
    std::ostringstream out, err;
    Outcome r;
    r.code = run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class ScratchDir {
public:
    ScratchDir()
    {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("spn_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~ScratchDir() { fs::remove_all(path_); }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void put(const std::string& path, const std::string& text)
{
    std::ofstream(path, std::ios::binary) << text;
}

const std::string kMixture = R"json({"signature":"((0.4(a,{1})+0.6(b,{1})),{1})","n":1,
  "leaves":{"a":{"type":"categorical","params":{"probs":[0.75,0.25]}},
            "b":{"type":"categorical","params":{"probs":[0.25,0.75]}}}})json";

} // namespace

TEST_CASE("validate prints nested mixture statistics")
{
    auto r = invoke({"validate", "--sig", testing::kNestedMixture, "--n", "2"});
    CHECK(r.code == 0);
    CHECK(r.out == "{\"e\":5,\"k\":4,\"n\":2,\"depth\":3}\n");

    ScratchDir dir;
    put(dir / "nested.sig", testing::kNestedMixture + "\n");
    CHECK(invoke({"validate", "--sig", dir / "nested.sig", "--n", "2"}).out == r.out);

    auto bad = invoke({"validate", "--sig", "((a,{1})x(b,{1}))", "--n", "2"});
    CHECK(bad.code == 1);
    CHECK(bad.out.empty());
    CHECK(bad.err.find("overlap") != std::string::npos);
}

TEST_CASE("tv of a model with itself")
{
    ScratchDir dir;
    put(dir / "m.json", kMixture);
    auto r = invoke({"tv", "--exact", "--a", dir / "m.json", "--b", dir / "m.json"});
    CHECK(r.code == 0);
    auto doc = nlohmann::ordered_json::parse(r.out);
    CHECK(doc.begin().key() == "estimate");
    CHECK(doc["estimate"].get<double>() == 0.0);
    CHECK(r.out.rfind("{\"estimate\":0.0", 0) == 0);

    auto mc = invoke({"tv", "--mc", "--samples", "1000", "--seed", "3", "--a", dir / "m.json", "--b", dir / "m.json"});
    CHECK(mc.code == 0);
    CHECK(nlohmann::json::parse(mc.out).contains("std_error"));
}

TEST_CASE("compress, decompress and tv pipeline")
{
    ScratchDir dir;
    const double eps = 0.1;
    put(dir / "nested.json", spn::model_to_json(testing::nested_mixture_model({{0.1, 0.9}, {0.2, 0.8}, {0.3, 0.7}, {0.4, 0.6}, {0.5, 0.5}})));
    auto c = invoke({"compress", "--model", dir / "nested.json", "--eps", "0.1", "--seed", "17", "--out", dir / "msg.spnc"});
    REQUIRE(c.code == 0);
    auto d = invoke({"decompress", "--structure", testing::kNestedMixture, "--in", dir / "msg.spnc", "--out", dir / "dec.json",
                     "--eps", "0.1", "--support", "2"});
    REQUIRE(d.code == 0);
    auto t = invoke({"tv", "--exact", "--a", dir / "nested.json", "--b", dir / "dec.json"});
    REQUIRE(t.code == 0);
    CHECK(nlohmann::json::parse(t.out)["estimate"].get<double>() <= eps);

    // Gaussian leaves through the weak variant.
    spn::Rng rng(5);
    const auto gauss = testing::random_gaussian_model(rng, spn::parse_signature(testing::kNestedMixture, 2));
    put(dir / "g.json", spn::model_to_json(gauss));
    REQUIRE(invoke({"compress", "--model", dir / "g.json", "--eps", "0.5", "--seed", "1", "--weak", "--out", dir / "g.spnc"}).code == 0);
    REQUIRE(invoke({"decompress", "--structure", testing::kNestedMixture, "--in", dir / "g.spnc", "--out", dir / "gd.json", "--eps", "0.5",
                    "--leaf-type", "gaussian", "--weak"})
                .code == 0);
    CHECK(spn::load_model(dir / "gd.json").family() == spn::LeafFamily::gaussian);
}

TEST_CASE("repeated runs are byte identical")
{
    ScratchDir dir;
    put(dir / "m.json", kMixture);
    for (const char* name : {"a", "b"}) {
        const std::string tag = name;
        REQUIRE(invoke({"compress", "--model", dir / "m.json", "--eps", "0.2", "--seed", "9", "--out", dir / (tag + ".spnc")}).code == 0);
        REQUIRE(invoke({"sample", "--model", dir / "m.json", "--count", "50", "--seed", "9", "--out", dir / (tag + ".csv")}).code == 0);
        REQUIRE(invoke({"learn", "--structure", "((0.5(a,{1})+0.5(b,{1})),{1})", "--n", "1", "--support", "2", "--data", dir / "a.csv",
                        "--eps", "0.6", "--out", dir / (tag + ".json")})
                    .code == 0);
    }
    CHECK(slurp(dir / "a.spnc") == slurp(dir / "b.spnc"));
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(invoke({"sample", "--model", dir / "m.json", "--count", "5", "--seed", "9"}).out ==
          invoke({"sample", "--model", dir / "m.json", "--count", "5", "--seed", "9"}).out);
}

TEST_CASE("seed falls back to the environment")
{
    ScratchDir dir;
    put(dir / "m.json", kMixture);
    auto explicit_seed = invoke({"sample", "--model", dir / "m.json", "--count", "20", "--seed", "77"});
    ::setenv("SPN_SEED", "77", 1);
    auto from_env = invoke({"sample", "--model", dir / "m.json", "--count", "20"});
    ::setenv("SPN_SEED", "seventy", 1);
    auto bad = invoke({"sample", "--model", dir / "m.json", "--count", "20"});
    ::unsetenv("SPN_SEED");
    CHECK(explicit_seed.out == from_env.out);
    CHECK(bad.code == 2);
    CHECK(bad.out.empty());
}

TEST_CASE("error paths exit non-zero with no data")
{
    ScratchDir dir;
    put(dir / "m.json", kMixture);
    put(dir / "broken.spnc", "SPNX");
    const std::vector<std::pair<std::vector<std::string>, int>> cases = {
        {{}, 2},
        {{"frobnicate"}, 2},
        {{"validate", "--n", "2"}, 2},
        {{"validate", "--sig", "(a,{1})", "--n", "two"}, 2},
        {{"tv", "--a", dir / "m.json", "--b", dir / "m.json"}, 2},
        {{"tv", "--exact", "--mc", "--a", dir / "m.json", "--b", dir / "m.json"}, 2},
        {{"compress", "--model", dir / "m.json", "--eps", "1.5", "--out", dir / "x.spnc"}, 2},
        {{"tv", "--exact", "--a", dir / "missing.json", "--b", dir / "m.json"}, 1},
        {{"decompress", "--structure", "(a,{1})", "--in", dir / "broken.spnc", "--out", dir / "x.json", "--eps", "0.1", "--support", "2"}, 1},
        {{"density", "--model", dir / "m.json", "--point", "0,0"}, 1},
        {{"experiment", "scaling", "--config", dir / "m.json", "--out", dir / "x.csv"}, 1},
    };
    for (const auto& [args, code] : cases) {
        auto r = invoke(args);
        CAPTURE(r.err);
        CHECK(r.code == code);
        CHECK(r.out.empty());
        CHECK(!r.err.empty());
    }
    CHECK(!fs::exists(dir / "x.json"));
    CHECK(!fs::exists(dir / "x.csv"));

    auto usage = invoke({"compress", "--model", dir / "m.json", "--out", dir / "x.spnc"});
    CHECK(usage.err.find("--eps") != std::string::npos);
    CHECK(usage.err.find("Usage: spn compress") != std::string::npos);
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("stats, density, similarity and experiment")
{
    ScratchDir dir;
    put(dir / "m.json", kMixture);
    auto stats = nlohmann::json::parse(invoke({"stats", "--model", dir / "m.json", "--eps", "0.5"}).out);
    CHECK(stats["leaves"][1]["path_weight"].get<double>() == doctest::Approx(0.6));
    CHECK(stats["negligible"].empty());

    auto density = nlohmann::json::parse(invoke({"density", "--model", dir / "m.json", "--point", "0", "--point", "3"}).out);
    CHECK(density["density"][0].get<double>() == doctest::Approx(0.4 * 0.75 + 0.6 * 0.25));
    CHECK(density["log_density"][1].is_null());

    auto sim = nlohmann::json::parse(invoke({"similarity", "--a", dir / "m.json", "--b", dir / "m.json"}).out);
    CHECK(sim["same_structure"].get<bool>());
    CHECK(sim["tv_bound"].get<double>() == 0.0);

    put(dir / "cfg.json", R"json({"structures":[{"id":"mix","model":)json" + kMixture +
                              R"json(,"levels":{"leaf":4,"weight":4}}],"eps_grid":[0.2],"m_grid":[20,40],"trials":3,"seed_base":1,"cap":10000})json");
    auto e = invoke({"experiment", "scaling", "--config", dir / "cfg.json", "--out", dir / "rows.csv", "--threads", "2"});
    CHECK(e.code == 0);
    std::istringstream rows(slurp(dir / "rows.csv"));
    std::string line;
    int count = 0;
    while (std::getline(rows, line)) ++count;
    CHECK(count == 1 + 2 * 3);
}
