#include "doctest.h"

#include "spn/errors.hpp"
#include "spn/signature.hpp"
#include "support.hpp"

using namespace spn;

TEST_CASE("nested mixture signature parses with expected counts")
{
    auto root = parse_signature(testing::kNestedMixture, 2);
    CHECK(root.is_sum());
    CHECK(root.weights == std::vector<double>{0.7, 0.3});
    auto stats = structure_stats(root);
    CHECK(stats.e == 5);
    CHECK(stats.k == 4);
    CHECK(stats.n == 2);
    CHECK(stats.depth == 3);
    CHECK(stats.sum_nodes == 2);
}

TEST_CASE("single leaf signature")
{
    auto leaf = parse_signature("(f1,{1})", 1);
    CHECK(leaf.is_leaf());
    CHECK(render_signature(leaf) == "(f1,{1})");
    auto stats = structure_stats(leaf);
    CHECK(stats.e == 1);
    CHECK(stats.k == 0);
    CHECK(stats.depth == 0);
}

TEST_CASE("parse errors are classified")
{
    CHECK_THROWS_AS(parse_signature("((0.5(f1,{1})+0.5(f2,{2})),{1})", 2), ScopeError);
    CHECK_THROWS_AS(parse_signature("((f1,{1})x(f2,{1}))", 2), ScopeError);
    CHECK_THROWS_AS(parse_signature("(((f1,{1})x(f2,{2})),{1})", 2), ScopeError);
    CHECK_THROWS_AS(parse_signature("((0.5(f1,{1})+0.6(f2,{1})),{1})", 1), WeightError);
    CHECK_THROWS_AS(parse_signature("((1.5(f1,{1})+-0.5(f2,{1})),{1})", 1), WeightError);
    CHECK_THROWS_AS(parse_signature("(f1,{3})", 2), ScopeError);
    CHECK_THROWS_AS(parse_signature("(f1,{1,1})", 2), ScopeError);
    CHECK_THROWS_AS(parse_signature("(f1,{})", 2), ScopeError);
    CHECK_THROWS_AS(parse_signature("(f1,{1}", 1), SyntaxError);
    CHECK_THROWS_AS(parse_signature("(f1,{1}))", 1), SyntaxError);
    CHECK_THROWS_AS(parse_signature("((1.0(f1,{1})),{1})", 1), SyntaxError);
    CHECK_THROWS_AS(parse_signature("", 1), SyntaxError);
    CHECK_THROWS_AS(parse_signature("f1", 1), SyntaxError);
}

TEST_CASE("whitespace and product spelling")
{
    auto a = parse_signature(" ( (f1 , {1}) x (f2,{ 2 }) ) ", 2);
    auto b = parse_signature("((f1,{1})\xC3\x97(f2,{2}))", 2);
    CHECK(a == b);
    CHECK(render_signature(a) == "(((f1,{1})x(f2,{2})),{1,2})");
}

TEST_CASE("render is canonical and round-trips")
{
    auto a = parse_signature("((0.5(f1,{1})+0.5(f2,{1})),{1})", 1);
    auto b = parse_signature("((0.50(f1,{1})+0.500(f2,{1})),{1})", 1);
    CHECK(render_signature(a) == render_signature(b));

    auto nested = parse_signature(testing::kNestedMixture, 2);
    auto again = parse_signature(render_signature(nested), 2);
    CHECK(nested == again);
    CHECK(render_signature(again) == render_signature(nested));
}

TEST_CASE("same_structure ignores weights and symbols but not shape")
{
    auto nested = parse_signature(testing::kNestedMixture, 2);
    auto reweighted = parse_signature(
        "((0.5(((0.9(g1,{1})+0.1(g2,{1})))x(g3,{2}))+0.5((g4,{1})x(g5,{2}))),{1,2})", 2);
    CHECK(same_structure(nested, nested));
    CHECK(same_structure(nested, reweighted));
    auto swapped = parse_signature(
        "((0.3((f4,{1})x(f5,{2}))+0.7(((0.4(f1,{1})+0.6(f2,{1})))x(f3,{2}))),{1,2})", 2);
    CHECK_FALSE(same_structure(nested, swapped));
    auto scopes_flipped = parse_signature(
        "((0.7(((0.4(f1,{2})+0.6(f2,{2})))x(f3,{1}))+0.3((f4,{1})x(f5,{2}))),{1,2})", 2);
    CHECK_FALSE(same_structure(nested, scopes_flipped));
}

TEST_CASE("balanced sum of products over four dims")
{
    auto root = parse_signature(
        "((0.5((a1,{1})x(a2,{2})x(a3,{3})x(a4,{4}))+0.5((b1,{1})x(b2,{2})x(b3,{3})x(b4,{4}))),{1,2,3,4})", 4);
    auto stats = structure_stats(root);
    CHECK(stats.e == 8);
    CHECK(stats.k == 2);
    CHECK(stats.depth == 2);
}

TEST_CASE("construction rejects degenerate nodes")
{
    CHECK_THROWS_AS(make_product({make_leaf("a", Scope({1}, 1))}), StructureError);
    CHECK_THROWS_AS(make_sum({1.0}, {make_leaf("a", Scope({1}, 1))}), StructureError);
    CHECK_THROWS_AS(Scope({}, 2), ScopeError);
    CHECK_THROWS_AS(Scope({0}, 2), ScopeError);
}

TEST_CASE("zero weights are legal simplex members")
{
    auto root = parse_signature("((0(f1,{1})+1(f2,{1})),{1})", 1);
    CHECK(root.weights == std::vector<double>{0.0, 1.0});
}

TEST_CASE("random signatures round-trip and satisfy the rules")
{
    Rng rng(20240611);
    for (int trial = 0; trial < 1000; ++trial) {
        testing::ShapeLimits limits;
        limits.n = 1 + static_cast<int>(rng.below(8));
        limits.max_depth = 1 + static_cast<int>(rng.below(6));
        limits.max_fan_in = 2 + static_cast<int>(rng.below(3));
        limits.multi_dim_leaves = trial % 2 == 0;
        auto sig = testing::random_signature(rng, limits);
        const auto text = render_signature(sig);
        auto back = parse_signature(text, limits.n);
        REQUIRE(structurally_equal(sig, back, 1e-11));
        CHECK(same_structure(sig, back));
        CHECK(testing::satisfies_construction_rules(back));
        CHECK(structure_stats(back).k == testing::count_weight_tokens(text));
    }
}

TEST_CASE("same_structure is an equivalence on templated triples")
{
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        testing::ShapeLimits limits;
        limits.n = 1 + static_cast<int>(rng.below(5));
        auto base = testing::random_signature(rng, limits);
        auto reweight = [&](const SignatureNode& s) {
            std::vector<std::vector<double>> w;
            for (const auto* node : sum_nodes_of(s)) w.push_back(testing::random_simplex(rng, node->children.size()));
            return with_sum_weights(s, w);
        };
        auto a = reweight(base);
        auto b = reweight(base);
        auto c = reweight(base);
        CHECK(same_structure(a, a));
        CHECK(same_structure(a, b) == same_structure(b, a));
        CHECK(same_structure(a, b));
        CHECK(same_structure(b, c));
        CHECK(same_structure(a, c));
        auto other = testing::random_signature(rng, limits);
        CHECK(same_structure(a, other) == same_structure(other, a));
        if (same_structure(a, other) && same_structure(other, c)) CHECK(same_structure(a, c));
    }
}
