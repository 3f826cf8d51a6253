#include "spn/signature.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "spn/errors.hpp"

namespace spn {

Scope::Scope(std::vector<int> dims, int ambient)
    : dims_(std::move(dims)), ambient_(ambient)
{
    if (ambient_ < 1)
        throw ScopeError("ambient dimension must be positive, got " + std::to_string(ambient_));
    if (dims_.empty())
        throw ScopeError("scope must not be empty");
    std::sort(dims_.begin(), dims_.end());
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (dims_[i] < 1 || dims_[i] > ambient_)
            throw ScopeError("scope index " + std::to_string(dims_[i]) + " outside [1, " +
                             std::to_string(ambient_) + "]");
        if (i > 0 && dims_[i] == dims_[i - 1])
            throw ScopeError("duplicate scope index " + std::to_string(dims_[i]));
    }
}

bool Scope::contains(int dim) const
{
    return std::binary_search(dims_.begin(), dims_.end(), dim);
}

bool Scope::disjoint(const Scope& other) const
{
    auto a = dims_.begin();
    auto b = other.dims_.begin();
    while (a != dims_.end() && b != other.dims_.end()) {
        if (*a == *b)
            return false;
        if (*a < *b)
            ++a;
        else
            ++b;
    }
    return true;
}

namespace {

std::string scope_text(const Scope& s)
{
    std::string out = "{";
    for (std::size_t i = 0; i < s.dims().size(); ++i) {
        if (i)
            out += ',';
        out += std::to_string(s.dims()[i]);
    }
    return out + "}";
}

std::string weight_text(double w)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", w);
    return buf;
}

} // namespace

SignatureNode make_leaf(std::string symbol, Scope scope)
{
    if (symbol.empty())
        throw SyntaxError("leaf symbol must not be empty");
    SignatureNode node;
    node.kind = NodeKind::leaf;
    node.symbol = std::move(symbol);
    node.scope = std::move(scope);
    return node;
}

SignatureNode make_product(std::vector<SignatureNode> children)
{
    if (children.size() < 2)
        throw StructureError("product node needs at least two children");
    const int ambient = children.front().scope.ambient();
    std::vector<int> dims;
    for (std::size_t i = 0; i < children.size(); ++i) {
        if (children[i].scope.ambient() != ambient)
            throw ScopeError("product children disagree on the ambient dimension");
        for (std::size_t j = 0; j < i; ++j)
            if (!children[i].scope.disjoint(children[j].scope))
                throw ScopeError("product children " + scope_text(children[j].scope) + " and " +
                                 scope_text(children[i].scope) + " overlap");
        dims.insert(dims.end(), children[i].scope.dims().begin(), children[i].scope.dims().end());
    }
    SignatureNode node;
    node.kind = NodeKind::product;
    node.scope = Scope(std::move(dims), ambient);
    node.children = std::move(children);
    return node;
}

SignatureNode make_sum(std::vector<double> weights, std::vector<SignatureNode> children)
{
    if (children.size() < 2)
        throw StructureError("sum node needs at least two children");
    if (weights.size() != children.size())
        throw WeightError("sum node has " + std::to_string(children.size()) + " children but " +
                          std::to_string(weights.size()) + " weights");
    for (std::size_t i = 1; i < children.size(); ++i)
        if (!(children[i].scope == children[0].scope))
            throw ScopeError("sum children scopes " + scope_text(children[0].scope) + " and " +
                             scope_text(children[i].scope) + " differ");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0 && w <= 1.0))
            throw WeightError("mixing weight " + weight_text(w) + " outside [0, 1]");
        total += w;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance)
        throw WeightError("mixing weights sum to " + weight_text(total) + ", not 1");
    SignatureNode node;
    node.kind = NodeKind::sum;
    node.scope = children.front().scope;
    node.weights = std::move(weights);
    node.children = std::move(children);
    return node;
}

namespace {

class Parser {
public:
    Parser(std::string_view text, int n) : text_(text), n_(n) {}

    SignatureNode parse()
    {
        if (n_ < 1)
            throw ScopeError("ambient dimension must be positive");
        SignatureNode root = node();
        skip_ws();
        if (pos_ != text_.size())
            fail("trailing characters");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw SyntaxError(what + " at offset " + std::to_string(pos_));
    }

    void skip_ws()
    {
        while (pos_ < text_.size() &&
               (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
            ++pos_;
    }

    char peek()
    {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    void expect(char c)
    {
        if (peek() != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    // Consumes "x" or the UTF-8 multiplication sign.
    bool product_separator()
    {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == 'x') {
            ++pos_;
            return true;
        }
        if (text_.substr(pos_, 2) == "\xC3\x97") {
            pos_ += 2;
            return true;
        }
        return false;
    }

    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
    static bool digit(char c) { return c >= '0' && c <= '9'; }

    std::string identifier()
    {
        std::size_t start = pos_;
        while (pos_ < text_.size() && ident_char(text_[pos_]))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    double weight()
    {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < text_.size() && text_[pos_] == '-')
            ++pos_;
        while (pos_ < text_.size() && digit(text_[pos_]))
            ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.')
            ++pos_;
        while (pos_ < text_.size() && digit(text_[pos_]))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+'))
                ++pos_;
            if (pos_ < text_.size() && digit(text_[pos_])) {
                while (pos_ < text_.size() && digit(text_[pos_]))
                    ++pos_;
            } else {
                pos_ = save;
            }
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc() || ptr != text_.data() + pos_ || pos_ == start) {
            pos_ = start;
            fail("malformed weight");
        }
        return value;
    }

    Scope scope()
    {
        expect('{');
        std::vector<int> dims;
        if (peek() == '}')
            throw ScopeError("empty scope at offset " + std::to_string(pos_));
        while (true) {
            skip_ws();
            std::size_t start = pos_;
            while (pos_ < text_.size() && digit(text_[pos_]))
                ++pos_;
            int value = 0;
            auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
            if (ec != std::errc() || pos_ == start) {
                pos_ = start;
                fail("expected a dimension index");
            }
            dims.push_back(value);
            char c = peek();
            if (c == ',') {
                ++pos_;
                continue;
            }
            if (c == '}') {
                ++pos_;
                break;
            }
            fail("expected ',' or '}' in scope");
        }
        return Scope(std::move(dims), n_);
    }

    SignatureNode node()
    {
        expect('(');
        char c = peek();
        if (ident_start(c)) {
            std::string symbol = identifier();
            expect(',');
            Scope s = scope();
            expect(')');
            return make_leaf(std::move(symbol), std::move(s));
        }
        if (digit(c) || c == '.' || c == '-') {
            std::vector<double> weights;
            std::vector<SignatureNode> children;
            do {
                weights.push_back(weight());
                children.push_back(node());
            } while (peek() == '+' && (++pos_, true));
            if (children.size() < 2)
                fail("sum needs at least two weighted children");
            expect(')');
            return make_sum(std::move(weights), std::move(children));
        }
        if (c == '(') {
            SignatureNode first = node();
            if (product_separator()) {
                std::vector<SignatureNode> children;
                children.push_back(std::move(first));
                do {
                    children.push_back(node());
                } while (product_separator());
                expect(')');
                return make_product(std::move(children));
            }
            c = peek();
            if (c == ',') {
                ++pos_;
                std::size_t at = pos_;
                Scope declared = scope();
                expect(')');
                if (!(declared == first.scope))
                    throw ScopeError("declared scope " + scope_text(declared) + " at offset " +
                                     std::to_string(at) + " differs from computed scope " +
                                     scope_text(first.scope));
                return first;
            }
            if (c == ')') {
                ++pos_;
                return first;
            }
            fail("expected 'x', ',' or ')'");
        }
        fail("expected a leaf symbol, a weight or '('");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int n_;
};

void render_into(const SignatureNode& node, std::string& out)
{
    switch (node.kind) {
    case NodeKind::leaf:
        out += '(';
        out += node.symbol;
        out += ',';
        out += scope_text(node.scope);
        out += ')';
        return;
    case NodeKind::product:
        out += "((";
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            if (i)
                out += 'x';
            render_into(node.children[i], out);
        }
        break;
    case NodeKind::sum:
        out += "((";
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            if (i)
                out += '+';
            out += weight_text(node.weights[i]);
            render_into(node.children[i], out);
        }
        break;
    }
    out += "),";
    out += scope_text(node.scope);
    out += ')';
}

void collect_leaves(const SignatureNode& node, std::vector<const SignatureNode*>& out)
{
    if (node.is_leaf()) {
        out.push_back(&node);
        return;
    }
    for (const auto& child : node.children)
        collect_leaves(child, out);
}

void collect_sums(const SignatureNode& node, std::vector<const SignatureNode*>& out)
{
    if (node.is_sum())
        out.push_back(&node);
    for (const auto& child : node.children)
        collect_sums(child, out);
}

void replace_weights(SignatureNode& node, const std::vector<std::vector<double>>& weights, std::size_t& next)
{
    if (node.is_sum()) {
        if (next >= weights.size())
            throw WeightError("too few weight vectors for the sum nodes");
        const auto& w = weights[next++];
        if (w.size() != node.children.size())
            throw WeightError("weight vector length does not match sum fan-in");
        // Revalidate through the factory.
        node = make_sum(w, std::move(node.children));
    }
    for (auto& child : node.children)
        replace_weights(child, weights, next);
}

} // namespace

SignatureNode parse_signature(std::string_view text, int n)
{
    return Parser(text, n).parse();
}

std::string render_signature(const SignatureNode& node)
{
    std::string out;
    render_into(node, out);
    return out;
}

bool same_structure(const SignatureNode& a, const SignatureNode& b)
{
    if (a.kind != b.kind || !(a.scope == b.scope) || a.children.size() != b.children.size())
        return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!same_structure(a.children[i], b.children[i]))
            return false;
    return true;
}

bool structurally_equal(const SignatureNode& a, const SignatureNode& b, double weight_tolerance)
{
    if (a.kind != b.kind || !(a.scope == b.scope) || a.symbol != b.symbol ||
        a.children.size() != b.children.size() || a.weights.size() != b.weights.size())
        return false;
    for (std::size_t i = 0; i < a.weights.size(); ++i)
        if (std::abs(a.weights[i] - b.weights[i]) > weight_tolerance)
            return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!structurally_equal(a.children[i], b.children[i], weight_tolerance))
            return false;
    return true;
}

StructureStats structure_stats(const SignatureNode& node)
{
    StructureStats stats;
    stats.n = node.scope.ambient();
    if (node.is_leaf()) {
        stats.e = 1;
        return stats;
    }
    for (const auto& child : node.children) {
        StructureStats c = structure_stats(child);
        stats.e += c.e;
        stats.k += c.k;
        stats.sum_nodes += c.sum_nodes;
        stats.depth = std::max(stats.depth, c.depth + 1);
    }
    if (node.is_sum()) {
        stats.k += node.children.size();
        stats.sum_nodes += 1;
    }
    return stats;
}

std::vector<const SignatureNode*> leaves_of(const SignatureNode& node)
{
    std::vector<const SignatureNode*> out;
    collect_leaves(node, out);
    return out;
}

std::vector<const SignatureNode*> sum_nodes_of(const SignatureNode& node)
{
    std::vector<const SignatureNode*> out;
    collect_sums(node, out);
    return out;
}

SignatureNode with_sum_weights(const SignatureNode& node, const std::vector<std::vector<double>>& weights)
{
    SignatureNode copy = node;
    std::size_t next = 0;
    replace_weights(copy, weights, next);
    if (next != weights.size())
        throw WeightError("more weight vectors than sum nodes");
    return copy;
}

} // namespace spn
