#include "symident/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace symident::expr {

namespace {

struct OpInfo {
    Op op;
    std::string_view symbol;
};

// Longest-match order matters for the parser ("arcsin" before "sin").
constexpr std::array<OpInfo, 14> kNamedOps = {{
    {Op::Arcsin, "arcsin"},
    {Op::Sin, "sin"},
    {Op::Cos, "cos"},
    {Op::Sqrt, "sqr"},
    {Op::Abs, "abs"},
    {Op::Exp, "exp"},
    {Op::Sgn, "sgn"},
    {Op::Hvs, "hvs"},
    {Op::Log, "log"},
    {Op::Pwr, "pwr"},
    {Op::Int, "int"},
    {Op::Add, "+"},
    {Op::Mul, "*"},
    {Op::Div, "/"},
}};

std::string format_real(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    std::string s(buf.data(), end);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
    }
    return s;
}

}  // namespace

bool is_binary(Op op) { return op == Op::Add || op == Op::Mul || op == Op::Div; }

bool is_terminal(Op op) {
    switch (op) {
        case Op::Time:
        case Op::Const:
        case Op::One:
        case Op::State:
        case Op::Input:
            return true;
        default:
            return false;
    }
}

bool is_unary(Op op) { return !is_binary(op) && !is_terminal(op); }

std::string_view op_symbol(Op op) {
    for (const auto& info : kNamedOps) {
        if (info.op == op) return info.symbol;
    }
    switch (op) {
        case Op::Time: return "t";
        case Op::One: return "1";
        case Op::Const: return "c";
        case Op::State: return "z";
        case Op::Input: return "u";
        default: return "?";
    }
}

NodePtr make_binary(Op op, NodePtr lhs, NodePtr rhs) {
    return std::make_shared<Node>(Node{op, 0.0, 0, std::move(lhs), std::move(rhs)});
}

NodePtr make_unary(Op op, NodePtr child) {
    return std::make_shared<Node>(Node{op, 0.0, 0, std::move(child), nullptr});
}

NodePtr make_pwr(double exponent, NodePtr child) {
    return std::make_shared<Node>(Node{Op::Pwr, exponent, 0, std::move(child), nullptr});
}

NodePtr make_time() { return std::make_shared<Node>(Node{Op::Time, 0.0, 0, nullptr, nullptr}); }
NodePtr make_one() { return std::make_shared<Node>(Node{Op::One, 0.0, 0, nullptr, nullptr}); }
NodePtr make_const(double value) {
    return std::make_shared<Node>(Node{Op::Const, value, 0, nullptr, nullptr});
}
NodePtr make_state(int index) {
    return std::make_shared<Node>(Node{Op::State, 0.0, index, nullptr, nullptr});
}
NodePtr make_input(int index) {
    return std::make_shared<Node>(Node{Op::Input, 0.0, index, nullptr, nullptr});
}

namespace {

struct TreeStats {
    int size = 0;
    int ops = 0;
    int depth = 0;
    bool data_dep = false;
};

TreeStats collect_stats(const NodePtr& n) {
    TreeStats s;
    s.size = 1;
    if (!is_terminal(n->op)) s.ops = 1;
    if (n->op == Op::Time || n->op == Op::State || n->op == Op::Input || n->op == Op::Int)
        s.data_dep = true;
    int child_depth = 0;
    for (const NodePtr* c : {&n->a, &n->b}) {
        if (!*c) continue;
        TreeStats cs = collect_stats(*c);
        s.size += cs.size;
        s.ops += cs.ops;
        s.data_dep = s.data_dep || cs.data_dep;
        child_depth = std::max(child_depth, cs.depth);
    }
    s.depth = 1 + child_depth;
    return s;
}

void write_prefix(const NodePtr& n, std::string& out, bool canonical) {
    switch (n->op) {
        case Op::Time:
            out += 't';
            return;
        case Op::One:
            // a literal 1 after a number or index would be absorbed into it;
            // separate the tokens so the encoding stays unambiguous
            if (!out.empty() && std::isdigit(static_cast<unsigned char>(out.back())))
                out += ' ';
            out += '1';
            return;
        case Op::Const:
            out += 'c';
            out += format_real(n->value);
            return;
        case Op::State:
            out += 'z';
            out += std::to_string(n->index);
            return;
        case Op::Input:
            out += 'u';
            out += std::to_string(n->index);
            return;
        case Op::Pwr:
            out += "pwr";
            out += format_real(n->value);
            write_prefix(n->a, out, canonical);
            return;
        default:
            break;
    }
    out += op_symbol(n->op);
    if (is_binary(n->op)) {
        std::string lhs, rhs;
        write_prefix(n->a, lhs, canonical);
        write_prefix(n->b, rhs, canonical);
        if (canonical && (n->op == Op::Add || n->op == Op::Mul) && rhs < lhs) lhs.swap(rhs);
        out += lhs;
        if (!out.empty() && std::isdigit(static_cast<unsigned char>(out.back())) &&
            std::isdigit(static_cast<unsigned char>(rhs.front())))
            out += ' ';
        out += rhs;
    } else {
        write_prefix(n->a, out, canonical);
    }
}

}  // namespace

ExprTree::ExprTree(NodePtr root) : root_(std::move(root)) {
    if (!root_) throw std::invalid_argument("ExprTree: null root");
    TreeStats s = collect_stats(root_);
    size_ = s.size;
    op_count_ = s.ops;
    depth_ = s.depth;
    data_dependent_ = s.data_dep;
}

std::string ExprTree::str() const {
    std::string out;
    write_prefix(root_, out, /*canonical=*/false);
    return out;
}

std::string ExprTree::canonical_key() const {
    std::string out;
    write_prefix(root_, out, /*canonical=*/true);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse_expr() {
        while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        for (const auto& info : kNamedOps) {
            if (text_.substr(pos_).starts_with(info.symbol)) {
                size_t at = pos_;
                pos_ += info.symbol.size();
                if (info.op == Op::Pwr) {
                    double e = parse_number("pwr exponent", at);
                    return make_pwr(e, parse_expr());
                }
                if (is_binary(info.op)) {
                    NodePtr lhs = parse_expr();
                    NodePtr rhs = parse_expr();
                    return make_binary(info.op, std::move(lhs), std::move(rhs));
                }
                return make_unary(info.op, parse_expr());
            }
        }
        char ch = text_[pos_];
        switch (ch) {
            case 't':
                ++pos_;
                return make_time();
            case '1':
                ++pos_;
                return make_one();
            case 'c': {
                size_t at = pos_++;
                return make_const(parse_number("constant", at));
            }
            case 'z':
            case 'u': {
                size_t at = pos_++;
                int idx = parse_index(at);
                return ch == 'z' ? make_state(idx) : make_input(idx);
            }
            default:
                throw ParseError(std::string("unknown symbol '") + ch + "'", pos_);
        }
    }

    void expect_end() {
        if (pos_ != text_.size())
            throw ParseError("trailing input after complete expression", pos_);
    }

  private:
    double parse_number(const char* what, size_t at) {
        size_t start = pos_;
        if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                                       text_[pos_] == '.'))
            ++pos_;
        // exponent only when followed by a digit (so "c2exp..." parses as c2, exp)
        if (pos_ < text_.size() && text_[pos_] == 'e') {
            size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '-' || text_[look] == '+')) ++look;
            if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
                pos_ = look + 1;
                while (pos_ < text_.size() &&
                       std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            }
        }
        if (pos_ == start)
            throw ParseError(std::string("expected number after ") + what, at);
        std::string token(text_.substr(start, pos_ - start));
        char* end = nullptr;
        double v = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size())
            throw ParseError(std::string("unparseable ") + what + " '" + token + "'", start);
        return v;
    }

    int parse_index(size_t at) {
        size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (pos_ == start) throw ParseError("expected variable index", at);
        return std::stoi(std::string(text_.substr(start, pos_ - start)));
    }

    std::string_view text_;
    size_t pos_ = 0;
};

}  // namespace

ExprTree parse(std::string_view text) {
    Parser p(text);
    NodePtr root = p.parse_expr();
    p.expect_end();
    return ExprTree(std::move(root));
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

Eigen::VectorXd eval_node(const NodePtr& n, const Dataset& data) {
    const Eigen::Index m = data.rows();
    switch (n->op) {
        case Op::Time:
            return data.t;
        case Op::One:
            return Eigen::VectorXd::Ones(m);
        case Op::Const:
            return Eigen::VectorXd::Constant(m, n->value);
        case Op::State:
            if (n->index < 1 || n->index > data.n_states())
                throw DomainViolation("state index out of range", 0);
            return data.Z.col(n->index - 1);
        case Op::Input:
            if (n->index < 1 || n->index > data.n_inputs())
                throw DomainViolation("input index out of range", 0);
            return data.U.col(n->index - 1);
        default:
            break;
    }
    Eigen::VectorXd a = eval_node(n->a, data);
    switch (n->op) {
        case Op::Add:
            return a + eval_node(n->b, data);
        case Op::Mul:
            return a.cwiseProduct(eval_node(n->b, data));
        case Op::Div: {
            Eigen::VectorXd b = eval_node(n->b, data);
            for (Eigen::Index i = 0; i < m; ++i)
                if (std::abs(b(i)) < kDivEps)
                    throw DomainViolation("zero-valued denominator", i);
            return a.cwiseQuotient(b);
        }
        case Op::Sin:
            return a.array().sin();
        case Op::Cos:
            return a.array().cos();
        case Op::Sqrt:
            for (Eigen::Index i = 0; i < m; ++i)
                if (a(i) < 0.0) throw DomainViolation("negative radicand", i);
            return a.array().sqrt();
        case Op::Abs:
            return a.cwiseAbs();
        case Op::Exp: {
            Eigen::VectorXd r = a.array().exp();
            for (Eigen::Index i = 0; i < m; ++i)
                if (!std::isfinite(r(i))) throw DomainViolation("exp overflow", i);
            return r;
        }
        case Op::Sgn:
            return a.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
        case Op::Hvs:
            return a.unaryExpr([](double x) { return x >= 0.0 ? 1.0 : 0.0; });
        case Op::Log:
            for (Eigen::Index i = 0; i < m; ++i)
                if (a(i) <= 0.0) throw DomainViolation("log argument <= 0", i);
            return a.array().log();
        case Op::Arcsin:
            for (Eigen::Index i = 0; i < m; ++i)
                if (std::abs(a(i)) > 1.0) throw DomainViolation("|arcsin argument| > 1", i);
            return a.array().asin();
        case Op::Pwr: {
            const double e = n->value;
            const bool integral = std::abs(e - std::round(e)) < 1e-12;
            Eigen::VectorXd r(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                if (a(i) < 0.0 && !integral)
                    throw DomainViolation("negative base with real exponent", i);
                if (a(i) == 0.0 && e < 0.0)
                    throw DomainViolation("zero base with negative exponent", i);
                r(i) = std::pow(a(i), e);
                if (!std::isfinite(r(i))) throw DomainViolation("pwr overflow", i);
            }
            return r;
        }
        case Op::Int: {
            // cumulative trapezoidal integral over the sample grid, value 0 at t_1
            Eigen::VectorXd r(m);
            r(0) = 0.0;
            for (Eigen::Index i = 1; i < m; ++i)
                r(i) = r(i - 1) + 0.5 * (data.t(i) - data.t(i - 1)) * (a(i) + a(i - 1));
            return r;
        }
        default:
            throw std::logic_error("eval_node: unreachable");
    }
}

}  // namespace

Eigen::VectorXd evaluate_column(const ExprTree& tree, const Dataset& data) {
    Eigen::VectorXd v = eval_node(tree.root(), data);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v(i))) throw DomainViolation("non-finite value", i);
    return v;
}

// ---------------------------------------------------------------------------
// Random generation

TermContext TermContext::standard(int n_states, int n_inputs) {
    TermContext ctx;
    ctx.n_states = n_states;
    ctx.n_inputs = n_inputs;
    ctx.functions = {Op::Add, Op::Mul, Op::Div, Op::Sin, Op::Sqrt,
                     Op::Abs, Op::Exp, Op::Sgn};
    return ctx;
}

namespace {

NodePtr random_terminal(std::mt19937_64& rng, const TermContext& ctx) {
    std::vector<int> choices;  // 0=t 1=one 2=const 3..=state then input
    if (ctx.with_time) choices.push_back(0);
    if (ctx.with_one) choices.push_back(1);
    if (ctx.with_const) choices.push_back(2);
    for (int i = 0; i < ctx.n_states; ++i) choices.push_back(3 + i);
    for (int i = 0; i < ctx.n_inputs; ++i) choices.push_back(3 + ctx.n_states + i);
    std::uniform_int_distribution<size_t> pick(0, choices.size() - 1);
    int c = choices[pick(rng)];
    if (c == 0) return make_time();
    if (c == 1) return make_one();
    if (c == 2) {
        std::uniform_real_distribution<double> val(ctx.const_min, ctx.const_max);
        return make_const(val(rng));
    }
    if (c < 3 + ctx.n_states) return make_state(c - 3 + 1);
    return make_input(c - 3 - ctx.n_states + 1);
}

double random_pwr_exponent(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    double e = d(rng);
    while (std::abs(e) < 0.1) e = d(rng);  // near-zero exponents alias the literal 1
    return e;
}

NodePtr random_node(std::mt19937_64& rng, const TermContext& ctx, int depth_left,
                    int size_budget, Op last_unary, int unary_run) {
    if (depth_left <= 1 || size_budget <= 1) return random_terminal(rng, ctx);

    std::bernoulli_distribution want_function(0.6);
    if (!want_function(rng)) return random_terminal(rng, ctx);

    std::vector<Op> candidates;
    for (Op op : ctx.functions) {
        if (is_binary(op) && size_budget < 3) continue;
        if (is_unary(op) && op == last_unary && unary_run >= 2) continue;
        candidates.push_back(op);
    }
    if (candidates.empty()) return random_terminal(rng, ctx);
    std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
    Op op = candidates[pick(rng)];

    if (is_binary(op)) {
        int child_budget = size_budget - 1;
        std::uniform_int_distribution<int> split(1, child_budget - 1);
        int left = split(rng);
        NodePtr a = random_node(rng, ctx, depth_left - 1, left, Op::Add, 0);
        NodePtr b = random_node(rng, ctx, depth_left - 1, child_budget - left, Op::Add, 0);
        return make_binary(op, std::move(a), std::move(b));
    }
    int run = (op == last_unary) ? unary_run + 1 : 1;
    NodePtr child = random_node(rng, ctx, depth_left - 1, size_budget - 1, op, run);
    if (op == Op::Pwr) return make_pwr(random_pwr_exponent(rng), std::move(child));
    return make_unary(op, std::move(child));
}

}  // namespace

ExprTree random_tree(std::mt19937_64& rng, int max_depth, const TermContext& ctx) {
    if (max_depth < 1) throw std::invalid_argument("random_tree: max_depth < 1");
    return ExprTree(random_node(rng, ctx, max_depth, ctx.max_size, Op::Add, 0));
}

// ---------------------------------------------------------------------------
// Editing

namespace {

bool is_positive_node(const NodePtr& n, bool time_positive) {
    switch (n->op) {
        case Op::Time:
            return time_positive;
        case Op::One:
            return true;
        case Op::Const:
            return n->value > 0.0;
        case Op::Exp:
            return true;
        default:
            return false;
    }
}

bool is_nonnegative_node(const NodePtr& n, bool time_positive) {
    if (is_positive_node(n, time_positive)) return true;
    switch (n->op) {
        case Op::Abs:
        case Op::Sqrt:
        case Op::Hvs:
            return true;
        case Op::Const:
            return n->value >= 0.0;
        default:
            return false;
    }
}

std::string node_key(const NodePtr& n) {
    std::string out;
    write_prefix(n, out, /*canonical=*/true);
    return out;
}

// scalar evaluation of a constant-only subtree; nullopt on domain trouble
std::optional<double> eval_scalar(const NodePtr& n) {
    switch (n->op) {
        case Op::One:
            return 1.0;
        case Op::Const:
            return n->value;
        case Op::Time:
        case Op::State:
        case Op::Input:
        case Op::Int:
            return std::nullopt;
        default:
            break;
    }
    auto a = eval_scalar(n->a);
    if (!a) return std::nullopt;
    double r = 0.0;
    switch (n->op) {
        case Op::Add: {
            auto b = eval_scalar(n->b);
            if (!b) return std::nullopt;
            r = *a + *b;
            break;
        }
        case Op::Mul: {
            auto b = eval_scalar(n->b);
            if (!b) return std::nullopt;
            r = *a * *b;
            break;
        }
        case Op::Div: {
            auto b = eval_scalar(n->b);
            if (!b || std::abs(*b) < kDivEps) return std::nullopt;
            r = *a / *b;
            break;
        }
        case Op::Sin: r = std::sin(*a); break;
        case Op::Cos: r = std::cos(*a); break;
        case Op::Sqrt:
            if (*a < 0.0) return std::nullopt;
            r = std::sqrt(*a);
            break;
        case Op::Abs: r = std::abs(*a); break;
        case Op::Exp: r = std::exp(*a); break;
        case Op::Sgn: r = *a > 0.0 ? 1.0 : (*a < 0.0 ? -1.0 : 0.0); break;
        case Op::Hvs: r = *a >= 0.0 ? 1.0 : 0.0; break;
        case Op::Log:
            if (*a <= 0.0) return std::nullopt;
            r = std::log(*a);
            break;
        case Op::Arcsin:
            if (std::abs(*a) > 1.0) return std::nullopt;
            r = std::asin(*a);
            break;
        case Op::Pwr:
            if (*a < 0.0 && std::abs(n->value - std::round(n->value)) > 1e-12)
                return std::nullopt;
            r = std::pow(*a, n->value);
            break;
        default:
            return std::nullopt;
    }
    if (!std::isfinite(r)) return std::nullopt;
    return r;
}

NodePtr rewrite(const NodePtr& n, bool time_positive, bool& changed) {
    NodePtr a = n->a ? rewrite(n->a, time_positive, changed) : nullptr;
    NodePtr b = n->b ? rewrite(n->b, time_positive, changed) : nullptr;
    NodePtr cur = (a == n->a && b == n->b)
                      ? n
                      : std::make_shared<Node>(Node{n->op, n->value, n->index, a, b});

    // fold constant-only subtrees
    if (!is_terminal(cur->op)) {
        bool const_only = true;
        for (const NodePtr* c : {&cur->a, &cur->b}) {
            if (*c && collect_stats(*c).data_dep) const_only = false;
        }
        if (const_only) {
            if (auto v = eval_scalar(cur)) {
                changed = true;
                return std::abs(*v - 1.0) < 1e-15 ? make_one() : make_const(*v);
            }
        }
    }

    // x / x -> 1
    if (cur->op == Op::Div && node_key(cur->a) == node_key(cur->b)) {
        changed = true;
        return make_one();
    }

    // collapse >2 consecutive identical unary functions
    if (is_unary(cur->op) && cur->a->op == cur->op && cur->a->a && cur->a->a->op == cur->op) {
        changed = true;
        return cur->a;
    }

    // sgn/abs of provably signed arguments
    if (cur->op == Op::Sgn && is_positive_node(cur->a, time_positive)) {
        changed = true;
        return make_one();
    }
    if (cur->op == Op::Abs && is_nonnegative_node(cur->a, time_positive)) {
        changed = true;
        return cur->a;
    }
    return cur;
}

}  // namespace

std::optional<ExprTree> edit(const ExprTree& tree, const Dataset& data) {
    const bool time_positive = data.rows() > 0 && data.t.minCoeff() > 0.0;
    NodePtr cur = tree.root();
    for (int pass = 0; pass < 64; ++pass) {
        bool changed = false;
        cur = rewrite(cur, time_positive, changed);
        if (!changed) break;
    }
    ExprTree result(cur);
    if (data.rows() > 0) {
        try {
            evaluate_column(result, data);
        } catch (const DomainViolation&) {
            return std::nullopt;  // RemoveTerm
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

void dedupe_terms(Individual& ind) {
    std::vector<ExprTree> kept;
    std::vector<std::string> keys;
    for (const ExprTree& t : ind.terms) {
        std::string k = t.canonical_key();
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
            keys.push_back(std::move(k));
            kept.push_back(t);
        }
    }
    if (kept.size() != ind.terms.size()) {
        ind.terms = std::move(kept);
        ind.coefficients.resize(0, 0);
    }
}

Complexity complexity_measures(const Individual& ind) {
    if (ind.terms.empty()) throw std::invalid_argument("complexity_measures: empty individual");
    Complexity c;
    c.gamma = ind.term_count();
    double total = 0.0;
    for (const ExprTree& t : ind.terms) total += t.op_count();
    c.mean_ops = total / c.gamma;
    return c;
}

}  // namespace symident::expr
