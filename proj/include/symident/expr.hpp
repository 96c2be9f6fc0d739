#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "symident/dataset.hpp"

namespace symident::expr {

// Node kinds: binary operators, unary functions and terminals.
enum class Op {
    // binary
    Add,
    Mul,
    Div,
    // unary
    Sin,
    Cos,
    Sqrt,   // written "sqr" in the prefix grammar
    Abs,
    Exp,
    Sgn,
    Hvs,
    Log,
    Arcsin,
    Pwr,    // real exponent carried in Node::value
    Int,    // cumulative time integral of the child column
    // terminals
    Time,
    Const,  // value carried in Node::value
    One,
    State,  // index carried in Node::index (1-based, as in z1)
    Input,  // index carried in Node::index (1-based, as in u1)
};

bool is_binary(Op op);
bool is_unary(Op op);
bool is_terminal(Op op);
std::string_view op_symbol(Op op);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op;
    double value = 0.0;  // Const value or Pwr exponent
    int index = 0;       // State/Input index, 1-based
    NodePtr a;           // first child (unary/binary)
    NodePtr b;           // second child (binary)
};

NodePtr make_binary(Op op, NodePtr lhs, NodePtr rhs);
NodePtr make_unary(Op op, NodePtr child);
NodePtr make_pwr(double exponent, NodePtr child);
NodePtr make_time();
NodePtr make_one();
NodePtr make_const(double value);
NodePtr make_state(int index);
NodePtr make_input(int index);

// Immutable symbolic candidate term. Size counts every function- and
// terminal-set symbol in the tree; op_count counts only the former.
class ExprTree {
  public:
    explicit ExprTree(NodePtr root);

    const NodePtr& root() const { return root_; }
    int size() const { return size_; }
    int op_count() const { return op_count_; }
    int depth() const { return depth_; }
    // true if the term depends on t, z, u or contains an Int node
    bool depends_on_data() const { return data_dependent_; }

    // Literal prefix-string encoding; parse(str()) reproduces the tree.
    std::string str() const;
    // Structural-equality key: commutative operands ordered lexicographically.
    std::string canonical_key() const;

  private:
    NodePtr root_;
    int size_ = 0;
    int op_count_ = 0;
    int depth_ = 0;
    bool data_dependent_ = false;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, size_t position)
        : std::runtime_error(what), pos(position) {}
    size_t pos;
};

ExprTree parse(std::string_view text);
inline std::string to_string(const ExprTree& tree) { return tree.str(); }

struct DomainViolation : std::runtime_error {
    DomainViolation(const std::string& what, Eigen::Index sample_index)
        : std::runtime_error(what), sample(sample_index) {}
    Eigen::Index sample;
};

// Column of candidate-term values at the dataset's sample times.
// Throws DomainViolation on negative radicands, log/arcsin domain errors,
// near-zero denominators (|d| < div_eps) or non-finite results.
Eigen::VectorXd evaluate_column(const ExprTree& tree, const Dataset& data);

inline constexpr double kDivEps = 1e-10;

// Terminal/function context a random tree is drawn from.
struct TermContext {
    int n_states = 0;
    int n_inputs = 0;
    bool with_time = true;
    bool with_one = true;
    bool with_const = true;
    std::vector<Op> functions;  // enabled function-set members
    double const_min = -100.0;
    double const_max = 100.0;
    int max_size = 15;

    static TermContext standard(int n_states, int n_inputs = 0);
};

ExprTree random_tree(std::mt19937_64& rng, int max_depth, const TermContext& ctx);

// Rule-based simplification. Returns nullopt (RemoveTerm) when the term
// evaluates outside its domain on the given data.
std::optional<ExprTree> edit(const ExprTree& tree, const Dataset& data);

// One candidate model: an ordered term set plus (after regression) one
// coefficient column per state equation.
struct Individual {
    std::vector<ExprTree> terms;
    Eigen::MatrixXd coefficients;  // term_count x n_states; 0x0 before fitting
    double rss = std::numeric_limits<double>::infinity();
    double validation_rss = std::numeric_limits<double>::infinity();
    double fitness = std::numeric_limits<double>::infinity();

    bool fitted() const { return coefficients.size() > 0; }
    int term_count() const { return static_cast<int>(terms.size()); }
};

// Removes structural duplicates (canonical-key equality), keeping first.
void dedupe_terms(Individual& ind);

struct Complexity {
    int gamma = 0;        // term count
    double mean_ops = 0;  // mean operator count per term
};

Complexity complexity_measures(const Individual& ind);

}  // namespace symident::expr
