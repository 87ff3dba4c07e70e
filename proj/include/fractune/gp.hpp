#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fractune::gp {

// every node result is clamped to ±kClamp, NaN becomes 0
constexpr double kClamp = 1e12;
double clamp_value(double x);

// protected primitives (unclamped; callers clamp)
double pdiv(double a, double b);  // 0 when b == 0
double psqrt(double x);  // sqrt|x|
double plog(double x);  // ln|x|, 0 at x == 0

enum class Op : std::uint8_t { Const, Var, Add, Sub, Mul, Div, Neg, Sqrt, Sin, Cos, Tanh, Log, Exp, Square };
int arity(Op op);
double apply_op(Op op, double a, double b = 0.0);  // clamped

// number of inputs: K, τ_max, τ_min, L, τ_max/τ_min, L/τ_min, L/τ_max  (x1..x7)
constexpr int kFeatures = 7;

struct FeatureVector {
    double K = 1;
    double tau_max = 1;
    double tau_min = 1;
    double L = 0;

    std::array<double, kFeatures> values() const;
};

struct Node {
    Op op = Op::Const;
    int var = 0;  // 0-based feature index for Op::Var
    double value = 0;  // Op::Const
};

// prefix-order flat tree
class ExprTree {
public:
    ExprTree() = default;
    explicit ExprTree(std::vector<Node> prefix);

    static ExprTree constant(double v);
    static ExprTree variable(int index);
    static ExprTree unary(Op op, const ExprTree& a);
    static ExprTree binary(Op op, const ExprTree& a, const ExprTree& b);

    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    int depth() const;
    // one past the last node of the subtree rooted at i
    std::size_t subtree_end(std::size_t i) const;
    int depth_at(std::size_t i) const;  // root = 1
    ExprTree subtree(std::size_t i) const;
    ExprTree replaced(std::size_t i, const ExprTree& sub) const;

    bool operator==(const ExprTree& o) const;

private:
    std::vector<Node> nodes_;
};

double eval_tree(const ExprTree& t, std::span<const double> x);
double eval_tree(const ExprTree& t, const FeatureVector& x);
// rows of X are samples
Eigen::VectorXd eval_columns(const ExprTree& t, const Eigen::MatrixXd& X);

std::string expr_to_text(const ExprTree& t);
// accepts the printed form plus "/", "^k" (k = 2..4), sqrt/log/ln aliases and the names
// K, tau_max, tau_min, L for x1..x4; throws ParameterError on syntax errors
ExprTree parse_expr(const std::string& text);

int node_count(const ExprTree& t);

struct MultiGeneModel {
    std::vector<ExprTree> genes;
    std::vector<double> weights;
    double bias = 0;

    double predict(std::span<const double> x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
    std::string to_text() const;
};
int node_count(const MultiGeneModel& m);  // weights and bias excluded

struct LinearFit {
    std::vector<double> weights;
    double bias = 0;
    bool ridge = false;  // singular or under-determined design
};
// least squares on [1, gene outputs]; ridge 1e-8 (relative to the mean diagonal) when singular
LinearFit fit_gene_weights(const std::vector<ExprTree>& genes, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
LinearFit fit_columns(const Eigen::MatrixXd& G, const Eigen::VectorXd& y);

enum class Mode { single_gene, multi_gene };

struct GPConfig {
    int pop_size = 500;
    int tournament_size = 3;
    int max_depth = 7;
    int init_max_depth = 4;
    double p_crossover = 0.85;
    double p_mutation = 0.10;
    double p_reproduction = 0.05;
    int max_genes = 8;
    double p_highlevel_xover = 0.2;
    double p_lowlevel_xover = 0.8;
    double p_subtree_mutation = 0.9;
    double const_lo = -10;
    double const_hi = 10;
    double const_jitter = 0.5;
    double p_constant = 0.2;  // chance a fresh terminal is a constant
    int generations = 100;
    int elite_count = 1;
    double target_mae = 0;  // stop once the best MAE is <= this
    std::vector<Op> functions = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Sqrt, Op::Sin,
                                 Op::Cos, Op::Tanh, Op::Log, Op::Exp, Op::Square};
    int n_features = kFeatures;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ParetoEntry {
    int node_count;
    double mae;
    MultiGeneModel model;
};

// non-dominated (node_count, mae) archive; on exact ties the earlier entry stays
class ParetoArchive {
public:
    bool offer(int nodes, double mae, const MultiGeneModel& m);
    const std::vector<ParetoEntry>& entries() const { return entries_; }  // sorted by node_count

private:
    std::vector<ParetoEntry> entries_;
};

struct GPResult {
    MultiGeneModel best;
    double mae = 0;
    std::vector<ParetoEntry> pareto;
    std::vector<double> history;  // best MAE per generation
};

GPResult run_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPConfig& cfg, Mode mode);

// operators, exposed for tests
ExprTree random_tree(int max_depth, bool full, const GPConfig& cfg, std::mt19937_64& rng);
// swaps uniformly chosen subtrees; over-deep children are trimmed back to max_depth
std::pair<ExprTree, ExprTree> subtree_crossover(const ExprTree& a, const ExprTree& b, const GPConfig& cfg,
                                                std::mt19937_64& rng);
// same, at fixed node positions
std::pair<ExprTree, ExprTree> subtree_crossover_at(const ExprTree& a, std::size_t ia, const ExprTree& b,
                                                   std::size_t ib, const GPConfig& cfg, std::mt19937_64& rng);
ExprTree subtree_mutate(const ExprTree& a, const GPConfig& cfg, std::mt19937_64& rng);
ExprTree trim_depth(const ExprTree& t, int max_depth, const GPConfig& cfg, std::mt19937_64& rng);

struct Scored {
    double mae;
    int nodes;
};
// best MAE among k uniform picks (with replacement); ties go to fewer nodes, then the earlier pick
std::size_t tournament_select(const std::vector<Scored>& pop, int k, std::mt19937_64& rng);

}  // namespace fractune::gp
