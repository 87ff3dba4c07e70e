#include "fractune/gp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "fractune/error.hpp"
#include "fractune/ga.hpp"

namespace fractune::gp {

double clamp_value(double x)
{
    if (std::isnan(x))
        return 0.0;
    return std::clamp(x, -kClamp, kClamp);
}

double pdiv(double a, double b)
{
    return b == 0.0 ? 0.0 : a / b;
}

double psqrt(double x)
{
    return std::sqrt(std::abs(x));
}

double plog(double x)
{
    return x == 0.0 ? 0.0 : std::log(std::abs(x));
}

int arity(Op op)
{
    switch (op) {
    case Op::Const:
    case Op::Var:
        return 0;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
        return 2;
    default:
        return 1;
    }
}

double apply_op(Op op, double a, double b)
{
    double r = 0;
    switch (op) {
    case Op::Add: r = a + b; break;
    case Op::Sub: r = a - b; break;
    case Op::Mul: r = a * b; break;
    case Op::Div: r = pdiv(a, b); break;
    case Op::Neg: r = -a; break;
    case Op::Sqrt: r = psqrt(a); break;
    case Op::Sin: r = std::sin(a); break;
    case Op::Cos: r = std::cos(a); break;
    case Op::Tanh: r = std::tanh(a); break;
    case Op::Log: r = plog(a); break;
    case Op::Exp: r = std::exp(a); break;
    case Op::Square: r = a * a; break;
    case Op::Const:
    case Op::Var: r = a; break;
    }
    return clamp_value(r);
}

std::array<double, kFeatures> FeatureVector::values() const
{
    return {K, tau_max, tau_min, L, tau_max / tau_min, L / tau_min, L / tau_max};
}

// ---- tree structure ----

ExprTree::ExprTree(std::vector<Node> prefix) : nodes_(std::move(prefix))
{
    if (nodes_.empty())
        throw ParameterError("expression tree must have at least one node");
    if (subtree_end(0) != nodes_.size())
        throw ParameterError("malformed prefix expression");
}

ExprTree ExprTree::constant(double v)
{
    return ExprTree({Node{Op::Const, 0, v}});
}

ExprTree ExprTree::variable(int index)
{
    if (index < 0)
        throw ParameterError("negative feature index");
    return ExprTree({Node{Op::Var, index, 0.0}});
}

ExprTree ExprTree::unary(Op op, const ExprTree& a)
{
    std::vector<Node> n{Node{op, 0, 0.0}};
    n.insert(n.end(), a.nodes_.begin(), a.nodes_.end());
    return ExprTree(std::move(n));
}

ExprTree ExprTree::binary(Op op, const ExprTree& a, const ExprTree& b)
{
    std::vector<Node> n{Node{op, 0, 0.0}};
    n.insert(n.end(), a.nodes_.begin(), a.nodes_.end());
    n.insert(n.end(), b.nodes_.begin(), b.nodes_.end());
    return ExprTree(std::move(n));
}

std::size_t ExprTree::subtree_end(std::size_t i) const
{
    long need = 1;
    std::size_t j = i;
    while (need > 0) {
        if (j >= nodes_.size())
            throw ParameterError("malformed prefix expression");
        need += arity(nodes_[j].op) - 1;
        ++j;
    }
    return j;
}

int ExprTree::depth() const
{
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (arity(nodes_[i].op) == 0)
            best = std::max(best, depth_at(i));
    return best;
}

int ExprTree::depth_at(std::size_t i) const
{
    // stack of children still expected at each open level
    std::vector<int> open;
    for (std::size_t j = 0;; ++j) {
        int d = static_cast<int>(open.size()) + 1;
        if (j == i)
            return d;
        int a = arity(nodes_[j].op);
        if (a > 0) {
            open.push_back(a);
        } else {
            while (!open.empty() && --open.back() == 0)
                open.pop_back();
        }
    }
}

ExprTree ExprTree::subtree(std::size_t i) const
{
    return ExprTree(std::vector<Node>(nodes_.begin() + i, nodes_.begin() + subtree_end(i)));
}

ExprTree ExprTree::replaced(std::size_t i, const ExprTree& sub) const
{
    std::vector<Node> n(nodes_.begin(), nodes_.begin() + i);
    n.insert(n.end(), sub.nodes_.begin(), sub.nodes_.end());
    n.insert(n.end(), nodes_.begin() + subtree_end(i), nodes_.end());
    return ExprTree(std::move(n));
}

bool ExprTree::operator==(const ExprTree& o) const
{
    if (nodes_.size() != o.nodes_.size())
        return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto &a = nodes_[i], &b = o.nodes_[i];
        if (a.op != b.op || (a.op == Op::Var && a.var != b.var) || (a.op == Op::Const && a.value != b.value))
            return false;
    }
    return true;
}

int node_count(const ExprTree& t)
{
    return static_cast<int>(t.size());
}

// ---- evaluation ----

double eval_tree(const ExprTree& t, std::span<const double> x)
{
    const auto& n = t.nodes();
    std::vector<double> st;
    st.reserve(n.size());
    for (std::size_t k = n.size(); k-- > 0;) {
        const Node& nd = n[k];
        switch (arity(nd.op)) {
        case 0: {
            double v = nd.value;
            if (nd.op == Op::Var) {
                if (nd.var >= static_cast<int>(x.size()))
                    throw ParameterError(fmt::format("feature x{} not supplied", nd.var + 1));
                v = x[nd.var];
            }
            st.push_back(clamp_value(v));
            break;
        }
        case 1:
            st.back() = apply_op(nd.op, st.back());
            break;
        default: {
            double a = st.back();
            st.pop_back();
            st.back() = apply_op(nd.op, a, st.back());
        }
        }
    }
    return st.back();
}

double eval_tree(const ExprTree& t, const FeatureVector& x)
{
    auto v = x.values();
    return eval_tree(t, std::span<const double>(v));
}

Eigen::VectorXd eval_columns(const ExprTree& t, const Eigen::MatrixXd& X)
{
    const auto& n = t.nodes();
    const Eigen::Index rows = X.rows();
    std::vector<Eigen::VectorXd> st;
    st.reserve(8);
    for (std::size_t k = n.size(); k-- > 0;) {
        const Node& nd = n[k];
        switch (arity(nd.op)) {
        case 0: {
            Eigen::VectorXd v(rows);
            if (nd.op == Op::Var) {
                if (nd.var >= X.cols())
                    throw ParameterError(fmt::format("feature x{} not supplied", nd.var + 1));
                for (Eigen::Index r = 0; r < rows; ++r)
                    v[r] = clamp_value(X(r, nd.var));
            } else {
                v.setConstant(clamp_value(nd.value));
            }
            st.push_back(std::move(v));
            break;
        }
        case 1: {
            auto& a = st.back();
            for (Eigen::Index r = 0; r < rows; ++r)
                a[r] = apply_op(nd.op, a[r]);
            break;
        }
        default: {
            Eigen::VectorXd a = std::move(st.back());
            st.pop_back();
            auto& b = st.back();
            for (Eigen::Index r = 0; r < rows; ++r)
                b[r] = apply_op(nd.op, a[r], b[r]);
        }
        }
    }
    return std::move(st.back());
}

// ---- text ----

namespace {

const char* fn_name(Op op)
{
    switch (op) {
    case Op::Sqrt: return "psqrt";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tanh: return "tanh";
    case Op::Log: return "plog";
    case Op::Exp: return "exp";
    case Op::Square: return "square";
    default: return "?";
    }
}

std::size_t print_node(const ExprTree& t, std::size_t i, std::string& out)
{
    const Node& n = t.nodes()[i];
    switch (n.op) {
    case Op::Const:
        out += fmt::format("{}", n.value);
        return i + 1;
    case Op::Var:
        out += fmt::format("x{}", n.var + 1);
        return i + 1;
    case Op::Div: {
        out += "pdiv(";
        std::size_t j = print_node(t, i + 1, out);
        out += ", ";
        j = print_node(t, j, out);
        out += ")";
        return j;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
        out += "(";
        std::size_t j = print_node(t, i + 1, out);
        out += n.op == Op::Add ? " + " : n.op == Op::Sub ? " - " : " * ";
        j = print_node(t, j, out);
        out += ")";
        return j;
    }
    case Op::Neg: {
        out += "(-";
        std::size_t j = print_node(t, i + 1, out);
        out += ")";
        return j;
    }
    default: {
        out += fn_name(n.op);
        out += "(";
        std::size_t j = print_node(t, i + 1, out);
        out += ")";
        return j;
    }
    }
}

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    ExprTree parse()
    {
        ExprTree t = expr();
        skip();
        if (p_ != s_.size())
            fail("unexpected trailing input");
        return t;
    }

private:
    const std::string& s_;
    std::size_t p_ = 0;

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ParameterError(fmt::format("parse error at {}: {} in '{}'", p_, what, s_));
    }

    void skip()
    {
        while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_])))
            ++p_;
    }

    bool eat(char c)
    {
        skip();
        if (p_ < s_.size() && s_[p_] == c) {
            ++p_;
            return true;
        }
        return false;
    }

    bool number_ahead()
    {
        skip();
        return p_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[p_])) || s_[p_] == '.');
    }

    ExprTree expr()
    {
        ExprTree t = term();
        for (;;) {
            if (eat('+'))
                t = ExprTree::binary(Op::Add, t, term());
            else if (eat('-'))
                t = ExprTree::binary(Op::Sub, t, term());
            else
                return t;
        }
    }

    ExprTree term()
    {
        ExprTree t = unary();
        for (;;) {
            if (eat('*'))
                t = ExprTree::binary(Op::Mul, t, unary());
            else if (eat('/'))
                t = ExprTree::binary(Op::Div, t, unary());
            else
                return t;
        }
    }

    ExprTree unary()
    {
        if (eat('-')) {
            if (number_ahead()) {
                ExprTree t = power();
                if (t.size() == 1 && t.nodes()[0].op == Op::Const)
                    return ExprTree::constant(-t.nodes()[0].value);
                return ExprTree::unary(Op::Neg, t);
            }
            return ExprTree::unary(Op::Neg, unary());
        }
        eat('+');
        return power();
    }

    ExprTree power()
    {
        ExprTree t = primary();
        if (!eat('^'))
            return t;
        skip();
        std::size_t q = p_;
        while (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q])))
            ++q;
        if (q == p_)
            fail("'^' needs an integer exponent");
        int k = std::stoi(s_.substr(p_, q - p_));
        p_ = q;
        switch (k) {
        case 1: return t;
        case 2: return ExprTree::unary(Op::Square, t);
        case 3: return ExprTree::binary(Op::Mul, t, ExprTree::unary(Op::Square, t));
        case 4: return ExprTree::unary(Op::Square, ExprTree::unary(Op::Square, t));
        default: fail("exponent must be 1..4");
        }
    }

    ExprTree primary()
    {
        skip();
        if (p_ >= s_.size())
            fail("unexpected end of input");
        if (eat('(')) {
            ExprTree t = expr();
            if (!eat(')'))
                fail("expected ')'");
            return t;
        }
        if (number_ahead()) {
            const char* b = s_.c_str() + p_;
            char* e = nullptr;
            double v = std::strtod(b, &e);
            if (e == b)
                fail("bad number");
            p_ += static_cast<std::size_t>(e - b);
            return ExprTree::constant(v);
        }
        std::size_t q = p_;
        while (q < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[q])) || s_[q] == '_'))
            ++q;
        if (q == p_)
            fail("expected a term");
        std::string id = s_.substr(p_, q - p_);
        p_ = q;
        if (eat('('))
            return call(id);
        return ident(id);
    }

    ExprTree ident(const std::string& id)
    {
        if (id == "K")
            return ExprTree::variable(0);
        if (id == "tau_max" || id == "tmax")
            return ExprTree::variable(1);
        if (id == "tau_min" || id == "tmin")
            return ExprTree::variable(2);
        if (id == "L")
            return ExprTree::variable(3);
        if (id.size() >= 2 && id[0] == 'x' &&
            std::all_of(id.begin() + 1, id.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            int k = std::stoi(id.substr(1));
            if (k < 1 || k > kFeatures)
                fail("feature index out of range x1..x" + std::to_string(kFeatures));
            return ExprTree::variable(k - 1);
        }
        fail("unknown identifier '" + id + "'");
    }

    ExprTree call(const std::string& id)
    {
        if (id == "pdiv") {
            ExprTree a = expr();
            if (!eat(','))
                fail("pdiv needs two arguments");
            ExprTree b = expr();
            if (!eat(')'))
                fail("expected ')'");
            return ExprTree::binary(Op::Div, a, b);
        }
        Op op;
        if (id == "psqrt" || id == "sqrt")
            op = Op::Sqrt;
        else if (id == "plog" || id == "log" || id == "ln")
            op = Op::Log;
        else if (id == "sin")
            op = Op::Sin;
        else if (id == "cos")
            op = Op::Cos;
        else if (id == "tanh")
            op = Op::Tanh;
        else if (id == "exp")
            op = Op::Exp;
        else if (id == "square")
            op = Op::Square;
        else if (id == "neg")
            op = Op::Neg;
        else
            fail("unknown function '" + id + "'");
        ExprTree a = expr();
        if (!eat(')'))
            fail("expected ')'");
        return ExprTree::unary(op, a);
    }
};

}  // namespace

std::string expr_to_text(const ExprTree& t)
{
    std::string out;
    print_node(t, 0, out);
    return out;
}

ExprTree parse_expr(const std::string& text)
{
    return Parser(text).parse();
}

// ---- multigene models ----

double MultiGeneModel::predict(std::span<const double> x) const
{
    double r = bias;
    for (std::size_t g = 0; g < genes.size(); ++g)
        r += weights[g] * eval_tree(genes[g], x);
    return r;
}

Eigen::VectorXd MultiGeneModel::predict(const Eigen::MatrixXd& X) const
{
    Eigen::VectorXd r = Eigen::VectorXd::Constant(X.rows(), bias);
    for (std::size_t g = 0; g < genes.size(); ++g)
        r += weights[g] * eval_columns(genes[g], X);
    return r;
}

std::string MultiGeneModel::to_text() const
{
    std::string s = fmt::format("{}", bias);
    for (std::size_t g = 0; g < genes.size(); ++g)
        s += fmt::format(" + {} * {}", weights[g], expr_to_text(genes[g]));
    return s;
}

int node_count(const MultiGeneModel& m)
{
    int n = 0;
    for (const auto& g : m.genes)
        n += node_count(g);
    return n;
}

LinearFit fit_columns(const Eigen::MatrixXd& G, const Eigen::VectorXd& y)
{
    const Eigen::Index n = G.rows(), m = G.cols() + 1;
    if (n < 1 || y.size() != n)
        throw ParameterError("fit_gene_weights: need matching, nonempty samples");
    Eigen::MatrixXd A(n, m);
    A.col(0).setOnes();
    A.rightCols(m - 1) = G;
    Eigen::MatrixXd M = A.transpose() * A;
    Eigen::VectorXd rhs = A.transpose() * y;

    LinearFit fit;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (n < m || qr.rank() < m) {
        fit.ridge = true;
        double scale = M.diagonal().mean();
        M.diagonal().array() += 1e-8 * (scale > 0 ? scale : 1.0);
    }
    Eigen::VectorXd w = M.ldlt().solve(rhs);
    fit.bias = w[0];
    fit.weights.assign(w.data() + 1, w.data() + m);
    return fit;
}

LinearFit fit_gene_weights(const std::vector<ExprTree>& genes, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    Eigen::MatrixXd G(X.rows(), static_cast<Eigen::Index>(genes.size()));
    for (std::size_t g = 0; g < genes.size(); ++g)
        G.col(static_cast<Eigen::Index>(g)) = eval_columns(genes[g], X);
    return fit_columns(G, y);
}

// ---- archive ----

bool ParetoArchive::offer(int nodes, double mae, const MultiGeneModel& m)
{
    if (!std::isfinite(mae))
        return false;
    for (const auto& e : entries_)
        if (e.node_count <= nodes && e.mae <= mae)
            return false;
    std::erase_if(entries_, [&](const ParetoEntry& e) { return e.node_count >= nodes && e.mae >= mae; });
    auto it = std::lower_bound(entries_.begin(), entries_.end(), nodes,
                               [](const ParetoEntry& e, int n) { return e.node_count < n; });
    entries_.insert(it, ParetoEntry{nodes, mae, m});
    return true;
}

// ---- operators ----

void GPConfig::validate() const
{
    if (pop_size < 2 || tournament_size < 1 || max_depth < 1 || init_max_depth < 1 || max_genes < 1)
        throw ParameterError("GPConfig: sizes must be positive (pop >= 2)");
    for (double p : {p_crossover, p_mutation, p_reproduction, p_highlevel_xover, p_lowlevel_xover, p_subtree_mutation,
                     p_constant})
        if (!(p >= 0 && p <= 1))
            throw ParameterError("GPConfig: probabilities must lie in [0, 1]");
    if (std::abs(p_crossover + p_mutation + p_reproduction - 1.0) > 1e-9)
        throw ParameterError("GPConfig: crossover + mutation + reproduction must sum to 1");
    if (!(const_lo < const_hi))
        throw ParameterError("GPConfig: const_lo < const_hi required");
    if (elite_count < 0 || elite_count >= pop_size)
        throw ParameterError("GPConfig: 0 <= elite_count < pop_size");
    if (generations < 0 || n_features < 1)
        throw ParameterError("GPConfig: generations >= 0, n_features >= 1");
    if (functions.empty())
        throw ParameterError("GPConfig: empty function set");
    for (Op f : functions)
        if (arity(f) == 0)
            throw ParameterError("GPConfig: function set holds a terminal");
}

namespace {

double uniform(std::mt19937_64& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::size_t pick(std::size_t n, std::mt19937_64& rng)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Node random_terminal(const GPConfig& cfg, std::mt19937_64& rng)
{
    if (uniform(rng) < cfg.p_constant)
        return Node{Op::Const, 0, std::uniform_real_distribution<double>(cfg.const_lo, cfg.const_hi)(rng)};
    return Node{Op::Var, static_cast<int>(pick(static_cast<std::size_t>(cfg.n_features), rng)), 0.0};
}

void grow(std::vector<Node>& out, int depth_left, bool full, const GPConfig& cfg, std::mt19937_64& rng)
{
    // grow: a terminal with probability 0.3 above the depth limit
    if (depth_left <= 1 || (!full && uniform(rng) < 0.3)) {
        out.push_back(random_terminal(cfg, rng));
        return;
    }
    Op op = cfg.functions[pick(cfg.functions.size(), rng)];
    out.push_back(Node{op, 0, 0.0});
    for (int k = 0; k < arity(op); ++k)
        grow(out, depth_left - 1, full, cfg, rng);
}

std::size_t copy_trimmed(const std::vector<Node>& in, std::size_t i, int depth, int max_depth, std::vector<Node>& out,
                         const GPConfig& cfg, std::mt19937_64& rng, const ExprTree& t)
{
    const Node& n = in[i];
    if (depth >= max_depth && arity(n.op) > 0) {
        out.push_back(random_terminal(cfg, rng));
        return t.subtree_end(i);
    }
    out.push_back(n);
    std::size_t j = i + 1;
    for (int k = 0; k < arity(n.op); ++k)
        j = copy_trimmed(in, j, depth + 1, max_depth, out, cfg, rng, t);
    return j;
}

}  // namespace

ExprTree random_tree(int max_depth, bool full, const GPConfig& cfg, std::mt19937_64& rng)
{
    if (max_depth < 1)
        throw ParameterError("random_tree: depth must be >= 1");
    std::vector<Node> n;
    grow(n, max_depth, full, cfg, rng);
    return ExprTree(std::move(n));
}

ExprTree trim_depth(const ExprTree& t, int max_depth, const GPConfig& cfg, std::mt19937_64& rng)
{
    if (t.depth() <= max_depth)
        return t;
    std::vector<Node> out;
    copy_trimmed(t.nodes(), 0, 1, max_depth, out, cfg, rng, t);
    return ExprTree(std::move(out));
}

std::pair<ExprTree, ExprTree> subtree_crossover_at(const ExprTree& a, std::size_t ia, const ExprTree& b,
                                                   std::size_t ib, const GPConfig& cfg, std::mt19937_64& rng)
{
    ExprTree ca = a.replaced(ia, b.subtree(ib));
    ExprTree cb = b.replaced(ib, a.subtree(ia));
    return {trim_depth(ca, cfg.max_depth, cfg, rng), trim_depth(cb, cfg.max_depth, cfg, rng)};
}

std::pair<ExprTree, ExprTree> subtree_crossover(const ExprTree& a, const ExprTree& b, const GPConfig& cfg,
                                                std::mt19937_64& rng)
{
    std::size_t ia = pick(a.size(), rng);
    std::size_t ib = pick(b.size(), rng);
    return subtree_crossover_at(a, ia, b, ib, cfg, rng);
}

ExprTree subtree_mutate(const ExprTree& a, const GPConfig& cfg, std::mt19937_64& rng)
{
    std::size_t i = pick(a.size(), rng);
    int budget = std::max(1, cfg.max_depth - a.depth_at(i) + 1);
    int d = 1 + static_cast<int>(pick(static_cast<std::size_t>(std::min(budget, cfg.init_max_depth)), rng));
    bool full = uniform(rng) < 0.5;
    return trim_depth(a.replaced(i, random_tree(d, full, cfg, rng)), cfg.max_depth, cfg, rng);
}

std::size_t tournament_select(const std::vector<Scored>& pop, int k, std::mt19937_64& rng)
{
    if (pop.empty())
        throw ParameterError("tournament on an empty population");
    std::size_t best = pick(pop.size(), rng);
    for (int r = 1; r < k; ++r) {
        std::size_t c = pick(pop.size(), rng);
        const auto &x = pop[c], &y = pop[best];
        if (x.mae < y.mae || (x.mae == y.mae && x.nodes < y.nodes))
            best = c;
    }
    return best;
}

// ---- evolution ----

namespace {

struct Individual {
    std::vector<ExprTree> genes;
    LinearFit fit;
    double mae = std::numeric_limits<double>::infinity();
    int nodes = 0;
    bool evaluated = false;
};

void evaluate(Individual& ind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    ind.nodes = 0;
    for (const auto& g : ind.genes)
        ind.nodes += node_count(g);
    Eigen::MatrixXd G(X.rows(), static_cast<Eigen::Index>(ind.genes.size()));
    for (std::size_t g = 0; g < ind.genes.size(); ++g)
        G.col(static_cast<Eigen::Index>(g)) = eval_columns(ind.genes[g], X);
    ind.fit = fit_columns(G, y);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(ind.fit.weights.data(),
                                                          static_cast<Eigen::Index>(ind.fit.weights.size()));
    Eigen::VectorXd pred = (G * w).array() + ind.fit.bias;
    double mae = (pred - y).cwiseAbs().mean();
    ind.mae = std::isfinite(mae) ? mae : std::numeric_limits<double>::infinity();
    ind.evaluated = true;
}

MultiGeneModel to_model(const Individual& ind)
{
    return {ind.genes, ind.fit.weights, ind.fit.bias};
}

bool better(const Individual& a, const Individual& b)
{
    return a.mae < b.mae || (a.mae == b.mae && a.nodes < b.nodes);
}

ExprTree jitter_constant(const ExprTree& t, const GPConfig& cfg, std::mt19937_64& rng)
{
    std::vector<std::size_t> consts;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t.nodes()[i].op == Op::Const)
            consts.push_back(i);
    if (consts.empty())
        return subtree_mutate(t, cfg, rng);
    std::vector<Node> n = t.nodes();
    n[consts[pick(consts.size(), rng)]].value += std::normal_distribution<double>(0.0, cfg.const_jitter)(rng);
    return ExprTree(std::move(n));
}

// two-point exchange of whole gene runs
std::pair<std::vector<ExprTree>, std::vector<ExprTree>> highlevel_crossover(const std::vector<ExprTree>& a,
                                                                            const std::vector<ExprTree>& b,
                                                                            int max_genes, std::mt19937_64& rng)
{
    auto cut = [&](std::size_t n) {
        std::size_t i = pick(n + 1, rng), j = pick(n + 1, rng);
        return std::make_pair(std::min(i, j), std::max(i, j));
    };
    auto [a1, a2] = cut(a.size());
    auto [b1, b2] = cut(b.size());
    std::vector<ExprTree> ca(a.begin(), a.begin() + a1), cb(b.begin(), b.begin() + b1);
    ca.insert(ca.end(), b.begin() + b1, b.begin() + b2);
    ca.insert(ca.end(), a.begin() + a2, a.end());
    cb.insert(cb.end(), a.begin() + a1, a.begin() + a2);
    cb.insert(cb.end(), b.begin() + b2, b.end());
    if (ca.empty())
        ca.push_back(a.front());
    if (cb.empty())
        cb.push_back(b.front());
    if (static_cast<int>(ca.size()) > max_genes)
        ca.resize(max_genes);
    if (static_cast<int>(cb.size()) > max_genes)
        cb.resize(max_genes);
    return {std::move(ca), std::move(cb)};
}

}  // namespace

GPResult run_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPConfig& cfg_in, Mode mode)
{
    cfg_in.validate();
    if (X.rows() < 2 || X.rows() != y.size())
        throw ParameterError("run_gp: need >= 2 samples with matching targets");
    if (X.cols() < cfg_in.n_features)
        throw ParameterError("run_gp: X has fewer columns than n_features");
    GPConfig cfg = cfg_in;
    const int max_genes = mode == Mode::single_gene ? 1 : cfg.max_genes;
    const auto P = static_cast<std::size_t>(cfg.pop_size);

    std::vector<Individual> pop(P);
    for (std::size_t i = 0; i < P; ++i) {
        auto rng = make_stream(cfg.seed, 0, i);
        int ng = 1 + static_cast<int>(pick(static_cast<std::size_t>(max_genes), rng));
        for (int g = 0; g < ng; ++g) {
            // ramped half-and-half
            int d = 2 + static_cast<int>(pick(static_cast<std::size_t>(std::max(1, cfg.init_max_depth - 1)), rng));
            pop[i].genes.push_back(random_tree(std::min(d, cfg.max_depth), uniform(rng) < 0.5, cfg, rng));
        }
    }

    GPResult res;
    ParetoArchive archive;
    for (int gen = 0;; ++gen) {
        for (auto& ind : pop)
            if (!ind.evaluated)
                evaluate(ind, X, y);
        for (const auto& ind : pop)
            archive.offer(ind.nodes, ind.mae, to_model(ind));

        std::vector<std::size_t> order(P);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return better(pop[a], pop[b]); });
        const Individual& best = pop[order[0]];
        res.history.push_back(best.mae);
        if (gen >= cfg.generations || best.mae <= cfg.target_mae)
            break;

        std::vector<Scored> scored(P);
        for (std::size_t i = 0; i < P; ++i)
            scored[i] = {pop[i].mae, pop[i].nodes};

        std::vector<Individual> next;
        next.reserve(P);
        for (int e = 0; e < cfg.elite_count; ++e)
            next.push_back(pop[order[e]]);
        std::uint64_t slot = 0;
        while (next.size() < P) {
            auto rng = make_stream(cfg.seed, static_cast<std::uint64_t>(gen) + 1, slot++);
            double r = uniform(rng);
            if (r < cfg.p_crossover) {
                const auto& pa = pop[tournament_select(scored, cfg.tournament_size, rng)];
                const auto& pb = pop[tournament_select(scored, cfg.tournament_size, rng)];
                Individual ca, cb;
                if (max_genes > 1 && uniform(rng) < cfg.p_highlevel_xover) {
                    std::tie(ca.genes, cb.genes) = highlevel_crossover(pa.genes, pb.genes, max_genes, rng);
                } else {
                    ca.genes = pa.genes;
                    cb.genes = pb.genes;
                    std::size_t ga = pick(ca.genes.size(), rng), gb = pick(cb.genes.size(), rng);
                    std::tie(ca.genes[ga], cb.genes[gb]) = subtree_crossover(pa.genes[ga], pb.genes[gb], cfg, rng);
                }
                next.push_back(std::move(ca));
                if (next.size() < P)
                    next.push_back(std::move(cb));
            } else if (r < cfg.p_crossover + cfg.p_mutation) {
                Individual c;
                c.genes = pop[tournament_select(scored, cfg.tournament_size, rng)].genes;
                std::size_t g = pick(c.genes.size(), rng);
                c.genes[g] = uniform(rng) < cfg.p_subtree_mutation ? subtree_mutate(c.genes[g], cfg, rng)
                                                                   : jitter_constant(c.genes[g], cfg, rng);
                next.push_back(std::move(c));
            } else {
                next.push_back(pop[tournament_select(scored, cfg.tournament_size, rng)]);
            }
        }
        pop = std::move(next);
    }

    const Individual* best = &pop[0];
    for (const auto& ind : pop)
        if (better(ind, *best))
            best = &ind;
    res.best = to_model(*best);
    res.mae = best->mae;
    res.pareto = archive.entries();
    return res;
}

}  // namespace fractune::gp
